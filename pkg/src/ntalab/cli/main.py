"""Command line entry point.

Exit codes: 0 every verdict passed, 1 usage, config or domain error,
2 some verdict failed, 3 no failures but something was inconclusive.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..geometry.mesh import DomainError, MeshError
from ..lipschitz.patch import ConstructionError
from ..zoo import KINDS, MeshFormatError
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .report import EXIT_ERROR, run


def _domain_from_args(a) -> dict:
    if getattr(a, "mesh", None):
        return {"kind": "file", "path": a.mesh}
    d = {"kind": a.kind}
    for k in ("resolution", "level", "slope"):
        v = getattr(a, k, None)
        if v is not None:
            d[k] = v
    return d


def _common(p, seed=True, mesh=True):
    if mesh:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--mesh", help="mesh file (MESH text or OBJ)")
        g.add_argument("--kind", choices=KINDS, default=None, help="generated domain instead of a file")
        p.add_argument("--resolution", type=int)
        p.add_argument("--level", type=int)
        p.add_argument("--slope", type=float)
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report path (JSON); tables and figures are written beside it")
    p.add_argument("--outdir", default=".", help="directory for hash-named outputs when --out is absent")
    p.add_argument("--workers", type=int, default=1)


def _point(text):
    t = text.strip()
    return [float(v) for v in t.split(",")] if "," in t else int(t)


def _pole(text):
    return "auto" if text == "auto" else [float(v) for v in text.split(",")]


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ntalab", description="Corkscrew domains, Lipschitz patches and harmonic measure.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from an INI config")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--reuse", action="store_true", help="return an existing report with the same config hash")

    p = sub.add_parser("generate", help="write a domain mesh")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--resolution", type=int)
    p.add_argument("--level", type=int)
    p.add_argument("--slope", type=float)
    p.add_argument("--out", required=True, help="mesh file to write")

    p = sub.add_parser("schedule", help="print every constant of the parameter schedule")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--rounds", choices=("auto", "yes", "no"), default="auto")
    p.add_argument("--out")
    p.add_argument("--outdir", default=".")

    p = sub.add_parser("verify-corkscrew", help="sample corkscrew witnesses")
    _common(p)
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--budget", type=int, default=200)

    p = sub.add_parser("approximate", help="build the Lipschitz patch at a boundary point")
    _common(p, seed=False)
    p.add_argument("--Q", type=_point, required=True, help="vertex index or comma-separated coordinates")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--h", default="h0")
    p.add_argument("--gamma", type=float, default=4.0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=16)
    p.add_argument("--no-stars", action="store_true")
    p.add_argument("--no-maximal", action="store_true")
    p.add_argument("--svg", help="path for the patch figure")

    p = sub.add_parser("wos", help="walk-on-spheres harmonic measure estimate")
    _common(p)
    p.add_argument("--pole", type=_pole, default="auto")
    p.add_argument("--walks", type=float, default=1e5)
    p.add_argument("--shell", type=float, default=1e-4)
    p.add_argument("--cells", type=int, default=64)
    p.add_argument("--partition", default="auto", choices=("auto", "element", "angle", "order", "grid", "face"))

    p = sub.add_parser("ainfty", help="shrinking-scale implication tests")
    _common(p)
    p.add_argument("--Q", type=_point, required=True)
    p.add_argument("--scales", type=_floats, required=True)
    p.add_argument("--pole", type=_pole, default="auto")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--walks", type=float, default=1e5)
    p.add_argument("--shell", type=float, default=1e-4)
    p.add_argument("--cells", type=int, default=32)
    p.add_argument("--gamma", type=float, default=0.0)

    p = sub.add_parser("localize", help="localization ratio near a boundary point")
    _common(p)
    p.add_argument("--Q", type=_point, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--X0", type=_pole, default="auto")
    p.add_argument("--walks", type=float, default=1e5)
    p.add_argument("--cells", type=int, default=8)

    p = sub.add_parser("dimension", help="information dimension of harmonic measure")
    _common(p)
    p.add_argument("--pole", type=_pole, default="auto")
    p.add_argument("--walks", type=float, default=1e5)
    p.add_argument("--shell", type=float, default=1e-4)
    p.add_argument("--boot", type=int, default=200)
    p.add_argument("--no-box", action="store_true", help="skip the boundary box dimension")

    p = sub.add_parser("density-sweep", help="surface density of prefractals across levels and radii")
    p.add_argument("--family", default="koch_curve", choices=("koch_curve", "quadratic_koch_surface"))
    p.add_argument("--levels", default="0..6")
    p.add_argument("--scales", type=_floats, default=[])
    p.add_argument("--tolerance", type=float, default=0.03)
    p.add_argument("--resolution-factor", type=float, default=10.0)
    p.add_argument("--out")
    p.add_argument("--outdir", default=".")
    return ap


def config_from_args(a) -> ExperimentConfig:
    """Translate a subcommand invocation into the same config a file would give."""
    c = a.command
    lines = ["[experiment]", f"name = {c}", f"out = {getattr(a, 'outdir', '.')}", ""]
    dom = None
    if c in ("verify-corkscrew", "approximate", "wos", "ainfty", "localize", "dimension", "generate"):
        if not getattr(a, "mesh", None) and not a.kind:
            raise ConfigError("give --mesh or --kind")
        dom = _domain_from_args(a)
        lines += ["[domain]"] + [f"{k} = {v}" for k, v in dom.items()] + [""]

    def fmt(v):
        if isinstance(v, list):
            return ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, float):
            return repr(int(v)) if v.is_integer() and abs(v) >= 1 else repr(v)
        return str(v)

    keys = {
        "generate": [],
        "schedule": ["n", "M", "gamma", "eps", "rounds"],
        "verify-corkscrew": ["M", "R", "budget", "seed", "workers"],
        "approximate": ["Q", "r", "M", "h", "gamma", "eps", "samples", "workers"],
        "wos": ["pole", "walks", "shell", "cells", "partition", "seed", "workers"],
        "ainfty": ["Q", "scales", "pole", "delta", "trials", "walks", "shell", "cells", "gamma", "seed", "workers"],
        "localize": ["Q", "r", "X0", "walks", "cells", "seed", "workers"],
        "dimension": ["pole", "walks", "shell", "boot", "seed", "workers"],
        "density-sweep": ["family", "levels", "scales", "tolerance", "resolution_factor"],
    }[c]
    body = [f"{k} = {fmt(getattr(a, k))}" for k in keys]
    if c == "approximate":
        body += [f"stars = {fmt(not a.no_stars)}", f"maximal = {fmt(not a.no_maximal)}"]
    if c == "dimension":
        body.append(f"compare_box = {fmt(not a.no_box)}")
    if body:
        lines += [f"[{c}]"] + body
    return parse_config("\n".join(lines) + "\n", f"<{c} arguments>")


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        if a.command == "run":
            cfg = load_config(a.config)
            rep = run(cfg, a.out, force=not a.reuse)
        else:
            cfg = config_from_args(a)
            if a.command == "generate":
                from .pipelines import load_domain
                from ..zoo import save_mesh
                save_mesh(load_domain(cfg), a.out)
                print(f"wrote {a.out}")
                return 0
            rep = run(cfg, a.out, svg_path=getattr(a, "svg", None))
    except (ConfigError, DomainError, MeshError, MeshFormatError, ConstructionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for v in rep.verdicts:
        print(f"[{v['status'].upper():12s}] {v['invariant']}" + (f"  ({v['detail']})" if v["detail"] else ""))
    path = a.out or str(Path(cfg.out) / f"{cfg.experiment}-{cfg.digest()}.json")
    print(f"status: {rep.status}; report: {path}")
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
