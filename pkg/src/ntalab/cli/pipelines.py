"""One function per experiment: config in, payload + verdicts + tables + figures out."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import zoo
from ..corkscrew import find_corkscrew_point, verify_corkscrew
from ..geometry.mesh import BoundaryMesh, DomainError
from ..harmonic import (ainfty_shrinking_check, box_dimension, density_blowup_sweep, localization_check,
                        measure_dimension, separation_confidence, walk_on_spheres)
from ..harmonic.wos import auto_pole, make_partition
from ..lipschitz import build_patch, maximal_diagnostics, parameter_schedule, star_cells
from . import svg
from .config import ConfigError, ExperimentConfig

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Result:
    payload: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)   # name -> list of row dicts (written as CSV)
    figures: dict = field(default_factory=dict)  # name -> SVG text
    mesh_text: str | None = None

    def verdict(self, invariant: str, status: str, detail: str = ""):
        self.verdicts.append({"invariant": invariant, "status": status, "detail": detail})


def resolve_point(mesh: BoundaryMesh, q, what: str = "Q") -> np.ndarray:
    """A vertex index or coordinates snapped to the boundary (within 1e-6 of the diameter)."""
    if isinstance(q, int):
        if not 0 <= q < len(mesh.vertices):
            raise ConfigError(f"{what}: vertex index {q} out of range 0..{len(mesh.vertices) - 1}")
        return np.array(mesh.vertices[q], float)
    p = np.asarray(q, float)
    if p.shape != (mesh.dim,):
        raise ConfigError(f"{what}: expected {mesh.dim} coordinates")
    d, _, cp, _ = mesh.nearest(p[None, :])
    if d[0] > 1e-6 * mesh.diameter:
        raise DomainError(f"{what} = {p.tolist()} is {d[0]:.3g} away from the boundary")
    return cp[0]


def _pole(mesh, p):
    return auto_pole(mesh) if p == "auto" else np.asarray(p, float)


def run_generate(cfg: ExperimentConfig, mesh: BoundaryMesh) -> Result:
    res = Result(payload={"dim": mesh.dim, "vertices": int(len(mesh.vertices)), "elements": mesh.n_elements,
                          "total_measure": mesh.total_measure, "element_scale": mesh.element_scale})
    res.mesh_text = zoo.mesh_text(mesh)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res.figures["mesh"] = svg.mesh_svg(mesh)
    return res


def run_schedule(cfg: ExperimentConfig, mesh=None) -> Result:
    p = cfg.params
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sch = parameter_schedule(p["n"], p["M"], p["gamma"], p["eps"])
    rounds = p["rounds"]
    if rounds not in ("auto", "yes", "no"):
        raise ConfigError("[schedule] rounds: expected auto, yes or no")
    with_rounds = rounds == "yes" or (rounds == "auto" and p["n"] == 2)
    res = Result(payload=sch.as_dict(with_rounds=with_rounds))
    if not with_rounds:
        res.payload["R_rounds"] = {"skipped": "the number of rounds needs a logarithm at millions of bits; "
                                              "set rounds = yes to compute it"}
    res.payload["warnings"] = [str(w.message) for w in caught]
    res.verdict("final slope comes from h2 (C1 exceeds alpha*zeta and h0)",
                PASS if sch.h_final_source == "h2" else FAIL)
    res.verdict("gamma is at least the lower density bound beta",
                PASS if sch.gamma >= sch.beta else INCONCLUSIVE,
                "" if sch.gamma >= sch.beta else "premise is vacuous: no boundary has density below beta")
    return res


def run_corkscrew(cfg: ExperimentConfig, mesh: BoundaryMesh) -> Result:
    p = cfg.params
    rep = verify_corkscrew(mesh, p["M"], p["R"], p["budget"], p["seed"], workers=p["workers"])
    res = Result(payload={k: v for k, v in rep.to_dict().items() if k != "samples"})
    res.payload["n_samples"] = len(rep.samples)
    res.tables["samples"] = [{k: (v if not isinstance(v, list) else " ".join(map(repr, v))) for k, v in s.items()}
                             for s in rep.samples]
    res.verdict(f"every sampled (Q, r) has interior and exterior witnesses with clearance > r/M (M = {p['M']:g})",
                FAIL if rep.failures else PASS, f"{len(rep.failures)} failures; measured M {rep.M_measured:.4g}")
    return res


def run_approximate(cfg: ExperimentConfig, mesh: BoundaryMesh) -> Result:
    p = cfg.params
    Q = resolve_point(mesh, p["Q"])
    n = mesh.dim
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sch = parameter_schedule(n, p["M"], p["gamma"], p["eps"])
    if p["h"] == "h0":
        h = float(sch.h0)
    else:
        try:
            h = float(p["h"])
        except ValueError:
            raise ConfigError("[approximate] h: expected a number or h0") from None
    patch = build_patch(mesh, Q, p["r"], p["M"], h, samples_per_piece=p["samples"], workers=p["workers"])
    summ = patch.summary()
    r = p["r"]
    res = Result(payload={"Q": Q.tolist(), "r": r, "M": p["M"], "h": h, "patch": summ})
    psi = float(sch.psi)
    need = psi * r ** (n - 1)
    res.verdict("sigma(T_Gamma) >= psi r^(n-1)", PASS if patch.common_measure >= need else FAIL,
                f"{patch.common_measure:.6g} vs {need:.6g}")
    proj = summ.get("proj_T", math.nan)
    need_p = (r / (4 * p["M"])) ** (n - 1)
    res.verdict("projected measure of T >= (r/4M)^(n-1)", PASS if proj >= need_p else FAIL,
                f"{proj:.6g} vs {need_p:.6g}")
    depth = summ.get("omega_outside_depth", 0.0)
    res_depth = summ.get("resolution_depth", math.inf)
    res.verdict("Omega_L lies in the domain up to the sampling resolution",
                PASS if depth <= res_depth else FAIL,
                f"{summ.get('omega_outside_domain', 0)} vertices outside, depth {depth:.3g} "
                f"(resolution {res_depth:.3g})")
    res.verdict("Omega_L lies in B(Q, r)", PASS if summ.get("omega_outside_ball", 0) == 0 else FAIL)
    lip_tol = 1e-9 * max(1.0, h)
    res.verdict("graph is h-Lipschitz", PASS if summ["lipschitz_excess_G"] <= lip_tol else FAIL,
                f"excess {summ['lipschitz_excess_G']:.3g}")
    res.verdict("T_Gamma lies in T_E", PASS if summ["T_Gamma_in_T_E"] else FAIL)
    if p["stars"]:
        cover = star_cells(patch, max_cells=20000)
        cs = cover.summary()
        res.payload["star_cells"] = cs
        bad = sum(v for k, v in cs.items() if k.startswith("violations_"))
        res.verdict("star cells: angle bound and inclusion radii hold at every boundary sample",
                    PASS if bad == 0 else FAIL, f"{bad} violations over {cs['graph_cells']} graph cells")
    if p["maximal"]:
        md = maximal_diagnostics(mesh, patch.frame, sch, T=patch.T, T_E=patch.T_E, workers=p["workers"])
        ms = md.summary()
        res.payload["maximal"] = ms
        res.verdict("raster mass of {H >= N} is within the weak-type bound", PASS if md.passed else FAIL,
                    f"{md.lambda_mass:.4g} vs {md.bound:.4g}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # 3D patches are drawn as a section; noted in the payload
        res.figures["patch"] = svg.patch_svg(mesh, patch)
    if n == 3:
        res.payload["figure_note"] = "3D patch drawn in the (x1, height) plane"
    return res


def run_wos(cfg: ExperimentConfig, mesh: BoundaryMesh) -> Result:
    p = cfg.params
    pole = _pole(mesh, p["pole"])
    part = make_partition(mesh, p["partition"], p["cells"])
    est = walk_on_spheres(mesh, pole, part, p["walks"], p["shell"], p["seed"], workers=p["workers"])
    res = Result(payload=est.to_dict())
    res.tables["cells"] = [{"cell": i, "sigma": float(est.partition.sigma[i]), "count": int(c),
                            "probability": float(est.probabilities[i]), "std_err": float(est.std_err[i])}
                           for i, c in enumerate(est.counts)]
    res.verdict("probabilities sum to one", PASS if int(est.counts.sum()) == est.n_walks else FAIL)
    res.verdict("no walk reached the step cap", PASS if est.truncated == 0 else INCONCLUSIVE,
                f"{est.truncated} truncated")
    return res


def run_ainfty(cfg: ExperimentConfig, mesh: BoundaryMesh) -> Result:
    p = cfg.params
    Q = resolve_point(mesh, p["Q"])
    pole = _pole(mesh, p["pole"])
    rep = ainfty_shrinking_check(mesh, Q, p["scales"], pole, p["delta"], p["trials"], p["seed"],
                                 n_walks=p["walks"], cells=p["cells"], gamma=p["gamma"] or None,
                                 shell=p["shell"], workers=p["workers"])
    res = Result(payload={"Q": Q.tolist(), "delta": rep.delta, "eps": rep.eps, "n_walks": rep.n_walks,
                          "pole": rep.pole, "violations": rep.violations, "status": rep.status})
    res.tables["scales"] = rep.table()
    for row in rep.rows:
        res.verdict(f"r = {row.r:g}: omega(E) <= delta omega(D) implies sigma(E) <= (1-delta) sigma(D), and "
                    "sigma(E) <= delta sigma(D) implies omega(E) <= (1-delta) omega(D)", row.status,
                    f"{row.fwd_fail + row.rev_fail} violations, {row.inconclusive} undecided of {row.trials}"
                    + ("; noise dominates delta omega(D)" if row.noise_dominated else ""))
        res.verdict(f"r = {row.r:g}: verdicts along nested unions are consistent",
                    PASS if row.chain_consistent else FAIL)
    with np.errstate(divide="ignore"):
        res.figures["density"] = svg.loglog_svg(np.log(1 / np.array([r.r for r in rep.rows])),
                                                np.log([r.omega_delta for r in rep.rows]),
                                                ylabel="log omega(Delta(Q, r))")
    return res


def run_localize(cfg: ExperimentConfig, mesh: BoundaryMesh) -> Result:
    p = cfg.params
    Q = resolve_point(mesh, p["Q"])
    r = p["r"]
    X0 = _pole(mesh, p["X0"])
    a = find_corkscrew_point(mesh, Q, r, "interior").point
    rep = localization_check(mesh, Q, r, X0, a, None, p["walks"], p["seed"], cells=p["cells"], workers=p["workers"])
    res = Result(payload={"Q": Q.tolist(), "r": r, "X0": X0.tolist(), "a": a.tolist(), **rep.summary()})
    res.tables["cells"] = rep.rows
    st = INCONCLUSIVE if rep.inconclusive else (PASS if math.isfinite(rep.C_loc) else FAIL)
    res.verdict("the localized ratio is bounded on cells above the noise floor", st, f"C_loc = {rep.C_loc:.4g}")
    return res


def run_dimension(cfg: ExperimentConfig, mesh: BoundaryMesh) -> Result:
    p = cfg.params
    pole = _pole(mesh, p["pole"])
    est = walk_on_spheres(mesh, pole, "element", p["walks"], p["shell"], p["seed"], workers=p["workers"],
                          record_exits=True)
    d = measure_dimension(est, boot=p["boot"], seed=p["seed"])
    res = Result(payload={"pole": pole.tolist(), "measure": d.summary()})
    res.tables["measure"] = [{"scale": s, "entropy": v, "occupied": o} for s, v, o in zip(d.scales, d.values, d.occupied)]
    res.verdict("enough occupied boxes for an information-dimension fit", INCONCLUSIVE if d.inconclusive else PASS)
    fig = {"measure entropy": (np.log(1 / np.array(d.scales)), np.array(d.values))}
    if p["compare_box"]:
        b = box_dimension(mesh, seed=p["seed"])
        conf = separation_confidence(d, b)
        res.payload["boundary"] = b.summary()
        res.payload["separation_confidence"] = conf
        res.tables["boundary"] = [{"scale": s, "log_count": v} for s, v in zip(b.scales, b.values)]
        fig["boundary log count"] = (np.log(1 / np.array(b.scales)), np.array(b.values))
        res.verdict("measure dimension does not exceed boundary dimension (95% bootstrap)",
                    PASS if conf >= 0.95 or d.ci[1] <= b.ci[0] else INCONCLUSIVE, f"confidence {conf:.3f}")
    res.figures["dimension"] = svg.loglog_svg(None, None, d.dimension, ylabel="entropy / log count", series=fig)
    return res


def run_density_sweep(cfg: ExperimentConfig, mesh=None) -> Result:
    p = cfg.params
    sw = density_blowup_sweep(p["family"], p["levels"], p["scales"] or None,
                              resolution_factor=p["resolution_factor"])
    res = Result(payload={"family": sw.family, "Q": sw.Q, "levels": sw.levels, "scales": sw.scales,
                          "level_slope": sw.level_slope, "level_slopes": sw.level_slopes,
                          "scale_slope": sw.scale_slope, "target": sw.target, "notes": sw.notes})
    res.tables["gamma"] = sw.table()
    if math.isnan(sw.level_slope):
        res.verdict("density grows at the similarity rate as the level increases", INCONCLUSIVE,
                    "no radius resolved at two levels")
    else:
        ok = abs(sw.level_slope - sw.target) <= p["tolerance"]
        res.verdict("density grows at the similarity rate as the level increases", PASS if ok else FAIL,
                    f"slope {sw.level_slope:.4f} vs {sw.target:.4f} +- {p['tolerance']:g}")
    series = {}
    for j, r in enumerate(sw.scales):
        col = sw.gamma[:, j]
        ok = ~np.isnan(col)
        if ok.sum():
            series[f"r={r:.4g}"] = (np.array(sw.levels)[ok] * math.log(3), np.log(col[ok]))
    if series:
        res.figures["sweep"] = svg.loglog_svg(None, None, sw.level_slope, xlabel="log(1/element length)",
                                              ylabel="log sigma(Delta)/r^(n-1)", series=series)
    return res


PIPELINES = {
    "generate": run_generate,
    "schedule": run_schedule,
    "verify-corkscrew": run_corkscrew,
    "approximate": run_approximate,
    "wos": run_wos,
    "ainfty": run_ainfty,
    "localize": run_localize,
    "dimension": run_dimension,
    "density-sweep": run_density_sweep,
}


def load_domain(cfg: ExperimentConfig) -> BoundaryMesh | None:
    spec = cfg.domain_spec()
    return zoo.generate(spec) if spec is not None else None
