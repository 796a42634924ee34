"""Run a configured experiment and persist its report, tables and figures atomically."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .. import __version__
from ..zoo import atomic_write
from .config import ExperimentConfig, parse_config
from .pipelines import FAIL, INCONCLUSIVE, PIPELINES, load_domain

EXIT_PASS, EXIT_ERROR, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def plain(v):
    """JSON-safe copy: numpy scalars and arrays unwrapped, non-finite floats as strings."""
    if isinstance(v, dict):
        return {str(k): plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return plain(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, Fraction):
        return str(v)
    return v


def to_csv(rows: list) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    keys = list(rows[0].keys())
    for r in rows[1:]:
        keys += [k for k in r if k not in keys]
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: plain(r.get(k)) for k in keys})
    return buf.getvalue()


@dataclass
class RunReport:
    config: ExperimentConfig
    result: dict
    verdicts: list
    timings: dict
    artifacts: list = field(default_factory=list)

    @property
    def status(self) -> str:
        st = {v["status"] for v in self.verdicts}
        if FAIL in st:
            return FAIL
        if INCONCLUSIVE in st:
            return INCONCLUSIVE
        return "pass"

    @property
    def exit_code(self) -> int:
        return {FAIL: EXIT_FAIL, INCONCLUSIVE: EXIT_INCONCLUSIVE}.get(self.status, EXIT_PASS)

    def to_dict(self) -> dict:
        return plain({
            "experiment": self.config.experiment, "config": self.config.to_ini(),
            "config_hash": self.config.digest(), "version": __version__, "status": self.status,
            "verdicts": self.verdicts, "result": self.result, "timings": self.timings,
            "artifacts": self.artifacts,
        })


def execute(cfg: ExperimentConfig):
    """Run the pipeline without writing anything; returns (Result, timings)."""
    t0 = time.perf_counter()
    mesh = load_domain(cfg)
    t1 = time.perf_counter()
    res = PIPELINES[cfg.experiment](cfg, mesh)
    t2 = time.perf_counter()
    return res, {"domain_s": round(t1 - t0, 4), "pipeline_s": round(t2 - t1, 4)}


def run(cfg: ExperimentConfig, out: str | Path | None = None, *, svg_path=None, csv_dir=None,
        force: bool = True) -> RunReport:
    """Execute ``cfg`` and write the report.

    Without ``out`` the report goes to ``<cfg.out>/<experiment>-<hash>.json``
    with tables and figures beside it; an existing report for the same hash
    is reused unless ``force``.
    """
    stem = f"{cfg.experiment}-{cfg.digest()}"
    base = Path(cfg.out)
    json_path = Path(out) if out is not None else base / f"{stem}.json"
    if not force and json_path.exists():
        data = json.loads(json_path.read_text())
        return RunReport(cfg, data["result"], data["verdicts"], data["timings"], data["artifacts"])
    res, timings = execute(cfg)
    artifacts = []
    side = json_path.parent
    tag = json_path.stem
    for name, rows in sorted(res.tables.items()):
        p = (Path(csv_dir) if csv_dir else side) / f"{tag}-{name}.csv"
        atomic_write(p, to_csv(rows))
        artifacts.append(str(p))
    for i, (name, text) in enumerate(sorted(res.figures.items())):
        p = Path(svg_path) if (svg_path and i == 0) else side / f"{tag}-{name}.svg"
        atomic_write(p, text)
        artifacts.append(str(p))
    if res.mesh_text is not None:
        p = side / f"{tag}.mesh"
        atomic_write(p, res.mesh_text)
        artifacts.append(str(p))
    rep = RunReport(cfg, res.payload, res.verdicts, timings, artifacts)
    atomic_write(json_path, json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    return rep


def rerun(report_path) -> RunReport:
    """Re-execute a report from its embedded config echo, without writing files."""
    data = json.loads(Path(report_path).read_text())
    cfg = parse_config(data["config"], str(report_path))
    res, timings = execute(cfg)
    return RunReport(cfg, res.payload, res.verdicts, timings)
