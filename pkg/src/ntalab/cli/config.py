"""Experiment configuration: INI text with one section per concern.

    [experiment]
    name = wos
    out = results

    [domain]
    kind = disk
    resolution = 4096

    [wos]
    walks = 100000
    seed = 7

Values are typed by a per-experiment schema; an invalid value is reported
with the path of its key, e.g. ``[wos] walks``.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

from ..zoo import KINDS, DomainSpec


class ConfigError(ValueError):
    pass


# value kinds


def _int(text):
    v = float(text)  # accepts 1e6
    if not v.is_integer():
        raise ValueError("expected an integer")
    return int(v)


def _float(text):
    return float(text)


def _floats(text):
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _ints(text):
    text = text.strip()
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [_int(t) for t in text.split(",") if t.strip()]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError("expected yes or no")


def _str(text):
    return text.strip()


def _point_or_index(text):
    """A vertex index ("12") or coordinates ("0.5, 0")."""
    t = text.strip()
    if "," in t:
        return _floats(t)
    return _int(t)


def _pole(text):
    t = text.strip()
    return "auto" if t == "auto" else _floats(t)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


# schema: experiment -> key -> (parser, default); a default of REQUIRED must be given
REQUIRED = object()

SCHEMAS = {
    "generate": {},
    "schedule": {"n": (_int, 2), "M": (_float, REQUIRED), "gamma": (_float, REQUIRED), "eps": (_float, REQUIRED),
                 "rounds": (_str, "auto")},
    "verify-corkscrew": {"M": (_float, REQUIRED), "R": (_float, REQUIRED), "budget": (_int, 200),
                         "seed": (_int, REQUIRED), "workers": (_int, 1)},
    "approximate": {"Q": (_point_or_index, REQUIRED), "r": (_float, REQUIRED), "M": (_float, REQUIRED),
                    "h": (_str, "h0"), "gamma": (_float, 4.0), "eps": (_float, 0.1), "samples": (_int, 16),
                    "stars": (_bool, True), "maximal": (_bool, True), "workers": (_int, 1)},
    "wos": {"pole": (_pole, "auto"), "walks": (_int, 100000), "shell": (_float, 1e-4), "cells": (_int, 64),
            "partition": (_str, "auto"), "seed": (_int, REQUIRED), "workers": (_int, 1)},
    "ainfty": {"Q": (_point_or_index, REQUIRED), "scales": (_floats, REQUIRED), "pole": (_pole, "auto"),
               "delta": (_float, 0.05), "trials": (_int, 200), "walks": (_int, 100000), "shell": (_float, 1e-4),
               "cells": (_int, 32), "gamma": (_float, 0.0), "seed": (_int, REQUIRED), "workers": (_int, 1)},
    "localize": {"Q": (_point_or_index, REQUIRED), "r": (_float, REQUIRED), "X0": (_pole, "auto"),
                 "M": (_float, 2.0), "walks": (_int, 100000), "cells": (_int, 8), "seed": (_int, REQUIRED),
                 "workers": (_int, 1)},
    "dimension": {"pole": (_pole, "auto"), "walks": (_int, 100000), "shell": (_float, 1e-4),
                  "boot": (_int, 200), "compare_box": (_bool, True), "seed": (_int, REQUIRED),
                  "workers": (_int, 1)},
    "density-sweep": {"family": (_str, "koch_curve"), "levels": (_ints, [0, 1, 2, 3, 4, 5, 6]),
                      "scales": (_floats, []), "tolerance": (_float, 0.03), "resolution_factor": (_float, 10.0)},
}

DOMAIN_KEYS = {"kind": _str, "resolution": _int, "level": _int, "slope": _float, "seed": _int, "path": _str}
NEEDS_DOMAIN = {"generate", "verify-corkscrew", "approximate", "wos", "ainfty", "localize", "dimension"}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict
    domain: dict | None = None
    out: str = "."

    def domain_spec(self) -> DomainSpec | None:
        if self.domain is None:
            return None
        d = dict(self.domain)
        kind = d.pop("kind")
        try:
            return DomainSpec(kind=kind, **d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[domain]: {exc}") from None

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["experiment"] = {"name": self.experiment, "out": self.out}
        if self.domain is not None:
            cp["domain"] = {k: _fmt(v) for k, v in self.domain.items()}
        if self.params:
            cp[self.experiment] = {k: _fmt(v) for k, v in self.params.items()}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in cp[sec].items()]
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        """Content hash of the canonical text; the output directory does not count."""
        body = ExperimentConfig(self.experiment, self.params, self.domain, ".").to_ini()
        return hashlib.sha256(body.encode()).hexdigest()[:16]

    def as_dict(self) -> dict:
        return {"experiment": self.experiment, "out": self.out, "domain": self.domain, "params": self.params}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not cp.has_section("experiment") or "name" not in cp["experiment"]:
        raise ConfigError(f"{source}: missing required key [experiment] name")
    exp = cp["experiment"]["name"].strip()
    if exp not in SCHEMAS:
        raise ConfigError(f"{source}: [experiment] name: unknown experiment {exp!r}; "
                          f"expected one of {', '.join(SCHEMAS)}")
    unknown = set(cp["experiment"]) - {"name", "out"}
    if unknown:
        raise ConfigError(f"{source}: [experiment] {sorted(unknown)[0]}: unknown key")
    out = cp["experiment"].get("out", ".").strip()
    domain = None
    if cp.has_section("domain"):
        domain = {}
        for k, v in cp["domain"].items():
            if k not in DOMAIN_KEYS:
                raise ConfigError(f"{source}: [domain] {k}: unknown key")
            try:
                domain[k] = DOMAIN_KEYS[k](v)
            except ValueError as exc:
                raise ConfigError(f"{source}: [domain] {k}: {exc}") from None
        if "kind" not in domain:
            raise ConfigError(f"{source}: missing required key [domain] kind")
        if domain["kind"] not in KINDS:
            raise ConfigError(f"{source}: [domain] kind: unknown domain kind {domain['kind']!r}")
    elif exp in NEEDS_DOMAIN:
        raise ConfigError(f"{source}: missing required section [domain]")
    schema = SCHEMAS[exp]
    given = dict(cp[exp]) if cp.has_section(exp) else {}
    params = {}
    for k, v in given.items():
        if k not in schema:
            raise ConfigError(f"{source}: [{exp}] {k}: unknown key")
        parser, _ = schema[k]
        try:
            params[k] = parser(v)
        except ValueError as exc:
            raise ConfigError(f"{source}: [{exp}] {k}: cannot read {v!r} ({exc})") from None
    for k, (_, default) in schema.items():
        if k not in params:
            if default is REQUIRED:
                raise ConfigError(f"{source}: missing required key [{exp}] {k}")
            params[k] = list(default) if isinstance(default, list) else default
    extra = {s: dict(cp[s]) for s in cp.sections() if s not in ("experiment", "domain", exp)}
    if extra:
        raise ConfigError(f"{source}: [{sorted(extra)[0]}]: section does not belong to experiment {exp!r}")
    return ExperimentConfig(exp, params, domain, out)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))
