"""Run configuration: one JSON file, overridable by CLI flags.

The ``space`` block is either the preset name ``"porous_flow"`` or a
list of per-dimension entries with ``name``, ``kind`` and the numeric
fields of the matching distribution:

    {"name": "k_pm", "kind": "lognormal", "lo": 1e-8, "hi": 1e-5,
     "mu_log": -14.9, "sigma_log": 1.7}

``mu_log``/``sigma_log`` may be omitted to get the log-midpoint
convention; beta entries take ``shape_a``/``shape_b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .distributions import (DistributionError, ParameterSpace, ScaledBeta,
                            TruncatedLogNormal, Uniform,
                            log_interval_lognormal, porous_flow_space)


class ConfigError(ValueError):
    pass


def space_from_config(block) -> ParameterSpace:
    if block in (None, "porous_flow"):
        return porous_flow_space()
    if isinstance(block, str):
        raise ConfigError(f"unknown space preset {block!r}")
    dims = []
    try:
        for entry in block:
            name = entry["name"]
            kind = entry["kind"]
            if kind == "uniform":
                spec = Uniform(lo=float(entry["lo"]), hi=float(entry["hi"]))
            elif kind == "lognormal":
                lo, hi = float(entry["lo"]), float(entry["hi"])
                if "mu_log" in entry or "sigma_log" in entry:
                    spec = TruncatedLogNormal(
                        mu_log=float(entry["mu_log"]),
                        sigma_log=float(entry["sigma_log"]), lo=lo, hi=hi)
                else:
                    spec = log_interval_lognormal(lo, hi)
            elif kind == "beta":
                spec = ScaledBeta(shape_a=float(entry["shape_a"]),
                                  shape_b=float(entry["shape_b"]),
                                  lo=float(entry["lo"]), hi=float(entry["hi"]))
            else:
                raise ConfigError(f"unknown distribution kind {kind!r}")
            dims.append((name, spec))
        return ParameterSpace(dims=tuple(dims))
    except (KeyError, TypeError, ValueError, DistributionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid space block: {exc}") from exc


def space_to_config(space: ParameterSpace):
    out = []
    for name, spec in space.dims:
        entry = {"name": name, "kind": spec.kind}
        for f in ("lo", "hi", "mu_log", "sigma_log", "shape_a", "shape_b"):
            if hasattr(spec, f):
                entry[f] = getattr(spec, f)
        out.append(entry)
    return out


@dataclass
class RunConfig:
    space: object = "porous_flow"
    design: dict = field(default_factory=lambda: {"kind": "qmc", "n": 8192,
                                                  "skip": 1, "seed": 0})
    surrogate: dict = field(default_factory=lambda: {"level": 1, "order": 2,
                                                     "q": 1.0, "rcond": 1e-10,
                                                     "var_floor": 1e-10})
    paths: dict = field(default_factory=dict)
    grid: dict | None = None

    def __post_init__(self):
        d = self.design
        s = self.surrogate
        if int(d.get("n", 1)) < 0:
            raise ConfigError("design.n must be nonnegative")
        if int(s.get("level", 0)) < 0:
            raise ConfigError("surrogate.level must be nonnegative")
        if not 0.0 < float(s.get("q", 1.0)) <= 1.0:
            raise ConfigError("surrogate.q must lie in (0, 1]")
        if int(s.get("order", 0)) < 0:
            raise ConfigError("surrogate.order must be nonnegative")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as f:
                raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        known = {"space", "design", "surrogate", "paths", "grid"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        base = cls()
        merged = {
            "space": raw.get("space", base.space),
            "design": {**base.design, **raw.get("design", {})},
            "surrogate": {**base.surrogate, **raw.get("surrogate", {})},
            "paths": raw.get("paths", {}),
            "grid": raw.get("grid"),
        }
        return cls(**merged)

    def parameter_space(self) -> ParameterSpace:
        return space_from_config(self.space)
