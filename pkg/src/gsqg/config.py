"""Experiment configuration: parsing, validation, initial-data presets.

Configs are flat YAML documents (or flag overrides from the CLI). Every
pure parameter constraint is rejected at parse time with a field-level
message; nothing waits for the run to fail.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields as dataclass_fields
from typing import Any, Mapping

import numpy as np
import yaml

from .inequalities import sample_field
from .spectral import GridSpec, RealField, VelocityLaw, project_mean_zero

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "build_initial_field",
    "KINDS",
    "CHECKS",
]

KINDS = ("simulate", "picard", "inequality", "besov")
CHECKS = ("hls", "cz", "bernstein", "embedding", "gradvel")
_PRESET_RE = re.compile(
    r"^random\(\s*(\d+)\s*,\s*([0-9.eE+-]+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)$"
)
_SNAPSHOT_RE = re.compile(r"^snapshot\((.+)\)$")


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the field."""


@dataclass
class ExperimentConfig:
    kind: str
    n: int = 128
    alpha: float | None = None
    law: str | None = None
    s: float | None = None
    T: float | None = None
    auto_horizon: bool = False
    dt: float | None = None
    cfl: float = 0.25
    tol: float | None = None
    max_iter: int = 50
    nodes: int = 32
    initial: str | None = None
    check: str | None = None
    p: float | None = None
    count: int = 200
    gamma: float = 2.5
    band: tuple[int, int] | None = None
    outdir: str | None = None
    seed: int = 0

    def velocity_law(self) -> VelocityLaw:
        return VelocityLaw(self.law)

    def grid(self) -> GridSpec:
        return GridSpec(self.n)

    def as_dict(self) -> dict:
        out = {}
        for f in dataclass_fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


_FIELD_TYPES = {
    "kind": str,
    "n": int,
    "alpha": float,
    "law": str,
    "s": float,
    "T": float,
    "auto_horizon": bool,
    "dt": float,
    "cfl": float,
    "tol": float,
    "max_iter": int,
    "nodes": int,
    "initial": str,
    "check": str,
    "p": float,
    "count": int,
    "gamma": float,
    "band": tuple,
    "outdir": str,
    "seed": int,
}


def _coerce(name: str, value: Any) -> Any:
    want = _FIELD_TYPES[name]
    if value is None:
        return None
    try:
        if want is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false"):
                return value.lower() == "true"
            raise ValueError
        if want is int:
            out = int(value)
            if isinstance(value, float) and value != out:
                raise ValueError
            return out
        if want is float:
            if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
                return math.inf
            return float(value)
        if want is tuple:
            if isinstance(value, str):
                parts = value.replace(":", ",").split(",")
            else:
                parts = list(value)
            lo, hi = (int(p) for p in parts)
            return (lo, hi)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r}") from None


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.kind not in KINDS:
        raise ConfigError(f"kind: must be one of {', '.join(KINDS)}, got {cfg.kind!r}")
    if cfg.n < 4 or cfg.n % 2 != 0:
        raise ConfigError(f"n: must be an even integer >= 4, got {cfg.n}")
    if cfg.alpha is not None and not 0.0 < cfg.alpha <= 0.5:
        raise ConfigError(f"alpha: must lie in (0, 1/2], got {cfg.alpha}")
    if cfg.law is not None and cfg.law not in ("perp", "grad"):
        raise ConfigError(f"law: must be 'perp' or 'grad', got {cfg.law!r}")
    if cfg.s is not None and cfg.alpha is not None and not cfg.s > 1.0 + 2.0 * cfg.alpha:
        raise ConfigError(
            f"s: must exceed 1 + 2*alpha = {1.0 + 2.0 * cfg.alpha}, got {cfg.s}"
        )
    if cfg.T is not None and not cfg.T > 0.0:
        raise ConfigError(f"T: must be positive, got {cfg.T}")
    if cfg.dt is not None and not cfg.dt > 0.0:
        raise ConfigError(f"dt: must be positive, got {cfg.dt}")
    if not 0.0 < cfg.cfl <= 1.0:
        raise ConfigError(f"cfl: must lie in (0, 1], got {cfg.cfl}")
    if cfg.tol is not None and not cfg.tol > 0.0:
        raise ConfigError(f"tol: must be positive, got {cfg.tol}")
    if cfg.max_iter < 1:
        raise ConfigError(f"max_iter: must be >= 1, got {cfg.max_iter}")
    if cfg.nodes < 1:
        raise ConfigError(f"nodes: must be >= 1, got {cfg.nodes}")
    if cfg.count < 1:
        raise ConfigError(f"count: must be >= 1, got {cfg.count}")
    if cfg.band is not None:
        lo, hi = cfg.band
        if lo < 1 or hi < lo:
            raise ConfigError(f"band: must satisfy 1 <= lo <= hi, got {cfg.band}")
        if hi > cfg.n // 2 - 1:
            raise ConfigError(
                f"band: upper limit {hi} exceeds resolvable modes of n = {cfg.n}"
            )
    if cfg.check is not None and cfg.check not in CHECKS:
        raise ConfigError(
            f"check: must be one of {', '.join(CHECKS)}, got {cfg.check!r}"
        )

    kind = cfg.kind
    def need(field_name):
        if getattr(cfg, field_name) is None:
            raise ConfigError(f"{field_name}: required for kind '{kind}'")

    if kind in ("simulate", "picard"):
        need("alpha"), need("law"), need("s"), need("initial")
        if kind == "simulate":
            need("T")
    elif kind == "inequality":
        need("check")
        if cfg.check in ("hls", "gradvel"):
            need("alpha")
        if cfg.check == "gradvel":
            need("s")
        if cfg.check == "cz":
            need("p")
        if cfg.check == "embedding":
            need("s")
    elif kind == "besov":
        need("initial"), need("s")
    return cfg


def parse_config(source: str | Mapping) -> ExperimentConfig:
    """Parse a YAML document or a mapping into a validated config."""
    if isinstance(source, str):
        try:
            doc = yaml.safe_load(source)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config document: {exc}") from None
    else:
        doc = dict(source)
    if doc is None:
        doc = {}
    if not isinstance(doc, Mapping):
        raise ConfigError("config document must be a key-value mapping")
    known = {f.name for f in dataclass_fields(ExperimentConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    if "kind" not in doc or doc["kind"] is None:
        raise ConfigError("kind: required")
    kwargs = {name: _coerce(name, value) for name, value in doc.items()}
    defaults = {
        f.name: f.default for f in dataclass_fields(ExperimentConfig) if f.name not in kwargs
    }
    for name, default in defaults.items():
        if name != "kind":
            kwargs.setdefault(name, default)
    cfg = ExperimentConfig(**kwargs)
    return _validate(cfg)


def build_initial_field(cfg: ExperimentConfig, grid: GridSpec) -> RealField:
    """Materialize the configured initial datum on a grid."""
    from .snapshots import read_snapshot  # deferred: avoids a cycle at import time

    name = cfg.initial
    if name is None:
        raise ConfigError("initial: required")
    if name == "sinx1":
        return RealField.from_function(grid, lambda x1, x2: np.sin(x1))
    if name == "sinx1_sinx2":
        return RealField.from_function(grid, lambda x1, x2: np.sin(x1) * np.sin(x2))
    m = _PRESET_RE.match(name)
    if m:
        seed, gamma, lo, hi = int(m[1]), float(m[2]), int(m[3]), int(m[4])
        if lo < 1 or hi < lo or hi > grid.n // 2 - 1:
            raise ConfigError(f"initial: random band ({lo}, {hi}) not resolvable on n = {grid.n}")
        return sample_field(grid, seed, 0, gamma, (lo, hi))
    m = _SNAPSHOT_RE.match(name)
    if m:
        field, _, _ = read_snapshot(m[1].strip())
        if field.grid != grid:
            raise ConfigError(
                f"initial: snapshot grid n = {field.grid.n} does not match configured n = {grid.n}"
            )
        return project_mean_zero(field)
    raise ConfigError(
        f"initial: unknown preset {name!r} (use sinx1, sinx1_sinx2, "
        "random(seed,gamma,kmin,kmax) or snapshot(path))"
    )
