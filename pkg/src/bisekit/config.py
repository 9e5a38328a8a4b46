"""Experiment configuration: a flat ``key = value`` file, overridable from the command line.

Lines starting with ``#`` are comments. Lists are comma separated; pairs in
``pairs`` are written ``K1:K2``. Unknown keys are rejected.
"""

from dataclasses import dataclass, fields, replace
import math

from .errors import ArgumentError
from .lattice import OFFSPRING

KINDS = (
    "sample-tree",
    "skeleton",
    "check-g",
    "check-v",
    "check-r",
    "check-s",
    "check-edge-uniform",
    "empirical-measure",
    "crt-sample",
    "walk-compare",
    "lemma-step0",
)

DEFAULT_THRESHOLDS = {
    "check-r": 0.0,
    "check-edge-uniform": 1.0,
    "lemma-step0": 0.02,
    "crt-sample": 0.02,
    "check-s": 0.1,
    "check-g": 0.1,
    "check-v": 0.0,
    "empirical-measure": 1.0,
    "walk-compare": 0.0,
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    replicas: int = 100
    d: int = 2
    L: int = 1
    n: int = 50
    ns: tuple = (25, 50, 100)
    h: float = 1.0
    K: int = 3
    Ks: tuple = (2, 4, 8, 16)
    K1: int = 20
    K2: int = 200
    K1s: tuple = (25, 50, 100, 200)
    pairs: tuple = ((5, 50), (20, 200), (50, 1000))
    M: int = 100
    offspring: str = "geometric"
    z: float = 1.0
    cap: float = 40.0
    step: float = 0.01
    horizon: float = 1.0
    times: tuple = (0.05, 0.1, 0.2)
    threshold: float = None
    eps: float = 0.1
    trials: int = 100
    hosts: int = 10
    grid_points: int = 4097
    dt: float = 2e-4
    continuum_replicas: int = 2000
    min_count: int = 20
    delta: float = 0.1
    delta_points: int = 50
    fit_min: float = 0.1
    fit_max: float = 10.0
    fit_points: int = 41
    source: str = "continuum"

    @property
    def pass_threshold(self):
        return DEFAULT_THRESHOLDS.get(self.kind, 0.1) if self.threshold is None else self.threshold

    def to_dict(self):
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self)}


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


_LIST_OF_INT = {"ns", "Ks", "K1s"}
_LIST_OF_FLOAT = {"times"}
_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_POSITIVE_INT = {"replicas", "d", "L", "n", "K", "K1", "K2", "M", "trials", "hosts", "continuum_replicas", "min_count", "delta_points", "fit_points"}
_POSITIVE_FLOAT = {"h", "z", "cap", "step", "horizon", "eps", "dt", "delta", "fit_min", "fit_max"}


def _convert(key, raw):
    raw = raw.strip()
    try:
        if key in _LIST_OF_INT:
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if key in _LIST_OF_FLOAT:
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if key == "pairs":
            return tuple(tuple(int(y) for y in x.split(":")) for x in raw.split(",") if x.strip())
        kind = _TYPES[key]
        if key == "threshold":
            return float(raw)
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ArgumentError(f"bad value for {key}: {raw!r}") from exc


def parse_text(text):
    """Key-value pairs from config file text."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ArgumentError(f"line {lineno}: expected key = value")
        if key not in _TYPES:
            raise ArgumentError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def build_config(values, overrides=None):
    """Merge file values with overrides (raw strings or typed values) and validate."""
    merged = dict(values)
    for key, value in (overrides or {}).items():
        if key not in _TYPES:
            raise ArgumentError(f"unknown key {key!r}")
        merged[key] = _convert(key, value) if isinstance(value, str) else value
    if "kind" not in merged:
        raise ArgumentError("missing experiment kind")
    if "seed" not in merged:
        raise ArgumentError("a seed is required")
    cfg = ExperimentConfig(**merged)
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg.kind not in KINDS:
        raise ArgumentError(f"unknown experiment kind {cfg.kind!r}")
    if cfg.seed < 0:
        raise ArgumentError("seed must be nonnegative")
    for key in _POSITIVE_INT:
        if getattr(cfg, key) < 1:
            raise ArgumentError(f"{key} must be at least 1")
    for key in _POSITIVE_FLOAT:
        value = getattr(cfg, key)
        if not (value > 0 and math.isfinite(value)):
            raise ArgumentError(f"{key} must be positive")
    for key in ("ns", "Ks", "K1s"):
        seq = getattr(cfg, key)
        if not seq or min(seq) < 1:
            raise ArgumentError(f"{key} must list positive integers")
    if not cfg.times or min(cfg.times) <= 0:
        raise ArgumentError("times must be positive")
    if not cfg.pairs or any(len(p) != 2 or min(p) < 1 for p in cfg.pairs):
        raise ArgumentError("pairs must look like K1:K2")
    if cfg.offspring not in OFFSPRING:
        raise ArgumentError(f"unknown offspring law {cfg.offspring!r}")
    if cfg.grid_points < 3:
        raise ArgumentError("grid_points must be at least 3")
    if cfg.fit_max <= cfg.fit_min:
        raise ArgumentError("fit_max must exceed fit_min")
    if cfg.threshold is not None and cfg.threshold < 0:
        raise ArgumentError("thresholds must be nonnegative")
    if cfg.source not in ("continuum", "lattice"):
        raise ArgumentError("source must be continuum or lattice")


def load(path, overrides=None):
    with open(path) as fh:
        return build_config(parse_text(fh.read()), overrides)


def with_values(cfg, **kw):
    out = replace(cfg, **kw)
    validate(out)
    return out
