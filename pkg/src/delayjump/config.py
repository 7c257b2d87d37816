"""JSON run configuration.

A configuration names catalog coefficients and numeric parameters only::

    {
      "version": 1,
      "model": {
        "f": {"name": "constant", "value": 0.05},
        "g": {"name": "scaled_sine", "amplitude": 0.05, "scale": 1.0, "offset": 0.05},
        "phi": {"name": "exp_segment", "s0": 1.0, "rate": 0.0},
        "delay": 0.25,
        "levy": {"intensity": 5.0, "pos": [[0.5, 3.0]], "neg": [[0.5, 3.0, 1.0]]}
      },
      "grid": {"T": 1.0, "n": 256},
      "market": {"r": 0.01, "K": 1.0, "T": 1.0, "t": 0.0},
      "seed": 1,
      "simulate": {"n_paths": 100},
      "price": {"method": "mc", "n_paths": 10000},
      "converge": {"levels": [4, 5, 6, 7, 8], "ref_level": 13, "n_paths": 2000},
      "table": {"months": [1], "n_paths": 2000, "units": "annual"}
    }

Errors carry the dotted field path (or the JSON line and column).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .coefficients import coefficient_from_dict, segment_from_dict
from .engine import DelayedJumpModel, SimGrid
from .exceptions import ConfigError
from .jump_measure import JumpDistribution, LevySpec
from .measure_change import CONVENTIONS, MarketSpec

VERSION = 1
METHODS = ("mc", "fourier", "bs", "bs_paper")


@dataclass
class RunConfig:
    raw: dict
    sha256: str
    model: DelayedJumpModel | None = None
    grid: SimGrid | None = None
    market: MarketSpec | None = None
    strike: float | None = None
    seed: int | None = None
    theta_convention: str = "derived"
    replication_mode: bool = False
    blocks: dict = field(default_factory=dict)

    def block(self, name):
        return self.blocks.get(name) or {}

    def require_seed(self, override=None, block=None):
        seed = override if override is not None else self.block(block).get("seed", self.seed)
        if seed is None:
            raise ConfigError("seed: a seed is mandatory for stochastic commands")
        return _int(seed, "seed", minimum=0)


def _num(value, path, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite")
    if positive and not value > 0:
        raise ConfigError(f"{path}: must be positive")
    if nonneg and value < 0:
        raise ConfigError(f"{path}: must be non-negative")
    return value


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}")
    return value


def _get(d, key, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing")
    return d[key]


def _coef(spec, path, segment=False):
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: expected an object with a 'name'")
    try:
        return segment_from_dict(spec) if segment else coefficient_from_dict(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _terms(seq, path, width):
    if not isinstance(seq, list):
        raise ConfigError(f"{path}: expected a list")
    out = []
    for i, term in enumerate(seq):
        if not isinstance(term, list) or len(term) not in width:
            raise ConfigError(f"{path}[{i}]: expected a list of length {' or '.join(map(str, width))}")
        vals = []
        for j, v in enumerate(term):
            # truncation may be given as "inf" (JSON has no infinity literal)
            if j == 2 and (v in ("inf", "Infinity", None) or v == math.inf):
                vals.append(math.inf)
            else:
                vals.append(_num(v, f"{path}[{i}][{j}]"))
        out.append(tuple(vals))
    return tuple(out)


def parse_levy(spec, path="model.levy"):
    lam = _num(_get(spec, "intensity", path), f"{path}.intensity", positive=True)
    pos = _terms(spec.get("pos", []), f"{path}.pos", (2,))
    neg = _terms(spec.get("neg", []), f"{path}.neg", (2, 3))
    try:
        return LevySpec(lam, JumpDistribution(pos, neg))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_model(spec, path="model"):
    f = _coef(_get(spec, "f", path), f"{path}.f")
    g = _coef(_get(spec, "g", path), f"{path}.g")
    phi = _coef(_get(spec, "phi", path), f"{path}.phi", segment=True)
    delay = _num(_get(spec, "delay", path), f"{path}.delay", positive=True)
    levy = parse_levy(_get(spec, "levy", path), f"{path}.levy")
    return DelayedJumpModel(f, g, phi, delay, levy)


def parse_grid(spec, path="grid"):
    T = _num(_get(spec, "T", path), f"{path}.T", positive=True)
    n = _int(_get(spec, "n", path), f"{path}.n", minimum=1)
    return SimGrid(T, n)


def parse_market(spec, path="market"):
    r = _num(_get(spec, "r", path), f"{path}.r")
    K = _num(spec.get("K", 1.0), f"{path}.K", nonneg=True)
    T = _num(_get(spec, "T", path), f"{path}.T", positive=True)
    t = _num(spec.get("t", 0.0), f"{path}.t", nonneg=True)
    if t > T:
        raise ConfigError(f"{path}.t: valuation time exceeds maturity")
    # K = 0 is a legal request (payoff S(T)); MarketSpec needs K > 0
    return MarketSpec(r, K if K > 0 else 1.0, T, t), K


def config_hash(raw):
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def parse_config(raw):
    """Validate a decoded JSON document and build the run objects."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    version = raw.get("version")
    if version != VERSION:
        raise ConfigError(f"version: expected {VERSION}, got {version!r}")
    cfg = RunConfig(raw=raw, sha256=config_hash(raw))
    if "model" in raw:
        cfg.model = parse_model(raw["model"])
    if "grid" in raw:
        try:
            cfg.grid = parse_grid(raw["grid"])
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
        if cfg.model is not None:
            try:
                cfg.grid.delay_steps(cfg.model.delay)
            except ValueError as exc:
                raise ConfigError(f"grid.n: {exc}") from None
    if "market" in raw:
        cfg.market, cfg.strike = parse_market(raw["market"])
    if "seed" in raw:
        cfg.seed = _int(raw["seed"], "seed", minimum=0)
    conv = raw.get("theta_convention", "derived")
    if conv not in CONVENTIONS:
        raise ConfigError(f"theta_convention: expected one of {CONVENTIONS}, got {conv!r}")
    cfg.theta_convention = conv
    cfg.replication_mode = bool(raw.get("replication_mode", False))
    for name in ("simulate", "price", "converge", "table"):
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ConfigError(f"{name}: expected an object")
            cfg.blocks[name] = raw[name]
    price = cfg.block("price")
    if price and price.get("method", "mc") not in METHODS:
        raise ConfigError(f"price.method: expected one of {METHODS}, got {price.get('method')!r}")
    conv_blk = cfg.block("converge")
    if conv_blk and not conv_blk.get("synthetic"):
        levels = conv_blk.get("levels")
        if not isinstance(levels, list) or len(levels) < 4:
            raise ConfigError("converge.levels: need >= 4 levels for a rate fit")
    return cfg


def load_config(path):
    """Read and parse a configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(raw)
