"""Coefficient catalog: drift ``f``, jump loading ``g`` and initial segment ``phi``.

Each coefficient carries declared bounds and a Lipschitz (or Hölder)
constant.  These are hypotheses supplied by the user; the model validator only
spot-checks them on a grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Coefficient:
    """Vectorised real function with declared range ``[lower, upper]``."""

    func: Callable[[np.ndarray], np.ndarray]
    lower: float
    upper: float
    lipschitz: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape).copy()

    @property
    def is_zero(self):
        return self.lower == 0.0 and self.upper == 0.0

    @property
    def is_constant(self):
        return self.lower == self.upper

    def to_dict(self):
        return {"name": self.name, **self.params}


def constant(value):
    value = float(value)
    return Coefficient(
        lambda x: np.full(np.shape(x), value), value, value, 0.0, "constant", {"value": value}
    )


def scaled_sine(amplitude, scale=1.0, offset=0.0):
    """``offset + amplitude * sin(x / scale)``."""
    a, s, c = float(amplitude), float(scale), float(offset)
    if s == 0:
        raise ValueError("scale must be non-zero")
    return Coefficient(
        lambda x: c + a * np.sin(x / s),
        c - abs(a),
        c + abs(a),
        abs(a / s),
        "scaled_sine",
        {"amplitude": a, "scale": s, "offset": c},
    )


def affine_clipped(intercept, slope, lower, upper):
    """``clip(intercept + slope * x, lower, upper)``."""
    lo, hi = float(lower), float(upper)
    if lo > hi:
        raise ValueError("lower clip exceeds upper clip")
    b0, b1 = float(intercept), float(slope)
    return Coefficient(
        lambda x: np.clip(b0 + b1 * x, lo, hi),
        lo,
        hi,
        abs(b1),
        "affine_clipped",
        {"intercept": b0, "slope": b1, "lower": lo, "upper": hi},
    )


@dataclass(frozen=True)
class InitialSegment:
    """Deterministic history ``phi`` on ``[-b, 0]`` with a Hölder bound."""

    func: Callable[[np.ndarray], np.ndarray]
    holder_exponent: float
    holder_constant: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.asarray(self.func(s), dtype=float), s.shape).copy()

    @property
    def start(self):
        return float(self(0.0))

    def to_dict(self):
        return {"name": self.name, **self.params}


def exp_segment(s0, rate=0.0):
    """``s0 * exp(rate * s)``; Lipschitz on ``[-b, 0]`` with constant ``|s0 rate|``."""
    s0, rate = float(s0), float(rate)
    return InitialSegment(
        lambda s: s0 * np.exp(rate * s),
        1.0,
        abs(s0 * rate),
        "exp_segment",
        {"s0": s0, "rate": rate},
    )


CATALOG = {
    "constant": constant,
    "scaled_sine": scaled_sine,
    "affine_clipped": affine_clipped,
}

SEGMENTS = {"exp_segment": exp_segment}


def coefficient_from_dict(spec):
    """Build a catalog coefficient from ``{"name": ..., **params}``."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in CATALOG:
        raise KeyError(f"unknown coefficient {name!r}; expected one of {sorted(CATALOG)}")
    return CATALOG[name](**spec)


def segment_from_dict(spec):
    spec = dict(spec)
    name = spec.pop("name", None)
    if name == "constant":
        return exp_segment(spec["value"], 0.0)
    if name not in SEGMENTS:
        raise KeyError(f"unknown initial segment {name!r}; expected exp_segment or constant")
    return SEGMENTS[name](**spec)
