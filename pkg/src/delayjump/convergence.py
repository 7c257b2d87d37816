"""Empirical strong convergence of the logarithmic scheme.

Every path draws one jump stream on ``(0, T]``.  The same stream drives the
reference solution and the scheme on every grid of the study, so differences
measure discretisation error only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import path_rng
from .engine import (
    JumpStream,
    SimGrid,
    _flatten,
    _jump_side_values,
    _march,
    exact_reference,
    map_blocks,
    phi_prefix,
    require_valid,
    steps_of,
)
from .exceptions import FitError

BLOCK = 256


@dataclass(frozen=True)
class ConvergenceStudy:
    """Dyadic study ``dt_i = T / 2**levels[i]`` against ``T / 2**ref_level``."""

    model: object
    T: float
    levels: tuple
    ref_level: int
    n_paths: int
    seed: int
    p: float = 2.0

    def __post_init__(self):
        levels = tuple(sorted(int(k) for k in self.levels))
        object.__setattr__(self, "levels", levels)
        if len(set(levels)) != len(levels):
            raise ValueError("levels must be distinct")
        if self.p < 2:
            raise ValueError("p must be >= 2")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.ref_level <= levels[-1]:
            raise ValueError("the reference step must be finer than every study step")
        # every coarse grid must carry the delay exactly
        steps_of(self.model.delay, self.T / 2 ** levels[0], "delay")

    @property
    def dts(self):
        return np.array([self.T / 2**k for k in self.levels])

    @property
    def dt_ref(self):
        return self.T / 2**self.ref_level


@dataclass
class ErrorEstimates:
    """Per-step estimates ``e_hat = (mean sup|S - S_pi|^p)^(1/p)`` with stderr."""

    dt: np.ndarray
    e_hat: np.ndarray
    stderr: np.ndarray
    p: float
    n_paths: int
    sup_errors: np.ndarray = field(repr=False, default=None)
    min_value: np.ndarray = field(repr=False, default=None)

    def rows(self):
        return list(zip(self.dt.tolist(), self.e_hat.tolist(), self.stderr.tolist()))


@dataclass
class RateFit:
    """OLS fit of ``log e_hat`` on ``log dt``."""

    slope: float
    intercept: float
    r2: float
    residuals: np.ndarray
    dt: np.ndarray
    e_hat: np.ndarray

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "residuals": self.residuals.tolist(),
        }


def pth_mean(samples, p):
    """``(mean x^p)^(1/p)`` and its delta-method standard error."""
    x = np.asarray(samples, dtype=float) ** p
    m = float(np.mean(x))
    se_m = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    if m <= 0:
        return 0.0, 0.0
    e = m ** (1.0 / p)
    return e, e * se_m / (p * m)


def sup_error(path_a, path_b):
    """Sup of ``|a - b|`` over common grid values and jump-side values."""
    d = np.max(np.abs(np.asarray(path_a.values) - np.asarray(path_b.values)))
    if path_a.jump_values.size:
        d = max(
            d,
            np.max(np.abs(path_a.jump_values - path_b.jump_values)),
            np.max(np.abs(path_a.jump_values_left - path_b.jump_values_left)),
        )
    return float(d)


def _streams(model, T, seed, a, b):
    return [JumpStream.draw(model.levy, 0.0, T, path_rng(seed, i)) for i in range(a, b)]


def _block_errors(study, a, b):
    model, T = study.model, study.T
    streams = _streams(model, T, study.seed, a, b)
    P = b - a
    fine = SimGrid(T, 2**study.ref_level)
    top = study.levels[-1]
    n_top = 2**top
    stride_ref = 2 ** (study.ref_level - top)
    ref_grid = np.empty((P, n_top + 1))
    ref_jl, ref_jr = [], []
    for i, st in enumerate(streams):
        ref = exact_reference(model, fine, st)
        ref_grid[i] = ref.at(fine.times[::stride_ref])
        ref_jl.append(ref.at(st.times, "left"))
        ref_jr.append(ref.at(st.times, "right"))
    ref_jl = np.concatenate(ref_jl) if ref_jl else np.empty(0)
    ref_jr = np.concatenate(ref_jr) if ref_jr else np.empty(0)

    errs = np.empty((P, len(study.levels)))
    mins = np.empty(len(study.levels))
    for j, lev in enumerate(study.levels):
        n = 2**lev
        dt = T / n
        prefix = np.broadcast_to(phi_prefix(model, dt), (P, steps_of(model.delay, dt) + 1))
        m = prefix.shape[1] - 1
        flat = _flatten(streams, 0.0, dt, n)
        buf, _ = _march(model, dt, n, prefix, flat)
        vals = buf[:, m:]
        sup = np.max(np.abs(vals - ref_grid[:, :: 2 ** (top - lev)]), axis=1)
        low = vals.min()
        if len(flat):
            left, right = _jump_side_values(model, buf, m, dt, 0.0, flat)
            order = np.lexsort((flat.time, flat.path))  # back to stream order
            dj = np.maximum(np.abs(left[order] - ref_jl), np.abs(right[order] - ref_jr))
            np.maximum.at(sup, flat.path[order], dj)
            low = min(low, left.min(), right.min())
        errs[:, j] = sup
        mins[j] = low
    return errs, mins


def coupled_errors(study, threads=1, validate=True):
    """Sup-norm errors of the scheme on every study grid against the reference."""
    if validate:
        require_valid(study.model)
    blocks = map_blocks(lambda a, b: _block_errors(study, a, b), study.n_paths, threads, BLOCK)
    errs = np.concatenate([e for e, _ in blocks], axis=0)
    mins = np.min(np.stack([m for _, m in blocks]), axis=0)
    est = [pth_mean(errs[:, j], study.p) for j in range(errs.shape[1])]
    return ErrorEstimates(
        dt=study.dts,
        e_hat=np.array([e for e, _ in est]),
        stderr=np.array([s for _, s in est]),
        p=study.p,
        n_paths=study.n_paths,
        sup_errors=errs,
        min_value=mins,
    )


def fit_rate(dt, e_hat=None):
    """Least-squares slope of ``log e_hat`` against ``log dt``.

    Accepts either two arrays or an :class:`ErrorEstimates`.
    """
    if e_hat is None:
        dt, e_hat = dt.dt, dt.e_hat
    dt = np.asarray(dt, dtype=float)
    e = np.asarray(e_hat, dtype=float)
    if dt.size != e.size:
        raise FitError("step and error arrays differ in length")
    if dt.size < 4:
        raise FitError(f"need at least 4 levels for a rate fit, got {dt.size}")
    if not (np.all(np.isfinite(e)) and np.all(e > 0) and np.all(dt > 0)):
        raise FitError("error estimates and steps must be finite and positive")
    x, y = np.log(dt), np.log(e)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, resid, dt, e)


# ---------------------------------------------------------------------------
# grid holding error and moment probe


def _holding_block(model, grid, seed, p, a, b):
    dt, n = grid.dt, grid.n
    streams = _streams(model, grid.T, seed, a, b)
    P = b - a
    prefix = np.broadcast_to(phi_prefix(model, dt), (P, grid.delay_steps(model.delay) + 1))
    m = prefix.shape[1] - 1
    flat = _flatten(streams, 0.0, dt, n)
    buf, _ = _march(model, dt, n, prefix, flat)
    base = buf[:, m : m + n]
    xd = buf[:, :n]
    log_inc = model.f(xd) * (0.5 * dt)
    if len(flat):
        half = flat.time <= (flat.step + 0.5) * dt
        pid, k = flat.path[half], flat.step[half]
        np.add.at(log_inc, (pid, k), np.log1p(model.g(xd[pid, k]) * flat.mark[half]))
    dev = np.abs(base * np.expm1(log_inc)) ** p
    return dev.mean(axis=1)


def grid_holding_error(model, grid, n_paths, seed, p=2.0, threads=1):
    """Mean of ``|S_pi(t_k + dt/2) - S_pi(t_k)|^p`` over steps and paths.

    Returns ``(estimate, stderr)``; the stderr treats path averages as iid.
    """
    per_path = np.concatenate(
        map_blocks(lambda a, b: _holding_block(model, grid, seed, p, a, b), n_paths, threads, BLOCK)
    )
    se = float(np.std(per_path, ddof=1) / math.sqrt(per_path.size)) if per_path.size > 1 else 0.0
    return float(per_path.mean()), se


def holding_study(model, T, levels, n_paths, seed, p=2.0, threads=1):
    """Holding error for each ``dt = T / 2**k``; returns (dts, estimates, stderrs)."""
    dts, est, ses = [], [], []
    for k in sorted(levels):
        e, s = grid_holding_error(model, SimGrid(T, 2**k), n_paths, seed, p, threads)
        dts.append(T / 2**k)
        est.append(e)
        ses.append(s)
    return np.array(dts), np.array(est), np.array(ses)


def _sup_block(model, grid, seed, q, a, b):
    dt, n = grid.dt, grid.n
    streams = _streams(model, grid.T, seed, a, b)
    prefix = np.broadcast_to(phi_prefix(model, dt), (b - a, grid.delay_steps(model.delay) + 1))
    flat = _flatten(streams, 0.0, dt, n)
    buf, _ = _march(model, dt, n, prefix, flat)
    return np.max(buf[:, prefix.shape[1] - 1 :], axis=1) ** q


def sup_moment(model, T, levels, n_paths, seed, q=2.0, threads=1):
    """Estimate ``E[max_k S_pi(t_k)^q]`` on each grid ``T / 2**k``."""
    out = []
    for k in sorted(levels):
        grid = SimGrid(T, 2**k)
        vals = np.concatenate(map_blocks(lambda a, b: _sup_block(model, grid, seed, q, a, b), n_paths, threads, BLOCK))
        out.append(float(vals.mean()))
    return np.array(out)
