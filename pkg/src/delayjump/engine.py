"""Delayed jump model, assumption checks and path simulation.

The asset solves ``dS = f(S(t-b)) S dt + g(S(t-b)) S(t-) dZ`` with ``Z`` a
compound Poisson process.  Paths are produced by the logarithmic
Euler-Maruyama scheme::

    S(t_{k+1}) = S(t_k) * exp(f(S(t_k - b)) dt) * prod_{jumps in (t_k, t_{k+1}]} (1 + g(S(t_k - b)) Y)

which keeps every value strictly positive.  A reference solution built from
the exact exponential representation is available for convergence studies.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._reports import ValidationReport
from ._rng import block_bounds, path_rng
from .coefficients import Coefficient, InitialSegment
from .exceptions import ModelValidationError, PositivityError, RangeError
from .jump_measure import LevySpec, levy_q_moment, sample_jump_times

BLOCK_SIZE = 4096
_GRID_TOL = 1e-12


@dataclass(frozen=True)
class DelayedJumpModel:
    """Coefficients, initial segment, delay and jump measure of the asset."""

    f: Coefficient
    g: Coefficient
    phi: InitialSegment
    delay: float
    levy: LevySpec

    def __post_init__(self):
        if not self.delay > 0:
            raise ValueError("delay must be positive")


@dataclass(frozen=True)
class SimGrid:
    """Uniform grid ``t_k = k * T / n`` on ``[0, T]``."""

    T: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("step count must be a positive integer")
        if not self.T > 0:
            raise ValueError("horizon must be positive")

    @property
    def dt(self):
        return self.T / self.n

    @property
    def times(self):
        return np.arange(self.n + 1) * self.dt

    def delay_steps(self, delay):
        return steps_of(delay, self.dt, "delay")


def steps_of(length, dt, what="interval"):
    """Integer number of steps of size ``dt`` in ``length`` (must be exact)."""
    ratio = length / dt
    k = round(ratio)
    if abs(ratio - k) > _GRID_TOL * max(1.0, abs(ratio)):
        raise ValueError(f"{what} {length!r} is not an integer multiple of the step {dt!r}")
    return int(k)


@dataclass(frozen=True)
class JumpStream:
    """Ordered jump times and marks; the randomness shared by coupled runs."""

    times: np.ndarray
    marks: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        y = np.asarray(self.marks, dtype=float).reshape(-1)
        if t.shape != y.shape:
            raise ValueError("jump times and marks differ in length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("jump times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "marks", y)

    def __len__(self):
        return self.times.size

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def draw(cls, levy, t0, t1, rng, intensity=None):
        lam = levy.intensity if intensity is None else intensity
        times = sample_jump_times(lam, t0, t1, rng)
        return cls(times, levy.dist.sample(rng, times.size))


@dataclass
class SimPath:
    """Grid values of one path plus its values around each jump.

    ``prefix_values`` holds the initial segment (or observed history) on the
    ``delay`` window before ``times[0]``.
    """

    times: np.ndarray
    values: np.ndarray
    dt: float
    delay: float
    prefix_values: np.ndarray
    jump_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_marks: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_values_left: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_values: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def delay_steps(self):
        return self.prefix_values.size - 1

    @property
    def prefix_times(self):
        return self.times[0] - self.delay + np.arange(self.prefix_values.size) * self.dt

    @property
    def jumps(self):
        return JumpStream(self.jump_times, self.jump_marks)

    @property
    def terminal(self):
        return float(self.values[-1])

    def min_value(self):
        vals = [self.values.min()]
        if self.jump_values.size:
            vals += [self.jump_values.min(), self.jump_values_left.min()]
        return float(min(vals))

    def delayed_values(self):
        """``S(t_k - b)`` for ``k = 0..n-1`` (history or earlier grid values)."""
        full = np.concatenate([self.prefix_values, self.values[1:]])
        return full[: self.values.size - 1]


# ---------------------------------------------------------------------------
# validation


def _state_grid(model, n_points, span):
    if span is None:
        ph = np.abs(model.phi(np.linspace(-model.delay, 0.0, 64)))
        span = 10.0 * max(float(ph.max()), 1.0)
    return np.linspace(-span, span, n_points)


def _check_declared(report, coef, name, x, rtol=1e-12):
    vals = coef(x)
    tol = rtol * max(1.0, abs(coef.lower), abs(coef.upper))
    inside = bool(np.all((vals >= coef.lower - tol) & (vals <= coef.upper + tol)))
    report.add(
        f"{name}_bounds",
        inside,
        float(vals.min() if not inside and vals.min() < coef.lower else vals.max()),
        f"{name} within declared [{coef.lower}, {coef.upper}]"
        if inside
        else f"{name} leaves its declared range [{coef.lower}, {coef.upper}]",
    )
    slopes = np.abs(np.diff(vals) / np.diff(x))
    lip = float(slopes.max()) if slopes.size else 0.0
    ok = lip <= coef.lipschitz * (1 + 1e-9) + 1e-12
    report.add(
        f"{name}_lipschitz",
        ok,
        lip,
        f"{name} Lipschitz spot-check" if ok else f"{name} exceeds declared Lipschitz constant {coef.lipschitz}",
    )


def validate_model(model, *, n_points=10_000, state_span=None, eps_pos=1e-6):
    """Check the regularity and positivity hypotheses on a model.

    Returns a :class:`ValidationReport`; nothing is raised.  The positivity
    margin is ``inf 1 + z g(x)`` over the jump support and the declared range
    of ``g``; it must be at least ``eps_pos``.
    """
    report = ValidationReport()
    dist = model.levy.dist

    phi0 = model.phi.start
    report.add("phi_positive", phi0 > 0, phi0, "phi(0) > 0" if phi0 > 0 else "phi(0) <= 0")

    s = np.linspace(-model.delay, 0.0, 2049)
    ph = model.phi(s)
    gam, rho = model.phi.holder_exponent, model.phi.holder_constant
    ds = np.diff(s)
    ratio = float(np.max(np.abs(np.diff(ph)) / ds**gam)) if ds.size else 0.0
    ok = 0.5 <= gam <= 1.0 and ratio <= rho * (1 + 1e-9) + 1e-12
    report.add("phi_holder", ok, ratio, "phi Hoelder spot-check" if ok else "phi violates its declared Hoelder bound")

    x = _state_grid(model, n_points, state_span)
    _check_declared(report, model.f, "f", x)
    _check_declared(report, model.g, "g", x)

    unbounded = dist.unbounded_below
    report.add(
        "bounded_negative_jumps",
        not unbounded,
        dist.support_lower,
        "negative jumps bounded" if not unbounded else "unbounded negative jumps",
    )

    lo, hi = dist.support_lower, dist.support_upper
    corners = [1.0]
    for z in (lo, hi):
        if z == 0.0:
            continue
        for gv in (model.g.lower, model.g.upper):
            if gv == 0.0:
                continue
            corners.append(-math.inf if math.isinf(z) and z * gv < 0 else (math.inf if math.isinf(z) else 1.0 + z * gv))
    margin = min(corners)
    zs = np.linspace(max(lo, dist.lower_cutoff()), min(hi, dist.tail_cutoff()), 257)
    gs = model.g(x)
    sampled = float(np.min(1.0 + np.outer(zs, [gs.min(), gs.max()])))
    ok = margin >= eps_pos and sampled > 0
    report.add(
        "positivity_margin",
        ok,
        margin,
        f"1 + z g(x) >= {margin:.6g} (alpha0 = {1 - margin:.6g})"
        if ok
        else f"positivity margin {margin:.6g} < {eps_pos} (sampled minimum {sampled:.6g})",
    )

    rho2 = levy_q_moment(model.levy, 2.0)
    report.add("levy_moments", math.isfinite(rho2), rho2, "int (1+|z|)^2 nu(dz) finite")
    return report


def require_valid(model, **kw):
    report = validate_model(model, **kw)
    if not report.passed:
        raise ModelValidationError(report)
    return report


# ---------------------------------------------------------------------------
# the marching core


class _PhysicalDynamics:
    """Real-world measure: drift ``f``, every arrival is a jump."""

    majorant = None

    def rates(self, x_del, fk, gk):
        return fk, None


@dataclass
class _FlatJumps:
    path: np.ndarray
    step: np.ndarray
    time: np.ndarray
    mark: np.ndarray
    u: np.ndarray | None = None

    def __len__(self):
        return self.path.size

    def subset(self, mask):
        return _FlatJumps(
            self.path[mask], self.step[mask], self.time[mask], self.mark[mask],
            None if self.u is None else self.u[mask],
        )


def _step_index(times, t0, dt, n_steps):
    q = (times - t0) / dt
    r = np.rint(q)
    q = np.where(np.abs(q - r) < 1e-9, r, np.ceil(q))
    return np.clip(q.astype(np.int64) - 1, 0, n_steps - 1)


def _flatten(streams, t0, dt, n_steps, uniforms=None):
    counts = np.array([len(s) for s in streams], dtype=np.int64)
    path = np.repeat(np.arange(len(streams)), counts)
    if counts.sum():
        times = np.concatenate([s.times for s in streams])
        marks = np.concatenate([s.marks for s in streams])
        u = np.concatenate(uniforms) if uniforms is not None else None
    else:
        times = np.empty(0)
        marks = np.empty(0)
        u = np.empty(0) if uniforms is not None else None
    step = _step_index(times, t0, dt, n_steps)
    order = np.argsort(step, kind="stable")
    return _FlatJumps(path[order], step[order], times[order], marks[order], None if u is None else u[order])


def _march(model, dt, n_steps, prefix, jumps, *, dynamics=None, record=True, jump_mode="per_jump"):
    """Advance a batch of paths through ``n_steps`` scheme steps.

    ``prefix`` has shape ``(P, m + 1)`` and holds the values on the delay
    window ending at the start time.  Returns ``(values, accepted)`` where
    ``values`` is the full ``(P, m + n_steps + 1)`` array when ``record`` is
    set and the terminal vector otherwise.
    """
    dynamics = dynamics or _PhysicalDynamics()
    P, m1 = prefix.shape
    m = m1 - 1
    if record:
        buf = np.empty((P, m + n_steps + 1))
        buf[:, :m1] = prefix
    else:
        buf = np.array(prefix, dtype=float, copy=True)
    cur = np.array(prefix[:, -1], dtype=float, copy=True)
    offsets = np.searchsorted(jumps.step, np.arange(n_steps + 1))
    accepted = np.ones(len(jumps), dtype=bool)
    aggregated = jump_mode == "aggregated"
    if jump_mode not in ("per_jump", "aggregated"):
        raise ValueError(f"unknown jump mode {jump_mode!r}")

    for k in range(n_steps):
        x_del = buf[:, k] if record else buf[:, k % m1]
        fk = model.f(x_del)
        gk = model.g(x_del)
        rate, acc = dynamics.rates(x_del, fk, gk)
        inc = rate * dt
        s, e = offsets[k], offsets[k + 1]
        if e > s:
            pid = jumps.path[s:e]
            y = jumps.mark[s:e]
            if acc is not None:
                keep = jumps.u[s:e] < acc[pid]
                accepted[s:e] = keep
                pid = pid[keep]
                y = y[keep]
            if pid.size:
                if aggregated:
                    dz = np.zeros(P)
                    np.add.at(dz, pid, y)
                    hit = np.unique(pid)
                    gy = gk[hit] * dz[hit]
                    if np.any(gy <= -1.0):
                        raise PositivityError("aggregated jump factor 1 + g * dZ <= 0")
                    inc[hit] += np.log1p(gy)
                else:
                    gy = gk[pid] * y
                    if np.any(gy <= -1.0):
                        bad = int(np.argmin(gy))
                        raise PositivityError(
                            f"jump factor 1 + g*Y = {1 + gy[bad]:.6g} <= 0 (g={gk[pid][bad]:.6g}, Y={y[bad]:.6g})"
                        )
                    np.add.at(inc, pid, np.log1p(gy))
        cur = cur * np.exp(inc)
        if record:
            buf[:, m + k + 1] = cur
        else:
            buf[:, k % m1] = cur
    return (buf if record else cur), accepted


def _jump_side_values(model, buf, m, dt, t0, jumps):
    """Left limits and post-jump values of the interpolated scheme at each jump."""
    if len(jumps) == 0:
        return np.empty(0), np.empty(0)
    p, k = jumps.path, jumps.step
    xd = buf[p, k]
    fk = model.f(xd)
    gk = model.g(xd)
    logj = np.log1p(gk * jumps.mark)
    key = k * (buf.shape[0] + 1) + p
    start = np.r_[True, key[1:] != key[:-1]]
    cs = np.cumsum(logj)
    first = np.maximum.accumulate(np.where(start, np.arange(key.size), 0))
    excl = cs - logj - (cs[first] - logj[first])
    tk = t0 + k * dt
    left = buf[p, m + k] * np.exp(fk * (jumps.time - tk) + excl)
    return left, left * np.exp(logj)


def _draw_block(model, t0, t1, seed, start, stop, dynamics=None):
    streams, uniforms = [], []
    lam = None if dynamics is None or dynamics.majorant is None else dynamics.majorant
    for i in range(start, stop):
        rng = path_rng(seed, i)
        st = JumpStream.draw(model.levy, t0, t1, rng, intensity=lam)
        streams.append(st)
        if lam is not None:
            uniforms.append(rng.random(len(st)))
    return streams, (uniforms if lam is not None else None)


def _to_paths(model, buf, m, dt, t0, jumps, accepted):
    P = buf.shape[0]
    n = buf.shape[1] - m - 1
    times = t0 + np.arange(n + 1) * dt
    kept = jumps.subset(accepted)
    left, right = _jump_side_values(model, buf, m, dt, t0, kept)
    order = np.lexsort((kept.time, kept.path))
    bounds = np.searchsorted(kept.path[order], np.arange(P + 1))
    paths = []
    for i in range(P):
        sel = order[bounds[i] : bounds[i + 1]]
        paths.append(
            SimPath(
                times=times.copy(),
                values=buf[i, m:].copy(),
                dt=dt,
                delay=m * dt,
                prefix_values=buf[i, : m + 1].copy(),
                jump_times=kept.time[sel],
                jump_marks=kept.mark[sel],
                jump_values_left=left[sel],
                jump_values=right[sel],
            )
        )
    return paths


def phi_prefix(model, dt):
    m = steps_of(model.delay, dt, "delay")
    return model.phi(-model.delay + np.arange(m + 1) * dt)


def log_em_path(model, grid, jumps, *, jump_mode="per_jump", validate=True):
    """One logarithmic Euler-Maruyama path driven by a given jump stream."""
    if validate:
        require_valid(model)
    jumps = jumps if isinstance(jumps, JumpStream) else JumpStream(*jumps)
    if len(jumps) and (jumps.times[0] <= 0 or jumps.times[-1] > grid.T + 1e-12):
        raise ValueError("jump times must lie in (0, T]")
    dt = grid.dt
    prefix = phi_prefix(model, dt)[None, :]
    flat = _flatten([jumps], 0.0, dt, grid.n)
    buf, acc = _march(model, dt, grid.n, prefix, flat, jump_mode=jump_mode)
    return _to_paths(model, buf, prefix.shape[1] - 1, dt, 0.0, flat, acc)[0]


def _run_block(model, grid, seed, start, stop, jump_mode):
    dt = grid.dt
    streams, _ = _draw_block(model, 0.0, grid.T, seed, start, stop)
    prefix = np.broadcast_to(phi_prefix(model, dt), (stop - start, grid.delay_steps(model.delay) + 1))
    flat = _flatten(streams, 0.0, dt, grid.n)
    buf, acc = _march(model, dt, grid.n, prefix, flat, jump_mode=jump_mode)
    return _to_paths(model, buf, prefix.shape[1] - 1, dt, 0.0, flat, acc)


def map_blocks(func, n_paths, threads=1, block_size=BLOCK_SIZE):
    """Apply ``func(start, stop)`` to fixed blocks; results come back in block order."""
    blocks = block_bounds(n_paths, block_size)
    if threads is None or threads <= 1 or len(blocks) == 1:
        return [func(a, b) for a, b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: func(*ab), blocks))


def simulate_ensemble(model, grid, n_paths, seed, *, threads=1, jump_mode="per_jump", validate=True):
    """Simulate ``n_paths`` independent scheme paths.

    Path ``i`` uses the stream keyed by ``(seed, i)``, so the ensemble is the
    same for any thread count or batching.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if validate:
        require_valid(model)

    def work(a, b):
        try:
            return _run_block(model, grid, seed, a, b, jump_mode)
        except PositivityError as exc:
            raise PositivityError(f"paths {a}..{b - 1}: {exc}") from exc

    out = []
    for block in map_blocks(work, n_paths, threads):
        out.extend(block)
    return out


def interpolate(path, model, t, jumps=None):
    """Continuous interpolation of a scheme path at time ``t``.

    For ``t <= 0`` this is the initial segment; otherwise the value at the
    last grid point before ``t`` is carried forward with the frozen delayed
    coefficients and the jumps in ``(t_k, t]``.
    """
    jumps = path.jumps if jumps is None else jumps
    t0 = path.times[0]
    if t < t0 - path.delay - 1e-12 or t > path.times[-1] + 1e-12:
        raise RangeError(f"t={t} outside [{t0 - path.delay}, {path.times[-1]}]")
    if t <= t0:
        if t0 == 0.0:
            return float(model.phi(t))
        idx = (t - (t0 - path.delay)) / path.dt
        return float(np.interp(t, path.prefix_times, path.prefix_values)) if abs(idx - round(idx)) > 1e-9 else float(
            path.prefix_values[int(round(idx))]
        )
    q = (t - t0) / path.dt
    k = int(round(q)) if abs(q - round(q)) < 1e-9 else int(math.floor(q))
    k = min(k, path.values.size - 1)
    base = path.values[k]
    if k == path.values.size - 1 or abs(t - path.times[k]) < 1e-15:
        return float(base)
    xd = path.delayed_values()[k]
    fk = float(model.f(xd))
    gk = float(model.g(xd))
    sel = (jumps.times > path.times[k]) & (jumps.times <= t + 1e-15)
    return float(base * math.exp(fk * (t - path.times[k]) + np.sum(np.log1p(gk * jumps.marks[sel]))))


# ---------------------------------------------------------------------------
# reference solution


@dataclass
class ReferencePath:
    """Exact-representation solution sampled on a node set.

    ``left`` are left limits, ``right`` the càdlàg values at ``nodes``.
    """

    nodes: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def at(self, t, side="right"):
        idx = np.searchsorted(self.nodes, t)
        idx = np.clip(idx, 0, self.nodes.size - 1)
        # snap to the closest node
        lower = np.clip(idx - 1, 0, self.nodes.size - 1)
        pick = np.where(np.abs(self.nodes[lower] - t) < np.abs(self.nodes[idx] - t), lower, idx)
        return (self.left if side == "left" else self.right)[pick]


def exact_reference(model, fine_grid, jumps):
    """Reference solution of the delay equation for a fixed jump stream.

    The solution is built one delay interval at a time.  On each interval the
    delayed argument is known from the previous interval, the drift integral
    is integrated with the trapezoidal rule on the fine grid refined by every
    jump time shifted by whole delays, and each jump multiplies by
    ``1 + g(S(tau - b)-) Y`` using the exact delayed state.
    """
    b = model.delay
    dt = fine_grid.dt
    m = fine_grid.delay_steps(b)
    T = fine_grid.T
    tau = np.asarray(jumps.times, dtype=float)
    ymark = np.asarray(jumps.marks, dtype=float)
    kj = np.maximum(np.ceil(tau / b - 1e-12).astype(np.int64) - 1, 0)
    off = tau - kj * b
    base = np.arange(m + 1) * dt
    O = np.unique(np.concatenate([base, off]))
    # merge offsets that coincide with grid nodes up to rounding
    keep = np.r_[True, np.diff(O) > 1e-13 * max(b, 1.0)]
    O = O[keep]
    jnode = np.clip(np.searchsorted(O, off - 1e-13 * max(b, 1.0)), 0, O.size - 1)
    n_int = int(math.ceil(T / b - 1e-9))
    h = np.diff(O)

    prev_left = model.phi(O - b)
    prev_right = prev_left.copy()
    x0 = model.phi.start
    all_nodes, all_left, all_right = [], [], []
    carry_left = x0
    for k in range(n_int):
        fl = model.f(prev_left)
        fr = model.f(prev_right)
        panels = 0.5 * (fr[:-1] + fl[1:]) * h
        jl = np.zeros(O.size)
        sel = kj == k
        if np.any(sel):
            gy = model.g(prev_left[jnode[sel]]) * ymark[sel]
            if np.any(gy <= -1.0):
                raise PositivityError("reference jump factor 1 + g*Y <= 0")
            np.add.at(jl, jnode[sel], np.log1p(gy))
        log_left = math.log(x0) + np.r_[0.0, np.cumsum(panels)] + np.r_[0.0, np.cumsum(jl)[:-1]]
        log_right = log_left + jl
        left = np.exp(log_left)
        right = np.exp(log_right)
        left[0] = carry_left
        times = k * b + O
        upto = times <= T + 1e-12 * max(T, 1.0)
        all_nodes.append(times[upto] if k == 0 else times[upto][1:])
        all_left.append(left[upto] if k == 0 else left[upto][1:])
        all_right.append(right[upto] if k == 0 else right[upto][1:])
        x0 = right[-1]
        carry_left = left[-1]
        prev_left, prev_right = left, right
    return ReferencePath(np.concatenate(all_nodes), np.concatenate(all_left), np.concatenate(all_right))


def exact_path(model, fine_grid, jumps):
    """Reference solution sampled on ``fine_grid`` and at the jump times."""
    jumps = jumps if isinstance(jumps, JumpStream) else JumpStream(*jumps)
    ref = exact_reference(model, fine_grid, jumps)
    times = fine_grid.times
    dt = fine_grid.dt
    return SimPath(
        times=times,
        values=ref.at(times),
        dt=dt,
        delay=model.delay,
        prefix_values=phi_prefix(model, dt),
        jump_times=jumps.times.copy(),
        jump_marks=jumps.marks.copy(),
        jump_values_left=ref.at(jumps.times, "left"),
        jump_values=ref.at(jumps.times, "right"),
    )
