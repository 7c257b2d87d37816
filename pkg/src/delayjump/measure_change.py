"""Market price of risk, the change to the martingale measure and Q-simulation.

Under ``Q`` the jump intensity becomes ``lambda_Q(t) = (1 - theta(t)) lambda``
with marks unchanged.  With the default ("derived") convention

    theta(x) = 1 + (f(x) - r) / (g(x) lambda L),    L = E[Y],

which is the unique value that makes ``exp(-r t) S(t)`` a Q-martingale for the
implemented dynamics.  The literal formula ``(f + g - r) / (lambda L g)`` is
available as ``convention="paper"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._reports import AdmissibilityReport
from .engine import (
    SimPath,
    _draw_block,
    _flatten,
    _march,
    _step_index,
    _to_paths,
    map_blocks,
    phi_prefix,
    steps_of,
)
from .exceptions import (
    AdmissibilityError,
    DegenerateMarketError,
    DomainError,
    HistoryError,
    PositivityError,
    ThinningError,
)
from .jump_measure import mean_jump

EPS_THETA = 1e-6
CONVENTIONS = ("derived", "paper")


@dataclass(frozen=True)
class MarketSpec:
    """Risk-free rate, strike, maturity and valuation time."""

    r: float
    K: float
    T: float
    t: float = 0.0

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("strike must be positive")
        if not self.T > 0:
            raise ValueError("maturity must be positive")
        if not 0.0 <= self.t <= self.T:
            raise ValueError("valuation time must lie in [0, T]")

    @property
    def tau(self):
        return self.T - self.t


@dataclass(frozen=True)
class HistoryPath:
    """Observed prices on ``[t - b, t]`` sampled every ``dt``."""

    t: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size < 2:
            raise HistoryError("history needs at least two samples")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise HistoryError("history values must be finite and positive")
        if not self.dt > 0:
            raise HistoryError("history spacing must be positive")
        object.__setattr__(self, "values", v)

    @property
    def span(self):
        return (self.values.size - 1) * self.dt

    @property
    def times(self):
        return self.t - self.span + np.arange(self.values.size) * self.dt

    @property
    def current(self):
        return float(self.values[-1])

    def window(self, delay):
        """Values on exactly ``[t - delay, t]``; HistoryError if not covered."""
        try:
            m = steps_of(delay, self.dt, "delay")
        except ValueError as exc:
            raise HistoryError(str(exc)) from None
        if m + 1 > self.values.size:
            raise HistoryError(
                f"history covers [{self.t - self.span:g}, {self.t:g}] but [{self.t - delay:g}, {self.t:g}] is needed"
            )
        return self.values[-(m + 1):]

    @classmethod
    def from_phi(cls, model, dt):
        """History at ``t = 0`` given by the initial segment."""
        return cls(0.0, dt, phi_prefix(model, dt))

    @classmethod
    def from_path(cls, path, t):
        """Cut the window ``[t - b, t]`` out of a simulated grid path."""
        k = steps_of(t - path.times[0], path.dt, "valuation time")
        full = np.concatenate([path.prefix_values, path.values[1:]])
        m = path.delay_steps
        return cls(float(path.times[k]), path.dt, full[k : k + m + 1])


# ---------------------------------------------------------------------------
# theta


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"theta convention must be one of {CONVENTIONS}, got {convention!r}")


def _theta_from(fx, gx, r, lam, L, convention):
    denom = gx * lam * L
    if convention == "derived":
        return 1.0 + (fx - r) / denom
    return (fx + gx - r) / denom


def theta(model, r, delayed_value, convention="derived"):
    """Market price of risk at delayed state ``x = S(t - b)``."""
    _check_convention(convention)
    x = np.asarray(delayed_value, dtype=float)
    fx, gx = model.f(x), model.g(x)
    lam, L = model.levy.intensity, mean_jump(model.levy)
    if np.any(gx * lam * L == 0):
        raise DegenerateMarketError("g(x) * lambda * L = 0: the jump risk driver vanishes")
    out = _theta_from(fx, gx, r, lam, L, convention)
    return float(out) if out.ndim == 0 else out


def theta_bounds(model, r, convention="derived"):
    """``(inf theta, sup theta)`` over the declared coefficient box.

    The map is linear-fractional in ``(f, g)``, so extremes sit at corners as
    long as the ``g`` range excludes zero.  Returns ``(nan, nan)`` for
    ``g = 0`` (no measure change) and ``(-inf, inf)`` if the range crosses 0.
    """
    _check_convention(convention)
    g_lo, g_hi = model.g.lower, model.g.upper
    if g_lo == 0.0 and g_hi == 0.0:
        return math.nan, math.nan
    lam, L = model.levy.intensity, mean_jump(model.levy)
    if L == 0.0 or g_lo <= 0.0 <= g_hi:
        return -math.inf, math.inf
    vals = [
        _theta_from(fv, gv, r, lam, L, convention)
        for fv in (model.f.lower, model.f.upper)
        for gv in (g_lo, g_hi)
    ]
    return min(vals), max(vals)


class ThetaProcess:
    """Evaluator ``x -> theta(x)`` with bounds from the declared coefficients."""

    def __init__(self, model, r, convention="derived"):
        _check_convention(convention)
        self.model = model
        self.r = float(r)
        self.convention = convention
        self.lower, self.upper = theta_bounds(model, r, convention)

    def __call__(self, delayed_value):
        return theta(self.model, self.r, delayed_value, self.convention)

    def along(self, path):
        """theta at the left grid point of every step of a path."""
        return self(path.delayed_values())

    @property
    def majorant(self):
        """Thinning majorant ``lambda (1 - theta_lo)``."""
        return self.model.levy.intensity * (1.0 - self.lower)


def check_admissibility(model, r, eps_theta=EPS_THETA, convention="derived"):
    """Check ``sup theta <= 1 - eps_theta`` from the declared coefficient bounds."""
    report = AdmissibilityReport()
    lo, hi = theta_bounds(model, r, convention)
    report.inf_theta, report.sup_theta = lo, hi
    lam = model.levy.intensity
    L = mean_jump(model.levy)

    if math.isnan(hi):
        report.add("theta_defined", True, 0.0, "g = 0: riskless asset, no measure change needed")
        return report
    if L == 0.0:
        report.add("theta_defined", False, L, "mean jump L = 0: theta undefined")
        return report
    finite = math.isfinite(hi) and math.isfinite(lo)
    report.add(
        "theta_defined",
        finite,
        hi,
        "theta bounded on the declared range"
        if finite
        else f"declared g range [{model.g.lower}, {model.g.upper}] contains 0: theta unbounded",
    )
    ok = hi <= 1.0 - eps_theta
    report.add(
        "theta_below_one",
        ok,
        hi,
        f"sup theta = {hi:.6g} <= 1 - {eps_theta}" if ok else f"sup theta = {hi:.6g} exceeds 1 - {eps_theta}",
    )
    if finite and ok:
        # (1 - th) ln(1 - th) + th is convex with minimum 0 at th = 0
        nov = max((1 - th) * math.log(1 - th) + th for th in (lo, hi)) * lam
        report.add("novikov", math.isfinite(nov), nov, "Novikov integrand bound per unit time")
    else:
        report.add("novikov", False, math.inf, "Novikov bound unavailable (theta not bounded below 1)")
    if lo < 0:
        report.warnings.append(f"inf theta = {lo:.6g} < 0: Q raises the jump intensity")
    return report


def require_admissible(model, r, convention="derived", eps_theta=EPS_THETA):
    report = check_admissibility(model, r, eps_theta, convention)
    if not report.passed:
        raise AdmissibilityError(report)
    return report


# ---------------------------------------------------------------------------
# Q dynamics


class QDynamics:
    """Step rates for the Q-scheme: drift and thinning acceptance.

    Between jumps the log-price grows at ``r - g lambda_Q L`` which makes the
    discounted price a martingale under the Q intensity ``lambda_Q``.  Steps
    where ``g = 0`` grow at ``r`` and carry no jump risk.
    """

    def __init__(self, model, r, convention="derived"):
        self.proc = ThetaProcess(model, r, convention)
        self.r = float(r)
        self.lam = model.levy.intensity
        self.L = mean_jump(model.levy)
        if math.isnan(self.proc.lower):
            self.theta_lo = 0.0
        else:
            self.theta_lo = self.proc.lower
        if not math.isfinite(self.theta_lo):
            raise ThinningError("no finite thinning majorant: theta unbounded below")
        self.majorant = self.lam * (1.0 - self.theta_lo)
        self.convention = convention

    def rates(self, x_del, fk, gk):
        live = gk != 0.0
        th = np.zeros_like(gk)
        if np.any(live):
            th[live] = _theta_from(fk[live], gk[live], self.r, self.lam, self.L, self.convention)
        tol = 1e-12 * max(1.0, abs(self.theta_lo))
        if np.any(th[live] < self.theta_lo - tol):
            raise ThinningError(f"theta = {th[live].min():.6g} below the majorant bound {self.theta_lo:.6g}")
        if np.any(th[live] >= 1.0):
            raise ThinningError(f"theta = {th[live].max():.6g} >= 1: Q intensity not positive")
        lam_q = (1.0 - th) * self.lam
        drift = self.r - gk * lam_q * self.L
        accept = np.where(live, (1.0 - th) / (1.0 - self.theta_lo), 0.0)
        return drift, accept


def _q_block(model, market, dt, n_steps, prefix, seed, start, stop, dyn, record):
    t0 = market.t
    streams, uniforms = _draw_block(model, t0, market.T, seed, start, stop, dyn)
    flat = _flatten(streams, t0, dt, n_steps, uniforms)
    pref = np.broadcast_to(prefix, (stop - start, prefix.size))
    buf, acc = _march(model, dt, n_steps, pref, flat, dynamics=dyn, record=record)
    if record:
        return _to_paths(model, buf, prefix.size - 1, dt, t0, flat, acc)
    return buf


def simulate_q_ensemble(
    model,
    market,
    grid,
    n_paths,
    seed,
    *,
    history=None,
    threads=1,
    record=True,
    convention="derived",
    check=True,
):
    """Q-paths on ``[market.t, T]`` started from a history window.

    Returns a list of :class:`SimPath` when ``record`` is set, else the array
    of terminal values.  Path ``i`` draws majorant arrivals, marks and then
    acceptance uniforms from the stream keyed by ``(seed, i)``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if check:
        require_admissible(model, market.r, convention)
    dt = grid.dt
    if history is None:
        if market.t != 0.0:
            raise HistoryError("a history is required when t > 0")
        history = HistoryPath.from_phi(model, dt)
    if abs(history.t - market.t) > 1e-12 * max(1.0, market.T):
        raise HistoryError(f"history ends at {history.t}, valuation time is {market.t}")
    if abs(history.dt - dt) > 1e-12 * dt:
        raise HistoryError("history spacing differs from the simulation step")
    prefix = history.window(model.delay)
    n_steps = steps_of(market.T - market.t, dt, "time to maturity") if market.t < market.T else 0
    if n_steps == 0:
        val = history.current
        if record:
            return [
                SimPath(np.array([market.t]), np.array([val]), dt, model.delay, prefix.copy())
                for _ in range(n_paths)
            ]
        return np.full(n_paths, val)
    dyn = QDynamics(model, market.r, convention)

    def work(a, b):
        try:
            return _q_block(model, market, dt, n_steps, prefix, seed, a, b, dyn, record)
        except (PositivityError, ThinningError) as exc:
            raise type(exc)(f"paths {a}..{b - 1}: {exc}") from exc

    blocks = map_blocks(work, n_paths, threads)
    if record:
        return [p for blk in blocks for p in blk]
    return np.concatenate(blocks)


def simulate_q_path(model, market, grid, seed, *, index=0, history=None, convention="derived"):
    """One Q-path; identical to path ``index`` of the Q-ensemble with ``seed``."""
    dt = grid.dt
    if history is None:
        if market.t != 0.0:
            raise HistoryError("a history is required when t > 0")
        history = HistoryPath.from_phi(model, dt)
    require_admissible(model, market.r, convention)
    dyn = QDynamics(model, market.r, convention)
    prefix = history.window(model.delay)
    n_steps = steps_of(market.T - market.t, dt, "time to maturity")
    return _q_block(model, market, dt, n_steps, prefix, seed, index, index + 1, dyn, True)[0]


# ---------------------------------------------------------------------------
# density


def radon_nikodym(model, r, path, convention="derived"):
    """Girsanov density ``dQ/dP`` on ``[0, T]`` along a P-path.

    ``exp(sum_i ln(1 - theta(tau_i)) + sum_k theta_k lambda dt)`` with theta
    frozen at the left grid point of each step, as in the scheme.
    """
    proc = ThetaProcess(model, r, convention)
    th = np.asarray(proc.along(path), dtype=float)
    lam = model.levy.intensity
    n = th.size
    log_d = float(np.sum(th) * lam * path.dt)
    if path.jump_times.size:
        k = _step_index(path.jump_times, path.times[0], path.dt, n)
        one_minus = 1.0 - th[k]
        if np.any(one_minus <= 0):
            raise DomainError("1 - theta <= 0 at a jump time: density undefined")
        log_d += float(np.sum(np.log(one_minus)))
    return math.exp(log_d)


def radon_nikodym_ensemble(model, r, paths, convention="derived"):
    return np.array([radon_nikodym(model, r, p, convention) for p in paths])


__all__ = [
    "MarketSpec",
    "HistoryPath",
    "ThetaProcess",
    "QDynamics",
    "theta",
    "theta_bounds",
    "check_admissibility",
    "require_admissible",
    "simulate_q_path",
    "simulate_q_ensemble",
    "radon_nikodym",
    "radon_nikodym_ensemble",
]
