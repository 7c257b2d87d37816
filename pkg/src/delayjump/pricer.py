"""European call prices: Monte Carlo under Q, Fourier inversion in the last
delay period and Black-Scholes baselines.

In the last delay period every delayed argument ``S(u - b)``, ``u in [t, T]``,
is already observed, so the coefficients are known functions of time and

    S(T) = S(t) exp(r (T - t)) A exp(Y)

where ``A`` is deterministic and ``Y`` is a compound Poisson variable with an
explicit characteristic function.  The Fourier pricer inverts that transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, sici, spherical_jn

from ._rng import path_rng
from .engine import steps_of
from .exceptions import DomainError, PreconditionError, QuadratureError
from .jump_measure import _quad_support, check_log_domain, complex_jump_integral
from .measure_change import (
    HistoryPath,
    ThetaProcess,
    require_admissible,
    simulate_q_ensemble,
)

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
_ANCHOR = 64
# Lagrange-to-Legendre map on the GL nodes: a_m = sum_j _LEG[m, j] G(s_j)
_LEG = (2 * np.arange(_GL_ORDER)[:, None] + 1) / 2 * np.polynomial.legendre.legvander(_GL_X, _GL_ORDER - 1).T * _GL_W


def _filon_weights(omega):
    """Weights ``W_j`` with ``int_{-1}^{1} exp(-i omega s) G(s) ds ~ sum_j W_j G(s_j)``.

    ``G`` is replaced by its degree-15 interpolant on the Gauss-Legendre
    nodes; the Legendre moments are ``2 (-i)^m j_m(omega)``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    m = np.arange(_GL_ORDER)
    mom = 2.0 * (-1j) ** m * spherical_jn(m[None, :], np.abs(omega)[:, None])
    # j_m is even/odd in omega: moments of negative omega are conjugates
    mom = np.where(omega[:, None] < 0, np.conj(mom), mom)
    return mom @ _LEG


@dataclass
class PricingResult:
    """Price with its Monte-Carlo standard error (0 for deterministic methods)."""

    price: float
    stderr: float
    method: str
    n_paths: int | None = None
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "price": self.price,
            "stderr": self.stderr,
            "method": self.method,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "diagnostics": self.diagnostics,
        }


def _intrinsic(S, K, r, tau):
    return max(S - K * math.exp(-r * tau), 0.0)


# ---------------------------------------------------------------------------
# Monte Carlo


def mc_call_prices(terminal, strikes, r, tau, put=False):
    """Discounted mean payoff and stderr for each strike on shared terminals."""
    st = np.asarray(terminal, dtype=float)
    ks = np.atleast_1d(np.asarray(strikes, dtype=float))
    disc = math.exp(-r * tau)
    prices, errs = np.empty(ks.size), np.empty(ks.size)
    for j, k in enumerate(ks):
        pay = np.maximum(k - st, 0.0) if put else np.maximum(st - k, 0.0)
        prices[j] = disc * pay.mean()
        errs[j] = disc * pay.std(ddof=1) / math.sqrt(pay.size) if pay.size > 1 else 0.0
    return prices, errs


def q_terminals(model, market, grid, n_paths, seed, *, history=None, threads=1, convention="derived"):
    """Terminal Q-values ``S(T)`` of ``n_paths`` paths (no path storage)."""
    return simulate_q_ensemble(
        model, market, grid, n_paths, seed, history=history, threads=threads, record=False, convention=convention
    )


def _riskless(model):
    return model.g.lower == 0.0 and model.g.upper == 0.0


def price_mc_conditional(model, market, history, grid, n_paths, seed, *, threads=1, convention="derived"):
    """Monte-Carlo call price at ``market.t`` given the observed history."""
    require_admissible(model, market.r, convention)
    tau = market.T - market.t
    if tau == 0.0 or _riskless(model):
        S = history.current
        if tau == 0.0:
            val = max(S - market.K, 0.0)
        else:
            val = _intrinsic(S, market.K, market.r, tau)
        return PricingResult(val, 0.0, "mc", n_paths, seed, {"branch": "deterministic"})
    st = q_terminals(model, market, grid, n_paths, seed, history=history, threads=threads, convention=convention)
    p, e = mc_call_prices(st, market.K, market.r, tau)
    return PricingResult(float(p[0]), float(e[0]), "mc", n_paths, seed, {"steps": steps_of(tau, grid.dt)})


def price_mc(model, market, grid, n_paths, seed, *, threads=1, convention="derived"):
    """Monte-Carlo call price at inception under the martingale measure."""
    if market.t != 0.0:
        raise PreconditionError("price_mc prices at t = 0; use price_mc_conditional for t > 0")
    history = HistoryPath.from_phi(model, grid.dt)
    return price_mc_conditional(model, market, history, grid, n_paths, seed, threads=threads, convention=convention)


# ---------------------------------------------------------------------------
# Fourier


class FourierContext:
    """Law of ``Y`` over ``[t, T]`` given the history on ``[t - b, t]``.

    The time integrals use the left-point rule on the history grid, the same
    piecewise-constant coefficients that the Q-scheme sees, so the Fourier and
    Monte-Carlo prices target the same law.
    """

    def __init__(self, model, market, history, convention="derived"):
        tau = market.T - market.t
        if tau < -1e-12 or tau > model.delay * (1 + 1e-12):
            raise PreconditionError(
                f"valuation time {market.t} is outside the last delay period [{market.T - model.delay}, {market.T}]"
            )
        self.model, self.market, self.history = model, market, history
        self.dt = history.dt
        window = history.window(model.delay)
        self.n_steps = steps_of(tau, self.dt, "time to maturity") if tau > 0 else 0
        x = window[: self.n_steps]
        gk = model.g(x)
        live = gk != 0.0
        th = np.zeros_like(gk)
        if np.any(live):
            th[live] = ThetaProcess(model, market.r, convention)(x[live])
        if np.any(th >= 1.0):
            raise DomainError("theta >= 1 on the history: Q intensity not positive")
        self.g = gk
        self.lam_q = np.where(live, (1.0 - th) * model.levy.intensity, 0.0)
        self.dist = model.levy.dist
        for gv in np.unique(gk[live]):
            check_log_domain(self.dist, gv)

        # distinct loadings with their aggregated Q-mass
        gl = gk[live]
        mass = self.lam_q[live] * self.dt
        self.groups, inv = np.unique(gl, return_inverse=True)
        self.group_mass = np.bincount(inv, weights=mass, minlength=self.groups.size) if gl.size else np.empty(0)
        self.Lambda = float(self.group_mass.sum())
        self._moments = [self._log_moments(gv) for gv in self.groups]
        self.D = -float(sum(w * mo[0] for w, mo in zip(self.group_mass, self._moments)))
        self.log_a = float(
            sum(w * (mo[0] - gv * self.dist.mean()) for w, gv, mo in zip(self.group_mass, self.groups, self._moments))
        )
        self.var_y = float(sum(w * mo[1] for w, mo in zip(self.group_mass, self._moments)))
        self.g_sq = float(np.sum(gk**2) * self.dt)
        self._nodes_cache = {}

    # -- scalar building blocks -------------------------------------------

    def _log_moments(self, gv):
        m1 = _quad_support(lambda z: math.log1p(gv * z) * self.dist.pdf(z), self.dist)
        m2 = _quad_support(lambda z: math.log1p(gv * z) ** 2 * self.dist.pdf(z), self.dist)
        return m1, m2

    @property
    def A(self):
        return math.exp(self.log_a)

    @property
    def deterministic(self):
        return self.g_sq < 1e-14 or self.var_y < 1e-14

    def char_exponent(self, c):
        """``log E[exp(c Y)]`` by direct quadrature of each loading."""
        c = complex(c)
        if c == 0:
            return 0j
        total = 0j
        for w, gv in zip(self.group_mass, self.groups):
            total += w * complex_jump_integral(self.dist, gv, c)
        return total

    # -- Psi(xi) = E_mix[(1 + g Y)^(k + i xi)] ----------------------------

    def _nodes(self, xi_max):
        """Quadrature nodes in ``x = ln(1 + g z)`` fine enough up to ``xi_max``."""
        key = float(xi_max)
        if key in self._nodes_cache:
            return self._nodes_cache[key]
        xs, ws = [], []
        rates = [eta for p, eta in self.dist.pos_terms if p > 0] + [th for q, th, _ in self.dist.neg_terms if q > 0]
        rmax = max(rates)
        for w, gv in zip(self.group_mass, self.groups):
            for a, b in self.dist.breakpoints():
                lo, hi = math.log1p(gv * a), math.log1p(gv * b)
                n_pan = int(max(4, math.ceil(rmax * (b - a) / 3.0), math.ceil(xi_max * abs(hi - lo) / 3.0)))
                # split in x-space so the phase per panel is uniform
                edges = np.linspace(lo, hi, n_pan + 1)
                mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
                half = 0.5 * (edges[1:] - edges[:-1])[:, None]
                x = (mid + half * _GL_X).ravel()
                z = np.expm1(x) / gv
                jac = np.exp(x) / abs(gv)
                wt = (np.abs(half) * _GL_W).ravel() * jac * self.dist.pdf(z) * (w / self.Lambda)
                xs.append(x)
                ws.append(wt)
        out = (np.concatenate(xs), np.concatenate(ws))
        self._nodes_cache[key] = out
        return out

    def psi(self, ks, xi, xi_max=None):
        """``E_mix[(1 + g Y)^(k + i xi)]`` for each ``k`` in ``ks`` (rows)."""
        ks = np.atleast_1d(ks)
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        x, w = self._nodes(float(xi.max()) if xi_max is None else xi_max)
        wk = np.stack([w * np.exp(k * x) for k in ks], axis=1)
        out = np.empty((xi.size, ks.size), dtype=complex)
        step = max(1, int(2_000_000 // max(x.size, 1)))
        for s in range(0, xi.size, step):
            out[s : s + step] = np.exp(1j * np.outer(xi[s : s + step], x)) @ wk
        return out.T

    def remainder(self, ks, xi, xi_max=None):
        """Transform of the three-or-more-jump part, weighted by ``exp(k Y)``.

        Rows follow ``ks``.
        """
        ks = np.atleast_1d(ks)
        return self._remainder_from_psi(ks, self.psi(ks, xi, xi_max))

    # -- tails --------------------------------------------------------------

    def _single_jump_tail(self, y):
        """Rows ``k = 0, 1`` of ``sum_g mass_g E[(1 + g Y)^k ; ln(1 + g Y) >= y] / Lambda``."""
        y = np.asarray(y, dtype=float)
        out = np.zeros((2,) + y.shape)
        mean = self.dist.mean()
        for w, gv in zip(self.group_mass, self.groups):
            zc = np.clip(np.expm1(np.minimum(y, 700.0)) / gv, -1e300, 1e300)
            p_ge, e_ge = self.dist.upper_tail(zc)
            if gv > 0:
                prob, ey = p_ge, e_ge
            else:
                prob, ey = 1.0 - p_ge, mean - e_ge
            out[0] += w * prob
            out[1] += w * (prob + gv * ey)
        return out / self.Lambda

    def _x_breaks(self, gv):
        return sorted(math.log1p(gv * zb) for piece in self.dist.breakpoints() for zb in piece)

    def _two_jump_tail(self, y):
        """Rows ``k = 0, 1`` of ``E_mix[exp(k (X1 + X2)); X1 + X2 >= y]``.

        Gauss-Legendre on the first jump, with pieces split where the
        single-jump tail has kinks; all nodes for one ``y`` go through a
        single vectorised tail evaluation.
        """
        y = np.atleast_1d(np.asarray(y, dtype=float))
        rates = [eta for p, eta in self.dist.pos_terms if p > 0] + [th for q, th, _ in self.dist.neg_terms if q > 0]
        rmax = max(rates)
        kinks = sorted({xb for gv in self.groups for xb in self._x_breaks(gv)})
        out = np.zeros((2, y.size))
        for j, yj in enumerate(y):
            xs, wts = [], []
            for w1, g1 in zip(self.group_mass, self.groups):
                xb = self._x_breaks(g1)
                lo, hi = xb[0], xb[-1]
                cuts = sorted({lo, hi, *xb, *[yj - kx for kx in kinks if lo < yj - kx < hi]})
                for a, b in zip(cuts[:-1], cuts[1:]):
                    if b <= a:
                        continue
                    za, zb = math.expm1(a) / g1, math.expm1(b) / g1
                    n_pan = max(4, int(math.ceil(rmax * abs(zb - za) / 2.0)))
                    edges = np.linspace(a, b, n_pan + 1)
                    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
                    half = 0.5 * (edges[1] - edges[0])
                    x = (mid + half * _GL_X).ravel()
                    z = np.expm1(x) / g1
                    xs.append(x)
                    wts.append(w1 * np.tile(half * _GL_W, n_pan) * np.exp(x) / abs(g1) * self.dist.pdf(z))
            x, wt = np.concatenate(xs), np.concatenate(wts)
            inner = self._single_jump_tail(yj - x)
            out[0, j] = np.sum(wt * inner[0])
            out[1, j] = np.sum(wt * np.exp(x) * inner[1])
        return out / self.Lambda

    def _psi_panels(self, ks, xi_max, n_panels):
        """``psi`` on the Gauss-Legendre nodes of ``n_panels`` equal panels.

        Panel ``p`` is panel 0 shifted by ``p * width``, so its phases follow
        from a running product instead of fresh complex exponentials; the
        product is re-anchored every ``_ANCHOR`` panels.
        """
        x, w = self._nodes(xi_max)
        wk = np.stack([w * np.exp(k * x) for k in ks], axis=1).astype(complex)
        width = xi_max / n_panels
        first = 0.5 * width * (1.0 + _GL_X)
        step = np.exp(1j * width * x)
        out = np.empty((n_panels, _GL_ORDER, len(ks)), dtype=complex)
        for p in range(n_panels):
            if p % _ANCHOR == 0:
                phase = np.exp(1j * np.outer(first + p * width, x))
            else:
                phase *= step
            out[p] = phase @ wk
        return out.reshape(-1, len(ks)).T

    def _remainder_from_psi(self, ks, psi):
        # e^z - 1 - z - z^2/2 without cancellation for small z
        z = self.Lambda * psi
        small = np.abs(z) < 1e-2
        series = z**3 / 6 + z**4 / 24 + z**5 / 120 + z**6 / 720
        rem = np.where(small, series, np.exp(z) - 1.0 - z - 0.5 * z**2)
        return np.exp(np.asarray(ks) * self.D - self.Lambda)[:, None] * rem

    def _x_span(self):
        lo, hi = 0.0, 0.0
        for gv in self.groups:
            xb = self._x_breaks(gv)
            lo, hi = min(lo, xb[0]), max(hi, xb[-1])
        return hi - lo

    def tails(self, w, tol=1e-8, xi_start=32.0, xi_cap=1e4):
        """Return ``(Q(Y >= w), E[exp(Y); Y >= w])`` for an array of ``w``.

        The no-jump atom and the one- and two-jump parts are computed
        directly.  The rest has a transform ``R`` decaying like ``xi^-3`` and
        is inverted by the Gil-Pelaez formula on ``[0, Xi]``.  Writing
        ``R(xi) = R(0) + xi G(xi)`` with ``G`` smooth, the ``R(0)`` part is a
        sine integral and ``G`` is interpolated on Gauss-Legendre panels with
        the phase ``exp(-i xi y)`` integrated exactly (Filon-Legendre), so the
        grid does not depend on the strike.  Panels double until two
        successive counts agree.

        Cost grows linearly in the number of distinct loadings on the history.
        """
        w = np.atleast_1d(np.asarray(w, dtype=float))
        lam, D = self.Lambda, self.D
        ks = np.array([0.0, 1.0])
        y = w - D
        p1 = self._single_jump_tail(y)
        p2 = self._two_jump_tail(y)
        base = [math.exp(k * D - lam) * ((0.0 >= y).astype(float) + lam * p1[j] + 0.5 * lam**2 * p2[j])
                for j, k in enumerate(ks)]
        rem0 = self.remainder(ks, np.array([0.0]), 1.0)[:, 0].real
        xi_max = xi_start
        while True:
            probe = np.linspace(0.9 * xi_max, xi_max, 8)
            # integrand ~ |R| / xi with R ~ xi^-3: tail <= |R(Xi)| / (3 pi)
            tail_est = float(np.max(np.abs(self.remainder(ks, probe, xi_max)))) / (3 * math.pi)
            if tail_est < tol or xi_max >= xi_cap:
                break
            xi_max = min(2 * xi_max, xi_cap)
        if tail_est >= tol:
            raise QuadratureError(f"transform tail {tail_est:.3g} above tolerance at Xi = {xi_max:g}")
        # G carries frequencies up to a few times the support width of one log-jump
        n_pan = max(8, int(math.ceil(xi_max * (3.0 * self._x_span() + 1.0) / 8.0)))
        sine_part = -np.outer(rem0, sici(xi_max * y)[0])
        prev = None
        for _ in range(6):
            width = xi_max / n_pan
            xi = (np.arange(n_pan)[:, None] * width + 0.5 * width * (1.0 + _GL_X)).ravel()
            rem = self._remainder_from_psi(ks, self._psi_panels(ks, xi_max, n_pan))
            G = ((rem - rem0[:, None]) / xi).reshape(2, n_pan, _GL_ORDER)
            W = _filon_weights(y * (0.5 * width))  # (ny, order)
            mids = (np.arange(n_pan) + 0.5) * width
            phase = np.exp(-1j * np.outer(y, mids))  # (ny, n_pan)
            val = np.stack(
                [np.imag(np.einsum("yp,pj,yj->y", phase, G[j], W)) * (0.5 * width) for j in range(2)]
            ) + sine_part
            if prev is not None and np.max(np.abs(val - prev)) < tol:
                break
            prev = val
            n_pan *= 2
        else:
            raise QuadratureError("xi-integral did not converge under panel doubling")
        self.last_diagnostics = {"xi_max": xi_max, "panels": n_pan, "tail_estimate": tail_est}
        t0, t1 = (base[j] + rem0[j] / 2.0 + val[j] / math.pi for j in range(2))
        return t0, t1

    def price(self, strikes, tol=1e-8, w_convention="derived"):
        """Call prices at ``market.t`` for an array of strikes.

        ``w_convention="paper"`` uses the printed threshold ``ln(K / A) - r T``,
        which drops the spot; it is kept for comparison only and is wrong
        unless ``S(t) = 1`` and ``t = 0``.
        """
        if w_convention not in ("derived", "paper"):
            raise ValueError(f"w_convention must be 'derived' or 'paper', got {w_convention!r}")
        ks = np.atleast_1d(np.asarray(strikes, dtype=float))
        mk = self.market
        S = self.history.current
        tau = mk.T - mk.t
        if tau == 0.0:
            return np.maximum(S - ks, 0.0)
        if self.deterministic or np.all(ks == 0):
            return np.maximum(S - ks * math.exp(-mk.r * tau), 0.0)
        v = np.full(ks.size, S)  # a zero strike pays S(T)
        live = ks > 0
        if np.any(live):
            if w_convention == "paper":
                w = np.log(ks[live] / self.A) - mk.r * mk.T
            else:
                w = np.log(ks[live] / (S * self.A)) - mk.r * tau
            t0, t1 = self.tails(w, tol=tol)
            v[live] = S * self.A * t1 - ks[live] * math.exp(-mk.r * tau) * t0
        return np.clip(v, 0.0, S)


def fourier_context(model, market, history, convention="derived"):
    require_admissible(model, market.r, convention)
    return FourierContext(model, market, history, convention)


def a_factor(model, market, history, convention="derived"):
    """Deterministic factor ``A`` over ``[t, T]``; at most 1."""
    return fourier_context(model, market, history, convention).A


def char_exponent(ctx, c):
    """``log E_Q[exp(c Y) | F_t]`` for complex ``c``."""
    return ctx.char_exponent(c)


def price_fourier(model, market, history, *, convention="derived", tol=1e-8, w_convention="derived"):
    """Call price at ``market.t`` in the last delay period by Fourier inversion."""
    ctx = fourier_context(model, market, history, convention)
    price = float(ctx.price(market.K, tol=tol, w_convention=w_convention)[0])
    diag = {"A": ctx.A, "Lambda": ctx.Lambda, "D": ctx.D, "w_convention": w_convention}
    if ctx.deterministic or market.t == market.T:
        diag["branch"] = "deterministic"
    else:
        diag.update(getattr(ctx, "last_diagnostics", {}))
    return PricingResult(price, 0.0, "fourier", None, None, diag)


# ---------------------------------------------------------------------------
# Black-Scholes baselines


def _norm_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def price_black_scholes(S0, K, r, sigma, tau):
    """Black-Scholes call price (vectorised over ``K``)."""
    if sigma < 0 or tau < 0:
        raise ValueError("sigma and tau must be non-negative")
    K = np.asarray(K, dtype=float)
    disc = math.exp(-r * tau)
    if sigma == 0 or tau == 0:
        out = np.maximum(S0 - K * disc, 0.0)
        return float(out) if out.ndim == 0 else out
    sd = sigma * math.sqrt(tau)
    with np.errstate(divide="ignore"):
        d1 = (np.log(S0 / K) + (r + 0.5 * sigma**2) * tau) / sd
    d2 = d1 - sd
    out = np.where(K > 0, S0 * _norm_cdf(d1) - K * disc * _norm_cdf(d2), S0)
    return float(out) if out.ndim == 0 else out


def gbm_terminals(S0, alpha, sigma, T, n, n_paths, seed):
    """Log-Euler terminal values of ``dS = S (alpha dt + sigma dW)``.

    Each path draws its ``n`` normal increments from its own keyed stream.
    """
    dt = T / n
    drift = (alpha - 0.5 * sigma**2) * dt
    vol = sigma * math.sqrt(dt)
    out = np.empty(n_paths)
    for i in range(n_paths):
        z = path_rng(seed, i).standard_normal(n) if vol > 0 else np.zeros(n)
        out[i] = S0 * math.exp(n * drift + vol * z.sum())
    return out


def price_bs_mc_paper_style(S0, alpha, sigma, r, K, T, n, n_paths, seed):
    """Monte-Carlo call under the real-world GBM drift, discounted at ``r``.

    Not a risk-neutral price unless ``alpha == r``; kept to reproduce the
    comparison column of the published tables.
    """
    if sigma == 0:
        val = max(S0 * math.exp(alpha * T) - K, 0.0) * math.exp(-r * T)
        return PricingResult(val, 0.0, "bs_paper", n_paths, seed, {"alpha": alpha})
    st = gbm_terminals(S0, alpha, sigma, T, n, n_paths, seed)
    p, e = mc_call_prices(st, K, r, T)
    return PricingResult(float(p[0]), float(e[0]), "bs_paper", n_paths, seed, {"alpha": alpha, "steps": n})


__all__ = [
    "PricingResult",
    "FourierContext",
    "fourier_context",
    "price_mc",
    "price_mc_conditional",
    "q_terminals",
    "mc_call_prices",
    "a_factor",
    "char_exponent",
    "price_fourier",
    "price_black_scholes",
    "gbm_terminals",
    "price_bs_mc_paper_style",
]
