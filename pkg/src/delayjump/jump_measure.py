"""Hyper-exponential jump marks and the Lévy measure ``nu(dz) = lam * f_Y(z) dz``.

Positive marks are a mixture of exponentials.  Negative marks are a mixture of
exponentials that may be truncated to ``(-R_j, 0)``; an untruncated negative
component (``R_j = inf``) makes the law unbounded below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exceptions import DomainError, QuadratureError

# density level below which the exponential tails are cut off
TAIL_DENSITY = 1e-14


@dataclass(frozen=True)
class JumpDistribution:
    """Mixture of (possibly truncated) exponential jump laws.

    Parameters
    ----------
    pos_terms : sequence of (weight, rate)
        Exponential components on ``[0, inf)``.
    neg_terms : sequence of (weight, rate, truncation)
        Exponential components on ``(-truncation, 0)``.  ``truncation`` may be
        ``math.inf``.
    """

    pos_terms: tuple = ()
    neg_terms: tuple = ()

    def __post_init__(self):
        pos = tuple((float(p), float(eta)) for p, eta in self.pos_terms)
        neg = []
        for term in self.neg_terms:
            if len(term) == 2:
                q, theta = term
                trunc = math.inf
            else:
                q, theta, trunc = term
            neg.append((float(q), float(theta), float(trunc)))
        neg = tuple(neg)
        object.__setattr__(self, "pos_terms", pos)
        object.__setattr__(self, "neg_terms", neg)

        if not pos and not neg:
            raise ValueError("jump distribution needs at least one component")
        for p, eta in pos:
            if p < 0 or not eta > 0:
                raise ValueError(f"invalid positive component (weight={p}, rate={eta})")
        for q, theta, trunc in neg:
            if q < 0 or not theta > 0 or not trunc > 0:
                raise ValueError(
                    f"invalid negative component (weight={q}, rate={theta}, truncation={trunc})"
                )
        total = sum(p for p, _ in pos) + sum(q for q, _, _ in neg)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {total!r}, expected 1")

    @classmethod
    def double_exponential(cls, p, eta, theta, truncation=math.inf):
        """Two-sided exponential law with ``P(Y >= 0) = p``."""
        return cls(pos_terms=((p, eta),), neg_terms=((1.0 - p, theta, truncation),))

    @property
    def unbounded_below(self):
        return any(q > 0 and math.isinf(r) for q, _, r in self.neg_terms)

    @property
    def support_lower(self):
        """Lower end ``-R`` of the support (``-inf`` when unbounded)."""
        active = [r for q, _, r in self.neg_terms if q > 0]
        return -max(active) if active else 0.0

    @property
    def support_upper(self):
        return math.inf if any(p > 0 for p, _ in self.pos_terms) else 0.0

    def _neg_norm(self, theta, trunc):
        return -math.expm1(-theta * trunc) if math.isfinite(trunc) else 1.0

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        pos = z >= 0
        for p, eta in self.pos_terms:
            out += np.where(pos, p * eta * np.exp(-eta * np.where(pos, z, 0.0)), 0.0)
        for q, theta, trunc in self.neg_terms:
            inside = (z < 0) & (z > -trunc)
            zz = np.where(inside, z, 0.0)
            out += np.where(inside, q * theta / self._neg_norm(theta, trunc) * np.exp(theta * zz), 0.0)
        return out

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for p, eta in self.pos_terms:
            out += np.where(z >= 0, -p * np.expm1(-eta * np.maximum(z, 0.0)), 0.0)
        for q, theta, trunc in self.neg_terms:
            norm = self._neg_norm(theta, trunc)
            # np.exp on both sides so the truncation point cancels exactly
            low = np.exp(-theta * trunc) if math.isfinite(trunc) else 0.0
            zc = np.clip(z, -trunc if math.isfinite(trunc) else -np.inf, 0.0)
            out += q * (np.exp(theta * zc) - low) / norm
        return np.clip(out, 0.0, 1.0)

    def mean(self):
        m = sum(p / eta for p, eta in self.pos_terms)
        for q, theta, trunc in self.neg_terms:
            m -= q * self._neg_magnitude(theta, trunc)
        return m

    def _neg_magnitude(self, theta, trunc):
        """Mean of ``|Y|`` for one (truncated) negative exponential component."""
        if math.isinf(trunc):
            return 1.0 / theta
        e = math.exp(-theta * trunc)
        return (1.0 / theta - e * (trunc + 1.0 / theta)) / (-math.expm1(-theta * trunc))

    def upper_tail(self, y):
        """Return ``(P(Y >= y), E[Y; Y >= y])`` elementwise."""
        y = np.asarray(y, dtype=float)
        prob = np.zeros_like(y)
        part = np.zeros_like(y)
        for p, eta in self.pos_terms:
            yy = np.maximum(y, 0.0)
            e = np.exp(-eta * yy)
            prob += p * e
            part += p * e * (yy + 1.0 / eta)
        for q, theta, trunc in self.neg_terms:
            norm = self._neg_norm(theta, trunc)
            lo = -trunc
            yy = np.clip(y, lo if math.isfinite(lo) else -np.inf, 0.0)
            e = np.exp(theta * yy)  # yy = -inf gives 0 for untruncated terms
            with np.errstate(invalid="ignore"):
                tail_mean = np.where(e > 0, e * (yy - 1.0 / theta), 0.0)
            prob += q * (1.0 - e) / norm
            part += q * (-1.0 / theta - tail_mean) / norm
        return prob, part

    def tail_cutoff(self, level=TAIL_DENSITY):
        """Point beyond which every positive component's density is below ``level``."""
        z = 0.0
        for p, eta in self.pos_terms:
            if p > 0:
                z = max(z, math.log(max(p * eta, level) / level) / eta)
        return z

    def lower_cutoff(self, level=TAIL_DENSITY):
        """Finite lower integration limit (the truncation, or a density cut)."""
        z = 0.0
        for q, theta, trunc in self.neg_terms:
            if q <= 0:
                continue
            if math.isfinite(trunc):
                z = min(z, -trunc)
            else:
                z = min(z, -math.log(max(q * theta, level) / level) / theta)
        return z

    def breakpoints(self):
        """Finite integration pieces covering the (cut-off) support."""
        pts = {0.0}
        for q, _, trunc in self.neg_terms:
            if q > 0 and math.isfinite(trunc):
                pts.add(-trunc)
        lo, hi = self.lower_cutoff(), self.tail_cutoff()
        pts.update((lo, hi))
        pts = sorted(p for p in pts if lo <= p <= hi)
        return [(a, b) for a, b in zip(pts[:-1], pts[1:]) if b > a]

    def sample(self, rng, size=None):
        """Draw marks by component selection then exact inverse-CDF sampling."""
        n = 1 if size is None else int(size)
        weights = [p for p, _ in self.pos_terms] + [q for q, _, _ in self.neg_terms]
        cum = np.cumsum(weights)
        cum[-1] = 1.0
        u_comp = rng.random(n)
        v = 1.0 - rng.random(n)  # in (0, 1]
        comp = np.searchsorted(cum, u_comp, side="right")
        comp = np.minimum(comp, len(weights) - 1)
        out = np.empty(n)
        k = 0
        for _, eta in self.pos_terms:
            sel = comp == k
            out[sel] = -np.log(v[sel]) / eta
            k += 1
        for _, theta, trunc in self.neg_terms:
            sel = comp == k
            low = math.exp(-theta * trunc) if math.isfinite(trunc) else 0.0
            out[sel] = np.log(low + v[sel] * (1.0 - low)) / theta
            k += 1
        return out[0] if size is None else out


@dataclass(frozen=True)
class LevySpec:
    """Compound-Poisson Lévy measure: jump intensity plus mark law."""

    intensity: float
    dist: JumpDistribution

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError("jump intensity must be positive")

    @property
    def support_lower(self):
        return self.dist.support_lower

    @property
    def unbounded_below(self):
        return self.dist.unbounded_below


def density(dist, z):
    """Mixture density ``f_Y(z)``; zero outside the support."""
    out = dist.pdf(z)
    return float(out) if np.ndim(out) == 0 else out


def mean_jump(spec):
    """Closed-form mean mark ``L``."""
    dist = spec.dist if isinstance(spec, LevySpec) else spec
    return dist.mean()


def _quad_support(func, dist, complex_func=False):
    total = 0.0
    for a, b in dist.breakpoints():
        val, err = integrate.quad(
            func, a, b, limit=400, epsabs=1e-13, epsrel=1e-12, complex_func=complex_func
        )
        total = total + val
    return total


def levy_q_moment(spec, q):
    """``int (1 + |z|)^q nu(dz)`` by adaptive quadrature."""
    if q < 1:
        raise ValueError("moment order must be >= 1")
    dist = spec.dist
    val = _quad_support(lambda z: (1.0 + abs(z)) ** q * dist.pdf(z), dist)
    if not math.isfinite(val):
        raise QuadratureError("q-moment quadrature did not converge")
    return spec.intensity * val


def sample_jump(dist, rng, size=None):
    """Draw jump marks from ``dist``."""
    return dist.sample(rng, size)


def sample_jump_times(lam, t0, t1, rng):
    """Homogeneous Poisson arrival times on ``(t0, t1]`` in increasing order."""
    if not t1 >= t0:
        raise ValueError("need t0 <= t1")
    if not lam > 0:
        raise ValueError("intensity must be positive")
    n = rng.poisson(lam * (t1 - t0))
    return np.sort(t1 - (t1 - t0) * rng.random(n))


def check_log_domain(dist, g_val):
    """Raise DomainError unless ``1 + z*g_val > 0`` on the whole support."""
    lo, hi = dist.support_lower, dist.support_upper
    if g_val > 0 and (math.isinf(lo) or 1.0 + lo * g_val <= 0):
        raise DomainError(f"1 + z*g <= 0 at the lower support end (g={g_val})")
    if g_val < 0 and (math.isinf(hi) or 1.0 + hi * g_val <= 0):
        raise DomainError(f"1 + z*g <= 0 on the positive support (g={g_val})")


def complex_jump_integral(spec, g_val, c):
    """``E[(1 + g Y)^c - c ln(1 + g Y) - 1]`` for one jump mark ``Y``.

    The expectation is over the mark law only (no intensity factor).  The
    complex power uses the real branch ``exp(c * ln(1 + z g))``.
    """
    dist = spec.dist if isinstance(spec, LevySpec) else spec
    g_val = float(g_val)
    c = complex(c)
    if g_val == 0.0 or c == 0:
        return 0j
    check_log_domain(dist, g_val)

    def integrand(z):
        lg = math.log1p(z * g_val)
        return (np.exp(c * lg) - c * lg - 1.0) * dist.pdf(z)

    return complex(_quad_support(integrand, dist, complex_func=True))
