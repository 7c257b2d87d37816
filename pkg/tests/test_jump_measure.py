import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from delayjump._rng import path_rng
from delayjump.exceptions import DomainError
from delayjump.jump_measure import (
    JumpDistribution,
    LevySpec,
    check_log_domain,
    complex_jump_integral,
    density,
    levy_q_moment,
    mean_jump,
    sample_jump,
    sample_jump_times,
)

mp.mp.dps = 30


def _mp_density(dist):
    def f(z):
        out = mp.mpf(0)
        if z >= 0:
            for p, eta in dist.pos_terms:
                out += p * eta * mp.e ** (-eta * z)
        else:
            for q, th, r in dist.neg_terms:
                if z > -r:
                    norm = 1 - mp.e ** (-th * r) if math.isfinite(r) else 1
                    out += q * th / norm * mp.e ** (th * z)
        return out

    return f


def _mp_expect(dist, h):
    f = _mp_density(dist)
    lo = -max(r for _, _, r in dist.neg_terms) if dist.neg_terms else 0
    lo = -mp.inf if math.isinf(lo) else lo
    return mp.quad(lambda z: h(z) * f(z), [lo, 0, mp.inf])


def test_density_normalised_and_mean_match_mpmath(kou_trunc, kou_untrunc):
    for dist in (kou_trunc, kou_untrunc):
        assert float(_mp_expect(dist, lambda z: 1)) == pytest.approx(1.0, abs=1e-12)
        assert dist.mean() == pytest.approx(float(_mp_expect(dist, lambda z: z)), abs=1e-12)


def test_paper_mean_jump():
    # 0.6/12.8 - 0.4/8.4 = -7.44e-4
    dist = JumpDistribution.double_exponential(0.6, 12.8, 8.4)
    assert mean_jump(LevySpec(0.03, dist)) == pytest.approx(0.6 / 12.8 - 0.4 / 8.4, rel=1e-14)


def test_density_zero_outside_support(kou_trunc):
    assert density(kou_trunc, -1.5) == 0.0
    assert density(kou_trunc, -1.0) == 0.0
    assert density(kou_trunc, 0.0) == pytest.approx(0.3 * 5.0)


@pytest.mark.parametrize("y", [-0.7, -0.2, 0.0, 0.1, 0.8])
def test_upper_tail_matches_mpmath(kou_trunc, y):
    prob, part = kou_trunc.upper_tail(y)
    f = _mp_density(kou_trunc)
    assert float(prob) == pytest.approx(float(mp.quad(f, [y, 0, mp.inf] if y < 0 else [y, mp.inf])), abs=1e-13)
    pts = [y, 0, mp.inf] if y < 0 else [y, mp.inf]
    assert float(part) == pytest.approx(float(mp.quad(lambda z: z * f(z), pts)), abs=1e-13)


def test_cdf_complements_upper_tail(kou_trunc):
    z = np.linspace(-1.2, 2.0, 41)
    prob, _ = kou_trunc.upper_tail(z)
    np.testing.assert_allclose(kou_trunc.cdf(z) + prob, 1.0, atol=1e-14)


def test_sampler_passes_ks(kou_trunc, kou_untrunc):
    for dist in (kou_trunc, kou_untrunc):
        y = sample_jump(dist, path_rng(11, 0), 20_000)
        assert stats.kstest(y, dist.cdf).pvalue > 1e-3


def test_truncated_samples_stay_in_support(kou_trunc):
    y = kou_trunc.sample(path_rng(3, 0), 50_000)
    assert y.min() > -1.0


def test_jump_times_sorted_and_poisson():
    counts = []
    for i in range(4000):
        t = sample_jump_times(3.0, 0.0, 2.0, path_rng(5, i))
        assert np.all(np.diff(t) > 0) and (t.size == 0 or (t[0] > 0 and t[-1] <= 2.0))
        counts.append(t.size)
    counts = np.array(counts)
    assert abs(counts.mean() - 6.0) < 4 * math.sqrt(6.0 / counts.size)


def test_levy_moment_matches_mpmath(kou_trunc):
    spec = LevySpec(2.5, kou_trunc)
    want = 2.5 * _mp_expect(kou_trunc, lambda z: (1 + abs(z)) ** 2)
    assert levy_q_moment(spec, 2.0) == pytest.approx(float(want), rel=1e-10)


@pytest.mark.parametrize("c", [1.0, 2.0, 1.7j, 1 + 0.5j, 0.3 - 2j])
def test_complex_jump_integral_matches_mpmath(kou_trunc, c):
    g = 0.3
    want = _mp_expect(
        kou_trunc, lambda z: mp.e ** (c * mp.log(1 + g * z)) - c * mp.log(1 + g * z) - 1
    )
    got = complex_jump_integral(kou_trunc, g, c)
    assert abs(got - complex(want)) < 1e-11


def test_complex_jump_integral_trivial_cases(kou_trunc):
    assert complex_jump_integral(kou_trunc, 0.0, 1.3) == 0
    assert complex_jump_integral(kou_trunc, 0.4, 0) == 0


def test_log_domain_violations(kou_trunc, kou_untrunc):
    with pytest.raises(DomainError):
        check_log_domain(kou_trunc, 1.5)
    with pytest.raises(DomainError):
        check_log_domain(kou_untrunc, 0.1)
    with pytest.raises(DomainError):
        check_log_domain(kou_trunc, -0.1)  # positive marks are unbounded
    check_log_domain(kou_trunc, 0.5)


def test_bad_mixtures_rejected():
    with pytest.raises(ValueError):
        JumpDistribution(((0.5, 2.0),), ((0.4, 2.0),))
    with pytest.raises(ValueError):
        JumpDistribution(((1.0, -1.0),))
    with pytest.raises(ValueError):
        LevySpec(0.0, JumpDistribution(((1.0, 1.0),)))


@settings(max_examples=40, deadline=None)
@given(
    p=st.floats(0.05, 0.95),
    eta=st.floats(0.5, 30.0),
    theta=st.floats(0.5, 30.0),
    trunc=st.floats(0.05, 5.0),
)
def test_cdf_monotone_and_mean_consistent(p, eta, theta, trunc):
    dist = JumpDistribution.double_exponential(p, eta, theta, trunc)
    z = np.linspace(-trunc - 0.1, 5.0, 301)
    c = dist.cdf(z)
    assert np.all(np.diff(c) >= -1e-15)
    assert c[0] == 0.0 and c[-1] <= 1.0
    _, e_all = dist.upper_tail(-np.inf)
    assert float(e_all) == pytest.approx(dist.mean(), abs=1e-12)
