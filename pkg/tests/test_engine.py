import math

import numpy as np
import pytest
from scipy import integrate

from delayjump._rng import path_rng
from delayjump.coefficients import affine_clipped, constant, exp_segment, scaled_sine
from delayjump.convergence import holding_study, fit_rate, sup_moment
from delayjump.engine import (
    DelayedJumpModel,
    JumpStream,
    SimGrid,
    exact_path,
    interpolate,
    log_em_path,
    simulate_ensemble,
    validate_model,
)
from delayjump.exceptions import ModelValidationError, PositivityError, RangeError
from delayjump.jump_measure import JumpDistribution, LevySpec, mean_jump

TRUNC = JumpDistribution.double_exponential(0.5, 4.0, 4.0, 1.0)


def model(f=0.1, g=0.0, phi=1.0, b=0.25, lam=2.0, dist=TRUNC):
    f = constant(f) if np.isscalar(f) else f
    g = constant(g) if np.isscalar(g) else g
    phi = exp_segment(phi) if np.isscalar(phi) else phi
    return DelayedJumpModel(f, g, phi, b, LevySpec(lam, dist))


# -- validation ---------------------------------------------------------------


def test_riskless_model_passes_validation():
    rep = validate_model(model(f=0.1, g=0.0))
    assert rep.passed, rep.to_dict()


def test_unbounded_negative_jumps_fail():
    rep = validate_model(model(g=0.1, dist=JumpDistribution.double_exponential(0.5, 3.0, 3.0)))
    assert not rep.passed
    assert rep["bounded_negative_jumps"].message == "unbounded negative jumps"


def test_positivity_margin_sign_check():
    dist = JumpDistribution(((0.5, 3.0),), ((0.5, 3.0, 1.0),))
    rep = validate_model(model(g=1.5, dist=dist))
    assert not rep["positivity_margin"].passed
    assert rep["positivity_margin"].witness == pytest.approx(-0.5)


def test_negative_g_with_positive_jumps_fails():
    rep = validate_model(model(g=-0.1))
    assert not rep["positivity_margin"].passed


def test_phi_must_start_positive():
    rep = validate_model(model(phi=exp_segment(0.0)))
    assert not rep["phi_positive"].passed


def test_declared_bound_violation_detected():
    lying = scaled_sine(0.05, 1.0, 0.05)
    lying = type(lying)(lying.func, 0.0, 0.05, lying.lipschitz)  # understated upper bound
    rep = validate_model(model(g=lying))
    assert not rep["g_bounds"].passed


def test_acceptance_model_valid(acc_model):
    rep = validate_model(acc_model)
    assert rep.passed
    assert rep["positivity_margin"].witness == pytest.approx(0.9)


def test_grid_requires_delay_multiple():
    with pytest.raises(ValueError):
        SimGrid(1.0, 10).delay_steps(0.25)


# -- scheme -------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 4, 37, 256])
def test_no_jump_exponential(n):
    m = model(f=0.1, g=0.0, b=1.0)
    n_b = n  # b = T so the grid carries the delay for every n
    p = log_em_path(m, SimGrid(1.0, n_b), JumpStream.empty())
    assert p.terminal == pytest.approx(math.exp(0.1), rel=1e-15)


@pytest.mark.parametrize("n", [4, 8, 64, 1000])
def test_single_jump_product(n):
    m = model(f=0.0, g=0.2, phi=2.0, b=1.0)
    p = log_em_path(m, SimGrid(1.0, n), JumpStream([0.3], [0.5]))
    assert p.terminal == pytest.approx(2.2, rel=1e-15)
    assert p.jump_values_left[0] == pytest.approx(2.0)
    assert p.jump_values[0] == pytest.approx(2.2)


def _sparse_stream(seed, T, n):
    """At most one jump per grid interval."""
    rng = path_rng(seed, 0)
    steps = np.sort(rng.choice(n, size=6, replace=False))
    times = (steps + rng.uniform(0.05, 0.95, steps.size)) * T / n
    return JumpStream(times, TRUNC.sample(rng, times.size))


def test_scheme_exact_for_constant_coefficients():
    m = model(f=0.07, g=0.3, phi=1.5)
    grid = SimGrid(1.0, 64)
    js = _sparse_stream(2, 1.0, 64)
    p = log_em_path(m, grid, js)
    ref = exact_path(m, grid, js)
    np.testing.assert_allclose(p.values, ref.values, rtol=1e-12)
    np.testing.assert_allclose(p.jump_values, ref.jump_values, rtol=1e-12)


def test_exact_path_matches_quadrature_when_g_zero():
    # f varies with the delayed state; on [0, b] the argument is phi(u - b)
    phi = exp_segment(2.0, 0.8)
    f = affine_clipped(0.05, 0.1, -1.0, 1.0)
    m = model(f=f, g=0.0, phi=phi, b=0.5)
    grid = SimGrid(1.0, 2**12)
    ref = exact_path(m, grid, JumpStream.empty())
    for t in (0.125, 0.3125, 0.5):
        integral, _ = integrate.quad(lambda u: float(f(phi(u - 0.5))), 0.0, t, epsabs=1e-14)
        k = int(round(t / grid.dt))
        assert ref.values[k] == pytest.approx(2.0 * math.exp(integral), rel=1e-8)


def test_exact_path_jump_only_refinement_invariant():
    m = model(f=0.0, g=scaled_sine(0.2, 1.0, 0.3), phi=1.0, b=0.25)
    rng = path_rng(9, 0)
    times = np.sort(rng.uniform(0, 1, 7))
    js = JumpStream(times, TRUNC.sample(rng, 7))
    a = exact_path(m, SimGrid(1.0, 2**8), js)
    b = exact_path(m, SimGrid(1.0, 2**11), js)
    assert a.terminal == pytest.approx(b.terminal, rel=1e-12)
    np.testing.assert_allclose(a.jump_values, b.jump_values, rtol=1e-12)


def test_exact_path_jump_only_product():
    # independent evaluation of prod (1 + g(X(tau - b)-) Y) with f = 0
    g = scaled_sine(0.2, 1.0, 0.3)
    m = model(f=0.0, g=g, phi=1.0, b=0.25)
    js = JumpStream([0.1, 0.3, 0.36, 0.8], [0.4, -0.5, 0.2, 0.3])
    ref = exact_path(m, SimGrid(1.0, 2**6), js)
    def value_before(t):
        v = 1.0
        for tau, y in zip(js.times, js.marks):
            if tau < t:
                v *= 1 + float(g(value_before(tau - 0.25) if tau - 0.25 > 0 else 1.0)) * y
        return v

    want = value_before(1.1)
    assert ref.terminal == pytest.approx(want, rel=1e-13)


def test_positivity_error_raised_for_bad_factor():
    m = model(f=0.0, g=1.5, dist=JumpDistribution(((0.5, 3.0),), ((0.5, 3.0, 1.0),)))
    with pytest.raises(PositivityError):
        log_em_path(m, SimGrid(1.0, 8), JumpStream([0.5], [-0.9]), validate=False)
    with pytest.raises(ModelValidationError):
        log_em_path(m, SimGrid(1.0, 8), JumpStream([0.5], [-0.9]))


def test_aggregated_mode_differs_only_with_shared_intervals():
    m = model(f=0.0, g=0.3)
    grid = SimGrid(1.0, 4)
    one = JumpStream([0.1], [0.5])
    two = JumpStream([0.1, 0.2], [0.5, 0.5])
    assert log_em_path(m, grid, one, jump_mode="aggregated").terminal == pytest.approx(
        log_em_path(m, grid, one).terminal, rel=1e-15
    )
    per = log_em_path(m, grid, two).terminal
    agg = log_em_path(m, grid, two, jump_mode="aggregated").terminal
    assert per == pytest.approx(1.15**2)
    assert agg == pytest.approx(1.3)


# -- interpolation --------------------------------------------------------------


def test_interpolate_grid_points_and_segment():
    m = model(f=0.1, g=0.2)
    grid = SimGrid(1.0, 16)
    p = log_em_path(m, grid, JumpStream([0.52], [0.4]))
    for k in (0, 3, 16):
        assert interpolate(p, m, grid.times[k]) == p.values[k]
    tk = grid.times[4]
    assert interpolate(p, m, tk + 0.01) == pytest.approx(p.values[4] * math.exp(0.1 * 0.01), rel=1e-14)
    assert interpolate(p, m, -0.125) == pytest.approx(1.0)
    # jump inside the interval is included
    k = 8
    assert interpolate(p, m, 0.53) == pytest.approx(p.values[k] * math.exp(0.1 * 0.03) * 1.08, rel=1e-13)


def test_interpolate_range_error():
    m = model()
    p = log_em_path(m, SimGrid(1.0, 16), JumpStream.empty())
    with pytest.raises(RangeError):
        interpolate(p, m, -0.3)
    with pytest.raises(RangeError):
        interpolate(p, m, 1.01)


def test_interpolate_history_uses_phi():
    m = model(phi=exp_segment(3.0, 0.5))
    p = log_em_path(m, SimGrid(1.0, 16), JumpStream.empty())
    assert interpolate(p, m, -0.1) == pytest.approx(3.0 * math.exp(-0.05))


# -- ensembles ----------------------------------------------------------------


def test_ensemble_bit_identical_and_thread_independent(acc_model):
    grid = SimGrid(1.0, 64)
    a = simulate_ensemble(acc_model, grid, 300, 4)
    b = simulate_ensemble(acc_model, grid, 300, 4)
    c = simulate_ensemble(acc_model, grid, 9000, 4, threads=3)[:300]
    for x, y, z in zip(a, b, c):
        assert np.array_equal(x.values, y.values) and np.array_equal(x.values, z.values)
        assert np.array_equal(x.jump_times, z.jump_times)


def test_single_path_ensemble_equals_log_em(acc_model):
    grid = SimGrid(1.0, 64)
    p = simulate_ensemble(acc_model, grid, 1, 17)[0]
    js = JumpStream.draw(acc_model.levy, 0.0, 1.0, path_rng(17, 0))
    q = log_em_path(acc_model, grid, js)
    assert np.array_equal(p.values, q.values)


def test_ensemble_mean_matches_closed_form():
    # constant g: E S(T) = phi(0) exp(f T + lam g L T)
    m = model(f=0.1, g=0.2, lam=3.0)
    grid = SimGrid(1.0, 32)
    st = np.array([p.terminal for p in simulate_ensemble(m, grid, 10_000, 8)])
    want = math.exp(0.1 + 3.0 * 0.2 * mean_jump(m.levy))
    assert abs(st.mean() - want) < 4 * st.std() / math.sqrt(st.size)


def test_ensemble_positive(acc_model):
    paths = simulate_ensemble(acc_model, SimGrid(1.0, 64), 2000, 1)
    assert min(p.min_value() for p in paths) > 0


# -- lemma-level properties ---------------------------------------------------


def test_sup_moments_do_not_explode(acc_model):
    for q in (2.0, 4.0):
        mom = sup_moment(acc_model, 1.0, range(4, 10), 1000, 5, q)
        assert mom.max() <= 3 * mom.min()


def test_holding_error_rate(acc_model):
    dts, est, _ = holding_study(acc_model, 1.0, range(4, 9), 1000, 3, 2.0)
    assert fit_rate(dts, est).slope >= 0.8
