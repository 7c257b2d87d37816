import math

import pytest

from delayjump.coefficients import constant, exp_segment, scaled_sine
from delayjump.engine import DelayedJumpModel
from delayjump.jump_measure import JumpDistribution, LevySpec, mean_jump


def acceptance_model():
    """Test model shared by the positivity and convergence criteria."""
    dist = JumpDistribution.double_exponential(0.5, 3.0, 3.0, 1.0)
    return DelayedJumpModel(
        constant(0.05), scaled_sine(0.05, 1.0, 0.05), exp_segment(1.0), 0.25, LevySpec(5.0, dist)
    )


def pricing_model(s0=100.0, r=0.01, g=0.1, lam_q=2.0):
    """Constant-coefficient admissible model with theta = 1 - lam_q / lam."""
    dist = JumpDistribution(((0.3, 5.0),), ((0.7, 4.0, 1.0),))
    levy = LevySpec(4.0, dist)
    f = r - g * lam_q * mean_jump(levy)
    return DelayedJumpModel(constant(f), constant(g), exp_segment(s0), 0.25, levy)


@pytest.fixture
def acc_model():
    return acceptance_model()


@pytest.fixture
def price_model():
    return pricing_model()


@pytest.fixture
def kou_trunc():
    return JumpDistribution(((0.3, 5.0),), ((0.7, 4.0, 1.0),))


@pytest.fixture
def kou_untrunc():
    return JumpDistribution.double_exponential(0.6, 12.8, 8.4, math.inf)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
