"""Simulation and option pricing for a delayed jump price model.

The asset follows ``dS = f(S(t-b)) S dt + g(S(t-b)) S(t-) dZ`` with ``Z`` a
compound Poisson process with hyper-exponential marks.
"""

__version__ = "0.1.0"

from .coefficients import InitialSegment, Coefficient, affine_clipped, constant, exp_segment, scaled_sine
from .convergence import (
    ConvergenceStudy,
    RateFit,
    coupled_errors,
    fit_rate,
    grid_holding_error,
    holding_study,
    sup_moment,
)
from .engine import (
    DelayedJumpModel,
    JumpStream,
    SimGrid,
    SimPath,
    exact_path,
    interpolate,
    log_em_path,
    simulate_ensemble,
    validate_model,
)
from .exceptions import *  # noqa: F401,F403
from .jump_measure import (
    JumpDistribution,
    LevySpec,
    complex_jump_integral,
    density,
    levy_q_moment,
    mean_jump,
    sample_jump,
)
from .measure_change import (
    HistoryPath,
    MarketSpec,
    ThetaProcess,
    check_admissibility,
    radon_nikodym,
    simulate_q_ensemble,
    simulate_q_path,
    theta,
)
from .pricer import (
    FourierContext,
    PricingResult,
    a_factor,
    char_exponent,
    price_black_scholes,
    price_bs_mc_paper_style,
    price_fourier,
    price_mc,
    price_mc_conditional,
)

__all__ = [
    "Coefficient",
    "ConvergenceStudy",
    "DelayedJumpModel",
    "FourierContext",
    "HistoryPath",
    "InitialSegment",
    "JumpDistribution",
    "JumpStream",
    "LevySpec",
    "MarketSpec",
    "PricingResult",
    "RateFit",
    "SimGrid",
    "SimPath",
    "ThetaProcess",
    "a_factor",
    "affine_clipped",
    "char_exponent",
    "check_admissibility",
    "complex_jump_integral",
    "constant",
    "coupled_errors",
    "density",
    "exact_path",
    "exp_segment",
    "fit_rate",
    "grid_holding_error",
    "holding_study",
    "interpolate",
    "levy_q_moment",
    "log_em_path",
    "mean_jump",
    "price_black_scholes",
    "price_bs_mc_paper_style",
    "price_fourier",
    "price_mc",
    "price_mc_conditional",
    "radon_nikodym",
    "sample_jump",
    "scaled_sine",
    "simulate_ensemble",
    "simulate_q_ensemble",
    "simulate_q_path",
    "sup_moment",
    "theta",
    "validate_model",
    "__version__",
]
