"""scikit-learn style wrappers.

The pricers fit on market state and predict prices for an array of strikes;
the rate regressor fits ``log e`` on ``log dt``.  Parameters are plain
constructor arguments so ``get_params``/``set_params``/``clone`` work.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .convergence import fit_rate
from .engine import SimGrid
from .measure_change import HistoryPath, MarketSpec
from .pricer import fourier_context, mc_call_prices, q_terminals


def _strikes(K):
    return check_array(np.asarray(K, dtype=float).reshape(-1, 1), ensure_all_finite=True).ravel()


class MonteCarloCallPricer(BaseEstimator):
    """Monte-Carlo European calls under the martingale measure.

    ``fit`` simulates terminal values once; ``predict`` prices any strikes on
    those shared paths, so prices are monotone in the strike.

    Parameters
    ----------
    model : DelayedJumpModel
    r : float
        Risk-free rate.
    T : float
        Maturity.
    n_steps : int
        Scheme steps on ``[0, T]``.
    n_paths : int
    seed : int
    threads : int
    convention : {"derived", "paper"}
    """

    def __init__(self, model=None, r=0.0, T=1.0, n_steps=256, n_paths=10_000, seed=0, threads=1,
                 convention="derived"):
        self.model = model
        self.r = r
        self.T = T
        self.n_steps = n_steps
        self.n_paths = n_paths
        self.seed = seed
        self.threads = threads
        self.convention = convention

    def fit(self, X=None, y=None):
        """Simulate Q-paths from the model's initial segment (``X`` is ignored)."""
        grid = SimGrid(self.T, self.n_steps)
        market = MarketSpec(self.r, 1.0, self.T, 0.0)
        self.terminal_ = q_terminals(
            self.model, market, grid, self.n_paths, self.seed, threads=self.threads, convention=self.convention
        )
        return self

    def predict(self, K):
        check_is_fitted(self, "terminal_")
        prices, self.stderr_ = mc_call_prices(self.terminal_, _strikes(K), self.r, self.T)
        return prices


class FourierCallPricer(BaseEstimator):
    """Fourier-inversion calls in the last delay period.

    ``fit(X, t=...)`` takes the observed prices on ``[t - b, t]`` sampled every
    ``dt`` (a 1-d array or :class:`HistoryPath`).
    """

    def __init__(self, model=None, r=0.0, T=1.0, dt=None, convention="derived", tol=1e-8):
        self.model = model
        self.r = r
        self.T = T
        self.dt = dt
        self.convention = convention
        self.tol = tol

    def fit(self, X, y=None, t=None):
        if isinstance(X, HistoryPath):
            history = X
        else:
            if t is None or self.dt is None:
                raise ValueError("an array history needs both t and dt")
            values = check_array(np.asarray(X, dtype=float).reshape(1, -1)).ravel()
            history = HistoryPath(t, self.dt, values)
        market = MarketSpec(self.r, 1.0, self.T, history.t)
        self.context_ = fourier_context(self.model, market, history, self.convention)
        self.a_factor_ = self.context_.A
        return self

    def predict(self, K):
        check_is_fitted(self, "context_")
        return self.context_.price(_strikes(K), tol=self.tol)


class StrongOrderRegressor(RegressorMixin, BaseEstimator):
    """Power law ``e = C dt^slope`` fitted by least squares in log-log space."""

    def fit(self, X, y):
        dt = check_array(np.asarray(X, dtype=float).reshape(-1, 1)).ravel()
        res = fit_rate(dt, np.asarray(y, dtype=float))
        self.slope_, self.intercept_, self.r2_ = res.slope, res.intercept, res.r2
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        dt = check_array(np.asarray(X, dtype=float).reshape(-1, 1)).ravel()
        return np.exp(self.intercept_) * dt**self.slope_
