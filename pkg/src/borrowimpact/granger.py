"""Granger causality from a borrowee series to its original.

For each lag ``L`` two autoregressions of the target are compared on the
same ``T - L`` observations:

* restricted: constant + ``L`` lags of the target
* unrestricted: the above + ``L`` lags of the predictor

and the SSR F-test ``((SSR_r - SSR_u) / L) / (SSR_u / (T - 3L - 1))``
decides whether the predictor's past helps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import DegenerateTarget, RankDeficient, SeriesTooShort
from .stats import f_sf, ols_fit, projection_ssr
from .validation import check_alpha, check_pair, check_positive_int

logger = logging.getLogger(__name__)

MIN_LENGTH = 5
PERFECT_FIT_RATIO = 1e-12


@dataclass(frozen=True)
class LagTest:
    lag: int
    f_stat: float
    p_value: float
    df1: int
    df2: int
    ssr_restricted: float
    ssr_unrestricted: float
    perfect_fit: bool = False


@dataclass(frozen=True)
class GrangerResult:
    per_lag: tuple[LagTest, ...]
    max_lag_requested: int
    max_lag_used: int
    causal: bool
    perfect_fit_flag: bool
    alpha: float
    n_observations: int

    @property
    def p_values(self) -> list[float]:
        return [e.p_value for e in self.per_lag]

    @property
    def f_stats(self) -> list[float]:
        return [e.f_stat for e in self.per_lag]

    @property
    def min_p_value(self) -> float:
        return min(self.p_values)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_lag"] = [asdict(e) for e in self.per_lag]
        return d


def feasible_max_lag(length: int, max_lag: int) -> int:
    """Largest usable lag: the unrestricted fit needs ``T - 3L - 1 >= 1``."""
    return min(max_lag, (length - 2) // 3)


def lagged_design(target: np.ndarray, predictor: np.ndarray, lag: int):
    """Response and the restricted / unrestricted designs for one lag."""
    T = target.shape[0]
    y = target[lag:]
    own = np.column_stack([target[lag - k:T - k] for k in range(1, lag + 1)])
    other = np.column_stack([predictor[lag - k:T - k] for k in range(1, lag + 1)])
    const = np.ones((T - lag, 1))
    restricted = np.hstack([const, own])
    return y, restricted, np.hstack([restricted, other])


def _ssr(X, y) -> float:
    try:
        return ols_fit(X, y).residual_sum_squares
    except RankDeficient:
        # collinear lags (e.g. a predictor that is a shifted copy of the
        # target, or an all-zero predictor): the projection is still defined
        return projection_ssr(X, y)[0]


def _lag_test(target, predictor, lag: int) -> LagTest:
    y, x_r, x_u = lagged_design(target, predictor, lag)
    ssr_r = _ssr(x_r, y)
    ssr_u = _ssr(x_u, y)
    df1, df2 = lag, y.shape[0] - 2 * lag - 1
    tss = float(np.sum((y - y.mean()) ** 2))
    # nested models: the unrestricted SSR may only exceed by rounding
    assert ssr_u <= ssr_r * (1 + 1e-9) + PERFECT_FIT_RATIO * tss, (lag, ssr_r, ssr_u)
    if ssr_r <= PERFECT_FIT_RATIO * tss:
        # the target's own lags already fit exactly; nothing left to explain
        return LagTest(lag, 0.0, 1.0, df1, df2, ssr_r, ssr_u)
    if ssr_u < PERFECT_FIT_RATIO * ssr_r:
        return LagTest(lag, math.inf, 0.0, df1, df2, ssr_r, ssr_u, perfect_fit=True)
    f = max((ssr_r - ssr_u) / df1 / (ssr_u / df2), 0.0)
    return LagTest(lag, f, f_sf(f, df1, df2), df1, df2, ssr_r, ssr_u)


def granger_test(target, predictor, max_lag: int = 10, alpha: float = 0.05) -> GrangerResult:
    """Test whether ``predictor`` Granger-causes ``target``.

    Lags run from 1 to ``max_lag``, capped at the largest lag the series
    length can support. The verdict is causal if any lag rejects at ``alpha``.

    Raises
    ------
    SeriesTooShort
        Fewer than five observations.
    DegenerateTarget
        The target is constant.
    """
    max_lag = check_positive_int(max_lag, "max_lag")
    alpha = check_alpha(alpha)
    y, x = check_pair(target, predictor)
    T = y.shape[0]
    if T < MIN_LENGTH:
        raise SeriesTooShort(f"need at least {MIN_LENGTH} observations, got {T}")
    if np.ptp(y) == 0:
        raise DegenerateTarget("target series is constant")
    used = feasible_max_lag(T, max_lag)
    if used < max_lag:
        logger.info("max_lag %d capped to %d for a series of length %d", max_lag, used, T)

    per_lag = tuple(_lag_test(y, x, lag) for lag in range(1, used + 1))
    return GrangerResult(
        per_lag=per_lag,
        max_lag_requested=max_lag,
        max_lag_used=used,
        causal=any(e.p_value < alpha for e in per_lag),
        perfect_fit_flag=any(e.perfect_fit for e in per_lag),
        alpha=alpha,
        n_observations=T,
    )


class GrangerCausality(BaseEstimator):
    """Estimator wrapper around :func:`granger_test`.

    ``X`` is an array of shape ``(T, 2)`` whose first column is the target
    and second column the candidate cause, the same layout statsmodels uses.

    Attributes
    ----------
    result_ : GrangerResult
    p_values_ : ndarray of shape (max_lag_used,)
    causal_ : bool
    """

    def __init__(self, max_lag=10, alpha=0.05):
        self.max_lag = max_lag
        self.alpha = alpha

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValueError(f"X must have shape (T, 2), got {X.shape}")
        self.result_ = granger_test(X[:, 0], X[:, 1], self.max_lag, self.alpha)
        self.p_values_ = np.array(self.result_.p_values)
        self.f_stats_ = np.array(self.result_.f_stats)
        self.causal_ = self.result_.causal
        self.n_features_in_ = 2
        return self

    def transform(self, X=None):
        """Per-lag table with columns (lag, F, p, df1, df2)."""
        check_is_fitted(self, "result_")
        return np.array([[e.lag, e.f_stat, e.p_value, e.df1, e.df2] for e in self.result_.per_lag])
