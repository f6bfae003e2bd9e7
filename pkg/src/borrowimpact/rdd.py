"""Sharp regression discontinuity around a borrowee release.

The model is a global linear fit with separate intercepts and slopes on
either side of the cutoff::

    y(t) = b0 + b1 t + b2 I[t > 0] + b3 t I[t > 0]

``b2`` is the jump at the cutoff (the average treatment effect). It is
reported relative to the pre-release intercept, so +100 % means the
intercept doubled.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .errors import DegenerateWindow
from .series import WINDOW_T, EventWindow, has_zero_baseline, is_all_zero
from .stats import f_sf, ols_fit, t_sf_two_sided
from .validation import check_1d, check_alpha, check_running_variable

BASELINE_EPS = 1e-6


@dataclass(frozen=True)
class RddFit:
    beta0_intercept: float
    beta1_trend: float
    beta2_jump: float
    beta3_trend_change: float
    p_value_jump: float
    ate_relative_pct: float  # NaN when the baseline is too close to zero
    significant: bool
    outlier: bool
    se_jump: float
    t_jump: float
    residual_sum_squares: float
    degrees_of_freedom: int
    f_stat_model: float
    p_value_model: float
    alpha: float

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.beta0_intercept, self.beta1_trend,
                         self.beta2_jump, self.beta3_trend_change])

    @property
    def ate_defined(self) -> bool:
        return math.isfinite(self.ate_relative_pct)

    def fitted(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        post = (t > 0).astype(float)
        b0, b1, b2, b3 = self.coefficients
        return b0 + b1 * t + b2 * post + b3 * t * post

    def to_dict(self) -> dict:
        return asdict(self)


def discontinuity_design(t) -> np.ndarray:
    """Columns ``[1, t, I[t > 0], t * I[t > 0]]`` for a centred running variable."""
    t = np.asarray(t, dtype=float)
    post = (t > 0).astype(float)
    return np.column_stack([np.ones_like(t), t, post, t * post])


class RegressionDiscontinuity(RegressorMixin, BaseEstimator):
    """Linear sharp RDD estimator.

    Parameters
    ----------
    alpha : float, default=0.05
        Level of the two-sided t-test on the jump coefficient.
    cutoff : float, default=0.0
        Value of the running variable where treatment switches on.
        Observations with ``X > cutoff`` are treated.
    baseline_eps : float, default=1e-6
        Intercepts smaller than this in magnitude make the relative effect
        undefined and mark the fit as an outlier.

    Attributes
    ----------
    coef_ : ndarray of shape (4,)
        Intercept, pre-trend, jump and trend change.
    stderr_ : ndarray of shape (4,)
    p_value_jump_ : float
    ate_relative_pct_ : float
    significant_ : bool
    outlier_ : bool
    f_stat_, f_pvalue_ : float
        Whole-model F-test against the intercept-only fit. Reported only;
        significance is decided by the jump test.
    """

    def __init__(self, alpha=0.05, cutoff=0.0, baseline_eps=BASELINE_EPS):
        self.alpha = alpha
        self.cutoff = cutoff
        self.baseline_eps = baseline_eps

    def fit(self, X, y):
        alpha = check_alpha(self.alpha)
        t = check_running_variable(X) - float(self.cutoff)
        y = check_1d(y, "y")
        if y.shape != t.shape:
            raise ValueError(f"X and y lengths differ: {t.shape[0]} != {y.shape[0]}")
        if (t <= 0).sum() < 2 or (t > 0).sum() < 2:
            raise ValueError("need at least two observations on each side of the cutoff")

        fit = ols_fit(discontinuity_design(t), y)
        coef, se = fit.coefficients, fit.standard_errors
        b0, b2 = float(coef[0]), float(coef[2])

        if se[2] > 0:
            t_jump = b2 / float(se[2])
        else:
            t_jump = math.copysign(math.inf, b2) if b2 != 0 else 0.0
        p_jump = t_sf_two_sided(t_jump, fit.degrees_of_freedom)

        tss = float(np.sum((y - y.mean()) ** 2))
        if fit.residual_sum_squares > 0:
            f_model = ((tss - fit.residual_sum_squares) / (fit.n_params - 1)) / fit.sigma2
            f_model = max(f_model, 0.0)
        else:
            f_model = math.inf if tss > 0 else 0.0
        p_model = f_sf(f_model, fit.n_params - 1, fit.degrees_of_freedom)

        zero_baseline = not np.any(y[t <= 0]) and bool(np.any(y[t > 0]))
        tiny = abs(b0) < self.baseline_eps
        self.coef_ = coef
        self.stderr_ = se
        self.ssr_ = fit.residual_sum_squares
        self.dof_ = fit.degrees_of_freedom
        self.t_jump_ = t_jump
        self.p_value_jump_ = p_jump
        self.f_stat_ = f_model
        self.f_pvalue_ = p_model
        self.ate_relative_pct_ = math.nan if tiny else 100.0 * b2 / b0
        self.significant_ = bool(p_jump < alpha)
        self.outlier_ = bool(zero_baseline or tiny)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        t = check_running_variable(X) - float(self.cutoff)
        return discontinuity_design(t) @ self.coef_

    def result(self) -> RddFit:
        check_is_fitted(self, "coef_")
        b0, b1, b2, b3 = (float(c) for c in self.coef_)
        return RddFit(
            beta0_intercept=b0, beta1_trend=b1, beta2_jump=b2, beta3_trend_change=b3,
            p_value_jump=self.p_value_jump_, ate_relative_pct=self.ate_relative_pct_,
            significant=self.significant_, outlier=self.outlier_,
            se_jump=float(self.stderr_[2]), t_jump=self.t_jump_,
            residual_sum_squares=self.ssr_, degrees_of_freedom=self.dof_,
            f_stat_model=self.f_stat_, p_value_model=self.f_pvalue_,
            alpha=float(self.alpha),
        )


def fit_rdd(window: EventWindow, alpha: float = 0.05) -> RddFit:
    """Fit the discontinuity model to a 24-point event window."""
    if is_all_zero(window):
        raise DegenerateWindow(
            f"window for {window.borrowed_id!r} at {window.release} is zero everywhere")
    est = RegressionDiscontinuity(alpha=alpha).fit(WINDOW_T, window.values)
    res = est.result()
    # the estimator's own zero-baseline test already matches the window rule
    assert res.outlier or not has_zero_baseline(window)
    return res
