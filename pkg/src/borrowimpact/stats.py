"""Least squares with coefficient inference, and t / F tail probabilities.

Both estimators in the package reduce to a handful of small OLS problems
followed by a t- or F-test, so everything here works on plain numpy arrays
and Python floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RankDeficient, Underdetermined

_CF_EPS = 1e-14
_CF_TINY = 1e-300
_CF_MAXIT = 10_000


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    residual_sum_squares: float
    degrees_of_freedom: int
    n_observations: int
    n_params: int
    residuals: np.ndarray

    @property
    def sigma2(self) -> float:
        """Residual variance estimate SSR / (n - p); NaN without spare dof."""
        if self.degrees_of_freedom < 1:
            return math.nan
        return self.residual_sum_squares / self.degrees_of_freedom

    @property
    def t_values(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coefficients / self.standard_errors


def ols_fit(design_matrix, response) -> OlsFit:
    """Least-squares fit through a Householder QR factorisation.

    Parameters
    ----------
    design_matrix : array-like of shape (n, p)
    response : array-like of shape (n,)

    Raises
    ------
    Underdetermined
        If there are fewer observations than columns.
    RankDeficient
        If the numerical rank, judged from the singular values with the
        usual ``max(n, p) * eps * s_max`` cut-off, is below ``p``.
    """
    X = np.asarray(design_matrix, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"incompatible shapes {X.shape} and {y.shape}")
    n, p = X.shape
    if n < p:
        raise Underdetermined(f"{n} observations cannot identify {p} coefficients")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design matrix and response must be finite")

    sv = np.linalg.svd(X, compute_uv=False)
    tol = max(n, p) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    if rank < p:
        raise RankDeficient(f"design matrix has rank {rank} < {p} columns")

    q, r = np.linalg.qr(X, mode="reduced")
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    ssr = float(resid @ resid)
    dof = n - p
    if dof >= 1:
        r_inv = np.linalg.solve(r, np.eye(p))
        cov = (ssr / dof) * (r_inv @ r_inv.T)
        se = np.sqrt(np.diag(cov))
    else:
        se = np.full(p, np.nan)
    return OlsFit(coef, se, ssr, dof, n, p, resid)


def projection_ssr(design_matrix, response) -> tuple[float, int]:
    """Residual sum of squares after projecting onto the column space.

    Unlike :func:`ols_fit` this tolerates collinear columns; it returns the
    SSR together with the numerical rank used.
    """
    X = np.asarray(design_matrix, dtype=float)
    y = np.asarray(response, dtype=float)
    u, sv, _ = np.linalg.svd(X, full_matrices=False)
    tol = max(X.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    basis = u[:, sv > tol]
    resid = y - basis @ (basis.T @ y)
    return float(resid @ resid), basis.shape[1]


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularized incomplete beta function I_x(a, b).

    ``y`` is ``1 - x``; pass it when it is known more accurately than the
    subtraction would give (e.g. ``t**2 / (df + t**2)``).
    """
    if a <= 0 or b <= 0:
        raise DomainError(f"shape parameters must be positive, got a={a}, b={b}")
    if y is None:
        y = 1.0 - x
    if not (0.0 <= x <= 1.0) or not (0.0 <= y <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if y == 0.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def _check_df(*dfs) -> None:
    for df in dfs:
        if isinstance(df, bool) or not isinstance(df, (int, float, np.integer, np.floating)):
            raise DomainError(f"degrees of freedom must be a number, got {df!r}")
        if not math.isfinite(df) or df < 1:
            raise DomainError(f"degrees of freedom must be >= 1, got {df}")


def t_sf_two_sided(t_stat: float, df: float) -> float:
    """P(|T| >= |t_stat|) for Student's t with ``df`` degrees of freedom."""
    _check_df(df)
    t_stat = float(t_stat)
    if math.isnan(t_stat):
        return math.nan
    if math.isinf(t_stat):
        return 0.0
    t2 = t_stat * t_stat
    denom = df + t2
    return min(1.0, betainc_regularized(df / 2.0, 0.5, df / denom, t2 / denom))


def f_sf(f_stat: float, df1: float, df2: float) -> float:
    """P(F >= f_stat) for Fisher's F with (df1, df2) degrees of freedom."""
    _check_df(df1, df2)
    f_stat = float(f_stat)
    if math.isnan(f_stat):
        return math.nan
    if f_stat < 0:
        raise DomainError(f"F statistic must be non-negative, got {f_stat}")
    if math.isinf(f_stat):
        return 0.0
    num = df1 * f_stat
    denom = df2 + num
    return min(1.0, betainc_regularized(df2 / 2.0, df1 / 2.0, df2 / denom, num / denom))
