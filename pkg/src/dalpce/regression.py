"""Least-squares coefficient estimation with analytic leave-one-out error.

Column 0 of every design matrix handled here is taken to be the intercept.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import lars_path

from .errors import DimensionMismatch, LeverageOne, RankDeficient

#: Finite stand-in for an unusable LOO error, so weighted sums stay orderable.
MAX_ERROR = 1e6
RANK_TOL = 1e-10
LEVERAGE_TOL = 1e-10
CONST_VAR_TOL = 1e-14
CONST_RESID_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of a regression.

    Attributes
    ----------
    coefficients : ndarray, shape (P,)
        Full-length vector; unselected columns are exactly zero.
    selected : ndarray of int
        Active column indices, ascending, always containing 0.
    q2 : float
        Normalised LOO error (0 is perfect), ``MAX_ERROR`` when unusable.
    h_diag : ndarray, shape (N,)
        Leverages of the training points for the active columns.
    """

    coefficients: np.ndarray
    selected: np.ndarray
    q2: float
    h_diag: np.ndarray


def _check_shapes(design, y):
    design = np.asarray(design, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if design.ndim != 2 or design.shape[0] != y.size:
        raise DimensionMismatch(f"design {design.shape} incompatible with {y.size} responses")
    return design, y


def _q2_from(resid, h, y):
    """LOO error from residuals and leverages; raises LeverageOne."""
    if np.any(h > 1.0 - LEVERAGE_TOL):
        raise LeverageOne("interpolating fit, leverage equals one")
    var = np.var(y)
    if var < CONST_VAR_TOL:
        return 0.0 if np.all(np.abs(resid) < CONST_RESID_TOL) else MAX_ERROR
    loo = resid / (1.0 - h)
    return float(min(np.mean(loo * loo) / var, MAX_ERROR))


def _qr_checked(design):
    q, r = np.linalg.qr(design, mode="reduced")
    sv = np.linalg.svd(r, compute_uv=False)
    if sv.size == 0 or sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficient(f"design matrix rank deficient (cond ~ {sv[0] / max(sv[-1], 1e-300):.3g})")
    return q, r


def loo_error(design, y, beta):
    """Analytic leave-one-out error of a least-squares fit.

    Parameters
    ----------
    design : ndarray, shape (N, k)
        Active columns only.
    y : ndarray, shape (N,)
    beta : ndarray, shape (k,)

    Returns
    -------
    q2 : float
    h_diag : ndarray, shape (N,)

    Raises
    ------
    LeverageOne
        When some leverage exceeds ``1 - 1e-10``.
    """
    design, y = _check_shapes(design, y)
    q, _ = _qr_checked(design)
    h = np.einsum("ij,ij->i", q, q)
    resid = y - design @ np.asarray(beta, dtype=np.float64)
    return _q2_from(resid, h, y), h


def ols_fit(design, y):
    """Ordinary least squares through a QR factorisation.

    Raises
    ------
    RankDeficient
        If the smallest singular value is <= 1e-10 times the largest.
    DimensionMismatch
        On shape mismatch or fewer rows than columns.
    """
    design, y = _check_shapes(design, y)
    n, p = design.shape
    if n < p:
        raise DimensionMismatch(f"need at least as many points ({n}) as columns ({p})")
    q, r = _qr_checked(design)
    beta = np.linalg.solve(r, q.T @ y)
    h = np.einsum("ij,ij->i", q, q)
    resid = y - design @ beta
    try:
        q2 = _q2_from(resid, h, y)
    except LeverageOne:
        q2 = MAX_ERROR
    return FitResult(beta, np.arange(p), q2, h)


def lars_order(design, y, max_terms):
    """Order in which LARS activates the non-intercept columns.

    Columns are centred and scaled to unit norm before the path is traced;
    returned indices refer to ``design`` columns (never 0).
    """
    design, y = _check_shapes(design, y)
    n_extra = max_terms - 1
    if n_extra <= 0 or design.shape[1] == 1:
        return np.zeros(0, dtype=np.int64)
    x = design[:, 1:] - design[:, 1:].mean(axis=0)
    norms = np.linalg.norm(x, axis=0)
    usable = np.flatnonzero(norms > RANK_TOL * max(norms.max(initial=0.0), 1.0))
    yc = y - y.mean()
    if usable.size == 0 or np.linalg.norm(yc) <= CONST_RESID_TOL * max(1.0, np.abs(y).max()):
        return np.zeros(0, dtype=np.int64)
    x = x[:, usable] / norms[usable]
    _, active, _ = lars_path(x, yc, method="lar", max_iter=min(n_extra, usable.size))
    return usable[np.asarray(active, dtype=np.int64)] + 1


def lars_path_sets(design, y, max_terms=None):
    """Nested active sets along the LARS path, each starting with the intercept."""
    design, y = _check_shapes(design, y)
    if max_terms is None:
        max_terms = min(design.shape[0] - 1, design.shape[1])
    order = np.concatenate([[0], lars_order(design, y, max_terms)])[:max_terms]
    first = 2 if len(order) > 1 else 1
    return [order[:k] for k in range(first, len(order) + 1)]


def _nested_q2(design, y, order):
    """LOO errors of the OLS fits on every prefix of ``order``.

    The reduced QR of the reordered columns spans each prefix with its leading
    Q columns, so leverages and residuals accumulate column by column.
    """
    a = design[:, order]
    q, r = np.linalg.qr(a, mode="reduced")
    diag = np.abs(np.diag(r))
    q2 = np.full(len(order), np.inf)
    var = np.var(y)
    c = q.T @ y
    h = np.zeros(len(y))
    fitted = np.zeros(len(y))
    running_max = 0.0
    for k in range(len(order)):
        running_max = max(running_max, diag[k])
        if diag[k] <= RANK_TOL * running_max:
            break  # this prefix and all longer ones are rank deficient
        h += q[:, k] ** 2
        fitted += q[:, k] * c[k]
        resid = y - fitted
        if np.any(h > 1.0 - LEVERAGE_TOL):
            q2[k] = MAX_ERROR
        elif var < CONST_VAR_TOL:
            q2[k] = 0.0 if np.all(np.abs(resid) < CONST_RESID_TOL) else MAX_ERROR
        else:
            loo = resid / (1.0 - h)
            q2[k] = min(np.mean(loo * loo) / var, MAX_ERROR)
    return q2


def lars_select(design, y, max_terms=None):
    """Hybrid LARS: trace the LARS path, refit every active set by OLS and keep
    the set with the smallest analytic LOO error.

    Parameters
    ----------
    design : ndarray, shape (N, P)
        Full candidate design; column 0 is the intercept and is always kept.
    y : ndarray, shape (N,)
    max_terms : int, optional
        Largest active-set size, intercept included. Defaults to
        ``min(N - 1, P)``.

    Returns
    -------
    FitResult
        Falls back to the intercept-only fit if every candidate set is rank
        deficient.
    """
    design, y = _check_shapes(design, y)
    n, p = design.shape
    if n < 2:
        raise DimensionMismatch("LARS needs at least two points")
    limit = min(n - 1, p)
    if max_terms is None:
        max_terms = limit
    if not 1 <= max_terms <= limit:
        raise ValueError(f"max_terms must be in [1, {limit}]")

    order = np.concatenate([[0], lars_order(design, y, max_terms)])[:max_terms]
    q2_path = _nested_q2(design, y, order)
    if len(order) > 1:
        # candidates are the models after each LARS step; intercept-only is
        # kept only as the fallback below
        q2_path[0] = np.inf
    # smallest q2 first; on ties the sparser set wins
    for k in np.argsort(q2_path, kind="stable"):
        if not np.isfinite(q2_path[k]):
            break
        cols = np.sort(order[:k + 1])
        try:
            sub = ols_fit(design[:, cols], y)
        except RankDeficient:
            continue
        return _expand(sub, cols, p)
    sub = ols_fit(design[:, :1], y)
    return _expand(sub, np.array([0]), p)


def _expand(sub, cols, p):
    beta = np.zeros(p)
    beta[cols] = sub.coefficients
    return FitResult(beta, np.asarray(cols, dtype=np.int64), sub.q2, sub.h_diag)
