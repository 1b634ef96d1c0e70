"""Local polynomial chaos expansion and its analytic post-processing."""

from dataclasses import dataclass

import numpy as np

from . import regression
from .errors import DimensionMismatch, DomainError, ZeroVariance
from .polybasis import BasisSet, Box, design_matrix, total_degree_basis

VARIANCE_TOL = 1e-300


@dataclass(frozen=True, eq=False)
class LocalPCE:
    """Expansion on a box in scaled orthonormal Legendre polynomials.

    Attributes
    ----------
    box : Box
        Box the Legendre scaling refers to (the training box).
    basis : BasisSet
        Active terms, intercept first.
    coefficients : ndarray, shape (len(basis),)
    q2 : float
        LOO error of the fit that produced the expansion.
    n_train : int
    y_var : float
        Variance (ddof=0) of the training responses, the normaliser of ``q2``.
    """

    box: Box
    basis: BasisSet
    coefficients: np.ndarray
    q2: float = 0.0
    n_train: int = 0
    y_var: float = 0.0

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.float64).reshape(-1)
        if c.size != len(self.basis):
            raise DimensionMismatch("basis and coefficients differ in length")
        if self.basis.dimension != self.box.dim:
            raise DimensionMismatch("basis and box dimensions differ")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "q2", float(self.q2))
        object.__setattr__(self, "n_train", int(self.n_train))
        object.__setattr__(self, "y_var", float(self.y_var))

    @classmethod
    def constant(cls, box, value, q2=0.0, n_train=0):
        return cls(box, BasisSet(np.zeros((1, box.dim), dtype=np.int64)), [value], q2, n_train)

    @property
    def dim(self):
        return self.box.dim

    @property
    def nonconstant(self):
        return self.basis.indices.sum(axis=1) > 0

    def predict(self, points):
        """Evaluate the expansion at points inside ``box``.

        Accepts a single point (returns float) or an (n, M) array.
        """
        x = np.asarray(points, dtype=np.float64)
        single = x.ndim == 1
        vals = design_matrix(np.atleast_2d(x), self.basis, self.box) @ self.coefficients
        return float(vals[0]) if single else vals

    def fluctuation(self, points, check=True):
        """Non-intercept part of the expansion; ``check=False`` extrapolates."""
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        mask = self.nonconstant
        if not mask.any():
            if check and not np.all(self.box.contains(x)):
                raise DomainError("point outside box")
            return np.zeros(x.shape[0])
        sub = self.basis.subset(np.concatenate([[0], np.flatnonzero(mask)]))
        coef = np.concatenate([[0.0], self.coefficients[mask]])
        return design_matrix(x, sub, self.box, check=check) @ coef

    def variance_density(self, points, density=None):
        """Squared fluctuation times the germ density (default ``1/volume``)."""
        if density is None:
            density = 1.0 / self.box.volume
        x = np.asarray(points, dtype=np.float64)
        vals = self.fluctuation(x) ** 2 * density
        return float(vals[0]) if x.ndim == 1 else vals

    @property
    def mean(self):
        return float(self.coefficients[0])

    @property
    def variance(self):
        c = self.coefficients[self.nonconstant]
        return float(np.dot(c, c))

    def moments(self):
        return self.mean, self.variance

    def partial_variances(self):
        """First-order partial variances, one per input axis."""
        idx = self.basis.indices
        active_axes = (idx > 0).sum(axis=1)
        out = np.zeros(self.dim)
        for j in range(self.dim):
            sel = (active_axes == 1) & (idx[:, j] > 0)
            out[j] = np.dot(self.coefficients[sel], self.coefficients[sel])
        return out

    def sobol_first_order(self, strict=False):
        """First-order Sobol indices of the expansion.

        Returns
        -------
        indices : ndarray, shape (M,)
        zero_variance : bool
            True when the expansion is constant; ``indices`` is then the
            uniform vector ``1/M``.

        Raises
        ------
        ZeroVariance
            Only when ``strict`` is set and the variance vanishes.
        """
        var = self.variance
        if var <= VARIANCE_TOL:
            if strict:
                raise ZeroVariance("expansion has zero variance")
            return np.full(self.dim, 1.0 / self.dim), True
        return self.partial_variances() / var, False


def local_moments(pce):
    return pce.moments()


def local_sobol_first_order(pce):
    return pce.sobol_first_order()[0]


def predict(pce, xi):
    return pce.predict(xi)


def variance_density(pce, xi, density=None):
    return pce.variance_density(xi, density)


def fit_pce(points, y, box, degree, method="lars"):
    """Fit a total-degree expansion on ``box``.

    Parameters
    ----------
    points : ndarray, shape (N, M)
    y : ndarray, shape (N,)
    box : Box
    degree : int
        Maximum total degree of the candidate basis.
    method : {"lars", "ols"}
        ``"lars"`` selects a sparse active set by hybrid LARS, ``"ols"`` fits
        the full basis.

    Returns
    -------
    LocalPCE
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    basis = total_degree_basis(box.dim, degree)
    psi = design_matrix(points, basis, box)
    if method == "ols":
        fit = regression.ols_fit(psi, y)
    elif method == "lars":
        fit = regression.lars_select(psi, y)
    else:
        raise ValueError(f"unknown method {method!r}")
    sel = fit.selected
    return LocalPCE(box, basis.subset(sel), fit.coefficients[sel], fit.q2, len(y), float(np.var(y)))
