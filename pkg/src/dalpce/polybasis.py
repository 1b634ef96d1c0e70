"""Orthonormal Legendre polynomials, multi-index sets and design matrices.

Polynomials are orthonormal with respect to the uniform *probability*
density on their interval, so on [-1, 1] the degree-n polynomial is
``sqrt(2n+1) * P_n(x)`` with ``P_n`` the classical Legendre polynomial.
"""

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .errors import DimensionMismatch, DomainError

BOUNDS_TOL = 1e-12
CARDINALITY_CAP = 10**6


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box inside the unit hypercube.

    Parameters
    ----------
    lower, upper : array_like
        Corner coordinates; ``lower[i] < upper[i]`` for every axis.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=np.float64).reshape(-1)
        hi = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise DimensionMismatch("lower and upper must be non-empty and equally long")
        if np.any(lo >= hi):
            raise DomainError(f"degenerate box: lower={lo}, upper={hi}")
        if np.any(lo < -BOUNDS_TOL) or np.any(hi > 1.0 + BOUNDS_TOL):
            raise DomainError("box must lie inside the unit hypercube")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self):
        return self.lower.size

    @property
    def edges(self):
        return self.upper - self.lower

    @property
    def volume(self):
        return float(np.prod(self.edges))

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def contains(self, points, tol=BOUNDS_TOL):
        """Closed-box membership test with tolerance, vectorised over rows."""
        x = np.atleast_2d(points)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=1)

    def to_reference(self, points):
        """Map points to [-1, 1]^M."""
        x = np.asarray(points, dtype=np.float64)
        return (2.0 * x - self.lower - self.upper) / (self.upper - self.lower)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return (np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


def legendre_table(x, pmax):
    """Orthonormal Legendre values ``psi_0..psi_pmax`` at reference points.

    Parameters
    ----------
    x : array_like
        Points in [-1, 1] (not checked).
    pmax : int
        Highest degree.

    Returns
    -------
    ndarray
        Shape ``x.shape + (pmax + 1,)``.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.shape + (pmax + 1,))
    out[..., 0] = 1.0
    if pmax >= 1:
        out[..., 1] = x
    # three-term recurrence on the classical polynomials, normalised at the end
    for n in range(1, pmax):
        out[..., n + 1] = ((2 * n + 1) * x * out[..., n] - n * out[..., n - 1]) / (n + 1)
    out *= np.sqrt(2.0 * np.arange(pmax + 1) + 1.0)
    return out


def _check_interval(x, a, b):
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < a - BOUNDS_TOL) or np.any(x > b + BOUNDS_TOL):
        raise DomainError(f"argument outside [{a}, {b}]")
    return x


def legendre_orthonormal(n, x):
    """Degree-``n`` orthonormal Legendre polynomial on [-1, 1]."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = _check_interval(x, -1.0, 1.0)
    val = legendre_table(x, n)[..., n]
    return float(val) if val.ndim == 0 else val


def scaled_legendre(n, xi, edge):
    """Degree-``n`` Legendre polynomial orthonormal on the interval ``edge=(a, b)``."""
    a, b = float(edge[0]), float(edge[1])
    if not a < b:
        raise DomainError("interval must satisfy a < b")
    xi = _check_interval(xi, a, b)
    return legendre_orthonormal(n, np.clip((2.0 * xi - a - b) / (b - a), -1.0, 1.0))


def multivariate_eval(alpha, xi, box):
    """Tensor-product basis function ``alpha`` at point ``xi`` of ``box``."""
    alpha = tuple(int(a) for a in alpha)
    xi = np.asarray(xi, dtype=np.float64).reshape(-1)
    if len(alpha) != box.dim or xi.size != box.dim:
        raise DimensionMismatch("multi-index, point and box dimensions differ")
    val = 1.0
    for a, x, lo, hi in zip(alpha, xi, box.lower, box.upper):
        val *= scaled_legendre(a, x, (lo, hi))
    return val


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Ordered list of multi-indices, the first being the intercept.

    Attributes
    ----------
    indices : ndarray of int, shape (P, M)
    """

    indices: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[0] == 0 or idx.shape[1] == 0:
            raise DimensionMismatch("indices must be a non-empty (P, M) array")
        if np.any(idx < 0):
            raise ValueError("multi-index entries must be non-negative")
        if np.any(idx[0] != 0):
            raise ValueError("first multi-index must be the intercept")
        if len({tuple(r) for r in idx.tolist()}) != len(idx):
            raise ValueError("duplicate multi-indices")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def dimension(self):
        return self.indices.shape[1]

    @property
    def max_degree(self):
        return int(self.indices.sum(axis=1).max())

    def __len__(self):
        return self.indices.shape[0]

    def subset(self, cols):
        return BasisSet(self.indices[np.asarray(cols, dtype=np.int64)])

    def as_tuples(self):
        return [tuple(r) for r in self.indices.tolist()]

    def __eq__(self, other):
        if not isinstance(other, BasisSet):
            return NotImplemented
        return np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash(self.indices.tobytes())


def cardinality(dim, degree):
    return comb(dim + degree, degree)


def total_degree_basis(dim, degree, cap=CARDINALITY_CAP):
    """All multi-indices of total degree <= ``degree``.

    Ordered by total degree, then lexicographically (descending in the first
    coordinate, so ``(1, 0)`` precedes ``(0, 1)``).
    """
    if dim < 1 or degree < 0:
        raise ValueError("need dim >= 1 and degree >= 0")
    size = cardinality(dim, degree)
    if size > cap:
        raise OverflowError(f"basis cardinality {size} exceeds cap {cap}")
    rows = []
    for q in range(degree + 1):
        block = []
        for combo in combinations_with_replacement(range(dim), q):
            alpha = [0] * dim
            for ax in combo:
                alpha[ax] += 1
            block.append(tuple(alpha))
        block.sort(reverse=True)
        rows.extend(block)
    return BasisSet(np.array(rows, dtype=np.int64).reshape(size, dim))


def design_matrix(points, basis, box, check=True):
    """Basis evaluated at ``points``: entry (i, j) is basis term j at point i.

    Raises
    ------
    DomainError
        If ``check`` and some point lies outside ``box``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if x.shape[1] != box.dim or basis.dimension != box.dim:
        raise DimensionMismatch("points, basis and box dimensions differ")
    if check and not np.all(box.contains(x)):
        raise DomainError("point outside box")
    ref = box.to_reference(x)
    if check:
        ref = np.clip(ref, -1.0, 1.0)
    pmax = int(basis.indices.max())
    out = np.ones((x.shape[0], len(basis)))
    for d in range(box.dim):
        col_deg = basis.indices[:, d]
        if not col_deg.any():
            continue
        out *= legendre_table(ref[:, d], pmax)[:, col_deg]
    return out
