"""Benchmark functions, the relative MSE measure and a global-PCE baseline.

All functions take an (n, M) array of points in the unit hypercube and
return n values.
"""

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import regression
from .errors import DimensionMismatch, ZeroVariance
from .polybasis import Box, cardinality, design_matrix, total_degree_basis
from .sampling import lhs
from .surrogate import LocalPCE

VALIDATION_CHUNK = 50_000


def _cols(x, dim=None):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if dim is not None and x.shape[1] != dim:
        raise DimensionMismatch(f"expected {dim} columns, got {x.shape[1]}")
    return x


def toy1d(x):
    """``-x + 0.1 sin(30x) + exp(-(50(x - 0.65))^2)``."""
    scalar = np.ndim(x) == 0
    t = np.asarray(x, dtype=np.float64)
    if t.ndim == 2:
        t = _cols(t, 1)[:, 0]
    y = -t + 0.1 * np.sin(30.0 * t) + np.exp(-(50.0 * (t - 0.65)) ** 2)
    return float(y) if scalar else y


def singularity2d(x, delta=0.1):
    """Two mirrored quarter-circle arc singularities of strength ``delta``."""
    x = _cols(x, 2)
    x1, x2 = x[:, 0], x[:, 1]
    return (1.0 / (np.abs(0.3 - x1 ** 2 - x2 ** 2) + delta)
            - 1.0 / (np.abs(0.3 - (1.0 - x1) ** 2 - (1.0 - x2) ** 2) + delta))


def discontinuity_md(x, threshold=0.5):
    """``sin(pi x1) sin(pi x2)`` on the lower-left corner, else the sum of x3..xM."""
    x = _cols(x)
    if x.shape[1] < 2:
        raise DimensionMismatch("discontinuity function needs M >= 2")
    corner = (x[:, 0] <= threshold) & (x[:, 1] <= threshold)
    rest = x[:, 2:].sum(axis=1)
    return np.where(corner, np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]), rest)


def _toy1d_mean():
    bump = math.sqrt(math.pi) / 100.0 * (math.erf(50 * 0.35) + math.erf(50 * 0.65))
    return -0.5 + 0.1 * (1.0 - math.cos(30.0)) / 30.0 + bump


def _discontinuity_mean(dim, threshold):
    s = (1.0 - math.cos(math.pi * threshold)) / math.pi
    return s * s + (1.0 - threshold ** 2) * (dim - 2) / 2.0


@dataclass(frozen=True)
class BenchmarkCase:
    """A built-in test problem.

    Attributes
    ----------
    name : str
    dim : int
    func : callable
    mean : float or None
        Exact mean over the unit hypercube when known in closed form.
    budgets : tuple of int
        Default budget schedule for benchmark sweeps.
    """

    name: str
    dim: int
    func: object = field(repr=False)
    mean: float = None
    budgets: tuple = ()

    def __call__(self, x):
        return self.func(_cols(x, self.dim))


CASE_NAMES = ("toy1d", "singularity2d", "discontinuity", "discontinuity_shifted")


def get_case(name, dim=None):
    """Built-in case by name.

    ``discontinuity`` (threshold 0.5) and ``discontinuity_shifted`` (0.61)
    take ``dim`` (default 2); the others have a fixed dimension.
    """
    if name == "toy1d":
        if dim not in (None, 1):
            raise DimensionMismatch("toy1d is one-dimensional")
        return BenchmarkCase("toy1d", 1, toy1d, _toy1d_mean(), (50, 100, 150, 200))
    if name == "singularity2d":
        if dim not in (None, 2):
            raise DimensionMismatch("singularity2d is two-dimensional")
        return BenchmarkCase("singularity2d", 2, singularity2d, None, (200, 500, 1000, 2000))
    if name in ("discontinuity", "discontinuity_shifted"):
        dim = 2 if dim is None else int(dim)
        t = 0.5 if name == "discontinuity" else 0.61
        budgets = (150, 300, 450, 600) if dim == 2 else (300, 600, 1000, 1500)
        return BenchmarkCase(name, dim, partial(discontinuity_md, threshold=t),
                             _discontinuity_mean(dim, t), budgets)
    raise KeyError(f"unknown benchmark case {name!r}; choose from {CASE_NAMES}")


def validation_points(dim, n_val, seed):
    """Crude Monte Carlo validation set, reproducible from ``seed``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x5EED])))
    return rng.random((int(n_val), int(dim)))


def baseline_design(dim, n, seed):
    """Latin hypercube design for the global baseline, reproducible from ``seed``.

    Kept separate from the learner's streams so the baseline never sees the
    actively placed points.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xBA5E])))
    return lhs(int(n), Box.unit(int(dim)), rng)


def _as_predictor(surrogate):
    for attr in ("global_predict", "predict"):
        fn = getattr(surrogate, attr, None)
        if fn is not None:
            return fn
    if callable(surrogate):
        return surrogate
    raise TypeError("surrogate must be callable or provide predict/global_predict")


def epsilon_error(surrogate, truth, dim, n_val=10**6, seed=0, points=None, truth_values=None):
    """Relative mean squared error ``E[(f - g)^2] / Var[f]`` on a Monte Carlo set.

    Parameters
    ----------
    surrogate : object
        Callable, or object with ``global_predict`` / ``predict``.
    truth : callable
    dim : int
    n_val : int
    seed : int
        Seed of the validation set.
    points, truth_values : ndarray, optional
        Precomputed validation set and model values (reused across calls).

    Raises
    ------
    ZeroVariance
        If the true function is constant on the validation set.
    """
    if points is None:
        points = validation_points(dim, n_val, seed)
    if truth_values is None:
        truth_values = np.asarray(truth(points), dtype=np.float64)
    predict = _as_predictor(surrogate)
    pred = np.concatenate([np.asarray(predict(points[s:s + VALIDATION_CHUNK]), dtype=np.float64)
                           for s in range(0, len(points), VALIDATION_CHUNK)])
    var = np.var(truth_values)
    if not var > 0.0:
        raise ZeroVariance("true function has zero variance on the validation set")
    err = truth_values - pred
    return float(np.mean(err * err) / var)


def global_pce_baseline(points, values, p_range=(5, 25)):
    """Degree-adaptive global expansion on the unit hypercube.

    Every degree in ``p_range`` (inclusive) whose basis fits the design
    (``P <= N``) is fitted by hybrid LARS; the fit with the smallest LOO
    error wins, lower degree on ties.
    """
    x = _cols(points)
    y = np.asarray(values, dtype=np.float64).reshape(-1)
    dim = x.shape[1]
    unit = Box.unit(dim)
    best = None
    for p in range(int(p_range[0]), int(p_range[1]) + 1):
        if cardinality(dim, p) > len(y):
            break
        basis = total_degree_basis(dim, p)
        psi = design_matrix(x, basis, unit)
        fit = regression.lars_select(psi, y)
        if best is None or fit.q2 < best[0].q2:
            best = (fit, basis)
    if best is None:
        raise ValueError(f"no degree in {p_range} fits {len(y)} points in {dim} dimensions")
    fit, basis = best
    sel = fit.selected
    return LocalPCE(unit, basis.subset(sel), fit.coefficients[sel], fit.q2, len(y))
