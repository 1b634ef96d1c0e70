"""Axis-aligned decomposition of the unit hypercube into sub-domains.

Sub-domains are the leaves of a binary split tree. A point ``x`` descends
to the upper child of a node whenever ``x[axis] >= cut``, which makes every
box half-open ``[a, b)`` except on the global upper faces.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateEdge, DomainError, MissingPce
from .polybasis import BOUNDS_TOL, Box
from .regression import MAX_ERROR
from .surrogate import LocalPCE

DEFAULT_MIN_EDGE = 1e-6


@dataclass
class SubDomain:
    """One cell of the decomposition.

    ``inherited`` marks an expansion taken over from the parent at a split;
    such an expansion keeps the parent's box for its Legendre scaling.
    """

    box: Box
    pce: LocalPCE = None
    member_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    inherited: bool = False
    frozen: bool = False

    def __post_init__(self):
        self.member_ids = np.asarray(self.member_ids, dtype=np.int64).reshape(-1)

    @property
    def volume(self):
        return self.box.volume

    @property
    def n_members(self):
        return int(self.member_ids.size)

    @property
    def q2(self):
        if self.pce is None:
            raise MissingPce("sub-domain has no expansion")
        return float(min(max(self.pce.q2, 0.0), MAX_ERROR))


class Decomposition:
    """Partition of ``[0, 1]^M`` into boxes, each carrying a local expansion.

    Parameters
    ----------
    dim : int
    pce : LocalPCE, optional
        Expansion of the initial single sub-domain.
    member_ids : array_like, optional
        ED indices inside the initial sub-domain.
    """

    def __init__(self, dim, pce=None, member_ids=()):
        self.dim = int(dim)
        self.subdomains = [SubDomain(Box.unit(self.dim), pce, member_ids)]
        # split tree; a node is a leaf iff leaf[node] >= 0
        self._axis = [-1]
        self._cut = [0.0]
        self._left = [-1]
        self._right = [-1]
        self._leaf = [0]
        self._leaf_node = [0]
        self._packed = None
        self._tree = None

    def __len__(self):
        return len(self.subdomains)

    def __getitem__(self, sid):
        return self.subdomains[sid]

    def __iter__(self):
        return iter(self.subdomains)

    @property
    def volumes(self):
        return np.array([s.volume for s in self.subdomains])

    def _invalidate(self):
        self._packed = None
        self._tree = None

    def tree_arrays(self):
        if self._tree is None:
            self._tree = (np.array(self._axis, dtype=np.int64), np.array(self._cut),
                          np.array(self._left, dtype=np.int64), np.array(self._right, dtype=np.int64),
                          np.array(self._leaf, dtype=np.int64))
        return self._tree

    # ------------------------------------------------------------------ queries

    def locate(self, points):
        """Sub-domain id of each point (int for a single point)."""
        x = np.asarray(points, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise DomainError(f"expected {self.dim}-dimensional points")
        if x.size and (x.min() < -BOUNDS_TOL or x.max() > 1.0 + BOUNDS_TOL):
            raise DomainError("point outside the unit hypercube")
        ids = _kernels.locate_tree(x, *self.tree_arrays())
        return int(ids[0]) if single else ids

    def packed(self):
        """Expansions of all sub-domains in the kernel layout (see ``_kernels``)."""
        if self._packed is None:
            starts = [0]
            exps, coefs, lo, hi = [], [], [], []
            for s in self.subdomains:
                if s.pce is None:
                    raise MissingPce("sub-domain without expansion")
                exps.append(s.pce.basis.indices)
                coefs.append(s.pce.coefficients)
                lo.append(s.pce.box.lower)
                hi.append(s.pce.box.upper)
                starts.append(starts[-1] + len(s.pce.coefficients))
            exps = np.ascontiguousarray(np.concatenate(exps), dtype=np.int64)
            self._packed = (np.array(starts, dtype=np.int64), exps,
                            np.ascontiguousarray(np.concatenate(coefs)),
                            np.ascontiguousarray(np.array(lo)), np.ascontiguousarray(np.array(hi)),
                            int(exps.max()))
        return self._packed

    def evaluate(self, points, owner, fluctuation_only=False):
        """Evaluate the expansion of sub-domain ``owner[i]`` at ``points[i]``.

        No box check: expansions extrapolate outside their box.
        """
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        starts, exps, coefs, lo, hi, pmax = self.packed()
        return _kernels.eval_packed(x, np.asarray(owner, dtype=np.int64), starts, exps, coefs,
                                    lo, hi, pmax, fluctuation_only)

    def global_predict(self, points):
        x = np.asarray(points, dtype=np.float64)
        single = x.ndim == 1
        vals = self.evaluate(np.atleast_2d(x), self.locate(np.atleast_2d(x)))
        return float(vals[0]) if single else vals

    # ---------------------------------------------------------------- mutation

    def set_pce(self, sid, pce, inherited=False):
        sub = self.subdomains[sid]
        sub.pce = pce
        sub.inherited = inherited
        self._packed = None

    def add_members(self, sid, ids):
        sub = self.subdomains[sid]
        sub.member_ids = np.concatenate([sub.member_ids, np.asarray(ids, dtype=np.int64)])

    def split(self, sid, direction, decisive, points, min_edge=DEFAULT_MIN_EDGE):
        """Halve sub-domain ``sid`` along ``direction``.

        Parameters
        ----------
        sid : int
        direction : int
            Axis perpendicular to the cut plane.
        decisive : array_like
            Point inside the parent; its side becomes the refinement child.
        points : ndarray
            Global ED coordinates, used to repartition ``member_ids``.
        min_edge : float

        Returns
        -------
        refine_id, inherit_id : int
            The lower child keeps id ``sid``, the upper child is appended.
            Both children start with the parent's expansion by reference.

        Raises
        ------
        DegenerateEdge
            If the parent's edge along ``direction`` is shorter than ``min_edge``.
        """
        parent = self.subdomains[sid]
        if parent.pce is None:
            raise MissingPce("cannot split a sub-domain without an expansion")
        j = int(direction)
        lo, hi = parent.box.lower, parent.box.upper
        if hi[j] - lo[j] < min_edge:
            raise DegenerateEdge(f"edge {j} of sub-domain {sid} is {hi[j] - lo[j]:.3g} < {min_edge}")
        decisive = np.asarray(decisive, dtype=np.float64).reshape(-1)
        if not parent.box.contains(decisive)[0]:
            raise DomainError("decisive point outside the parent box")
        cut = 0.5 * (lo[j] + hi[j])
        upper_lo = lo.copy()
        upper_lo[j] = cut
        lower_hi = hi.copy()
        lower_hi[j] = cut
        members = parent.member_ids
        upper_mask = np.asarray(points, dtype=np.float64)[members, j] >= cut if members.size else np.zeros(0, bool)
        lower = SubDomain(Box(lo, lower_hi), parent.pce, members[~upper_mask], inherited=True)
        upper = SubDomain(Box(upper_lo, hi), parent.pce, members[upper_mask], inherited=True)

        new_id = len(self.subdomains)
        self.subdomains[sid] = lower
        self.subdomains.append(upper)
        node = self._leaf_node[sid]
        left_node, right_node = len(self._axis), len(self._axis) + 1
        self._axis[node], self._cut[node] = j, cut
        self._left[node], self._right[node], self._leaf[node] = left_node, right_node, -1
        self._axis += [-1, -1]
        self._cut += [0.0, 0.0]
        self._left += [-1, -1]
        self._right += [-1, -1]
        self._leaf += [sid, new_id]
        self._leaf_node[sid] = left_node
        self._leaf_node.append(right_node)
        self._invalidate()

        if decisive[j] >= cut:
            return new_id, sid
        return sid, new_id

    # -------------------------------------------------------------- aggregates

    def _require_pce(self):
        for s in self.subdomains:
            if s.pce is None:
                raise MissingPce("every sub-domain needs an expansion")

    def aggregate_mean(self):
        self._require_pce()
        return float(sum(s.volume * s.pce.mean for s in self.subdomains))

    def aggregate_variance(self):
        """Volume-weighted sum of local variances (no between-cell term)."""
        self._require_pce()
        return float(sum(s.volume * s.pce.variance for s in self.subdomains))

    def exact_variance(self):
        """Variance of the composite model, including the spread of local means."""
        self._require_pce()
        mu = self.aggregate_mean()
        second = sum(s.volume * (s.pce.variance + s.pce.mean ** 2) for s in self.subdomains)
        return float(second - mu * mu)

    def aggregate_sobol(self):
        """Volume-weighted first-order partial variances over ``aggregate_variance``."""
        self._require_pce()
        var = self.aggregate_variance()
        if var <= 0.0:
            return np.full(self.dim, 1.0 / self.dim)
        partial = sum(s.volume * s.pce.partial_variances() for s in self.subdomains)
        return partial / var

    def aggregate_q2(self, reference_variance=None):
        """Volume-weighted sum of the local LOO errors.

        With ``reference_variance`` each local error is first converted back to
        a LOO mean squared error (``q2 * y_var``) and divided by that common
        variance instead of its own training variance.
        """
        self._require_pce()
        if reference_variance is None:
            return float(sum(s.volume * s.q2 for s in self.subdomains))
        if not reference_variance > 0:
            raise ValueError("reference_variance must be positive")
        return float(sum(s.volume * s.q2 * s.pce.y_var for s in self.subdomains)
                     / reference_variance)


def split(decomp, sid, direction, decisive, points, min_edge=DEFAULT_MIN_EDGE):
    return decomp.split(sid, direction, decisive, points, min_edge)


def locate(decomp, xi):
    return decomp.locate(xi)


def global_predict(decomp, xi):
    return decomp.global_predict(xi)
