"""Random streams, Latin hypercube sampling and the Theta selection scores."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyPool
from .polybasis import Box

STREAMS = ("screening", "initial", "local", "validation")
DENSITY_CONVENTIONS = ("local", "global")


class RngStreams:
    """Independent PCG64 generators derived from one integer seed.

    Each stream (``screening``, ``initial``, ``local``, ``validation``) is
    spawned from ``SeedSequence(seed)`` so consumption of one never shifts
    another.
    """

    def __init__(self, seed):
        self.seed = int(seed)
        children = np.random.SeedSequence(self.seed).spawn(len(STREAMS))
        self._gens = {name: np.random.Generator(np.random.PCG64(ss))
                      for name, ss in zip(STREAMS, children)}

    def __getitem__(self, name):
        return self._gens[name]

    def get_state(self):
        return {name: g.bit_generator.state for name, g in self._gens.items()}

    def set_state(self, state):
        for name, st in state.items():
            self._gens[name].bit_generator.state = st


def lhs(n, box, rng):
    """Latin hypercube sample of ``n`` points in ``box``.

    Each axis is cut into ``n`` equal strata holding exactly one point, placed
    uniformly inside its stratum; strata are paired across axes by independent
    random permutations.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not isinstance(box, Box):
        box = Box(*box)
    out = np.empty((n, box.dim))
    for d in range(box.dim):
        perm = rng.permutation(n)
        u = rng.random(n)
        out[:, d] = (perm + u) / n
    x = box.lower + out * box.edges
    # keep points strictly below the upper face so they stay in a half-open box
    return np.minimum(x, np.nextafter(box.upper, -np.inf))


def nearest_neighbors(candidates, points):
    """Euclidean distance and index of the closest point for each candidate.

    Ties go to the lowest point index.
    """
    c = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if p.shape[0] == 0 or p.size == 0:
        raise EmptyPool("no points to measure distances to")
    best_d2 = np.full(c.shape[0], np.inf)
    best_idx = np.full(c.shape[0], -1, dtype=np.int64)
    _kernels.nearest_update(c, p, 0, best_d2, best_idx)
    return np.sqrt(best_d2), best_idx


def nearest_distance(candidate, ed_points):
    """Distance from one candidate to its nearest ED point, and that point."""
    d, idx = nearest_neighbors(candidate, ed_points)
    return float(d[0]), np.atleast_2d(ed_points)[idx[0]]


def density_factor(decomp, owner, convention):
    if convention == "local":
        return 1.0 / decomp.volumes[owner]
    if convention == "global":
        return np.ones(len(owner))
    raise ValueError(f"density convention must be one of {DENSITY_CONVENTIONS}")


def _theta_from(decomp, cands, owner, nearest_pts, dist, convention):
    g_c = decomp.evaluate(cands, owner, fluctuation_only=True)
    g_s = decomp.evaluate(nearest_pts, owner, fluctuation_only=True)
    dens = density_factor(decomp, owner, convention)
    return np.sqrt((g_c * g_c * dens) * (g_s * g_s * dens)) * dist ** decomp.dim


def theta_c(candidates, decomp, ed_points, density_convention="local"):
    """Theta score of candidates against the global ED.

    The expansion owning each candidate supplies the variance density at the
    candidate and at its nearest ED point (extrapolated if that point lies in
    another sub-domain).
    """
    c = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    ed = np.atleast_2d(np.asarray(ed_points, dtype=np.float64))
    dist, idx = nearest_neighbors(c, ed)
    owner = decomp.locate(c)
    vals = _theta_from(decomp, c, owner, ed[idx], dist, density_convention)
    return float(vals[0]) if np.ndim(candidates) == 1 else vals


class ScreeningPool:
    """Global screening candidates with a cached nearest-ED record.

    ``sync`` folds newly appended ED points into the record incrementally, so
    the cost per iteration is proportional to the number of new points.
    """

    kind = "screening-global"

    def __init__(self, points):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.best_d2 = np.full(len(self.points), np.inf)
        self.best_idx = np.full(len(self.points), -1, dtype=np.int64)
        self.n_seen = 0

    def __len__(self):
        return len(self.points)

    def sync(self, ed_points):
        n = len(ed_points)
        if n > self.n_seen:
            _kernels.nearest_update(self.points, ed_points[self.n_seen:n], self.n_seen,
                                    self.best_d2, self.best_idx)
            self.n_seen = n

    @property
    def distances(self):
        return np.sqrt(self.best_d2)


@dataclass
class SubdomainScores:
    """Per-sub-domain selection scores.

    Attributes
    ----------
    theta : ndarray
        ``W_i * exp(min(q2_i, 1)) * max Theta_c`` per sub-domain.
    weight : ndarray
        ``W_i * exp(min(q2_i, 1))``.
    decisive : ndarray of int
        Screening index of the decisive candidate, -1 for empty sub-domains.
    has_candidates : ndarray of bool
    candidate_theta : ndarray
        Theta_c of every screening candidate.
    owner : ndarray of int
        Sub-domain of every screening candidate.
    """

    theta: np.ndarray
    weight: np.ndarray
    decisive: np.ndarray
    has_candidates: np.ndarray
    candidate_theta: np.ndarray
    owner: np.ndarray


def _first_argmax_per_group(owner, key, n_groups):
    """Index of the largest ``key`` per owner group, lowest index on ties."""
    n = len(owner)
    order = np.lexsort((np.arange(n), -key, owner))
    first = np.ones(n, dtype=bool)
    first[1:] = owner[order][1:] != owner[order][:-1]
    out = np.full(n_groups, -1, dtype=np.int64)
    out[owner[order][first]] = order[first]
    return out


def theta_subdomain(decomp, screening, ed_points, density_convention="local"):
    """Score every sub-domain from the screening candidates it contains."""
    if len(screening) == 0:
        raise EmptyPool("screening pool is empty")
    ed_points = np.asarray(ed_points, dtype=np.float64)
    screening.sync(ed_points)
    owner = decomp.locate(screening.points)
    dist = screening.distances
    cand_theta = _theta_from(decomp, screening.points, owner, ed_points[screening.best_idx],
                             dist, density_convention)
    n_dom = len(decomp)
    best = _first_argmax_per_group(owner, cand_theta, n_dom)
    has = best >= 0
    max_theta = np.zeros(n_dom)
    max_theta[has] = cand_theta[best[has]]
    # sub-domains whose candidates all score zero: farthest candidate decides
    zero = has & (max_theta == 0.0)
    if zero.any():
        far = _first_argmax_per_group(owner, dist, n_dom)
        best[zero] = far[zero]
    q2 = np.array([min(s.q2, 1.0) for s in decomp])
    weight = decomp.volumes * np.exp(q2)
    return SubdomainScores(weight * max_theta, weight, best, has, cand_theta, owner)


def select_subdomain(scores, decomp):
    """Id of the sub-domain to refine next, or None if all are frozen.

    Highest Theta_i wins. When every eligible score is zero, the largest
    weight wins, then the larger q2, then the lowest id.
    """
    eligible = np.array([not s.frozen for s in decomp])
    if not eligible.any():
        return None
    theta = np.where(eligible, scores.theta, -np.inf)
    if theta.max() > 0.0:
        return int(np.argmax(theta))
    q2 = np.array([s.q2 for s in decomp])
    ids = np.arange(len(decomp))
    keys = np.lexsort((ids, -q2, -scores.weight))
    for sid in keys:
        if eligible[sid]:
            return int(sid)
    return None


class CandidatePool:
    """Local candidates inside one sub-domain's box; selected points are removed."""

    kind = "local"

    def __init__(self, points, owner_box):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.owner_box = owner_box

    def __len__(self):
        return len(self.points)

    def pop(self, i):
        pt = self.points[i].copy()
        self.points = np.delete(self.points, i, axis=0)
        return pt


def local_theta(pool, decomp, sid, scope_points, density_convention="local"):
    """Theta_c of local candidates; nearest neighbours come from ``scope_points``.

    Returns
    -------
    theta, dist : ndarray
    """
    owner = np.full(len(pool), sid, dtype=np.int64)
    dist, idx = nearest_neighbors(pool.points, scope_points)
    theta = _theta_from(decomp, pool.points, owner, np.atleast_2d(scope_points)[idx], dist,
                        density_convention)
    return theta, dist


def select_next_point(pool, decomp, sid, scope_points, density_convention="local"):
    """Remove and return the local candidate with the largest Theta_c.

    Candidates coinciding with a scope point are never chosen. If every score
    is zero the candidate farthest from the scope is taken.

    Raises
    ------
    EmptyPool
        When no eligible candidate is left.
    """
    if len(pool) == 0:
        raise EmptyPool("local pool exhausted")
    theta, dist = local_theta(pool, decomp, sid, scope_points, density_convention)
    usable = dist > 0.0
    if not usable.any():
        raise EmptyPool("every local candidate coincides with an ED point")
    theta = np.where(usable, theta, -1.0)
    i = int(np.argmax(theta)) if theta.max() > 0.0 else int(np.argmax(np.where(usable, dist, -1.0)))
    return pool.pop(i)
