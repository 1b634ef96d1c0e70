"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public names at the bottom dispatch on ``_backend.BACKEND``. Both
flavours are importable directly (``numba_kernels`` / ``numpy_kernels``) so
the benchmark script can compare them in one process.

Packed expansion layout used by :func:`eval_packed`:

``starts``  (K+1,) int64, term range of expansion k is ``starts[k]:starts[k+1]``
``exps``    (T, M) int64 multi-indices
``coefs``   (T,) float64
``lo, hi``  (K, M) float64 box the expansion's Legendre scaling refers to

Points are mapped to ``(2x - lo - hi) / (hi - lo)`` without range checks, so
evaluation outside the box extrapolates the polynomial.
"""

from types import SimpleNamespace

import numpy as np

from . import _backend


# --------------------------------------------------------------------------
# numpy flavour
# --------------------------------------------------------------------------

def _np_legendre_columns(t, pmax):
    """(n, pmax+1) table of orthonormal Legendre values at reference points t."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape + (pmax + 1,))
    out[..., 0] = 1.0
    if pmax >= 1:
        out[..., 1] = t
    for n in range(1, pmax):
        out[..., n + 1] = ((2 * n + 1) * t * out[..., n] - n * out[..., n - 1]) / (n + 1)
    out *= np.sqrt(2.0 * np.arange(pmax + 1) + 1.0)
    return out


def _np_eval_packed(points, owner, starts, exps, coefs, lo, hi, pmax, skip_intercept):
    points = np.asarray(points, dtype=np.float64)
    owner = np.asarray(owner, dtype=np.int64)
    n, m = points.shape
    out = np.zeros(n)
    if n == 0:
        return out
    order = np.argsort(owner, kind="stable")
    sorted_owner = owner[order]
    cuts = np.flatnonzero(np.diff(sorted_owner)) + 1
    for block in np.split(order, cuts):
        k = owner[block[0]]
        t0, t1 = starts[k], starts[k + 1]
        e = exps[t0:t1]
        c = coefs[t0:t1]
        if skip_intercept:
            keep = e.sum(axis=1) > 0
            e, c = e[keep], c[keep]
        if len(c) == 0:
            continue
        x = points[block]
        ref = (2.0 * x - lo[k] - hi[k]) / (hi[k] - lo[k])
        psi = np.ones((len(block), len(c)))
        for d in range(m):
            table = _np_legendre_columns(ref[:, d], pmax)
            psi *= table[:, e[:, d]]
        out[block] = psi @ c
    return out


def _np_nearest_update(cands, pts, offset, best_d2, best_idx, chunk=2048):
    cands = np.asarray(cands, dtype=np.float64)
    pts = np.asarray(pts, dtype=np.float64)
    if len(pts) == 0:
        return
    for s in range(0, len(cands), chunk):
        c = cands[s:s + chunk]
        # accumulate axis by axis, in the same order as the compiled kernel,
        # so both backends round identically
        d2 = np.zeros((len(c), len(pts)))
        for d in range(c.shape[1]):
            diff = c[:, None, d] - pts[None, :, d]
            d2 += diff * diff
        j = np.argmin(d2, axis=1)
        dj = d2[np.arange(len(c)), j]
        better = dj < best_d2[s:s + chunk]
        best_d2[s:s + chunk][better] = dj[better]
        best_idx[s:s + chunk][better] = j[better] + offset


def _np_locate_tree(points, axis, cut, left, right, leaf):
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    active = leaf[node] < 0
    while active.any():
        r = rows[active]
        nd = node[r]
        go_right = points[r, axis[nd]] >= cut[nd]
        node[r] = np.where(go_right, right[nd], left[nd])
        active = leaf[node] < 0
    return leaf[node].astype(np.int64)


numpy_kernels = SimpleNamespace(
    eval_packed=_np_eval_packed,
    nearest_update=_np_nearest_update,
    locate_tree=_np_locate_tree,
)


# --------------------------------------------------------------------------
# numba flavour
# --------------------------------------------------------------------------

numba_kernels = None

if _backend.HAS_NUMBA:
    from numba import njit, prange

    @njit(cache=True)
    def _nb_legendre_row(t, pmax, row):
        row[0] = 1.0
        if pmax >= 1:
            row[1] = t
        for n in range(1, pmax):
            row[n + 1] = ((2 * n + 1) * t * row[n] - n * row[n - 1]) / (n + 1)
        for n in range(pmax + 1):
            row[n] *= np.sqrt(2.0 * n + 1.0)

    @njit(parallel=True, cache=True)
    def _nb_eval_packed(points, owner, starts, exps, coefs, lo, hi, pmax, skip_intercept):
        n, m = points.shape
        out = np.zeros(n)
        for i in prange(n):
            k = owner[i]
            table = np.empty((m, pmax + 1))
            for d in range(m):
                t = (2.0 * points[i, d] - lo[k, d] - hi[k, d]) / (hi[k, d] - lo[k, d])
                _nb_legendre_row(t, pmax, table[d])
            acc = 0.0
            for t_idx in range(starts[k], starts[k + 1]):
                if skip_intercept:
                    deg = 0
                    for d in range(m):
                        deg += exps[t_idx, d]
                    if deg == 0:
                        continue
                v = coefs[t_idx]
                for d in range(m):
                    v *= table[d, exps[t_idx, d]]
                acc += v
            out[i] = acc
        return out

    @njit(parallel=True, cache=True)
    def _nb_nearest_update_impl(cands, pts, offset, best_d2, best_idx):
        n, m = cands.shape
        npts = pts.shape[0]
        for i in prange(n):
            bd = best_d2[i]
            bi = best_idx[i]
            for j in range(npts):
                d2 = 0.0
                for d in range(m):
                    diff = cands[i, d] - pts[j, d]
                    d2 += diff * diff
                if d2 < bd:
                    bd = d2
                    bi = j + offset
            best_d2[i] = bd
            best_idx[i] = bi

    def _nb_nearest_update(cands, pts, offset, best_d2, best_idx):
        cands = np.ascontiguousarray(cands, dtype=np.float64)
        pts = np.ascontiguousarray(pts, dtype=np.float64)
        if len(pts) == 0:
            return
        _nb_nearest_update_impl(cands, pts, np.int64(offset), best_d2, best_idx)

    @njit(parallel=True, cache=True)
    def _nb_locate_tree(points, axis, cut, left, right, leaf):
        n = points.shape[0]
        out = np.empty(n, dtype=np.int64)
        for i in prange(n):
            node = 0
            while leaf[node] < 0:
                if points[i, axis[node]] >= cut[node]:
                    node = right[node]
                else:
                    node = left[node]
            out[i] = leaf[node]
        return out

    def _nb_eval_packed_entry(points, owner, starts, exps, coefs, lo, hi, pmax, skip_intercept):
        return _nb_eval_packed(
            np.ascontiguousarray(points, dtype=np.float64),
            np.ascontiguousarray(owner, dtype=np.int64),
            starts, exps, coefs, lo, hi, np.int64(pmax), bool(skip_intercept),
        )

    def _nb_locate_entry(points, axis, cut, left, right, leaf):
        return _nb_locate_tree(np.ascontiguousarray(points, dtype=np.float64),
                               axis, cut, left, right, leaf)

    numba_kernels = SimpleNamespace(
        eval_packed=_nb_eval_packed_entry,
        nearest_update=_nb_nearest_update,
        locate_tree=_nb_locate_entry,
    )


def active_kernels():
    if _backend.BACKEND == "numba" and numba_kernels is not None:
        return numba_kernels
    return numpy_kernels


def eval_packed(points, owner, starts, exps, coefs, lo, hi, pmax, skip_intercept=False):
    return active_kernels().eval_packed(points, owner, starts, exps, coefs, lo, hi,
                                        pmax, skip_intercept)


def nearest_update(cands, pts, offset, best_d2, best_idx):
    """Fold ``pts`` (global indices starting at ``offset``) into a running
    nearest-neighbour record. Strict ``<`` keeps the lowest index on ties."""
    return active_kernels().nearest_update(cands, pts, offset, best_d2, best_idx)


def locate_tree(points, axis, cut, left, right, leaf):
    return active_kernels().locate_tree(points, axis, cut, left, right, leaf)
