"""Turning a relaxed action in (0,1)^N into K binary candidates.

Both quantizers return a (K, N) int8 array whose row order matters: the
1-based row index of the winning candidate drives the adaptive-K schedule.
"""

from __future__ import annotations

import numpy as np

from droo.errors import DomainError

KNN_MAX_N = 16


def _relaxed(xhat):
    xhat = np.asarray(xhat, float)
    if xhat.ndim != 1 or xhat.size == 0:
        raise DomainError("relaxed action must be a non-empty vector")
    return xhat


def order_preserving_quantize(xhat, k: int) -> np.ndarray:
    """Threshold at 0.5, then at each entry in order of its distance to 0.5.

    Every candidate keeps the ordering of xhat: xhat_i > xhat_j implies
    x_i >= x_j.  Ties in |xhat - 0.5| are broken by device index, and
    duplicates (possible only under ties) are kept.
    """
    xhat = _relaxed(xhat)
    n = xhat.size
    if not (1 <= k <= n + 1):
        raise DomainError(f"K must lie in [1, {n + 1}], got {k}")
    out = np.empty((k, n), dtype=np.int8)
    out[0] = xhat > 0.5
    order = np.argsort(np.abs(xhat - 0.5), kind="stable")
    for m in range(1, k):
        thr = xhat[order[m - 1]]
        if thr <= 0.5:
            out[m] = xhat >= thr
        else:
            out[m] = xhat > thr
    return out


def all_vertices(n: int) -> np.ndarray:
    """All 2^n binary vectors in lexicographic order (device 1 most significant)."""
    codes = np.arange(2**n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int8)


def knn_quantize(xhat, k: int) -> np.ndarray:
    """The k hypercube vertices nearest to xhat, nearest first.

    Equal distances (compared after rounding to 12 decimals, so float noise
    does not split genuine ties) are ordered lexicographically.
    """
    xhat = _relaxed(xhat)
    n = xhat.size
    if n > KNN_MAX_N:
        raise DomainError(f"KNN enumerates all vertices; N={n} exceeds {KNN_MAX_N}")
    if not (1 <= k <= 2**n):
        raise DomainError(f"K must lie in [1, {2**n}], got {k}")
    verts = all_vertices(n)
    d2 = np.round(((verts - xhat) ** 2).sum(axis=1), 12)
    # vertices are already in lexicographic order, so a stable sort on distance suffices
    order = np.argsort(d2, kind="stable")[:k]
    return verts[order]
