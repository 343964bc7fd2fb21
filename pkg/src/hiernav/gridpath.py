"""Geodesic distances on boolean cell masks (8-connected, no corner cutting)."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

_DIRS = ((0, 1, 1.0), (1, 0, 1.0), (1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)))


def mask_graph(mask: np.ndarray):
    """Sparse undirected graph over True cells; returns (graph, index grid)."""
    h, w = mask.shape
    idx = np.full(mask.shape, -1, dtype=np.int64)
    idx[mask] = np.arange(int(mask.sum()))
    rows, cols, wts = [], [], []
    for dr, dc, cost in _DIRS:
        r0, r1 = 0, h - dr
        c0, c1 = max(0, -dc), w - max(0, dc)
        a = mask[r0:r1, c0:c1]
        b = mask[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        ok = a & b
        if dr and dc:
            ok &= mask[r0 + dr:r1 + dr, c0:c1] & mask[r0:r1, c0 + dc:c1 + dc]
        rows.append(idx[r0:r1, c0:c1][ok])
        cols.append(idx[r0 + dr:r1 + dr, c0 + dc:c1 + dc][ok])
        wts.append(np.full(int(ok.sum()), cost))
    n = int(mask.sum())
    g = coo_matrix((np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    return g, idx


def geodesic_field(mask: np.ndarray, sources, cell_size: float) -> np.ndarray:
    """Distance (m) from the nearest source cell to every cell; inf where
    unreachable or outside the mask."""
    out = np.full(mask.shape, np.inf)
    sources = [(int(r), int(c)) for r, c in sources if mask[int(r), int(c)]]
    if not sources:
        return out
    rr, cc = np.nonzero(mask)
    r0, r1 = rr.min(), rr.max() + 1
    c0, c1 = cc.min(), cc.max() + 1
    sub = mask[r0:r1, c0:c1]
    g, idx = mask_graph(sub)
    src = [idx[r - r0, c - c0] for r, c in sources]
    d = dijkstra(g, directed=False, indices=src, min_only=True)
    view = out[r0:r1, c0:c1]
    view[sub] = d * cell_size
    return out


def nearest_true(mask: np.ndarray, r: int, c: int, max_cells: float = np.inf):
    """Closest True cell to (r, c) by Euclidean cell distance, or None."""
    h, w = mask.shape
    if 0 <= r < h and 0 <= c < w and mask[r, c]:
        return (r, c)
    if not mask.any():
        return None
    dist, (ir, ic) = ndimage.distance_transform_edt(~mask, return_indices=True)
    rr = min(max(r, 0), h - 1)
    cc = min(max(c, 0), w - 1)
    cand = (int(ir[rr, cc]), int(ic[rr, cc]))
    if math.hypot(cand[0] - r, cand[1] - c) > max_cells:
        return None
    return cand
