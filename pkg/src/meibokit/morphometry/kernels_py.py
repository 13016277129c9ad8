"""Pure-Python (numpy) implementations of the hot morphometry kernels.

These are the reference implementations; ``_kernels`` (Cython) mirrors them
operation-for-operation and must stay bit-identical. Selection between the
two happens in :mod:`meibokit.morphometry.kernels`.
"""

import heapq
import math

import numpy as np

SQRT2 = math.sqrt(2.0)

# 8-neighborhood offsets in row-major scan order; relaxation order matters
# for tie-breaking parity with the compiled kernel.
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
STEP_COSTS = (SQRT2, 1.0, SQRT2, 1.0, 1.0, SQRT2, 1.0, SQRT2)


def thin(mask):
    """Thin a binary mask to a 1-px skeleton (two-subiteration thinning).

    Deletion decisions within a subiteration are taken simultaneously on the
    state at the start of that subiteration.
    """
    img = np.pad(np.asarray(mask, dtype=bool).astype(np.uint8), 1)
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            c = img[1:-1, 1:-1]
            p2 = img[:-2, 1:-1]
            p3 = img[:-2, 2:]
            p4 = img[1:-1, 2:]
            p5 = img[2:, 2:]
            p6 = img[2:, 1:-1]
            p7 = img[2:, :-2]
            p8 = img[1:-1, :-2]
            p9 = img[:-2, :-2]
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            b = (
                p2.astype(np.uint8) + p3 + p4 + p5 + p6 + p7 + p8 + p9
            )
            a = np.zeros_like(b)
            for i in range(8):
                a += ((ring[i] == 0) & (ring[i + 1] == 1)).astype(np.uint8)
            if step == 0:
                cond = (
                    (c == 1) & (b >= 2) & (b <= 6) & (a == 1)
                    & (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
                )
            else:
                cond = (
                    (c == 1) & (b >= 2) & (b <= 6) & (a == 1)
                    & (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
                )
            if cond.any():
                changed = True
                c[cond] = 0
    return img[1:-1, 1:-1].astype(bool)


def _dijkstra(idx_of, coords, src):
    """Shortest geodesic distances over skeleton pixels from ``src`` index.

    Returns (dist, prev) arrays indexed like ``coords``. Ties are broken by
    heap order on (distance, node index); relaxation uses strict improvement.
    """
    n = len(coords)
    dist = np.full(n, np.inf)
    prev = np.full(n, -1, dtype=np.int64)
    dist[src] = 0.0
    pq = [(0.0, src)]
    while pq:
        d, u = heapq.heappop(pq)
        if d > dist[u]:
            continue
        r, c = coords[u]
        for k, (dr, dc) in enumerate(NEIGHBOR_OFFSETS):
            v = idx_of.get((r + dr, c + dc), -1)
            if v < 0:
                continue
            nd = d + STEP_COSTS[k]
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(pq, (nd, v))
    return dist, prev


def _farthest(dist):
    """Index with the maximum finite distance; ties -> smallest index."""
    best, best_d = -1, -1.0
    for i, d in enumerate(dist):
        if np.isfinite(d) and d > best_d:
            best, best_d = i, d
    return best, best_d


def _walk_back(prev, end):
    path = [end]
    while prev[path[-1]] >= 0:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def longest_path(skel):
    """Longest endpoint-to-endpoint geodesic path along a skeleton.

    Arc length uses unit cost for 4-neighbor steps and sqrt(2) for diagonal
    steps. For skeletons with no degree-<=1 pixel (pure cycles) a double
    Dijkstra sweep from the row-major smallest pixel is used instead.

    Returns ``(path, arc_length_px)`` where path is an (N, 2) int64 array of
    (row, col) pixels in order.
    """
    coords = [tuple(p) for p in np.argwhere(np.asarray(skel, dtype=bool))]
    n = len(coords)
    if n == 0:
        return np.zeros((0, 2), dtype=np.int64), 0.0
    if n == 1:
        return np.asarray(coords, dtype=np.int64), 0.0
    idx_of = {p: i for i, p in enumerate(coords)}
    degree = [
        sum(((r + dr, c + dc) in idx_of) for dr, dc in NEIGHBOR_OFFSETS)
        for r, c in coords
    ]
    ends = [i for i in range(n) if degree[i] <= 1]
    if not ends:
        # cycle: double sweep, exact only for trees but adequate for loops
        dist, _ = _dijkstra(idx_of, coords, 0)
        a, _ = _farthest(dist)
        dist, prev = _dijkstra(idx_of, coords, a)
        b, best_d = _farthest(dist)
        path = _walk_back(prev, b)
        return np.asarray([coords[i] for i in path], dtype=np.int64), float(best_d)

    best_d, best_pair, best_prev = -1.0, None, None
    for e in ends:
        dist, prev = _dijkstra(idx_of, coords, e)
        for f in ends:
            if f <= e or not np.isfinite(dist[f]):
                continue
            if dist[f] > best_d:
                best_d, best_pair, best_prev = float(dist[f]), (e, f), prev
    if best_pair is None:
        # isolated endpoint(s) only; degenerate single-pixel path
        return np.asarray([coords[ends[0]]], dtype=np.int64), 0.0
    path = _walk_back(best_prev, best_pair[1])
    return np.asarray([coords[i] for i in path], dtype=np.int64), best_d
