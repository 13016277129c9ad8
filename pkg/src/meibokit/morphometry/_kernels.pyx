# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot morphometry kernels.

Mirrors :mod:`meibokit.morphometry.kernels_py` exactly: same thinning
subiteration semantics, same Dijkstra tie-breaking (heap ordered by
(distance, node index), strict-improvement relaxation, row-major neighbor
order), so outputs are bit-identical between the two implementations.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt
from libc.stdlib cimport free, malloc, realloc

cnp.import_array()

cdef double SQRT2 = sqrt(2.0)

cdef int[8] DR = [-1, -1, -1, 0, 0, 1, 1, 1]
cdef int[8] DC = [-1, 0, 1, -1, 1, -1, 0, 1]


def thin(mask):
    """Thin a binary mask to a 1-px skeleton (two-subiteration thinning)."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] img = np.pad(
        np.asarray(mask, dtype=bool).astype(np.uint8), 1
    )
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] mark = np.zeros_like(img)
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t r, c
    cdef int step, i, b, a
    cdef int p[9]
    cdef bint changed = True, any_marked
    cdef int ring[9]

    while changed:
        changed = False
        for step in range(2):
            any_marked = False
            for r in range(1, h - 1):
                for c in range(1, w - 1):
                    if img[r, c] == 0:
                        continue
                    # P2..P9 clockwise from north
                    p[0] = img[r - 1, c]
                    p[1] = img[r - 1, c + 1]
                    p[2] = img[r, c + 1]
                    p[3] = img[r + 1, c + 1]
                    p[4] = img[r + 1, c]
                    p[5] = img[r + 1, c - 1]
                    p[6] = img[r, c - 1]
                    p[7] = img[r - 1, c - 1]
                    p[8] = p[0]
                    b = p[0] + p[1] + p[2] + p[3] + p[4] + p[5] + p[6] + p[7]
                    if b < 2 or b > 6:
                        continue
                    a = 0
                    for i in range(8):
                        if p[i] == 0 and p[i + 1] == 1:
                            a += 1
                    if a != 1:
                        continue
                    if step == 0:
                        if p[0] * p[2] * p[4] != 0 or p[2] * p[4] * p[6] != 0:
                            continue
                    else:
                        if p[0] * p[2] * p[6] != 0 or p[0] * p[4] * p[6] != 0:
                            continue
                    mark[r, c] = 1
                    any_marked = True
            if any_marked:
                changed = True
                for r in range(1, h - 1):
                    for c in range(1, w - 1):
                        if mark[r, c]:
                            img[r, c] = 0
                            mark[r, c] = 0
    return img[1:-1, 1:-1].astype(bool)


cdef struct HeapItem:
    double d
    long u


cdef class _Heap:
    cdef HeapItem* items
    cdef Py_ssize_t size, cap

    def __cinit__(self, Py_ssize_t cap):
        self.items = <HeapItem*> malloc(cap * sizeof(HeapItem))
        if self.items == NULL:
            raise MemoryError()
        self.size = 0
        self.cap = cap

    def __dealloc__(self):
        if self.items != NULL:
            free(self.items)

    cdef inline bint _less(self, HeapItem x, HeapItem y):
        if x.d != y.d:
            return x.d < y.d
        return x.u < y.u

    cdef int push(self, double d, long u) except -1:
        cdef Py_ssize_t i, parent
        cdef HeapItem it
        cdef HeapItem* grown
        if self.size >= self.cap:
            grown = <HeapItem*> realloc(self.items, 2 * self.cap * sizeof(HeapItem))
            if grown == NULL:
                raise MemoryError()
            self.items = grown
            self.cap *= 2
        it.d = d
        it.u = u
        i = self.size
        self.size += 1
        while i > 0:
            parent = (i - 1) // 2
            if self._less(it, self.items[parent]):
                self.items[i] = self.items[parent]
                i = parent
            else:
                break
        self.items[i] = it
        return 0

    cdef HeapItem pop(self):
        cdef HeapItem top = self.items[0]
        cdef HeapItem last
        cdef Py_ssize_t i = 0, child
        self.size -= 1
        last = self.items[self.size]
        while True:
            child = 2 * i + 1
            if child >= self.size:
                break
            if child + 1 < self.size and self._less(self.items[child + 1], self.items[child]):
                child += 1
            if self._less(self.items[child], last):
                self.items[i] = self.items[child]
                i = child
            else:
                break
        self.items[i] = last
        return top


cdef int _dijkstra_c(long[:, ::1] node_id, long[:, ::1] coords,
                     long src, double[::1] dist, long[::1] prev,
                     Py_ssize_t h, Py_ssize_t w) except -1:
    cdef Py_ssize_t n = coords.shape[0]
    cdef Py_ssize_t i
    cdef long u, v
    cdef long r, c, nr, nc
    cdef int k
    cdef double d, nd
    cdef double[8] cost
    cdef HeapItem it
    cdef _Heap heap
    for k in range(8):
        cost[k] = SQRT2 if (DR[k] != 0 and DC[k] != 0) else 1.0
    for i in range(n):
        dist[i] = INFINITY
        prev[i] = -1
    dist[src] = 0.0
    heap = _Heap(max(16, n))
    heap.push(0.0, src)
    while heap.size > 0:
        it = heap.pop()
        d = it.d
        u = it.u
        if d > dist[u]:
            continue
        r = coords[u, 0]
        c = coords[u, 1]
        for k in range(8):
            nr = r + DR[k]
            nc = c + DC[k]
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            v = node_id[nr, nc]
            if v < 0:
                continue
            nd = d + cost[k]
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heap.push(nd, v)
    return 0


def longest_path(skel):
    """Longest endpoint-to-endpoint geodesic path along a skeleton.

    Same contract and tie-breaking as the pure-Python reference.
    """
    skel_b = np.asarray(skel, dtype=bool)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] coords_arr = np.ascontiguousarray(
        np.argwhere(skel_b), dtype=np.int64)
    cdef Py_ssize_t n = coords_arr.shape[0]
    if n == 0:
        return np.zeros((0, 2), dtype=np.int64), 0.0
    if n == 1:
        return coords_arr.copy(), 0.0
    cdef Py_ssize_t h = skel_b.shape[0]
    cdef Py_ssize_t w = skel_b.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] node_id_arr = np.full((h, w), -1, dtype=np.int64)
    cdef long[:, ::1] node_id = node_id_arr
    cdef long[:, ::1] coords = coords_arr
    cdef Py_ssize_t i
    cdef long r, c, nr, nc
    cdef int k, deg
    for i in range(n):
        node_id[coords[i, 0], coords[i, 1]] = i

    ends = []
    for i in range(n):
        r = coords[i, 0]
        c = coords[i, 1]
        deg = 0
        for k in range(8):
            nr = r + DR[k]
            nc = c + DC[k]
            if 0 <= nr < h and 0 <= nc < w and node_id[nr, nc] >= 0:
                deg += 1
        if deg <= 1:
            ends.append(i)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prev_arr = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] best_prev_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] dist = dist_arr
    cdef long[::1] prev = prev_arr

    cdef double best_d = -1.0
    cdef long best_b = -1
    cdef long e, f
    cdef Py_ssize_t ei, fi

    if not ends:
        _dijkstra_c(node_id, coords, 0, dist, prev, h, w)
        e = _farthest_c(dist_arr)
        _dijkstra_c(node_id, coords, e, dist, prev, h, w)
        f = _farthest_c(dist_arr)
        best_prev_arr[:] = prev_arr
        return _walk_back(coords_arr, best_prev_arr, f), float(dist_arr[f])

    for ei in range(len(ends)):
        e = ends[ei]
        _dijkstra_c(node_id, coords, e, dist, prev, h, w)
        for fi in range(len(ends)):
            f = ends[fi]
            if f <= e or not np.isfinite(dist_arr[f]):
                continue
            if dist_arr[f] > best_d:
                best_d = dist_arr[f]
                best_b = f
                best_prev_arr[:] = prev_arr
    if best_b < 0:
        return coords_arr[ends[0]:ends[0] + 1].copy(), 0.0
    return _walk_back(coords_arr, best_prev_arr, best_b), best_d


cdef long _farthest_c(cnp.ndarray[cnp.float64_t, ndim=1] dist):
    cdef Py_ssize_t i, n = dist.shape[0]
    cdef long best = -1
    cdef double best_d = -1.0
    for i in range(n):
        if dist[i] < INFINITY and dist[i] > best_d:
            best = i
            best_d = dist[i]
    return best


cdef _walk_back(cnp.ndarray[cnp.int64_t, ndim=2] coords,
                cnp.ndarray[cnp.int64_t, ndim=1] prev, long end):
    cdef long cur = end
    idx = [cur]
    while prev[cur] >= 0:
        cur = prev[cur]
        idx.append(cur)
    idx.reverse()
    return coords[np.asarray(idx, dtype=np.int64)].copy()
