"""Kernel-level tests: thinning behavior, path extraction, compiled/pure parity."""

import math

import numpy as np
import pytest

from meibokit.morphometry import kernels, kernels_py

HAVE_COMPILED = kernels.IMPLEMENTATION == "compiled"


def random_blob(rng, size=64, n_disks=6):
    blob = np.zeros((size, size), dtype=bool)
    yy, xx = np.ogrid[:size, :size]
    for _ in range(n_disks):
        r, c = rng.integers(8, size - 8, 2)
        rad = rng.integers(3, 9)
        blob |= (yy - r) ** 2 + (xx - c) ** 2 <= rad ** 2
    return blob


def test_thin_is_subset_of_mask():
    rng = np.random.default_rng(1)
    for _ in range(5):
        blob = random_blob(rng)
        skel = kernels_py.thin(blob)
        assert not (skel & ~blob).any()


def test_thin_preserves_empty_and_single_pixel():
    empty = np.zeros((5, 5), dtype=bool)
    assert kernels_py.thin(empty).sum() == 0
    single = empty.copy()
    single[2, 2] = True
    assert kernels_py.thin(single).sum() == 1


def test_thin_line_is_stable():
    line = np.zeros((5, 50), dtype=bool)
    line[2, 3:47] = True
    assert np.array_equal(kernels_py.thin(line), line)


def test_longest_path_straight_line():
    line = np.zeros((5, 30), dtype=bool)
    line[2, 5:25] = True
    path, length = kernels_py.longest_path(line)
    assert length == pytest.approx(19.0)
    assert tuple(path[0]) == (2, 5) and tuple(path[-1]) == (2, 24)


def test_longest_path_prunes_branch():
    # T shape: long bar of 21 px, stem of 5 px; longest endpoint path is the bar
    skel = np.zeros((12, 25), dtype=bool)
    skel[2, 2:23] = True
    skel[3:8, 12] = True
    path, length = kernels_py.longest_path(skel)
    assert length == pytest.approx(20.0)
    assert {tuple(path[0]), tuple(path[-1])} == {(2, 2), (2, 22)}


def test_longest_path_diagonal_costs():
    diag = np.zeros((12, 12), dtype=bool)
    for i in range(10):
        diag[i + 1, i + 1] = True
    _, length = kernels_py.longest_path(diag)
    assert length == pytest.approx(9 * math.sqrt(2.0))


def test_longest_path_cycle_uses_double_sweep():
    ring = np.zeros((9, 9), dtype=bool)
    ring[2, 2:7] = ring[6, 2:7] = True
    ring[2:7, 2] = ring[2:7, 6] = True
    path, length = kernels_py.longest_path(ring)
    assert length > 0
    assert len(path) >= 2


def test_longest_path_empty_and_single():
    empty = np.zeros((4, 4), dtype=bool)
    path, length = kernels_py.longest_path(empty)
    assert len(path) == 0 and length == 0.0
    single = empty.copy()
    single[1, 1] = True
    path, length = kernels_py.longest_path(single)
    assert len(path) == 1 and length == 0.0


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernels unavailable")
class TestCompiledParity:
    """The compiled extension must be bit-identical to the pure fallback."""

    def test_thin_parity_random_blobs(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            blob = random_blob(rng)
            assert np.array_equal(kernels._impl.thin(blob), kernels_py.thin(blob))

    def test_longest_path_parity_random_blobs(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            skel = kernels_py.thin(random_blob(rng))
            path_c, len_c = kernels._impl.longest_path(skel)
            path_p, len_p = kernels_py.longest_path(skel)
            assert len_c == len_p  # bit-identical float
            assert np.array_equal(path_c, path_p)

    def test_parity_on_structured_shapes(self):
        shapes = []
        rect = np.zeros((30, 120), dtype=bool)
        rect[10:20, 10:110] = True
        shapes.append(rect)
        yy, xx = np.mgrid[0:90, -90:90]
        rr = np.hypot(yy, xx)
        shapes.append((rr >= 55) & (rr <= 65) & (yy >= 0))
        for mask in shapes:
            skel = kernels_py.thin(mask)
            assert np.array_equal(kernels._impl.thin(mask), skel)
            path_c, len_c = kernels._impl.longest_path(skel)
            path_p, len_p = kernels_py.longest_path(skel)
            assert len_c == len_p
            assert np.array_equal(path_c, path_p)
