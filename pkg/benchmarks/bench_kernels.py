"""Benchmark: compiled kernels vs the pure-Python fallback.

Times the two hot kernels (thinning, longest geodesic path) on synthetic
gland scenes of growing size. Run from the repo root:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from meibokit.morphometry import kernels_py

try:
    from meibokit.morphometry import _kernels
except ImportError:
    _kernels = None


def gland_scene(size: int, n_glands: int, seed: int = 0) -> np.ndarray:
    """Vertical wavy gland bands, roughly like a segmented eyelid."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    mask = np.zeros((size, size), dtype=bool)
    spacing = size // (n_glands + 1)
    for g in range(1, n_glands + 1):
        cx = g * spacing + rng.integers(-3, 4)
        amp = rng.uniform(2, size / 24)
        period = rng.uniform(size / 3, size)
        center = cx + amp * np.sin(2 * np.pi * yy[:, 0] / period + rng.uniform(0, 6.28))
        band = np.abs(xx - center[:, None]) <= max(3, size // 90)
        band &= (yy > size // 12) & (yy < size - size // 12)
        mask |= band
    return mask


def time_impl(impl, mask: np.ndarray, repeats: int = 3) -> tuple:
    best_thin = best_path = float("inf")
    skel = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        skel = impl.thin(mask)
        best_thin = min(best_thin, time.perf_counter() - t0)
        t0 = time.perf_counter()
        impl.longest_path(skel)
        best_path = min(best_path, time.perf_counter() - t0)
    return best_thin, best_path


def main() -> None:
    sizes = [(128, 6), (256, 10), (512, 16)]
    header = f"{'scene':>12} {'kernel':>10} {'thin (ms)':>10} {'path (ms)':>10} {'total (ms)':>11} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for size, glands in sizes:
        mask = gland_scene(size, glands)
        py_thin, py_path = time_impl(kernels_py, mask)
        py_total = py_thin + py_path
        rows = [("python", py_thin, py_path, py_total, 1.0)]
        if _kernels is not None:
            c_thin, c_path = time_impl(_kernels, mask)
            c_total = c_thin + c_path
            rows.append(("compiled", c_thin, c_path, c_total, py_total / c_total))
        for name, t_thin, t_path, t_total, speedup in rows:
            print(
                f"{size}x{size:<7} {name:>10} {t_thin*1e3:>10.2f} {t_path*1e3:>10.2f} "
                f"{t_total*1e3:>11.2f} {speedup:>7.1f}x"
            )
    if _kernels is None:
        print("\ncompiled extension not built; showing the pure fallback only")


if __name__ == "__main__":
    main()
