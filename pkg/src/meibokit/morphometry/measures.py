"""Per-gland geometric measurements on binary pixel sets."""

import math

import numpy as np
from scipy import ndimage

from meibokit.errors import GeometryError
from meibokit.morphometry import kernels

TANGENT_WINDOW = 7  # path pixels used to estimate the end tangent
CONTRAST_RING_PX = 3


def _disk_footprint(radius: int) -> np.ndarray:
    yy, xx = np.ogrid[-radius:radius + 1, -radius:radius + 1]
    return (xx * xx + yy * yy) <= radius * radius


def _extend_end(path: np.ndarray, mask: np.ndarray, at_start: bool) -> list:
    """March from a path end along its local tangent until leaving the mask.

    The tangent is the real-valued direction of the last TANGENT_WINDOW
    steps; positions are sampled at unit spacing and rounded to pixels, so
    the returned pixels remain 8-connected to the path.
    """
    pts = path[::-1] if at_start else path
    k = min(TANGENT_WINDOW, len(pts) - 1)
    if k < 1:
        return []
    tail = pts[-1]
    ref = pts[-1 - k]
    dr, dc = float(tail[0] - ref[0]), float(tail[1] - ref[1])
    norm = math.hypot(dr, dc)
    if norm == 0:
        return []
    ur, uc = dr / norm, dc / norm
    h, w = mask.shape
    out = []
    t = 1
    while t <= max(h, w):
        r = int(round(tail[0] + ur * t))
        c = int(round(tail[1] + uc * t))
        if not (0 <= r < h and 0 <= c < w) or not mask[r, c]:
            break
        if (not out and (r, c) != (int(tail[0]), int(tail[1]))) or (out and (r, c) != out[-1]):
            out.append((r, c))
        t += 1
    return out


def arc_length_px(path: np.ndarray) -> float:
    """Sum of step costs along an 8-connected path: 1 per axis step, sqrt(2) per diagonal."""
    if len(path) < 2:
        return 0.0
    diffs = np.diff(np.asarray(path, dtype=np.int64), axis=0)
    return float(np.hypot(diffs[:, 0], diffs[:, 1]).sum())


def extract_centerline(pixels: np.ndarray) -> np.ndarray:
    """Ordered centerline path of a gland pixel set.

    Thins to a 1-px skeleton, keeps the single longest endpoint-to-endpoint
    geodesic path (branches are segmentation noise), then extends both ends
    along their tangents to the gland boundary to compensate thinning's
    end erosion.
    """
    pixels = np.asarray(pixels, dtype=bool)
    if not pixels.any():
        raise GeometryError("empty pixel set")
    skeleton = kernels.thin(pixels)
    path, _ = kernels.longest_path(skeleton)
    if len(path) >= 2:
        head = _extend_end(path, pixels, at_start=True)
        tail = _extend_end(path, pixels, at_start=False)
        if head or tail:
            parts = []
            if head:
                parts.append(np.asarray(head[::-1], dtype=np.int64))
            parts.append(path)
            if tail:
                parts.append(np.asarray(tail, dtype=np.int64))
            path = np.concatenate(parts, axis=0)
    return path


def gland_length(pixels: np.ndarray, mm_per_px: float) -> float:
    """Centerline arc length in millimeters."""
    return arc_length_px(extract_centerline(pixels)) * mm_per_px


def gland_width(pixels: np.ndarray, skeleton_length_px: float, mm_per_px: float) -> float:
    """Mean width as pixel area over centerline length, in millimeters.

    Zero centerline length (single-pixel gland) yields width 0; the caller
    flags that record.
    """
    if skeleton_length_px <= 0:
        return 0.0
    area_px = float(np.count_nonzero(pixels))
    return (area_px / skeleton_length_px) * mm_per_px


def gland_tortuosity(path: np.ndarray) -> float:
    """Arc length over endpoint chord, minus one. 0 for a straight path."""
    if len(path) < 2:
        raise GeometryError("degenerate skeleton")
    chord = math.dist(tuple(path[0]), tuple(path[-1]))
    if chord == 0:
        raise GeometryError("degenerate skeleton")
    return arc_length_px(path) / chord - 1.0


def gland_local_contrast(
    pixels: np.ndarray,
    image: np.ndarray,
    all_gland_pixels: np.ndarray | None = None,
    ring_px: int = CONTRAST_RING_PX,
) -> float:
    """Mean gland intensity minus mean intensity of a surrounding ring.

    The ring is the gland dilated by ``ring_px`` (disk), minus every gland
    pixel of every gland, so neighboring glands never pollute the
    background estimate.
    """
    pixels = np.asarray(pixels, dtype=bool)
    if not pixels.any():
        raise GeometryError("empty pixel set")
    if image.shape != pixels.shape:
        raise GeometryError(
            f"intensity image shape {image.shape} does not match mask {pixels.shape}"
        )
    if all_gland_pixels is None:
        all_gland_pixels = pixels
    ring = ndimage.binary_dilation(pixels, structure=_disk_footprint(ring_px))
    ring &= ~np.asarray(all_gland_pixels, dtype=bool)
    if not ring.any():
        raise GeometryError("no local background")
    return float(image[pixels].mean() - image[ring].mean())
