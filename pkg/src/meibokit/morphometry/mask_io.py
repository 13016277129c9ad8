"""Labeled gland mask loading, ROI polygon handling, and morphology JSON I/O."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from meibokit.errors import MaskError


@dataclass
class GlandInstanceMask:
    """Labeled gland instances plus eyelid ROI and physical scale.

    ``labels`` holds 0 for background and contiguous ids 1..N for glands.
    """

    width_px: int
    height_px: int
    labels: np.ndarray
    roi: np.ndarray  # (V, 2) polygon vertices in (x, y) pixel coordinates
    mm_per_px: float
    subject_eye_id: str

    @property
    def n_glands(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def validate(self) -> None:
        if self.mm_per_px <= 0 or not np.isfinite(self.mm_per_px):
            raise MaskError(f"invalid scale: mm_per_px={self.mm_per_px!r}")
        if self.labels.shape != (self.height_px, self.width_px):
            raise MaskError(
                f"label image shape {self.labels.shape} does not match "
                f"declared {self.height_px}x{self.width_px}"
            )
        ids = np.unique(self.labels)
        ids = ids[ids > 0]
        if ids.size and not np.array_equal(ids, np.arange(1, ids.size + 1)):
            raise MaskError(f"gland ids not contiguous 1..N: {ids.tolist()}")
        validate_roi_polygon(self.roi)


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Proper or improper intersection of segments p1p2 and p3p4."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    def on_segment(a, b, c):
        return (
            min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, p3):
        return True
    if o2 == 0 and on_segment(p1, p2, p4):
        return True
    if o3 == 0 and on_segment(p3, p4, p1):
        return True
    if o4 == 0 and on_segment(p3, p4, p2):
        return True
    return False


def polygon_area(roi: np.ndarray) -> float:
    """Signed shoelace area, absolute value."""
    x, y = roi[:, 0], roi[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def validate_roi_polygon(roi: np.ndarray) -> None:
    roi = np.asarray(roi, dtype=float)
    if roi.ndim != 2 or roi.shape[1] != 2 or roi.shape[0] < 3:
        raise MaskError("roi polygon needs at least 3 [x, y] vertices")
    if not np.isfinite(roi).all():
        raise MaskError("roi polygon has non-finite vertices")
    if polygon_area(roi) <= 0:
        raise MaskError("roi polygon has zero area")
    n = roi.shape[0]
    edges = [(tuple(roi[i]), tuple(roi[(i + 1) % n])) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            # adjacent edges share a vertex; skip those pairs
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                raise MaskError("roi polygon is self-intersecting")


def rasterize_roi(roi: np.ndarray, height: int, width: int) -> np.ndarray:
    """Boolean mask of pixels whose centers fall inside the ROI polygon.

    Pixel (r, c) has its center at x = c, y = r. Even-odd crossing rule.
    """
    roi = np.asarray(roi, dtype=float)
    yy, xx = np.mgrid[0:height, 0:width]
    inside = np.zeros((height, width), dtype=bool)
    n = roi.shape[0]
    for i in range(n):
        x1, y1 = roi[i]
        x2, y2 = roi[(i + 1) % n]
        crosses = (y1 > yy) != (y2 > yy)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (x2 - x1) * (yy - y1) / (y2 - y1) + x1
        inside ^= crosses & (xx < xint)
    return inside


def _read_label_png(path: Path) -> np.ndarray:
    try:
        img = Image.open(path)
    except FileNotFoundError:
        raise MaskError(f"mask file not found: {path}") from None
    except OSError as exc:
        raise MaskError(f"cannot read mask PNG {path}: {exc}") from None
    with img:
        if img.mode not in ("I;16", "I", "L", "I;16B"):
            raise MaskError(
                f"mask {path} must be single-channel integer PNG, got mode {img.mode}"
            )
        arr = np.asarray(img)
    return arr.astype(np.int32)


def load_labeled_mask(mask_path, sidecar_path) -> GlandInstanceMask:
    """Load a 16-bit label PNG plus its JSON sidecar into a validated mask.

    Sparse gland ids are renumbered to contiguous 1..N (ascending order
    preserved). A mask with no glands is valid (N = 0).
    """
    mask_path, sidecar_path = Path(mask_path), Path(sidecar_path)
    labels = _read_label_png(mask_path)
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except FileNotFoundError:
        raise MaskError(f"sidecar file not found: {sidecar_path}") from None
    except json.JSONDecodeError as exc:
        raise MaskError(f"malformed sidecar {sidecar_path}: {exc}") from None
    if not isinstance(sidecar, dict):
        raise MaskError(f"malformed sidecar {sidecar_path}: expected a JSON object")
    missing = {"subject_eye_id", "mm_per_px", "roi"} - sidecar.keys()
    if missing:
        raise MaskError(f"sidecar {sidecar_path} missing keys: {sorted(missing)}")
    try:
        mm_per_px = float(sidecar["mm_per_px"])
    except (TypeError, ValueError):
        raise MaskError(f"invalid scale: mm_per_px={sidecar['mm_per_px']!r}") from None
    if mm_per_px <= 0 or not np.isfinite(mm_per_px):
        raise MaskError(f"invalid scale: mm_per_px={mm_per_px!r}")
    try:
        roi = np.asarray(sidecar["roi"], dtype=float)
    except ValueError:
        raise MaskError(f"malformed roi polygon in {sidecar_path}") from None

    ids = np.unique(labels)
    ids = ids[ids > 0]
    if ids.size and not np.array_equal(ids, np.arange(1, ids.size + 1)):
        remap = np.zeros(int(labels.max()) + 1, dtype=np.int32)
        remap[ids] = np.arange(1, ids.size + 1, dtype=np.int32)
        labels = remap[labels]

    mask = GlandInstanceMask(
        width_px=labels.shape[1],
        height_px=labels.shape[0],
        labels=labels,
        roi=roi,
        mm_per_px=mm_per_px,
        subject_eye_id=str(sidecar["subject_eye_id"]),
    )
    mask.validate()
    return mask


def load_intensity_image(path) -> np.ndarray:
    """8-bit grayscale intensity image as float array on the 0-255 scale."""
    path = Path(path)
    try:
        img = Image.open(path)
    except FileNotFoundError:
        raise MaskError(f"intensity image not found: {path}") from None
    except OSError as exc:
        raise MaskError(f"cannot read intensity PNG {path}: {exc}") from None
    with img:
        if img.mode != "L":
            img = img.convert("L")
        arr = np.asarray(img, dtype=np.float64)
    return arr
