"""Gland-mask morphometry: mask loading, per-gland measures, eyelid aggregation."""

from meibokit.morphometry.mask_io import (
    GlandInstanceMask,
    load_intensity_image,
    load_labeled_mask,
    polygon_area,
    rasterize_roi,
    validate_roi_polygon,
)
from meibokit.morphometry.measures import (
    arc_length_px,
    extract_centerline,
    gland_length,
    gland_local_contrast,
    gland_tortuosity,
    gland_width,
)
from meibokit.morphometry.quantify import EyelidMorphology, GlandMorphometry, quantify

__all__ = [
    "GlandInstanceMask",
    "EyelidMorphology",
    "GlandMorphometry",
    "arc_length_px",
    "extract_centerline",
    "gland_length",
    "gland_local_contrast",
    "gland_tortuosity",
    "gland_width",
    "load_intensity_image",
    "load_labeled_mask",
    "polygon_area",
    "quantify",
    "rasterize_roi",
    "validate_roi_polygon",
]
