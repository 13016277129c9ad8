"""Eyelid-level quantification: per-gland metrics plus aggregate morphology."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from meibokit.errors import GeometryError, MaskError
from meibokit.morphometry import measures
from meibokit.morphometry.mask_io import GlandInstanceMask, rasterize_roi


@dataclass
class GlandMorphometry:
    gland_id: int
    length_mm: float
    width_mm: float
    tortuosity: float
    area_mm2: float
    local_contrast: float | None = None
    flags: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "gland_id": self.gland_id,
            "length_mm": self.length_mm,
            "width_mm": self.width_mm,
            "tortuosity": self.tortuosity,
            "area_mm2": self.area_mm2,
            "local_contrast": self.local_contrast,
            "flags": list(self.flags),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "GlandMorphometry":
        return cls(
            gland_id=int(d["gland_id"]),
            length_mm=float(d["length_mm"]),
            width_mm=float(d["width_mm"]),
            tortuosity=float(d["tortuosity"]),
            area_mm2=float(d["area_mm2"]),
            local_contrast=None if d.get("local_contrast") is None else float(d["local_contrast"]),
            flags=list(d.get("flags", [])),
        )


@dataclass
class EyelidMorphology:
    """Aggregate morphology for one subject eye.

    Aggregate fields are None when not derivable (no glands, or no
    intensity image for contrast). A partially-populated instance can also
    represent an externally supplied morphology summary.
    """

    subject_eye_id: str
    gland_count: int = 0
    avg_length_mm: float | None = None
    avg_width_mm: float | None = None
    avg_tortuosity: float | None = None
    avg_contrast: float | None = None
    percent_atrophy: float | None = None
    gland_density: float | None = None
    per_gland: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "subject_eye_id": self.subject_eye_id,
            "gland_count": self.gland_count,
            "avg_length": self.avg_length_mm,
            "avg_width": self.avg_width_mm,
            "avg_contrast": self.avg_contrast,
            "avg_tortuosity": self.avg_tortuosity,
            "percent_atrophy": self.percent_atrophy,
            "gland_density": self.gland_density,
            "per_gland": [g.to_json_dict() for g in self.per_gland],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EyelidMorphology":
        def opt(key):
            v = d.get(key)
            return None if v is None else float(v)

        return cls(
            subject_eye_id=str(d.get("subject_eye_id", "")),
            gland_count=int(d.get("gland_count", len(d.get("per_gland", [])))),
            avg_length_mm=opt("avg_length"),
            avg_width_mm=opt("avg_width"),
            avg_tortuosity=opt("avg_tortuosity"),
            avg_contrast=opt("avg_contrast"),
            percent_atrophy=opt("percent_atrophy"),
            gland_density=opt("gland_density"),
            per_gland=[GlandMorphometry.from_json_dict(g) for g in d.get("per_gland", [])],
        )

    def write_json(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"
        )

    @classmethod
    def read_json(cls, path) -> "EyelidMorphology":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _mean(values: list) -> float | None:
    return sum(values) / len(values) if values else None


def quantify(mask: GlandInstanceMask, image: np.ndarray | None = None) -> EyelidMorphology:
    """Measure every gland and aggregate to eyelid-level morphology.

    Glands are clipped to the ROI before all measurements; gland density is
    the in-ROI gland area fraction and percent atrophy its complement
    (computed as ``100 - 100 * density`` so the pair sums to 100 exactly).
    When ``image`` is absent, contrast is reported absent, not zero.
    """
    mask.validate()
    if image is not None and image.shape != mask.labels.shape:
        raise MaskError(
            f"intensity image shape {image.shape} does not match mask "
            f"{mask.labels.shape}"
        )
    roi_mask = rasterize_roi(mask.roi, mask.height_px, mask.width_px)
    roi_area = int(np.count_nonzero(roi_mask))
    if roi_area == 0:
        raise MaskError("roi polygon covers no pixel centers")
    clipped = np.where(roi_mask, mask.labels, 0)
    all_glands = clipped > 0

    per_gland = []
    for gid in range(1, mask.n_glands + 1):
        pixels = clipped == gid
        n_px = int(np.count_nonzero(pixels))
        if n_px == 0:
            continue  # entirely outside the ROI
        flags = []
        path = measures.extract_centerline(pixels)
        arc_px = measures.arc_length_px(path)
        length_mm = arc_px * mask.mm_per_px
        width_mm = measures.gland_width(pixels, arc_px, mask.mm_per_px)
        if arc_px <= 0:
            flags.append("zero_length_skeleton")
            tortuosity = 0.0
        else:
            try:
                tortuosity = measures.gland_tortuosity(path)
            except GeometryError:
                flags.append("degenerate_skeleton")
                tortuosity = 0.0
        if width_mm > length_mm:
            flags.append("width_exceeds_length")
        contrast = None
        if image is not None:
            try:
                contrast = measures.gland_local_contrast(pixels, image, all_glands)
            except GeometryError:
                flags.append("no_local_background")
        per_gland.append(
            GlandMorphometry(
                gland_id=gid,
                length_mm=length_mm,
                width_mm=width_mm,
                tortuosity=tortuosity,
                area_mm2=n_px * (mask.mm_per_px * mask.mm_per_px),
                local_contrast=contrast,
                flags=flags,
            )
        )

    gland_area = int(np.count_nonzero(all_glands))
    gland_density = gland_area / roi_area
    percent_atrophy = 100.0 - (100.0 * gland_density)
    contrasts = [g.local_contrast for g in per_gland if g.local_contrast is not None]
    return EyelidMorphology(
        subject_eye_id=mask.subject_eye_id,
        gland_count=len(per_gland),
        avg_length_mm=_mean([g.length_mm for g in per_gland]),
        avg_width_mm=_mean([g.width_mm for g in per_gland]),
        avg_tortuosity=_mean([g.tortuosity for g in per_gland]),
        avg_contrast=_mean(contrasts),
        percent_atrophy=percent_atrophy,
        gland_density=gland_density,
        per_gland=per_gland,
    )
