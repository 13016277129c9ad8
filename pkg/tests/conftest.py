import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from meibokit.clinical import ClinicalRecord, DiseaseLabels, Gender, TriState
from meibokit.morphometry import EyelidMorphology

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def golden_report_text() -> str:
    # golden file carries one trailing newline; the report itself does not
    return (DATA_DIR / "report_42_2_R.golden.txt").read_text()[:-1]


def make_rect_mask(height=30, width=120, top=10, left=10, rect_h=10, rect_w=100):
    mask = np.zeros((height, width), dtype=bool)
    mask[top:top + rect_h, left:left + rect_w] = True
    return mask


def make_band(shape, center, radius, width, angle_mask=None):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    rr = np.hypot(yy - center[0], xx - center[1])
    band = (rr >= radius - width / 2) & (rr <= radius + width / 2)
    if angle_mask is not None:
        band &= angle_mask(yy - center[0], xx - center[1])
    return band


def full_roi(height, width):
    """Polygon whose interior covers every pixel center of an HxW image."""
    return [[-0.5, -0.5], [width - 0.5, -0.5], [width - 0.5, height - 0.5], [-0.5, height - 0.5]]


def write_label_png(path, labels: np.ndarray) -> None:
    Image.fromarray(labels.astype(np.uint16)).save(path)


def write_sidecar(path, subject_eye_id, mm_per_px, roi) -> None:
    Path(path).write_text(
        json.dumps({"subject_eye_id": subject_eye_id, "mm_per_px": mm_per_px, "roi": roi})
    )


def appendix_record() -> ClinicalRecord:
    return ClinicalRecord(
        subject_eye_id="42_2_R",
        gender=Gender.MALE,
        age=30,
        race="Asian",
        tmh_mm=0.28,
        nikbut_s=12.33,
        morphology=EyelidMorphology(
            subject_eye_id="42_2_R",
            avg_length_mm=4.878048,
            avg_width_mm=0.463366,
            avg_contrast=13.573304,
            avg_tortuosity=0.277598,
        ),
        labels=DiseaseLabels(TriState.YES, TriState.NO, TriState.YES),
    )


_TRI = (TriState.YES, TriState.NO)
_GENDERS = (Gender.MALE, Gender.FEMALE)
_RACES = ("Asian", "White", "Black", "Hispanic", "Other")


def random_full_record(rng: np.random.Generator, index: int) -> ClinicalRecord:
    """Fully populated record with definite labels, randomized values."""
    patient = int(rng.integers(1, 500))
    category = int(rng.integers(1, 5))
    eye = "R" if rng.random() < 0.5 else "L"
    sid = f"{patient}x{index}_{category}_{eye}"  # index suffix keeps ids unique
    return ClinicalRecord(
        subject_eye_id=sid,
        gender=_GENDERS[int(rng.integers(0, 2))],
        age=int(rng.integers(18, 90)),
        race=_RACES[int(rng.integers(0, len(_RACES)))],
        tmh_mm=float(np.round(rng.uniform(0.05, 0.6), 6)),
        nikbut_s=float(np.round(rng.uniform(2.0, 20.0), 6)),
        ftbut_s=float(np.round(rng.uniform(2.0, 18.0), 6)),
        schirmer_mm=float(np.round(rng.uniform(1.0, 30.0), 6)),
        osdi=float(np.round(rng.uniform(0.0, 100.0), 6)),
        bulbar_hyperemia=float(np.round(rng.uniform(0.0, 4.0), 6)),
        mg_expression_quality=int(rng.integers(0, 4)),
        mg_expression_quantity=int(rng.integers(0, 4)),
        morphology=EyelidMorphology(
            subject_eye_id=sid,
            gland_count=int(rng.integers(5, 30)),
            avg_length_mm=float(np.round(rng.uniform(2.0, 7.0), 6)),
            avg_width_mm=float(np.round(rng.uniform(0.2, 0.8), 6)),
            avg_tortuosity=float(np.round(rng.uniform(0.0, 0.8), 6)),
            avg_contrast=float(np.round(rng.uniform(1.0, 40.0), 6)),
            percent_atrophy=float(np.round(rng.uniform(0.0, 100.0), 6)),
            gland_density=float(np.round(rng.uniform(0.0, 1.0), 6)),
        ),
        labels=DiseaseLabels(
            dry_eye=_TRI[int(rng.integers(0, 2))],
            mgd=_TRI[int(rng.integers(0, 2))],
            blepharitis=_TRI[int(rng.integers(0, 2))],
        ),
    )


def make_gland_scene(subject_eye_id="10_1_R", mm_per_px=0.05):
    """Two-rectangle gland scene with a full-frame ROI, for mask IO tests."""
    labels = np.zeros((60, 140), dtype=np.uint16)
    labels[10:20, 20:120] = 1
    labels[35:45, 20:120] = 2
    roi = full_roi(60, 140)
    return labels, roi, subject_eye_id, mm_per_px


@pytest.fixture
def mask_dir(tmp_path):
    """Directory of three valid mask/sidecar fixtures."""
    masks = tmp_path / "masks"
    masks.mkdir()
    for i, sid in enumerate(["10_1_R", "10_1_L", "12_2_R"]):
        labels, roi, _, mm = make_gland_scene(sid)
        write_label_png(masks / f"{sid}.png", labels)
        write_sidecar(masks / f"{sid}.json", sid, mm, roi)
    return masks
