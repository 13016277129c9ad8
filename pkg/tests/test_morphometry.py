"""Morphometry oracles and invariants.

Expected values for the synthetic shapes come from analytic geometry:
a straight 100x10 px rectangle at 0.05 mm/px has centerline 100 px = 5.0 mm
and mean width 10 px = 0.5 mm; a circular arc of radius r has length
(angle * r); a semicircular path has arc/chord = pi/2.
"""

import json
import math

import numpy as np
import pytest

from conftest import full_roi, make_gland_scene, make_rect_mask, write_label_png, write_sidecar
from meibokit.errors import GeometryError, MaskError
from meibokit.morphometry import (
    EyelidMorphology,
    GlandInstanceMask,
    arc_length_px,
    extract_centerline,
    gland_length,
    gland_local_contrast,
    gland_tortuosity,
    gland_width,
    load_labeled_mask,
    quantify,
    rasterize_roi,
    validate_roi_polygon,
)

MM = 0.05


def quarter_band(radius=100.0, width=10.0):
    yy, xx = np.mgrid[-12:132, -12:132]
    rr = np.hypot(yy, xx)
    return (rr >= radius - width / 2) & (rr <= radius + width / 2) & (xx >= 0) & (yy >= 0)


def semi_band(radius=60.0, width=10.0):
    yy, xx = np.mgrid[-10:80, -80:80]
    rr = np.hypot(yy, xx)
    return (rr >= radius - width / 2) & (rr <= radius + width / 2) & (yy >= 0)


class TestGlandLength:
    def test_rectangle_matches_analytic_length(self):
        mask = make_rect_mask()
        assert gland_length(mask, MM) == pytest.approx(5.0, rel=0.05)

    def test_single_pixel_has_zero_length(self):
        mask = np.zeros((5, 5), dtype=bool)
        mask[2, 2] = True
        assert gland_length(mask, MM) == 0.0

    def test_quarter_circle_band_raw_skeleton_matches_analytic_arc(self):
        # the thinning + step-cost rule itself, before end compensation
        from meibokit.morphometry import kernels

        band = quarter_band()
        _, raw_len = kernels.longest_path(kernels.thin(band))
        assert raw_len * MM == pytest.approx(math.pi / 2 * 100 * MM, rel=0.05)

    def test_quarter_circle_band_full_measurement(self):
        # end extension plus the fixed 1/sqrt(2) step costs overshoot a
        # digital circle by ~5.3%, so the full-pipeline tolerance is 6%
        band = quarter_band()
        assert gland_length(band, MM) == pytest.approx(math.pi / 2 * 100 * MM, rel=0.06)

    def test_empty_pixel_set_raises(self):
        with pytest.raises(GeometryError, match="empty"):
            gland_length(np.zeros((4, 4), dtype=bool), MM)


class TestGlandWidth:
    def test_rectangle_width(self):
        mask = make_rect_mask()
        path = extract_centerline(mask)
        width = gland_width(mask, arc_length_px(path), MM)
        assert width == pytest.approx(0.5, rel=0.10)

    def test_one_px_line_width_is_scale(self):
        mask = np.zeros((5, 110), dtype=bool)
        mask[2, 5:105] = True
        path = extract_centerline(mask)
        width = gland_width(mask, arc_length_px(path), MM)
        assert width == pytest.approx(MM, rel=0.02)

    def test_zero_length_defines_zero_width(self):
        mask = np.zeros((3, 3), dtype=bool)
        mask[1, 1] = True
        assert gland_width(mask, 0.0, MM) == 0.0


class TestGlandTortuosity:
    def test_straight_path_is_exactly_zero(self):
        mask = np.zeros((5, 110), dtype=bool)
        mask[2, 5:105] = True
        assert gland_tortuosity(extract_centerline(mask)) == 0.0

    def test_semicircular_band_matches_analytic_ratio(self):
        path = extract_centerline(semi_band())
        assert gland_tortuosity(path) == pytest.approx(math.pi / 2 - 1, rel=0.10)

    def test_s_curve_is_in_realistic_range(self):
        # gentle sinusoid band: arc/chord - 1 around 0.25-0.30 analytically
        yy, xx = np.mgrid[0:70, 0:220]
        center = 35 + 17 * np.sin(2 * math.pi * xx / 100.0)
        band = np.abs(yy - center) <= 4
        tort = gland_tortuosity(extract_centerline(band))
        assert 0.15 < tort < 0.45

    def test_closed_loop_raises_degenerate(self):
        path = np.array([[0, 0], [0, 1], [1, 1], [1, 0], [0, 0]])
        with pytest.raises(GeometryError, match="degenerate"):
            gland_tortuosity(path)


class TestGlandLocalContrast:
    def test_uniform_image_gives_zero(self):
        mask = make_rect_mask(20, 40, 5, 5, 8, 30)
        image = np.full(mask.shape, 77.0)
        assert gland_local_contrast(mask, image) == 0.0

    def test_constructed_constants(self):
        mask = make_rect_mask(30, 60, 10, 10, 8, 40)
        image = np.full(mask.shape, 100.0)
        image[mask] = 200.0
        assert gland_local_contrast(mask, image) == pytest.approx(100.0)

    def test_neighbor_glands_excluded_from_ring(self):
        gland = make_rect_mask(30, 60, 10, 10, 5, 40)
        neighbor = make_rect_mask(30, 60, 17, 10, 5, 40)
        image = np.full(gland.shape, 100.0)
        image[gland] = 200.0
        image[neighbor] = 250.0  # must not contaminate the background ring
        contrast = gland_local_contrast(gland, image, all_gland_pixels=gland | neighbor)
        assert contrast == pytest.approx(100.0)

    def test_gland_filling_frame_has_no_background(self):
        mask = np.ones((10, 10), dtype=bool)
        image = np.full(mask.shape, 50.0)
        with pytest.raises(GeometryError, match="no local background"):
            gland_local_contrast(mask, image)

    def test_realistic_magnitude(self):
        rng = np.random.default_rng(3)
        mask = make_rect_mask(40, 140, 15, 20, 10, 100)
        image = rng.normal(108.0, 4.0, mask.shape)
        image[mask] += 13.0
        contrast = gland_local_contrast(mask, image)
        assert 5.0 < contrast < 25.0


def build_mask(labels, roi=None, mm_per_px=MM, sid="10_1_R") -> GlandInstanceMask:
    labels = np.asarray(labels, dtype=np.int32)
    h, w = labels.shape
    return GlandInstanceMask(
        width_px=w,
        height_px=h,
        labels=labels,
        roi=np.asarray(roi if roi is not None else full_roi(h, w), dtype=float),
        mm_per_px=mm_per_px,
        subject_eye_id=sid,
    )


class TestQuantify:
    def test_full_coverage_density_one(self):
        labels = np.ones((100, 100), dtype=np.int32)
        morph = quantify(build_mask(labels))
        assert morph.gland_density == 1.0
        assert morph.percent_atrophy == 0.0

    def test_half_coverage(self):
        labels = np.zeros((100, 100), dtype=np.int32)
        labels[:, :50] = 1
        morph = quantify(build_mask(labels))
        assert morph.gland_density == 0.5
        assert morph.percent_atrophy == 50.0

    def test_two_identical_rectangles(self):
        labels, roi, sid, mm = make_gland_scene()
        morph = quantify(build_mask(labels, roi, mm, sid))
        assert morph.gland_count == 2
        assert morph.avg_length_mm == pytest.approx(5.0, rel=0.05)
        assert morph.avg_width_mm == pytest.approx(0.5, rel=0.10)
        assert morph.avg_tortuosity == pytest.approx(0.0, abs=0.02)
        assert morph.avg_contrast is None  # no intensity image supplied

    def test_atrophy_identity_exact(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            labels = (rng.random((40, 40)) < rng.uniform(0.05, 0.9)).astype(np.int32)
            morph = quantify(build_mask(labels))
            assert morph.percent_atrophy + 100.0 * morph.gland_density == 100.0

    def test_scale_equivariance_exact(self):
        labels, roi, sid, _ = make_gland_scene()
        base = quantify(build_mask(labels, roi, 0.05, sid))
        doubled = quantify(build_mask(labels, roi, 0.10, sid))
        for g1, g2 in zip(base.per_gland, doubled.per_gland):
            assert g2.length_mm == 2.0 * g1.length_mm
            assert g2.width_mm == 2.0 * g1.width_mm
            assert g2.tortuosity == g1.tortuosity
        assert doubled.avg_length_mm == 2.0 * base.avg_length_mm
        assert doubled.avg_width_mm == 2.0 * base.avg_width_mm
        assert doubled.gland_density == base.gland_density
        assert doubled.percent_atrophy == base.percent_atrophy

    def test_rotation_robustness(self):
        labels, roi, sid, mm = make_gland_scene()
        rot_labels = np.rot90(labels).copy()
        h, w = rot_labels.shape
        base = quantify(build_mask(labels, roi, mm, sid))
        rot = quantify(build_mask(rot_labels, full_roi(h, w), mm, sid))
        assert rot.avg_length_mm == pytest.approx(base.avg_length_mm, rel=0.05)
        assert rot.avg_width_mm == pytest.approx(base.avg_width_mm, rel=0.05)
        assert rot.avg_tortuosity == pytest.approx(base.avg_tortuosity, abs=0.02)

    def test_mean_consistency(self):
        labels, roi, sid, mm = make_gland_scene()
        image = np.full(labels.shape, 90.0)
        image[labels > 0] = 120.0
        morph = quantify(build_mask(labels, roi, mm, sid), image)
        for attr, agg in (
            ("length_mm", morph.avg_length_mm),
            ("width_mm", morph.avg_width_mm),
            ("tortuosity", morph.avg_tortuosity),
            ("local_contrast", morph.avg_contrast),
        ):
            values = [getattr(g, attr) for g in morph.per_gland]
            assert agg == pytest.approx(sum(values) / len(values), abs=1e-9)

    def test_no_glands(self):
        labels = np.zeros((50, 50), dtype=np.int32)
        morph = quantify(build_mask(labels))
        assert morph.gland_count == 0
        assert morph.percent_atrophy == 100.0
        assert morph.gland_density == 0.0
        assert morph.avg_length_mm is None
        assert morph.avg_contrast is None

    def test_gland_clipped_to_roi(self):
        labels = np.zeros((40, 40), dtype=np.int32)
        labels[10:20, :] = 1  # spans the full width
        roi = [[-0.5, -0.5], [19.5, -0.5], [19.5, 39.5], [-0.5, 39.5]]  # left half
        morph = quantify(build_mask(labels, roi))
        # density is ROI-relative: 10 rows x 20 cols gland pixels / (40x20 roi)
        assert morph.gland_density == pytest.approx(200 / 800)
        assert morph.gland_count == 1
        assert morph.per_gland[0].length_mm <= 20 * MM * 1.1

    def test_gland_outside_roi_dropped(self):
        labels = np.zeros((40, 40), dtype=np.int32)
        labels[5:10, 25:35] = 1
        roi = [[-0.5, -0.5], [19.5, -0.5], [19.5, 39.5], [-0.5, 39.5]]
        morph = quantify(build_mask(labels, roi))
        assert morph.gland_count == 0

    def test_image_dimension_mismatch(self):
        labels = np.ones((20, 20), dtype=np.int32)
        with pytest.raises(MaskError, match="does not match"):
            quantify(build_mask(labels), np.zeros((10, 10)))

    def test_determinism_bit_identical(self):
        labels, roi, sid, mm = make_gland_scene()
        image = np.full(labels.shape, 90.0)
        image[labels > 0] = 115.0
        a = quantify(build_mask(labels, roi, mm, sid), image)
        b = quantify(build_mask(labels, roi, mm, sid), image)
        assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
            b.to_json_dict(), sort_keys=True
        )

    def test_single_pixel_gland_flagged(self):
        labels = np.zeros((20, 20), dtype=np.int32)
        labels[4:14, 3:13] = 1
        labels[17, 17] = 2
        morph = quantify(build_mask(labels))
        tiny = [g for g in morph.per_gland if g.gland_id == 2][0]
        assert tiny.width_mm == 0.0
        assert "zero_length_skeleton" in tiny.flags


class TestMaskIO:
    def test_load_mask_direct(self, tmp_path):
        labels, roi, sid, mm = make_gland_scene()
        write_label_png(tmp_path / "m.png", labels)
        write_sidecar(tmp_path / "m.json", sid, mm, roi)
        mask = load_labeled_mask(tmp_path / "m.png", tmp_path / "m.json")
        assert mask.n_glands == 2
        assert mask.mm_per_px == mm
        assert mask.subject_eye_id == sid

    def test_sparse_labels_renumbered(self, tmp_path):
        labels = np.zeros((30, 30), dtype=np.uint16)
        labels[5:10, 5:25] = 3
        labels[20:25, 5:25] = 7
        write_label_png(tmp_path / "m.png", labels)
        write_sidecar(tmp_path / "m.json", "9_1_L", 0.05, full_roi(30, 30))
        mask = load_labeled_mask(tmp_path / "m.png", tmp_path / "m.json")
        assert sorted(np.unique(mask.labels).tolist()) == [0, 1, 2]

    def test_no_glands_is_not_an_error(self, tmp_path):
        labels = np.zeros((20, 20), dtype=np.uint16)
        write_label_png(tmp_path / "m.png", labels)
        write_sidecar(tmp_path / "m.json", "9_1_L", 0.05, full_roi(20, 20))
        assert load_labeled_mask(tmp_path / "m.png", tmp_path / "m.json").n_glands == 0

    def test_missing_files(self, tmp_path):
        with pytest.raises(MaskError, match="not found"):
            load_labeled_mask(tmp_path / "nope.png", tmp_path / "nope.json")
        labels, roi, sid, mm = make_gland_scene()
        write_label_png(tmp_path / "m.png", labels)
        with pytest.raises(MaskError, match="not found"):
            load_labeled_mask(tmp_path / "m.png", tmp_path / "nope.json")

    def test_invalid_scale(self, tmp_path):
        labels, roi, sid, _ = make_gland_scene()
        write_label_png(tmp_path / "m.png", labels)
        write_sidecar(tmp_path / "m.json", sid, -1.0, roi)
        with pytest.raises(MaskError, match="invalid scale"):
            load_labeled_mask(tmp_path / "m.png", tmp_path / "m.json")

    def test_malformed_sidecar(self, tmp_path):
        labels, roi, sid, mm = make_gland_scene()
        write_label_png(tmp_path / "m.png", labels)
        (tmp_path / "m.json").write_text("{not json")
        with pytest.raises(MaskError, match="malformed sidecar"):
            load_labeled_mask(tmp_path / "m.png", tmp_path / "m.json")

    def test_zero_area_roi(self, tmp_path):
        labels, _, sid, mm = make_gland_scene()
        write_label_png(tmp_path / "m.png", labels)
        write_sidecar(tmp_path / "m.json", sid, mm, [[0, 0], [10, 0], [20, 0]])
        with pytest.raises(MaskError, match="zero area"):
            load_labeled_mask(tmp_path / "m.png", tmp_path / "m.json")

    def test_self_intersecting_roi_rejected(self):
        bowtie = [[0.0, 0.0], [10.0, 10.0], [14.0, 2.0], [0.0, 10.0]]
        with pytest.raises(MaskError, match="self-intersecting"):
            validate_roi_polygon(np.asarray(bowtie))

    def test_rasterize_roi_counts_pixel_centers(self):
        roi = np.asarray([[-0.5, -0.5], [9.5, -0.5], [9.5, 9.5], [-0.5, 9.5]])
        assert rasterize_roi(roi, 10, 10).sum() == 100
        half = np.asarray([[-0.5, -0.5], [4.5, -0.5], [4.5, 9.5], [-0.5, 9.5]])
        assert rasterize_roi(half, 10, 10).sum() == 50

    def test_morphology_json_round_trip(self, tmp_path):
        labels, roi, sid, mm = make_gland_scene()
        morph = quantify(build_mask(labels, roi, mm, sid))
        morph.write_json(tmp_path / "m.json")
        loaded = EyelidMorphology.read_json(tmp_path / "m.json")
        assert loaded == morph

    def test_morphology_json_key_contract(self, tmp_path):
        labels, roi, sid, mm = make_gland_scene()
        morph = quantify(build_mask(labels, roi, mm, sid))
        doc = morph.to_json_dict()
        for key in ("avg_length", "avg_width", "avg_contrast", "avg_tortuosity",
                    "percent_atrophy", "gland_density"):
            assert key in doc
