import math
from datetime import datetime, timedelta

import numpy as np
import pytest

from qlfquant import (
    ClassLabel,
    ClusterCenter,
    InputError,
    InternalError,
    QuantReport,
    SlicParams,
    SuperpixelMap,
    SuperpixelStats,
    Thresholds,
    compute_bqi,
    longitudinal_summary,
    slic_segment,
    superpixel_areas,
)

from conftest import make_field

TH = Thresholds(bg=0.2, kl=5.0)

B, T, F = ClassLabel.BACKGROUND, ClassLabel.TOOTH, ClassLabel.BIOFILM


def report_of(bqi=0.0, labels=(T,), areas=(10,), image_id="x"):
    return compute_bqi(list(labels), SuperpixelStats(np.array(areas, dtype=np.int64)), TH, image_id)


class TestAreas:
    def test_quadrants(self):
        field = make_field(np.full((32, 32), 0.5))
        spmap = slic_segment(field, SlicParams(k=4))
        stats = superpixel_areas(spmap)
        assert list(stats.areas) == [256, 256, 256, 256]

    def test_single_superpixel(self):
        labels = np.zeros((6, 9), dtype=np.int32)
        spmap = SuperpixelMap(
            width=9,
            height=6,
            labels=labels,
            centers=[ClusterCenter(0.0, 4.5, 3.0)],
            grid_interval=math.sqrt(54),
        )
        assert list(superpixel_areas(spmap).areas) == [54]

    def test_partition_property(self):
        rng = np.random.default_rng(1)
        field = make_field(rng.uniform(size=(40, 40)))
        spmap = slic_segment(field, SlicParams(k=12))
        stats = superpixel_areas(spmap)
        assert stats.areas.sum() == 40 * 40
        assert (stats.areas > 0).all()


class TestComputeBqi:
    def test_all_tooth_zero(self):
        rep = report_of(labels=[T, T, T], areas=[5, 6, 7])
        assert rep.bqi == 0.0
        assert not rep.no_tooth
        assert rep.area_tooth == 18

    def test_all_biofilm_one(self):
        rep = report_of(labels=[F, F], areas=[4, 9])
        assert rep.bqi == 1.0
        assert rep.area_biofilm == 13

    def test_direct_ratio(self):
        rep = report_of(labels=[F, T, B], areas=[300, 700, 24])
        assert rep.bqi == pytest.approx(0.3)
        assert rep.area_background == 24
        assert rep.area_background + rep.area_tooth + rep.area_biofilm == 1024

    def test_no_tooth_flag(self):
        rep = report_of(labels=[B, B], areas=[100, 28])
        assert rep.bqi == 0.0
        assert rep.no_tooth

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        labels = [rng.choice([B, T, F]) for _ in range(20)]
        areas = rng.integers(1, 50, size=20)
        base = compute_bqi(labels, SuperpixelStats(areas.astype(np.int64)), TH)
        perm = rng.permutation(20)
        shuffled = compute_bqi(
            [labels[i] for i in perm], SuperpixelStats(areas[perm].astype(np.int64)), TH
        )
        assert shuffled.bqi == base.bqi
        assert shuffled.area_biofilm == base.area_biofilm

    def test_tooth_to_biofilm_relabel_increases_bqi(self):
        labels = [T, T, F, B]
        areas = np.array([10, 20, 30, 5], dtype=np.int64)
        before = compute_bqi(labels, SuperpixelStats(areas), TH)
        after = compute_bqi([F, T, F, B], SuperpixelStats(areas), TH)
        assert after.bqi > before.bqi
        # denominator unchanged, numerator up by exactly the area
        assert after.area_tooth + after.area_biofilm == before.area_tooth + before.area_biofilm
        assert after.area_biofilm == before.area_biofilm + 10

    def test_background_to_tooth_relabel_never_increases_bqi(self):
        labels = [T, F, B]
        areas = np.array([10, 10, 40], dtype=np.int64)
        before = compute_bqi(labels, SuperpixelStats(areas), TH)
        after = compute_bqi([T, F, T], SuperpixelStats(areas), TH)
        assert after.bqi <= before.bqi

    def test_length_mismatch_rejected(self):
        with pytest.raises(InternalError):
            compute_bqi([T], SuperpixelStats(np.array([5, 5], dtype=np.int64)), TH)

    def test_report_json_shape(self):
        rep = report_of(labels=[F, T, B], areas=[300, 700, 24], image_id="frame_01.png")
        d = rep.to_json_dict()
        assert d == {
            "image": "frame_01.png",
            "k_actual": 3,
            "bqi": pytest.approx(0.3),
            "areas": {"background": 24, "tooth": 700, "biofilm": 300},
            "thresholds": {"bg_threshold": 0.2, "kl_threshold": 5.0},
            "no_tooth": False,
            "revision": 0,
        }
        assert rep.to_json_dict(revision=4)["revision"] == 4


def entry(day, bqi):
    ts = datetime(2024, 3, 1) + timedelta(days=day)
    rep = QuantReport(
        bqi=bqi,
        area_background=0,
        area_tooth=100,
        area_biofilm=0,
        k_actual=1,
        thresholds=TH,
        image_id=f"d{day}",
    )
    return ts, rep


class TestLongitudinal:
    def test_two_point_mean(self):
        rep = longitudinal_summary([entry(0, 0.2), entry(7, 0.4)], "s1")
        assert rep.mean_bqi == pytest.approx(0.3)
        assert [b for _, b in rep.series] == [0.2, 0.4]

    def test_singleton(self):
        rep = longitudinal_summary([entry(3, 0.15)], "s1")
        assert rep.mean_bqi == pytest.approx(0.15)

    def test_unsorted_input_sorted_output(self):
        rep = longitudinal_summary([entry(9, 0.5), entry(1, 0.1), entry(4, 0.3)], "s2")
        stamps = [ts for ts, _ in rep.series]
        assert stamps == sorted(stamps)
        assert [b for _, b in rep.series] == [0.1, 0.3, 0.5]

    def test_duplicate_timestamps_rejected(self):
        with pytest.raises(InputError, match="s3"):
            longitudinal_summary([entry(2, 0.1), entry(2, 0.2)], "s3")

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            longitudinal_summary([], "s4")

    def test_json_serialization(self):
        rep = longitudinal_summary([entry(0, 0.25), entry(1, 0.75)], "s5")
        d = rep.to_json_dict()
        assert d["subject_id"] == "s5"
        assert d["mean_bqi"] == pytest.approx(0.5)
        assert d["series"][0] == {"timestamp": "2024-03-01T00:00:00", "bqi": 0.25}
