import logging

import numpy as np
import pytest

from fitroom.backends import (OracleClothSegmenter, OracleSegmenter,
                              OracleStore, ThresholdClothSegmenter)
from fitroom.errors import (BackendError, ContractViolationError,
                            InvalidInputError, PoseIncompleteError)
from fitroom.imaging import RasterImage, rgb_to_gray
from fitroom.parsing import (BACKGROUND, ERASED_CLASSES, FACE, HAIR,
                             JOINT_NAMES, LEFT_ARM, NUM_JOINTS, TORSO_SKIN,
                             UPPER_CLOTHES, ClothMask, DenseposeMap, ParseMap,
                             PerceptionBackend, PoseKeypoints, TimingLog,
                             arm_capsules, compute_densepose, detect_pose,
                             generate_agnostic, make_cloth_mask,
                             remove_background, segment_human)


def rgb(h, w, value=100):
    return RasterImage(np.full((h, w, 3), value, dtype=np.uint8))


def pose_with(*joints_xy):
    pts = np.zeros((NUM_JOINTS, 3))
    for name, x, y in joints_xy:
        idx = JOINT_NAMES.index(name)
        pts[idx] = (x, y, 1.0)
    return PoseKeypoints(pts)


class TestTypes:
    def test_parse_map_rejects_out_of_range(self):
        with pytest.raises(InvalidInputError):
            ParseMap(np.full((2, 2), 20, dtype=np.uint8))

    def test_cloth_mask_rejects_non_binary(self):
        with pytest.raises(InvalidInputError):
            ClothMask(np.full((2, 2), 2, dtype=np.uint8))

    def test_densepose_invariant_uv_zero_off_body(self):
        parts = np.zeros((2, 2), dtype=np.uint8)
        u = np.zeros((2, 2))
        u[0, 0] = 0.5
        with pytest.raises(InvalidInputError):
            DenseposeMap(parts, u, np.zeros((2, 2)))

    def test_pose_confidence_range(self):
        pts = np.zeros((NUM_JOINTS, 3))
        pts[0, 2] = 1.5
        with pytest.raises(InvalidInputError):
            PoseKeypoints(pts)

    def test_pose_flat_round_trip(self):
        pts = np.arange(NUM_JOINTS * 3, dtype=np.float64).reshape(NUM_JOINTS, 3)
        pts[:, 2] = 0.5
        pose = PoseKeypoints(pts)
        again = PoseKeypoints.from_flat(pose.flat())
        assert np.array_equal(again.points, pose.points)


class TestRemoveBackground:
    def test_all_background_becomes_white(self):
        img = rgb(3, 3)
        parse = ParseMap(np.zeros((3, 3), dtype=np.uint8))
        out = remove_background(img, parse)
        assert np.all(out.data == 255)

    def test_no_background_untouched_bit_exact(self):
        rng = np.random.default_rng(0)
        img = RasterImage(rng.integers(0, 255, (4, 4, 3), dtype=np.uint8))
        parse = ParseMap(np.full((4, 4), FACE, dtype=np.uint8))
        out = remove_background(img, parse)
        assert np.array_equal(out.data, img.data)

    def test_single_background_pixel(self):
        img = rgb(2, 2, 10)
        labels = np.full((2, 2), FACE, dtype=np.uint8)
        labels[0, 1] = BACKGROUND
        out = remove_background(img, ParseMap(labels))
        assert np.all(out.data[0, 1] == 255)
        mask = np.ones((2, 2), dtype=bool)
        mask[0, 1] = False
        assert np.all(out.data[mask] == 10)

    def test_idempotent(self, samples64):
        s = samples64[0]
        once = remove_background(s.person, s.parse)
        twice = remove_background(once, s.parse)
        assert np.array_equal(once.data, twice.data)

    def test_size_mismatch(self):
        with pytest.raises(InvalidInputError):
            remove_background(rgb(2, 2), ParseMap(np.zeros((3, 3),
                                                           dtype=np.uint8)))


class TestGenerateAgnostic:
    def _simple_scene(self):
        img = rgb(20, 20, 200)
        labels = np.zeros((20, 20), dtype=np.uint8)
        labels[2:6, 8:12] = FACE
        labels[8:14, 6:14] = UPPER_CLOTHES
        labels[14:20, 6:14] = 9  # pants
        pose = pose_with(("neck", 10, 8), ("left_shoulder", 13, 9),
                         ("right_shoulder", 7, 9))
        return img, ParseMap(labels), pose

    def test_upper_clothes_filled_and_relabelled(self):
        img, parse, pose = self._simple_scene()
        agn, agn_parse = generate_agnostic(img, parse, pose)
        assert agn.channels == 1
        assert np.all(agn.data[9, 9] == 128)
        assert agn_parse.labels[9, 9] == BACKGROUND

    def test_no_erasable_content_gives_gray_with_black_background(self):
        img = rgb(16, 16, 180)
        labels = np.zeros((16, 16), dtype=np.uint8)
        labels[2:5, 6:10] = FACE
        # shoulders placed so the (zero-radius) capsules touch nothing
        pose = pose_with(("neck", 8, 12), ("left_shoulder", 9, 12),
                         ("right_shoulder", 7, 12))
        agn, agn_parse = generate_agnostic(img, ParseMap(labels), pose,
                                           capsule_scale=0.0)
        gray = rgb_to_gray(img).data
        expected = gray.copy()
        expected[labels == BACKGROUND] = 0
        assert np.array_equal(agn.data, expected)

    def test_erased_classes_absent_from_output_parse(self, samples64):
        for s in samples64:
            agn, agn_parse = generate_agnostic(s.person, s.parse, s.pose)
            assert not np.isin(agn_parse.labels,
                               list(ERASED_CLASSES)).any()

    def test_face_and_hair_outside_capsules_untouched(self, samples64):
        s = samples64[0]
        agn, agn_parse = generate_agnostic(s.person, s.parse, s.pose)
        ls = s.pose.joint("left_shoulder")
        rs = s.pose.joint("right_shoulder")
        radius = 0.45 * float(np.hypot(ls[0] - rs[0], ls[1] - rs[1]))
        capsules = arm_capsules(s.pose, s.person.height, s.person.width,
                                radius)
        keep = np.isin(s.parse.labels, (FACE, HAIR)) & ~capsules
        gray = rgb_to_gray(s.person).data[:, :, 0]
        assert np.array_equal(agn.data[:, :, 0][keep], gray[keep])
        assert np.array_equal(agn_parse.labels[keep], s.parse.labels[keep])

    def test_torso_skin_erased(self):
        img, parse, pose = self._simple_scene()
        labels = parse.labels.copy()
        labels[8, 8] = TORSO_SKIN
        agn, agn_parse = generate_agnostic(img, ParseMap(labels), pose)
        assert np.all(agn.data[8, 8] == 128)
        assert agn_parse.labels[8, 8] == BACKGROUND

    def test_missing_required_joint_rejected(self):
        img, parse, _ = self._simple_scene()
        pose = pose_with(("neck", 10, 8), ("left_shoulder", 13, 9))
        with pytest.raises(PoseIncompleteError):
            generate_agnostic(img, parse, pose)

    def test_color_switch_keeps_channels(self):
        img, parse, pose = self._simple_scene()
        agn, _ = generate_agnostic(img, parse, pose, grayscale=False)
        assert agn.channels == 3


class _FailingBackend(PerceptionBackend):
    name = "broken"
    kind = "segmenter"
    target = "human"

    def parse_human(self, img):
        raise RuntimeError("boom")


class _WrongSizeBackend(PerceptionBackend):
    name = "shrunk"
    kind = "segmenter"
    target = "human"

    def parse_human(self, img):
        return ParseMap(np.zeros((1, 1), dtype=np.uint8))


class TestBackendOps:
    def test_oracle_returns_stored_truth(self, samples64, oracle_store):
        s = samples64[0]
        backend = OracleSegmenter(oracle_store)
        out = segment_human(s.person, backend)
        assert np.array_equal(out.labels, s.parse.labels)

    def test_blank_image_parses_to_background(self, oracle_store):
        backend = OracleSegmenter(oracle_store)
        out = segment_human(rgb(8, 8, 255), backend)
        assert np.all(out.labels == BACKGROUND)

    def test_backend_failure_wrapped_with_name(self):
        with pytest.raises(BackendError, match="broken"):
            segment_human(rgb(4, 4), _FailingBackend())

    def test_size_contract_enforced(self):
        with pytest.raises(ContractViolationError):
            segment_human(rgb(4, 4), _WrongSizeBackend())

    def test_kind_checked(self, oracle_store):
        backend = OracleSegmenter(oracle_store)
        with pytest.raises(InvalidInputError):
            detect_pose(rgb(4, 4), backend)

    def test_pose_empty_scene_all_zero_confidence(self, oracle_store):
        from fitroom.backends import OraclePoseDetector

        pose = detect_pose(rgb(6, 6, 255), OraclePoseDetector(oracle_store))
        assert np.all(pose.points[:, 2] == 0)

    def test_densepose_invariants_on_oracle_output(self, samples64,
                                                   oracle_store):
        from fitroom.backends import OracleDenseposeEstimator

        backend = OracleDenseposeEstimator(oracle_store)
        dp = compute_densepose(samples64[1].person, backend)
        assert dp.u.min() >= 0 and dp.u.max() <= 1
        assert dp.v.min() >= 0 and dp.v.max() <= 1
        off = dp.parts == 0
        assert np.all(dp.u[off] == 0) and np.all(dp.v[off] == 0)

    def test_timing_log_captures_durations(self, samples64, oracle_store):
        timings = TimingLog()
        segment_human(samples64[0].person, OracleSegmenter(oracle_store),
                      timings=timings)
        assert len(timings.entries) == 1
        stage, seconds = timings.entries[0]
        assert stage == "segment_human" and seconds >= 0


class TestClothMask:
    def test_oracle_mask_exact(self, samples64, oracle_store):
        s = samples64[2]
        out = make_cloth_mask(s.cloth, OracleClothSegmenter(oracle_store))
        assert np.array_equal(out.mask, s.cloth_mask.mask)

    def test_all_background_gives_zero_mask(self, oracle_store, caplog):
        with caplog.at_level(logging.WARNING, logger="fitroom"):
            out = make_cloth_mask(rgb(8, 8, 255),
                                  OracleClothSegmenter(oracle_store))
        assert out.area() == 0

    def test_threshold_backend_on_clear_contrast(self):
        img = np.full((16, 16, 3), 250, dtype=np.uint8)
        img[4:12, 5:11] = (200, 30, 40)
        out = make_cloth_mask(RasterImage(img), ThresholdClothSegmenter())
        expected = np.zeros((16, 16), dtype=np.uint8)
        expected[4:12, 5:11] = 1
        assert np.array_equal(out.mask, expected)

    def test_white_on_white_fails_and_is_logged(self, caplog):
        img = np.full((16, 16, 3), 250, dtype=np.uint8)
        img[4:12, 5:11] = 246  # garment nearly invisible
        with caplog.at_level(logging.WARNING, logger="fitroom"):
            out = make_cloth_mask(RasterImage(img), ThresholdClothSegmenter())
        assert out.area() == 0
        assert any("nearly empty" in rec.message for rec in caplog.records)

    def test_output_binary(self, samples64, oracle_store):
        out = make_cloth_mask(samples64[3].cloth,
                              OracleClothSegmenter(oracle_store))
        assert set(np.unique(out.mask)) <= {0, 1}


class TestDeterminism:
    def test_every_backend_deterministic(self, samples64, oracle_store):
        from fitroom.backends import (OracleDenseposeEstimator,
                                      OraclePoseDetector,
                                      ParseDerivedDensepose)

        s = samples64[0]
        seg = OracleSegmenter(oracle_store)
        assert np.array_equal(seg.parse_human(s.person).labels,
                              seg.parse_human(s.person).labels)
        pose = OraclePoseDetector(oracle_store)
        assert np.array_equal(pose.detect_pose(s.person).points,
                              pose.detect_pose(s.person).points)
        dpb = ParseDerivedDensepose(seg)
        a = dpb.estimate_densepose(s.person)
        b = dpb.estimate_densepose(s.person)
        assert np.array_equal(a.parts, b.parts)
        assert np.array_equal(a.u, b.u)
        cloth = ThresholdClothSegmenter()
        assert np.array_equal(cloth.cloth_confidence(s.cloth),
                              cloth.cloth_confidence(s.cloth))
