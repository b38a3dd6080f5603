import numpy as np
import pytest

from fitroom.errors import (ConfigurationError, InsufficientSamplesError,
                            InvalidInputError)
from fitroom.imaging import RasterImage
from fitroom.metrics import (ABLATION_ROWS, AblationConfig, FeatureEmbedder,
                             FeatureStats, REFERENCE_FID, ablation_grid,
                             bench_segmenters, feature_stats, fid_between,
                             frechet_distance, mean_iou, run_ablation,
                             sqrtm_psd, timing_report)
from fitroom.parsing import ParseMap

rng = np.random.default_rng(31)


def stats_1d(mu, var):
    return FeatureStats(mu=np.array([float(mu)]),
                        sigma=np.array([[float(var)]]), n=10)


def random_stats(d, seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=(d + 5, d))
    return feature_stats(x)


class TestFeatureStats:
    def test_two_scalar_rows(self):
        st = feature_stats(np.array([[0.0], [2.0]]))
        assert st.mu[0] == 1.0
        assert st.sigma[0, 0] == 2.0  # unbiased: ((0-1)^2 + (2-1)^2) / 1

    def test_identical_rows_zero_covariance(self):
        st = feature_stats(np.tile([1.5, -2.0], (6, 1)))
        assert np.all(st.sigma == 0)

    def test_row_permutation_invariance(self):
        x = rng.normal(size=(7, 3))
        a = feature_stats(x)
        b = feature_stats(x[::-1])
        assert np.allclose(a.mu, b.mu)
        assert np.allclose(a.sigma, b.sigma)

    def test_single_row_rejected(self):
        with pytest.raises(InsufficientSamplesError):
            feature_stats(np.zeros((1, 4)))


class TestSqrtm:
    def test_identity(self):
        assert np.allclose(sqrtm_psd(np.eye(4)), np.eye(4))

    def test_diagonal_case(self):
        got = sqrtm_psd(np.diag([4.0, 9.0]))
        assert np.abs(got - np.diag([2.0, 3.0])).max() < 1e-9

    def test_two_by_two_analytic(self):
        got = sqrtm_psd(np.array([[2.0, 1.0], [1.0, 2.0]]))
        want = np.array([[1.3660254, 0.3660254], [0.3660254, 1.3660254]])
        assert np.abs(got - want).max() < 1e-7

    def test_random_psd_square_back(self):
        for seed in range(25):
            r = np.random.default_rng(seed)
            d = int(r.integers(1, 17))
            m = r.normal(size=(d, d))
            a = m @ m.T
            s = sqrtm_psd(a)
            assert np.abs(s - s.T).max() < 1e-9
            assert np.linalg.norm(s @ s - a) < 1e-6

    def test_decisively_non_psd_rejected(self):
        with pytest.raises(InvalidInputError):
            sqrtm_psd(np.diag([1.0, -0.5]))

    def test_tiny_negative_eigenvalues_clamped(self):
        a = np.diag([1.0, -5e-9])
        s = sqrtm_psd(a)
        assert s[1, 1] == 0.0


class TestFrechet:
    def test_identical_stats_zero(self):
        st = random_stats(6, 0)
        assert frechet_distance(st, st) <= 1e-6

    def test_one_dimensional_mean_shift(self):
        # (mu=0, var=1) vs (mu=2, var=1) -> 4
        assert abs(frechet_distance(stats_1d(0, 1), stats_1d(2, 1)) - 4.0) \
            < 1e-9

    def test_one_dimensional_variance_gap(self):
        # (var=4) vs (var=1) -> (2-1)^2 = 1
        assert abs(frechet_distance(stats_1d(0, 4), stats_1d(0, 1)) - 1.0) \
            < 1e-9

    def test_symmetry_on_random_pairs(self):
        for seed in range(20):
            a = random_stats(5, seed)
            b = random_stats(5, 1000 + seed)
            assert abs(frechet_distance(a, b)
                       - frechet_distance(b, a)) < 1e-9

    def test_non_negative(self):
        for seed in range(10):
            a = random_stats(4, seed)
            b = random_stats(4, 2000 + seed)
            assert frechet_distance(a, b) >= 0.0

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            frechet_distance(random_stats(3, 0), random_stats(4, 1))


class TestMeanIou:
    def _maps(self, truth, pred):
        return (ParseMap(np.asarray(pred, dtype=np.uint8)),
                ParseMap(np.asarray(truth, dtype=np.uint8)))

    def test_identical_maps_score_one(self):
        pred, truth = self._maps([[1, 2], [3, 0]], [[1, 2], [3, 0]])
        assert mean_iou(pred, truth)[0] == 1.0

    def test_worked_example(self):
        # truth [0,0,1,1], pred [0,1,1,1]: class0 1/2, class1 2/3
        pred, truth = self._maps([[0, 0, 1, 1]], [[0, 1, 1, 1]])
        mean, per_class = mean_iou(pred, truth)
        assert abs(per_class[0] - 0.5) < 1e-12
        assert abs(per_class[1] - 2 / 3) < 1e-12
        assert abs(mean - 7 / 12) < 1e-12

    def test_disjoint_maps_score_zero(self):
        pred, truth = self._maps([[1, 1]], [[2, 2]])
        assert mean_iou(pred, truth)[0] == 0.0

    def test_absent_classes_excluded(self):
        pred, truth = self._maps([[5, 5]], [[5, 5]])
        _, per_class = mean_iou(pred, truth)
        assert set(per_class) == {5}

    def test_consistent_relabeling_invariance(self):
        r = np.random.default_rng(3)
        a = r.integers(0, 5, (10, 8)).astype(np.uint8)
        b = r.integers(0, 5, (10, 8)).astype(np.uint8)
        base = mean_iou(ParseMap(a), ParseMap(b))[0]
        perm = np.array([3, 4, 0, 2, 1], dtype=np.uint8)
        relabeled = mean_iou(ParseMap(perm[a]), ParseMap(perm[b]))[0]
        assert abs(base - relabeled) < 1e-12

    def test_range_and_size_check(self):
        pred, truth = self._maps([[0, 1]], [[1, 1]])
        assert 0.0 <= mean_iou(pred, truth)[0] <= 1.0
        with pytest.raises(InvalidInputError):
            mean_iou(ParseMap(np.zeros((2, 2), dtype=np.uint8)),
                     ParseMap(np.zeros((3, 3), dtype=np.uint8)))


class TestEmbedder:
    def test_deterministic_across_instances(self):
        imgs = [RasterImage(rng.integers(0, 255, (40, 30, 3),
                                         dtype=np.uint8)) for _ in range(3)]
        a = FeatureEmbedder()(imgs)
        b = FeatureEmbedder()(imgs)
        assert np.array_equal(a, b)
        assert a.shape == (3, 64)

    def test_fid_zero_for_identical_sets(self):
        imgs = [RasterImage(rng.integers(0, 255, (40, 30, 3),
                                         dtype=np.uint8)) for _ in range(4)]
        assert fid_between(imgs, list(imgs)) < 1e-6


class TestAblationGrid:
    BINDINGS = {"segmentation": {"original": "toy", "new": "oracle"},
                "cloth_mask": {"original": "threshold", "new": "oracle"},
                "densepose": {"original": "parse-derived", "new": "oracle"}}

    def test_exact_six_row_structure(self):
        grid = ablation_grid(self.BINDINGS)
        assert len(grid) == 6
        got = [(c.segmentation, c.cloth_mask, c.densepose) for c in grid]
        assert got == list(ABLATION_ROWS)
        assert [c.row for c in grid] == [1, 2, 3, 4, 5, 6]

    def test_reference_values_recorded(self):
        assert REFERENCE_FID == (11.796, 12.243, 11.847, 11.743, 13.140,
                                 11.753)

    def test_backend_binding_resolution(self):
        grid = ablation_grid(self.BINDINGS)
        assert grid[0].backends == {"segmentation": "toy",
                                    "cloth_mask": "threshold",
                                    "densepose": "parse-derived"}
        assert grid[5].backends == {"segmentation": "oracle",
                                    "cloth_mask": "oracle",
                                    "densepose": "oracle"}

    def test_missing_binding_rejected(self):
        with pytest.raises(ConfigurationError):
            ablation_grid({"segmentation": {"new": "oracle"}})

    def test_invalid_switch_value_rejected(self):
        with pytest.raises(InvalidInputError):
            AblationConfig(row=1, segmentation="fancy", cloth_mask="new",
                           densepose="new")

    def test_identity_generation_gives_zero_fid_rows(self):
        imgs = [RasterImage(rng.integers(0, 255, (32, 24, 3),
                                         dtype=np.uint8)) for _ in range(4)]
        grid = ablation_grid(self.BINDINGS)
        report = run_ablation(grid, lambda cfg: list(imgs), imgs)
        assert len(report.rows) == 6
        for row in report.rows:
            assert row["fid"] < 1e-6
            assert row["reference_fid"] == REFERENCE_FID[row["row"] - 1]

    def test_empty_eval_set_rejected(self):
        grid = ablation_grid(self.BINDINGS)
        with pytest.raises(ConfigurationError):
            run_ablation(grid, lambda cfg: [], [])

    def test_csv_has_six_data_rows(self, tmp_path):
        imgs = [RasterImage(rng.integers(0, 255, (32, 24, 3),
                                         dtype=np.uint8)) for _ in range(3)]
        report = run_ablation(ablation_grid(self.BINDINGS),
                              lambda cfg: list(imgs), imgs)
        path = tmp_path / "ablation.csv"
        report.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 7  # header + six rows


class TestTimingReport:
    def test_empty_run(self):
        report = timing_report([])
        assert report.stages == []
        assert report.total() == 0.0

    def test_additivity(self):
        report = timing_report([("a", 1.0), ("b", 2.0)])
        assert report.total() == 3.0

    def test_reference_is_annotation_only(self):
        report = timing_report([("a", 1.0)])
        payload = report.as_dict()
        assert payload["reference"]["before_seconds"] == 240.0
        assert payload["reference"]["after_seconds"] == 78.0
        assert "note" in payload["reference"]
        text = report.as_text()
        assert "240s -> 78s" in text


class TestBench:
    def test_bench_rows_and_reference(self, samples64, oracle_store):
        from fitroom.backends import OracleCoarseSegmenter, OracleSegmenter

        backends = {"oracle": OracleSegmenter(oracle_store),
                    "oracle-coarse": OracleCoarseSegmenter(oracle_store)}
        rows = bench_segmenters(backends,
                                [s.person for s in samples64[:3]],
                                [s.parse for s in samples64[:3]])
        by_name = {r["model"]: r for r in rows}
        assert by_name["oracle"]["iou_pct"] == 100.0
        assert by_name["oracle-coarse"]["iou_pct"] < 100.0
        assert all(r["time_seconds"] >= 0 for r in rows)
