import numpy as np
import pytest

from kpsketch.mediancost import MedianSketchConfig, estimate_median_cost
from kpsketch.medoid import MedoidSketch, PassOrderError, estimate_medoid_cost
from kpsketch.oracle import exact_medoid_cost, uniform_instance


class TestProtocol:
    def test_pass2_requires_seal(self):
        sk = MedoidSketch(3, 1.0, 0.25, seed=1)
        sk.pass1_ingest(np.ones(3))
        with pytest.raises(PassOrderError):
            sk.pass2_score(np.ones(3))

    def test_no_ingest_after_seal(self):
        sk = MedoidSketch(3, 1.0, 0.25, seed=2)
        sk.pass1_ingest(np.ones(3))
        sk.seal_pass1()
        with pytest.raises(PassOrderError):
            sk.pass1_ingest(np.ones(3))

    def test_result_requires_complete_replay(self):
        sk = MedoidSketch(3, 1.0, 0.25, seed=3)
        sk.pass1_ingest(np.ones(3))
        sk.pass1_ingest(np.zeros(3))
        sk.seal_pass1()
        sk.pass2_score(np.ones(3))
        with pytest.raises(ValueError):
            sk.result()

    def test_pass2_count_capped(self):
        sk = MedoidSketch(3, 1.0, 0.25, seed=4)
        sk.pass1_ingest(np.ones(3))
        sk.seal_pass1()
        sk.pass2_score(np.ones(3))
        with pytest.raises(ValueError):
            sk.pass2_score(np.ones(3))

    def test_replay_order_free(self):
        from kpsketch.medoid import default_width

        pts = np.random.default_rng(5).normal(size=(10, 4))
        base = estimate_medoid_cost(pts, 1.0, 0.25, seed=6)
        # same multiset, different order in pass 2
        sk = MedoidSketch(4, 1.0, 0.25, seed=6, width=default_width(0.25, n_hint=10))
        for x in pts:
            sk.pass1_ingest(x)
        sk.seal_pass1()
        for i in np.random.default_rng(7).permutation(10):
            sk.pass2_score(pts[i])
        assert sk.result() == base


class TestEstimates:
    def test_single_point(self):
        assert estimate_medoid_cost(np.ones((1, 5)), 1.0, 0.25, seed=8) == \
            pytest.approx(0.0, abs=1e-9)

    def test_identical_points_cancel_exactly(self):
        pts = np.tile(np.array([1.0, -2.0, 0.5]), (6, 1))
        assert estimate_medoid_cost(pts, 1.5, 0.25, seed=9) == pytest.approx(0.0, abs=1e-9)

    def test_collinear_triple(self):
        pts = np.array([[0.0], [1.0], [10.0]])
        ok = 0
        for seed in range(100):
            est = estimate_medoid_cost(pts, 1.0, 0.25, seed=seed)
            ok += abs(est / 10.0 - 1.0) <= 0.3
        assert ok >= 90

    def test_random_cloud_tracks_oracle(self):
        ok = 0
        for seed in range(20):
            pts = np.random.default_rng(seed).normal(size=(25, 6))
            truth = exact_medoid_cost(uniform_instance(pts, 1.0))
            est = estimate_medoid_cost(pts, 1.0, 0.25, seed=seed)
            ok += abs(est / truth - 1.0) <= 0.3
        assert ok >= 18

    def test_p15_supported(self):
        pts = np.random.default_rng(10).normal(size=(15, 4))
        truth = exact_medoid_cost(uniform_instance(pts, 1.5))
        est = estimate_medoid_cost(pts, 1.5, 0.25, seed=11)
        assert abs(est / truth - 1.0) <= 0.5

    def test_medoid_at_least_median_cost(self):
        # restricting the center to data points can only increase cost
        eps = 0.25
        cfg = MedianSketchConfig(p=1.0, eps=eps, delta=0.2)
        for seed in range(5):
            pts = np.random.default_rng(100 + seed).normal(size=(15, 5))
            medoid = estimate_medoid_cost(pts, 1.0, eps, seed=seed) / 15.0
            median = estimate_median_cost(pts, cfg, seed=seed)
            assert medoid >= (1.0 - 3.0 * eps) * median
