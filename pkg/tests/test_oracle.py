import numpy as np
import pytest

from kpsketch.oracle import (ExactInstance, center_instance, coordinate_min_cost,
                             exact_k_cost, exact_median_cost, exact_medoid_cost,
                             exact_sampling_dist, golden_section,
                             stable_abs_quantile, uniform_instance,
                             verify_ratio_bounds)
from kpsketch.partitions import count_partitions, partition_blocks, rgs_partitions


class TestMedianCost:
    def test_p2_two_points(self):
        inst = ExactInstance(np.array([[0.0], [2.0]]), np.array([0.5, 0.5]), 2.0)
        assert exact_median_cost(inst) == pytest.approx(1.0, rel=1e-12)

    def test_p1_three_points(self):
        inst = uniform_instance(np.array([[-1.0], [0.0], [1.0]]), 1.0)
        assert exact_median_cost(inst) == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_golden_matches_grid_scan(self):
        r = np.random.default_rng(0)
        vals = r.normal(size=12)
        w = np.full(12, 1.0 / 12)
        got = coordinate_min_cost(vals, w, 1.5)
        grid = np.linspace(vals.min(), vals.max(), 1_000_000)
        scan = np.min(np.sum(w[:, None] * np.abs(vals[:, None] - grid[None, :]) ** 1.5, axis=0))
        assert got == pytest.approx(scan, abs=1e-6)

    def test_unimodal_per_coordinate(self):
        r = np.random.default_rng(1)
        for p in (1.0, 1.5, 2.0):
            vals = r.normal(size=15)
            w = np.full(15, 1.0 / 15)
            grid = np.linspace(vals.min(), vals.max(), 100)
            obj = np.array([np.sum(w * np.abs(vals - c) ** p) for c in grid])
            sign_changes = np.sum(np.diff(np.sign(np.diff(obj))) != 0)
            assert sign_changes <= 1  # decreases then increases


class TestGoldenSection:
    def test_quadratic(self):
        assert golden_section(lambda x: (x - 1.3) ** 2, -5, 5) == pytest.approx(1.3, abs=1e-8)


class TestKCost:
    def test_k_equals_n(self):
        pts = np.random.default_rng(2).normal(size=(6, 3))
        inst = uniform_instance(pts, 1.5)
        assert exact_k_cost(inst, 6) == pytest.approx(0.0, abs=1e-12)

    def test_k1_matches_median(self):
        pts = np.random.default_rng(3).normal(size=(7, 2))
        inst = uniform_instance(pts, 1.0)
        assert exact_k_cost(inst, 1) == pytest.approx(exact_median_cost(inst), abs=1e-9)

    def test_two_tight_blobs(self):
        pts = np.array([[0.0], [0.1], [9.9], [10.0]])
        inst = ExactInstance(pts, np.ones(4), 1.0)
        assert exact_k_cost(inst, 2) == pytest.approx(0.2, rel=1e-9)

    def test_cap_enforced(self):
        pts = np.zeros((15, 2))
        with pytest.raises(ValueError):
            exact_k_cost(ExactInstance(pts, np.ones(15), 1.0), 2)

    def test_k_range(self):
        inst = uniform_instance(np.zeros((4, 2)), 1.0)
        with pytest.raises(ValueError):
            exact_k_cost(inst, 0)
        with pytest.raises(ValueError):
            exact_k_cost(inst, 5)


class TestMedoid:
    def test_single_point(self):
        assert exact_medoid_cost(uniform_instance(np.ones((1, 4)), 1.5)) == 0.0

    def test_collinear(self):
        inst = uniform_instance(np.array([[0.0], [1.0], [10.0]]), 1.0)
        assert exact_medoid_cost(inst) == pytest.approx(10.0, rel=1e-12)

    def test_matches_independent_double_loop(self):
        pts = np.random.default_rng(4).normal(size=(30, 5))
        p = 1.5
        best = np.inf
        for z in range(30):
            cost = 0.0
            for i in range(30):
                cost += np.sum(np.abs(pts[i] - pts[z]) ** p)
            best = min(best, cost)
        assert exact_medoid_cost(uniform_instance(pts, p)) == pytest.approx(best, rel=1e-12)


class TestSamplingDist:
    def test_point_mass(self):
        pts = np.zeros((4, 3))
        pts[:, 1] = [1.0, -1.0, 2.0, 0.5]
        d = exact_sampling_dist(uniform_instance(pts, 1.0))
        np.testing.assert_allclose(d, [0.0, 1.0, 0.0])

    def test_uniform_coordinates(self):
        pts = np.ones((5, 4))
        d = exact_sampling_dist(uniform_instance(pts, 1.5))
        np.testing.assert_allclose(d, 0.25)

    def test_sums_to_one(self):
        pts = np.random.default_rng(5).normal(size=(8, 6))
        for p in (1.0, 1.5, 2.0):
            assert exact_sampling_dist(uniform_instance(pts, p)).sum() == pytest.approx(1.0, abs=1e-12)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            exact_sampling_dist(uniform_instance(np.zeros((3, 2)), 1.0))


class TestRatioBounds:
    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
    def test_random_instances(self, p):
        r = np.random.default_rng(6)
        for _ in range(50):
            pts = r.normal(size=(10, 4)) * r.uniform(0.5, 3.0)
            assert verify_ratio_bounds(uniform_instance(pts, p))

    def test_symmetric_pair_ratio_is_one(self):
        inst = uniform_instance(np.array([[-1.0], [1.0]]), 1.0)
        centered = center_instance(inst)
        mass = np.sum(centered.weights * np.abs(centered.points[:, 0]))
        mc = coordinate_min_cost(centered.points[:, 0], centered.weights, 1.0)
        assert mc / mass == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
    def test_lower_bound_respected_on_skewed_family(self, p):
        # two points, one carrying almost all the weight; the bound holds
        # throughout, and at p=1 the family attains it in the limit (for
        # p=2 the ratio is identically 1: the mean is the optimal center)
        lo = 2.0 ** (-p)
        ratios = []
        for w1 in (0.6, 0.9, 0.99, 0.999):
            pts = np.array([[-1.0], [w1 / (1.0 - w1)]])
            inst = ExactInstance(pts, np.array([w1, 1.0 - w1]), p)
            centered = center_instance(inst)
            mass = np.sum(centered.weights * np.abs(centered.points[:, 0]) ** p)
            mc = coordinate_min_cost(centered.points[:, 0], centered.weights, p)
            ratios.append(mc / mass)
        assert all(lo - 1e-9 <= r <= 1.0 + 1e-9 for r in ratios)
        if p == 1.0:
            assert ratios[-1] == pytest.approx(lo, rel=0.02)
        if p == 2.0:
            assert all(r == pytest.approx(1.0, rel=1e-9) for r in ratios)


class TestQuadratureQuantile:
    def test_cauchy_quartile(self):
        assert stable_abs_quantile(1.0) == pytest.approx(1.0, abs=1e-6)

    def test_gaussian_quartile(self):
        assert stable_abs_quantile(2.0) == pytest.approx(0.9538726, abs=1e-5)


class TestPartitions:
    def test_counts(self):
        assert count_partitions(14, 2) == 8192
        got = sum(1 for _ in rgs_partitions(6, 3))
        assert got == count_partitions(6, 3)

    def test_blocks_cover_everything(self):
        seen = set()
        for a in rgs_partitions(5, 3):
            assert a.max() < 3
            blocks = partition_blocks(a)
            assert sorted(np.concatenate(blocks).tolist()) == [0, 1, 2, 3, 4]
            seen.add(tuple(a))
        assert len(seen) == count_partitions(5, 3)

    def test_cap(self):
        with pytest.raises(ValueError):
            next(iter(rgs_partitions(15, 2)))


class TestInstanceValidation:
    def test_scale_caps(self):
        with pytest.raises(ValueError):
            uniform_instance(np.zeros((201, 2)), 1.0)
        with pytest.raises(ValueError):
            uniform_instance(np.zeros((5, 51)), 1.0)

    def test_p_range(self):
        with pytest.raises(ValueError):
            uniform_instance(np.zeros((4, 2)), 0.5)
