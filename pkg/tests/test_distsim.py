import numpy as np
import pytest

from kpsketch.distsim import (TranscriptMeter, run_protocol, split_contiguous,
                              split_round_robin)
from kpsketch.stream import ClusteringStream, StreamConfig

from conftest import two_blobs


CFG = StreamConfig(p=1.0, capacity=12, reducer="passthrough")


def centralized(pts, seed, k):
    st = ClusteringStream(pts.shape[1], CFG, seed)
    for i, x in enumerate(pts):
        st.ingest(x, point_id=i)
    return st.query_k_cost(k)


class TestSplits:
    def test_round_robin_partition_is_disjoint_cover(self):
        pts = np.arange(20.0).reshape(10, 2)
        parts = split_round_robin(pts, 3)
        ids = sorted(i for part in parts for i, _ in part)
        assert ids == list(range(10))

    def test_contiguous_partition_is_disjoint_cover(self):
        pts = np.arange(20.0).reshape(10, 2)
        parts = split_contiguous(pts, 4)
        ids = sorted(i for part in parts for i, _ in part)
        assert ids == list(range(10))


class TestProtocol:
    def test_single_machine_bit_identical_to_centralized(self):
        pts = two_blobs(np.random.default_rng(0), 10, 4, sep=9.0)
        want = centralized(pts, 31, 2)
        got, meter = run_protocol(split_round_robin(pts, 1), 2, 4, CFG, 31)
        assert got.estimate == want.estimate
        assert len(meter.per_machine) == 1

    @pytest.mark.parametrize("m", [2, 4])
    def test_multi_machine_bit_identical_with_passthrough(self, m):
        pts = two_blobs(np.random.default_rng(1), 12, 4, sep=9.0)
        want = centralized(pts, 32, 2)
        got, _ = run_protocol(split_round_robin(pts, m), 2, 4, CFG, 32)
        assert got.estimate == want.estimate

    def test_partition_shape_does_not_matter(self):
        pts = two_blobs(np.random.default_rng(2), 12, 4, sep=9.0)
        a, _ = run_protocol(split_round_robin(pts, 3), 2, 4, CFG, 33)
        b, _ = run_protocol(split_contiguous(pts, 3), 2, 4, CFG, 33)
        assert a.estimate == b.estimate

    def test_merged_state_entrywise_equal(self):
        pts = two_blobs(np.random.default_rng(3), 8, 4, sep=9.0)
        central = ClusteringStream(4, CFG, 34)
        for i, x in enumerate(pts):
            central.ingest(x, point_id=i)
        halves = split_contiguous(pts, 2)
        streams = []
        for part in halves:
            st = ClusteringStream(4, CFG, 34)
            for i, x in part:
                st.ingest(x, point_id=i)
            streams.append(st)
        merged = streams[0].merge_from(streams[1])
        for ec, em in zip(central.coreset(), merged.coreset()):
            assert ec.point_id == em.point_id
            assert ec.weight == em.weight
            np.testing.assert_array_equal(ec.dist_sketch, em.dist_sketch)
            for a, b in zip(ec.slots, em.slots):
                np.testing.assert_array_equal(a, b)

    def test_transcript_matches_frame_bytes_exactly(self):
        pts = two_blobs(np.random.default_rng(4), 8, 4, sep=9.0)
        parts = split_round_robin(pts, 2)
        _, meter = run_protocol(parts, 2, 4, CFG, 35)
        for mid, part in enumerate(parts):
            st = ClusteringStream(4, CFG, 35)
            for i, x in part:
                st.ingest(x, point_id=i)
            assert meter.per_machine[mid] == len(st.to_bytes())
        assert meter.total == sum(meter.per_machine.values())

    def test_frame_order_does_not_change_estimate(self):
        pts = two_blobs(np.random.default_rng(5), 8, 4, sep=9.0)
        parts = split_round_robin(pts, 4)
        a, _ = run_protocol(parts, 2, 4, CFG, 36)
        b, _ = run_protocol(parts[::-1], 2, 4, CFG, 36)
        assert a.estimate == b.estimate

    def test_blob_accuracy_and_transcript_budget(self):
        from kpsketch.oracle import ExactInstance, exact_k_cost

        ok = 0
        runs = 8
        budget = 80_000_000  # bytes across all machines at this scale
        for seed in range(runs):
            pts = two_blobs(np.random.default_rng(700 + seed), 12, 4, sep=10.0)
            res, meter = run_protocol(split_round_robin(pts, 4), 2, 4, CFG,
                                      800 + seed)
            truth = exact_k_cost(ExactInstance(pts, np.ones(12), 1.0), 2)
            ok += abs(res.estimate / truth - 1.0) <= 0.35
            assert meter.total <= budget
        assert ok >= runs - 1

    def test_seed_mismatch_is_protocol_violation(self):
        pts = two_blobs(np.random.default_rng(6), 8, 4, sep=9.0)
        rogue = ClusteringStream(4, CFG, 99)  # wrong public coin
        for i, x in enumerate(pts[:4]):
            rogue.ingest(x, point_id=i)
        frame = rogue.to_bytes()
        with pytest.raises(ValueError):
            ClusteringStream.from_bytes(frame, CFG, 37)

    def test_overlapping_ids_rejected_at_merge(self):
        a = ClusteringStream(4, CFG, 40)
        b = ClusteringStream(4, CFG, 40)
        a.ingest(np.ones(4), point_id=0)
        b.ingest(np.zeros(4), point_id=0)
        with pytest.raises(ValueError):
            a.merge_from(b)


class TestMeter:
    def test_accumulates(self):
        meter = TranscriptMeter()
        meter.record(0, 10)
        meter.record(0, 5)
        meter.record(1, 7)
        assert meter.per_machine == {0: 15, 1: 7}
        assert meter.total == 22
