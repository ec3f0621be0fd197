"""Simulator for the public-coin distributed protocol.

Machines share one seed and config, each folds its share of the points
into a local streaming state, serializes the state and "sends" it over an
in-process frame queue. The coordinator verifies the shared coin on every
frame, merges the coresets pairwise (one merge-and-reduce step per pair),
and answers the clustering-cost query. Communication is metered as the
exact byte length of each frame; transport is deliberately not modeled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import SeedCtx
from .stream import ClusteringStream, KCostResult, StreamConfig


class ProtocolError(RuntimeError):
    """A machine violated the protocol (wrong seed or config)."""


@dataclass
class TranscriptMeter:
    """Bytes sent per machine; nondecreasing, total is the exact sum."""

    per_machine: dict[int, int] = field(default_factory=dict)

    def record(self, machine_id: int, n_bytes: int):
        self.per_machine[machine_id] = self.per_machine.get(machine_id, 0) + n_bytes

    @property
    def total(self) -> int:
        return sum(self.per_machine.values())


@dataclass
class Machine:
    machine_id: int
    stream: ClusteringStream

    def send_frame(self) -> bytes:
        return self.stream.to_bytes()


def run_protocol(partitioned_points, k: int, d: int, config: StreamConfig,
                 seed: int | SeedCtx) -> tuple[KCostResult, TranscriptMeter]:
    """Execute the protocol over an explicit partition of the points.

    partitioned_points is a list with one item per machine, each an
    iterable of (global_index, point) pairs; global indices must be
    disjoint across machines (they fix the slot order of the merged
    coreset, so every split of the same stream merges to the same state).
    """
    ctx = seed if isinstance(seed, SeedCtx) else SeedCtx(seed)
    machines = []
    for mid, part in enumerate(partitioned_points):
        stream = ClusteringStream(d, config, ctx)
        for idx, x in part:
            stream.ingest(np.asarray(x, dtype=np.float64), point_id=int(idx))
        machines.append(Machine(mid, stream))

    meter = TranscriptMeter()
    frames = []
    for m in machines:
        frame = m.send_frame()
        meter.record(m.machine_id, len(frame))
        frames.append(frame)

    merged = None
    for frame in frames:
        try:
            state = ClusteringStream.from_bytes(frame, config, ctx)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        merged = state if merged is None else merged.merge_from(state)
    if merged is None:
        raise ValueError("no machines")
    return merged.query_k_cost(k), meter


def split_round_robin(points: np.ndarray, m: int):
    """[(global_index, point)] per machine, dealt round-robin."""
    return [[(i, points[i]) for i in range(mid, len(points), m)] for mid in range(m)]


def split_contiguous(points: np.ndarray, m: int):
    bounds = np.linspace(0, len(points), m + 1).astype(int)
    return [[(i, points[i]) for i in range(bounds[j], bounds[j + 1])] for j in range(m)]
