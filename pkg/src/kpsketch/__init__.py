"""Streaming linear sketches for (k,p)-clustering cost estimation in l_p.

The package estimates, from poly-logarithmic-size linear state, the cost
of optimally clustering n points in l_p^d (p in [1,2]) into k clusters:
a median-cost sketch built on p-stable projections, precision sampling
and Count-Min compression; an insertion-only streaming driver over
merge-and-reduce coresets; a public-coin distributed protocol simulator;
a two-pass medoid estimator; and brute-force oracles to validate all of
it at desk scale.
"""

from .backend import BACKEND
from .rng import SeedCtx, StableParams, median_abs_stable, prf_unit, sample_exponential, sample_p_stable
from .sketch import LpSketchConfig, SketchVector, apply_sketch, estimate_norm, estimate_shifted_norm, minimize_center
from .countmin import CountMinTable, NoisyBlock, buckets_for, compress, recover, rows_for
from .sampler import EventEReport, ExponentialScaling, argmax_scaled, check_event_e, draw_scaling
from .mediancost import (CenteredInput, MedianCostSketch, MedianCostTriple,
                         MedianSketchConfig, center, estimate_median_cost,
                         estimate_triple, estimate_Z, minmax)
from .stream import (ClusteringStream, CoresetEntry, KCostResult, StreamConfig,
                     passthrough_reducer, sensitivity_reducer, uniform_reducer)
from .medoid import MedoidSketch, estimate_medoid_cost
from .distsim import Machine, ProtocolError, TranscriptMeter, run_protocol
from .oracle import (ExactInstance, exact_k_cost, exact_median_cost,
                     exact_medoid_cost, exact_sampling_dist, uniform_instance,
                     verify_ratio_bounds)

__version__ = "0.1.0"
