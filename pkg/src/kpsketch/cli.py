"""Command-line front end.

Subcommands: gen (synthetic instances), estimate (median / kcost / medoid
paths), distsim (distributed protocol simulation), oracle (exact
reference values). Every result is a single JSON object per line carrying
the seed, a config hash, the estimate and the wall time, so runs are
reproducible and diffable. All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time

import numpy as np

from . import dataio
from .distsim import run_protocol, split_contiguous, split_round_robin
from .mediancost import MedianSketchConfig, estimate_median_cost
from .medoid import MedoidSketch, default_width
from .oracle import (ExactInstance, exact_k_cost, exact_median_cost,
                     exact_medoid_cost, exact_sampling_dist, uniform_instance,
                     verify_ratio_bounds)
from .rng import SeedCtx, TAG_GEN, uniform_vector, stable_vector
from .stream import ClusteringStream, KRangeError, StreamConfig


def _config_hash(payload: dict) -> str:
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _emit(record: dict, output: str | None):
    line = json.dumps(record, sort_keys=True)
    if output:
        with open(output, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
    else:
        print(line)


def _normal_matrix(ctx: SeedCtx, n: int, d: int) -> np.ndarray:
    flat = stable_vector(ctx, 2.0, n * d) / math.sqrt(2.0)
    return flat.reshape(n, d)


def cmd_gen(args) -> int:
    if not args.output:
        raise SystemExit("gen requires --output")
    ctx = SeedCtx(args.seed).child(TAG_GEN)
    if args.kind == "blobs":
        per = args.n // args.blobs
        extra = args.n - per * args.blobs
        rows = []
        for b in range(args.blobs):
            cnt = per + (1 if b < extra else 0)
            center = np.full(args.d, b * args.sep)
            noise = _normal_matrix(ctx.child(b), cnt, args.d) * args.sigma
            rows.append(center + noise)
        pts = np.vstack(rows)
    elif args.kind == "uniform":
        flat = uniform_vector(ctx, args.n * args.d)
        pts = flat.reshape(args.n, args.d) * args.scale
    elif args.kind == "adversarial":
        # indicator geometry stress set: singletons e_a vs pairs e_a + e_b
        half = args.n // 2
        u = uniform_vector(ctx, 2 * args.n)
        first = (u[:args.n] * args.d).astype(int) % args.d
        second = (u[args.n:] * (args.d - 1)).astype(int) % max(1, args.d - 1)
        pts = np.zeros((args.n, args.d))
        for i in range(args.n):
            a = int(first[i])
            pts[i, a] = 1.0
            if i >= half and args.d > 1:
                b = int(second[i])
                if b >= a:
                    b += 1
                pts[i, b % args.d] = 1.0
    else:
        raise ValueError(f"unknown kind {args.kind}")
    dataio.write_points(args.output, pts)
    _emit({"command": "gen", "kind": args.kind, "n": int(pts.shape[0]),
           "d": int(pts.shape[1]), "seed": args.seed, "path": args.output,
           "config_hash": _config_hash(vars(args) | {"func": None})}, None)
    return 0


def _stream_config(args) -> StreamConfig:
    cluster = None
    if args.cluster_eps is not None:
        cluster = MedianSketchConfig(p=args.p, eps=args.cluster_eps,
                                     delta=args.cluster_delta,
                                     t_samples=args.cluster_samples,
                                     reps=args.cluster_reps,
                                     z_width=args.cluster_z,
                                     inner_width=args.cluster_inner,
                                     cm_rows=args.cluster_rows,
                                     cm_buckets=args.cluster_buckets,
                                     grid_eps=args.cluster_grid_eps)
    return StreamConfig(p=args.p, capacity=args.capacity, reducer=args.reducer,
                        cluster=cluster)


def _result_base(args, mode: str) -> dict:
    payload = {k: v for k, v in vars(args).items() if k not in ("func", "output")}
    return {"command": mode, "seed": args.seed, "config_hash": _config_hash(payload)}


def cmd_estimate(args) -> int:
    pts = dataio.read_points(args.input)
    rec = _result_base(args, "estimate")
    rec["mode"] = args.mode
    t0 = time.perf_counter()
    if args.mode == "median":
        cfg = MedianSketchConfig(p=args.p, eps=args.eps, delta=args.delta)
        est = estimate_median_cost(pts, cfg, seed=args.seed)
    elif args.mode == "kcost":
        stream = ClusteringStream(pts.shape[1], _stream_config(args), args.seed)
        for x in pts:
            stream.ingest(x)
        try:
            res = stream.query_k_cost(args.k)
        except KRangeError as exc:
            print(str(exc), file=sys.stderr)
            return 2
        est = res.estimate
        rec["k"] = res.k
        rec["partition_count"] = res.partition_count
        rec["peak_sketch_floats"] = stream.peak_float_count
    elif args.mode == "medoid":
        # two passes over the input file, as the protocol requires
        first = dataio.read_points(args.input)
        sk = MedoidSketch(first.shape[1], args.p, args.eps, args.seed,
                          width=default_width(args.eps, n_hint=max(2, first.shape[0])))
        for x in first:
            sk.pass1_ingest(x)
        sk.seal_pass1()
        second = dataio.read_points(args.input)
        for x in second:
            sk.pass2_score(x)
        est = sk.result()
    else:
        raise ValueError(f"unknown mode {args.mode}")
    rec["estimate"] = float(est)
    rec["wall_time_s"] = time.perf_counter() - t0
    if args.compare_oracle:
        if args.mode == "median":
            truth = exact_median_cost(uniform_instance(pts, args.p))
        elif args.mode == "kcost":
            # streamed weights are 1 per point, so compare unweighted costs
            truth = exact_k_cost(ExactInstance(pts, np.ones(pts.shape[0]), args.p), args.k)
        else:
            truth = exact_medoid_cost(uniform_instance(pts, args.p))
        rec["oracle"] = float(truth)
        rec["relative_error"] = float(est / truth - 1.0) if truth else None
    _emit(rec, args.output)
    return 0


def cmd_distsim(args) -> int:
    pts = dataio.read_points(args.input)
    if args.partition == "round-robin":
        parts = split_round_robin(pts, args.machines)
    elif args.partition == "contiguous":
        parts = split_contiguous(pts, args.machines)
    elif args.partition == "file":
        if not args.partition_file:
            raise ValueError("--partition file requires --partition-file")
        owner = np.loadtxt(args.partition_file, dtype=int)
        parts = [[(i, pts[i]) for i in range(len(pts)) if owner[i] == mid]
                 for mid in range(args.machines)]
    else:
        raise ValueError(f"unknown partition {args.partition}")
    rec = _result_base(args, "distsim")
    t0 = time.perf_counter()
    try:
        result, meter = run_protocol(parts, args.k, pts.shape[1],
                                     _stream_config(args), args.seed)
    except KRangeError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    rec.update({
        "estimate": result.estimate,
        "k": result.k,
        "partition_count": result.partition_count,
        "machines": args.machines,
        "transcript_bytes": {str(m): b for m, b in sorted(meter.per_machine.items())},
        "transcript_total": meter.total,
        "wall_time_s": time.perf_counter() - t0,
    })
    _emit(rec, args.output)
    return 0


def cmd_oracle(args) -> int:
    pts = dataio.read_points(args.input)
    inst = uniform_instance(pts, args.p)
    rec = _result_base(args, "oracle")
    rec["mode"] = args.mode
    t0 = time.perf_counter()
    if args.mode == "median":
        rec["value"] = exact_median_cost(inst)
    elif args.mode == "kcost":
        try:
            rec["value"] = exact_k_cost(inst, args.k)
            rec["k"] = args.k
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return 2
    elif args.mode == "medoid":
        rec["value"] = exact_medoid_cost(inst)
    elif args.mode == "sampling":
        rec["value"] = exact_sampling_dist(inst).tolist()
    elif args.mode == "ratio":
        rec["value"] = bool(verify_ratio_bounds(inst))
    else:
        raise ValueError(f"unknown mode {args.mode}")
    rec["wall_time_s"] = time.perf_counter() - t0
    _emit(rec, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kpsketch",
        description="streaming sketches for (k,p)-clustering cost estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=float, default=1.0, help="norm exponent in [1,2]")
    common.add_argument("--eps", type=float, default=0.25)
    common.add_argument("--delta", type=float, default=0.2)
    common.add_argument("--k", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--capacity", type=int, default=12)
    common.add_argument("--reducer", choices=["passthrough", "sensitivity"],
                        default="sensitivity")
    common.add_argument("--output", default=None, help="append JSON lines here")
    common.add_argument("--cluster-eps", type=float, default=None,
                        help="override the per-cluster estimator accuracy")
    common.add_argument("--cluster-delta", type=float, default=0.7)
    common.add_argument("--cluster-samples", type=int, default=None)
    common.add_argument("--cluster-reps", type=int, default=None)
    common.add_argument("--cluster-z", type=int, default=None)
    common.add_argument("--cluster-inner", type=int, default=None)
    common.add_argument("--cluster-rows", type=int, default=None)
    common.add_argument("--cluster-buckets", type=int, default=None)
    common.add_argument("--cluster-grid-eps", type=float, default=None)

    g = sub.add_parser("gen", parents=[common], help="generate synthetic instances")
    g.add_argument("--kind", choices=["blobs", "uniform", "adversarial"], default="blobs")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--blobs", type=int, default=2)
    g.add_argument("--sep", type=float, default=10.0)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--scale", type=float, default=1.0)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("estimate", parents=[common], help="sketch-based estimates")
    e.add_argument("--mode", choices=["median", "kcost", "medoid"], default="median")
    e.add_argument("--input", required=True)
    e.add_argument("--compare-oracle", action="store_true")
    e.set_defaults(func=cmd_estimate)

    ds = sub.add_parser("distsim", parents=[common], help="distributed protocol simulation")
    ds.add_argument("--input", required=True)
    ds.add_argument("--machines", type=int, default=2)
    ds.add_argument("--partition", choices=["round-robin", "contiguous", "file"],
                    default="round-robin")
    ds.add_argument("--partition-file", default=None)
    ds.set_defaults(func=cmd_distsim)

    o = sub.add_parser("oracle", parents=[common], help="exact reference values")
    o.add_argument("--mode", choices=["median", "kcost", "medoid", "sampling", "ratio"],
                   default="median")
    o.add_argument("--input", required=True)
    o.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
