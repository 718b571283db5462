"""Command-line interface: ``adapart {gen,permanent,bench,track}``.

Exit codes: 0 success, 2 usage error, 3 input or data error, 4 resource
guard (matrix too large for an exact method, rejection cap hit).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import statistics
import sys
import time

import numpy as np

from . import errors
from .bounds import soules_upper_bound
from .estimator import EstimateReport, estimate_fixed_bound, estimate_tightening
from .exact import permanent_ryser
from .matrixio import GeneratorSpec, generate, read_matrix_market, write_matrix_market
from .sampler import METHODS, PermutationSampler
from .tracking import Proposal, evaluate, run_filter, simulate, spring_model

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RESOURCE = 4

BENCH_FIELDS = (
    "kind",
    "n",
    "k",
    "method",
    "samples",
    "mean_seconds",
    "median_seconds",
    "mean_rejections",
    "mean_nesting_retries",
)
TRACK_FIELDS = ("step", "method", "N", "max_log_likelihood", "mse", "wall_time")

# linear values beyond this many nats are not printed
LINEAR_LIMIT = 30.0

log = logging.getLogger("adapart")


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _proposals(text: str) -> list[Proposal]:
    try:
        return [Proposal(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"proposals must be optimal or sequential, got {text!r}") from None


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _emit(name: str, log_value: float | None, out, linear: float | None = None) -> None:
    """Print ``log_<name>`` and, when it is representable, the linear value."""
    if log_value is None:
        print(f"log_{name}=NA", file=out)
        return
    print(f"log_{name}={log_value!r}", file=out)
    if abs(log_value) < LINEAR_LIMIT or log_value == -math.inf:
        value = linear if linear is not None else math.exp(log_value)
        print(f"{name}={value:.17g}", file=out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adapart", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v: progress, -vv: per-node trace")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random matrix")
    gen.add_argument("kind", choices=["uniform", "block-diag"])
    gen.add_argument("--n", type=_positive, required=True)
    gen.add_argument("--k", type=_positive, help="block size (block-diag only)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="Matrix Market output path")

    perm = sub.add_parser("permanent", help="permanent computations on a Matrix Market file")
    psub = perm.add_subparsers(dest="action", required=True)

    exact = psub.add_parser("exact", help="exact permanent by Ryser's formula")
    exact.add_argument("path")

    bound = psub.add_parser("bound", help="log Soules upper bound")
    bound.add_argument("path")

    sample = psub.add_parser("sample", help="exact samples from the permutation distribution")
    sample.add_argument("path")
    sample.add_argument("--count", type=_positive, default=1)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--method", choices=METHODS, default="adapart")
    sample.add_argument("--tighten", action="store_true")
    sample.add_argument("--max-rejections", type=int, default=None)

    est = psub.add_parser("estimate", help="permanent estimate with a confidence interval")
    est.add_argument("path")
    est.add_argument("--trials", type=_positive, default=None, help="number of accept/reject trials")
    est.add_argument(
        "--accepted",
        type=_positive,
        default=None,
        help="run until this many trials are accepted (implies --tighten)",
    )
    est.add_argument("--confidence", type=float, default=0.95)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--method", choices=METHODS, default="adapart")
    est.add_argument("--tighten", action="store_true", help="tightened bounds with a bootstrap interval")
    est.add_argument("--bootstrap-b", type=_positive, default=100_000)
    est.add_argument("--max-trials", type=_positive, default=None)
    est.add_argument("--threads", type=_positive, default=os.cpu_count() or 1)
    est.add_argument("--csv", default=None, help="also write the report as a one-row CSV file")

    bench = sub.add_parser("bench", help="benchmarks")
    bsub = bench.add_subparsers(dest="action", required=True)
    scaling = bsub.add_parser("scaling", help="per-draw time and rejections against n")
    scaling.add_argument("--sizes", type=_int_list, default=[10, 20, 40, 80])
    scaling.add_argument("--kind", choices=["uniform", "block-diag", "ones"], default="block-diag")
    scaling.add_argument("--k", type=_positive, default=10)
    scaling.add_argument("--samples", type=_positive, default=5)
    scaling.add_argument("--methods", default="adapart,fixed")
    scaling.add_argument("--seed", type=int, default=0)
    scaling.add_argument("--threads", type=_positive, default=os.cpu_count() or 1)
    scaling.add_argument("--out", required=True)

    track = sub.add_parser("track", help="multi-target tracking experiments")
    tsub = track.add_subparsers(dest="action", required=True)
    run = tsub.add_parser("run", help="run particle filters on a simulated scenario")
    run.add_argument("--targets", type=_positive, default=5)
    run.add_argument("--steps", type=_positive, default=20)
    run.add_argument("--particles", type=_int_list, default=[10, 100])
    run.add_argument("--proposal", type=_proposals, default=[Proposal.OPTIMAL, Proposal.SEQUENTIAL])
    run.add_argument("--estimate-trials", type=_positive, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True)
    return parser


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen(args, out) -> int:
    if args.kind == "block-diag" and args.k is None:
        raise UsageError("block-diag needs --k")
    try:
        spec = GeneratorSpec(args.kind, args.n, args.seed, args.k if args.kind == "block-diag" else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_matrix_market(generate(spec), args.out)
    print(f"wrote {args.out}", file=out)
    return EXIT_OK


def _cmd_exact(args, out) -> int:
    m = read_matrix_market(args.path)
    value = permanent_ryser(m)
    _emit("permanent", math.log(value) if value > 0 else -math.inf, out, value)
    return EXIT_OK


def _cmd_bound(args, out) -> int:
    m = read_matrix_market(args.path)
    n = m.shape[0]
    _emit("bound", soules_upper_bound(m, range(n), range(n)).log_value, out)
    return EXIT_OK


def _cmd_sample(args, out) -> int:
    m = read_matrix_market(args.path)
    sampler = PermutationSampler(m, args.method, tighten=args.tighten)
    rng = np.random.default_rng(args.seed)
    print("# one permutation per line: row index (0-based) assigned to each column", file=out)
    rejections = []
    retries = 0
    for _ in range(args.count):
        draw = sampler.draw(rng, args.max_rejections)
        print(" ".join(map(str, draw.permutation)), file=out)
        rejections.append(draw.rejections)
        retries += draw.nesting_retries
    print(f"draws={args.count}", file=out)
    print(f"mean_rejections={statistics.fmean(rejections)!r}", file=out)
    print(f"total_rejections={sum(rejections)}", file=out)
    print(f"nesting_retries={retries}", file=out)
    print(f"initial_root_log_ub={sampler.root_raw_log_ub!r}", file=out)
    print(f"final_root_log_ub={sampler.root_log_ub!r}", file=out)
    return EXIT_OK


def _cmd_estimate(args, out) -> int:
    if not 0 < args.confidence < 1:
        raise UsageError("--confidence must lie in (0, 1)")
    if args.trials is not None and args.accepted is not None:
        raise UsageError("give at most one of --trials and --accepted")
    alpha = 1 - args.confidence
    m = read_matrix_market(args.path)
    tighten = args.tighten or args.accepted is not None
    if tighten:
        trials = args.trials if args.accepted is None else None
        if trials is None and args.accepted is None:
            trials = 1000
        try:
            report = estimate_tightening(
                m,
                trials,
                alpha,
                args.seed,
                args.bootstrap_b,
                accepted=args.accepted,
                method=args.method,
                max_trials=args.max_trials,
            )
        except errors.DegenerateBootstrap as exc:
            print(f"# {exc}; only an upper bound is available", file=out)
            _emit("upper", exc.log_upper, out)
            return EXIT_OK
    else:
        trials = args.trials if args.trials is not None else 1000
        report = estimate_fixed_bound(m, trials, alpha, args.seed, args.method, args.threads)
    out.write(report.to_record())
    if report.log_point_estimate is not None and abs(report.log_point_estimate) < LINEAR_LIMIT:
        print(f"point_estimate={math.exp(report.log_point_estimate):.17g}", file=out)
    for name in ("lower", "upper"):
        value = getattr(report, f"log_{name}")
        if abs(value) < LINEAR_LIMIT or value == -math.inf:
            print(f"{name}={math.exp(value):.17g}", file=out)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(EstimateReport.csv_header() + "\n" + report.to_csv_row() + "\n")
    return EXIT_OK


def _bench_matrix(kind: str, n: int, k: int, seed: int) -> np.ndarray:
    if kind == "ones":
        return np.ones((n, n))
    spec = GeneratorSpec(kind, n, seed, min(k, n) if kind == "block-diag" else None)
    return generate(spec)


def bench_scaling(sizes, kind, k, samples, seed, methods=("adapart", "fixed")) -> list[dict]:
    """Time independent draws (fresh sampler each) for every size and method.

    Draws run one after another on purpose: concurrent timing runs would
    contend for cores and distort the wall times.
    """
    rows = []
    for n in sizes:
        m = _bench_matrix(kind, n, k, seed)
        for method in methods:
            rng = np.random.default_rng([seed, n])
            seconds, rejections, retries = [], [], []
            for _ in range(samples):
                t0 = time.perf_counter()
                draw = PermutationSampler(m, method).draw(rng)
                seconds.append(time.perf_counter() - t0)
                rejections.append(draw.rejections)
                retries.append(draw.nesting_retries)
            rows.append(
                {
                    "kind": kind,
                    "n": n,
                    "k": k if kind == "block-diag" else "",
                    "method": method,
                    "samples": samples,
                    "mean_seconds": statistics.fmean(seconds),
                    "median_seconds": statistics.median(seconds),
                    "mean_rejections": statistics.fmean(rejections),
                    "mean_nesting_retries": statistics.fmean(retries),
                }
            )
            log.info("bench n=%d method=%s mean=%.4fs", n, method, rows[-1]["mean_seconds"])
    return rows


def _cmd_bench(args, out) -> int:
    methods = [t.strip() for t in args.methods.split(",") if t.strip()]
    bad = [t for t in methods if t not in METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}")
    rows = bench_scaling(args.sizes, args.kind, args.k, args.samples, args.seed, methods)
    _write_csv(args.out, BENCH_FIELDS, rows)
    for row in rows:
        print(
            f"n={row['n']} method={row['method']} mean_seconds={row['mean_seconds']:.6f} "
            f"mean_rejections={row['mean_rejections']:.3f}",
            file=out,
        )
    return EXIT_OK


def track_run(targets, steps, particles, proposals, seed, estimate_trials=10) -> list[dict]:
    """Filter one simulated scenario with every (proposal, N) configuration."""
    model = spring_model(targets)
    scenario = simulate(model, targets, steps, seed)
    rows = []
    for pi, proposal in enumerate(proposals):
        for N in particles:
            rng = np.random.default_rng([seed, pi, N])
            t0 = time.perf_counter()

            def record(t, ps, proposal=proposal, N=N, t0=t0):
                score = evaluate(scenario, ps, model)
                rows.append(
                    {
                        "step": t + 1,
                        "method": proposal.value,
                        "N": N,
                        "max_log_likelihood": score["max_log_likelihood"],
                        "mse": score["mse"],
                        "wall_time": time.perf_counter() - t0,
                    }
                )

            run_filter(scenario, model, N, proposal, estimate_trials, rng, record)
            log.info("track %s N=%d done", proposal.value, N)
    return rows


def _cmd_track(args, out) -> int:
    rows = track_run(args.targets, args.steps, args.particles, args.proposal, args.seed, args.estimate_trials)
    _write_csv(args.out, TRACK_FIELDS, rows)
    for row in rows:
        if row["step"] == args.steps:
            print(
                f"method={row['method']} N={row['N']} max_log_likelihood={row['max_log_likelihood']:.4f} "
                f"mse={row['mse']:.6f}",
                file=out,
            )
    return EXIT_OK


def _write_csv(path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


_COMMANDS = {
    ("gen", None): _cmd_gen,
    ("permanent", "exact"): _cmd_exact,
    ("permanent", "bound"): _cmd_bound,
    ("permanent", "sample"): _cmd_sample,
    ("permanent", "estimate"): _cmd_estimate,
    ("bench", "scaling"): _cmd_bench,
    ("track", "run"): _cmd_track,
}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(name)s: %(message)s", stream=sys.stderr)
    handler = _COMMANDS[(args.command, getattr(args, "action", None))]
    try:
        return handler(args, out)
    except (UsageError, errors.InvalidArgs) as exc:
        print(f"adapart: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (errors.DimensionTooLarge, errors.RejectionCapExceeded) as exc:
        print(f"adapart: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (errors.AdaPartError, ValueError, OSError) as exc:
        where = getattr(args, "path", None)
        prefix = f"{where}: " if where else ""
        print(f"adapart: {prefix}{exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
