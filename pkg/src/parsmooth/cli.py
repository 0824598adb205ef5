"""Command-line harness: ``simulate``, ``run`` and ``bench``.

Exit codes: 0 on success, 1 on a numerical failure, 2 on bad usage.
"""
import argparse
import csv
import sys
import time

import numpy as np

from .gaussmath import SingularMatrixError
from .iterated import IterationConfig, IterationError, run_iterated
from .model import (
    coordinated_turn_model,
    read_trajectory_csv,
    simulate,
    write_trajectory_csv,
)
from .scan import ScanPlan, default_workers, parallel_combine_count

DEFAULT_GRID = tuple(int(v) for v in np.unique(np.round(np.geomspace(10, 15000, 12))))
BENCH_HEADER = ("n", "method", "engine", "mean_s", "std_s", "combine_calls")
ENGINE_NAMES = {"seq": "sequential", "par": "parallel"}


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _grid(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    if not values or min(values) < 1 or any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError("grid must be ascending positive integers")
    return values


def _choices_list(allowed):
    def parse(text):
        items = [v.strip() for v in text.split(",") if v.strip()]
        bad = [v for v in items if v not in allowed]
        if not items or bad:
            raise argparse.ArgumentTypeError(f"choose from {','.join(allowed)}")
        return items

    return parse


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--dt", type=float, default=0.01, help="sampling interval [s]")
    g.add_argument("--q1", type=float, default=0.1, help="velocity noise spectral density")
    g.add_argument("--q2", type=float, default=0.01, help="turn-rate noise spectral density")
    g.add_argument("--bearing-std", type=float, default=0.05, help="bearing noise std [rad]")
    g.add_argument("--p0-scale", type=float, default=0.1, help="prior covariance = scale * I")


def _model_from(args, noiseless=False):
    if noiseless:
        return coordinated_turn_model(dt=args.dt, q1=0.0, q2=0.0, bearing_std=0.0, prior_cov_scale=0.0)
    return coordinated_turn_model(
        dt=args.dt, q1=args.q1, q2=args.q2, bearing_std=args.bearing_std,
        prior_cov_scale=args.p0_scale,
    )


def _plan(args):
    workers = args.workers if args.workers is not None else default_workers()
    return ScanPlan("parallel", worker_budget=workers, count_combines=True)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="parsmooth",
        description="Parallel-in-time iterated Kalman smoothers on a bearings-only tracking model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a coordinated-turn trajectory")
    p.add_argument("--n", type=_positive_int, required=True, help="number of time steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.add_argument("--noiseless", action="store_true", help="zero process, measurement and prior noise")
    _add_model_flags(p)

    p = sub.add_parser("run", help="run an iterated smoother on a trajectory CSV")
    p.add_argument("--input", "--in", dest="input", required=True, help="trajectory CSV path")
    p.add_argument("--method", choices=("ieks", "ipls"), default="ieks")
    p.add_argument("--engine", choices=("seq", "par"), default="par")
    p.add_argument("--iterations", type=_positive_int, default=10)
    p.add_argument("--early-stop", type=float, default=None, help="max-abs mean change tolerance")
    p.add_argument("--workers", type=_positive_int, default=None)
    p.add_argument("--out", required=True, help="results CSV path")
    _add_model_flags(p)

    p = sub.add_parser("bench", help="time methods and engines over a grid of n")
    p.add_argument("--grid", type=_grid, default=list(DEFAULT_GRID), help="comma-separated ascending n values")
    p.add_argument("--methods", type=_choices_list(("ieks", "ipls")), default=["ieks", "ipls"])
    p.add_argument("--engines", type=_choices_list(("seq", "par")), default=["seq", "par"])
    p.add_argument("--iterations", type=_positive_int, default=10)
    p.add_argument("--repeats", type=_positive_int, default=3)
    p.add_argument("--warmups", type=_nonneg_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=None)
    p.add_argument("--out", required=True, help="runtime CSV path")
    _add_model_flags(p)
    return parser


def position_rmse(means, states):
    """RMSE over the (px, py) components."""
    err = np.asarray(means)[:, :2] - np.asarray(states)[:, :2]
    return float(np.sqrt(np.mean(np.sum(err**2, axis=1))))


def cmd_simulate(args):
    model = _model_from(args, noiseless=args.noiseless)
    traj = simulate(model, args.n, args.seed)
    write_trajectory_csv(args.out, traj)
    print(f"seed={args.seed} n={args.n} out={args.out}")
    return 0


def cmd_run(args):
    traj = read_trajectory_csv(args.input)
    model = _model_from(args)
    config = IterationConfig(args.method, args.engine, args.iterations, args.early_stop, _plan(args))
    start = time.perf_counter()
    trace = run_iterated(model, traj.measurements, config)
    elapsed = time.perf_counter() - start
    if trace.diverged:
        it, step = trace.diverged_at
        print(f"numerical failure: non-finite estimates (iteration {it}, step {step})", file=sys.stderr)
        return 1
    smoothed = trace.smoothed
    names = ("px", "py", "vx", "vy", "omega")
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("k",) + names + tuple(f"var_{v}" for v in names))
        for k in range(1, len(smoothed)):
            row = list(smoothed.mean[k]) + list(np.diag(smoothed.cov[k]))
            writer.writerow([k] + [repr(float(v)) for v in row])
    summary = (
        f"method={config.method} engine={config.engine} iterations={trace.iterations} "
        f"time_s={elapsed:.4f}"
    )
    if traj.states is not None:
        rmse = position_rmse(smoothed.mean[1:], traj.states[1:])
        frmse = position_rmse(trace.filtered.mean, traj.states[1:])
        summary += f" rmse_pos={rmse:.10g} filtered_rmse_pos={frmse:.10g}"
    print(summary)
    return 0


def expected_combine_calls(n, iterations):
    """Scan combines of one parallel-engine run: filter over ``n`` elements
    plus smoother over ``n + 1`` (prior included), per iteration."""
    return iterations * (parallel_combine_count(n) + parallel_combine_count(n + 1))


def cmd_bench(args):
    model = _model_from(args)
    rows = []
    for n in args.grid:
        traj = simulate(model, n, args.seed)
        for method in args.methods:
            for engine in args.engines:
                plan = _plan(args)
                config = IterationConfig(method, ENGINE_NAMES[engine], args.iterations, None, plan)
                for _ in range(args.warmups):
                    run_iterated(model, traj.measurements, config)
                times = []
                for _ in range(args.repeats):
                    plan.reset()
                    start = time.perf_counter()
                    run_iterated(model, traj.measurements, config)
                    times.append(time.perf_counter() - start)
                calls = plan.combine_calls if config.engine == "parallel" else 0
                rows.append((n, method, engine, float(np.mean(times)), float(np.std(times)), calls))
                print(f"n={n} method={method} engine={engine} mean_s={rows[-1][3]:.4f}", flush=True)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_HEADER)
        for n, method, engine, mean_s, std_s, calls in rows:
            writer.writerow((n, method, engine, f"{mean_s:.6g}", f"{std_s:.6g}", calls))
    return 0


COMMANDS = {"simulate": cmd_simulate, "run": cmd_run, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (IterationError, SingularMatrixError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
