"""Exit criteria for the library, one test per criterion.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion
is printed in the terminal summary.
"""
import csv
import math
import time

import numpy as np
import pytest

from parsmooth.cli import main as cli_main
from parsmooth.cli import position_rmse
from parsmooth.iterated import IterationConfig, run_iterated
from parsmooth.linearize import NominalTrajectory, slr_linearize_fn, taylor_linearize
from parsmooth.model import coordinated_turn_model, linear_gaussian_model, simulate
from parsmooth.parfilter import combine_filter, parallel_filter
from parsmooth.parsmoother import combine_smoother, parallel_smooth
from parsmooth.scan import ScanPlan, inclusive_scan, parallel_combine_count
from parsmooth.sequential import Gaussian, kf_forward, rts_backward

from oracles import (
    dense_filter,
    dense_marginals,
    random_filter_element,
    random_linear_problem,
    random_smoother_element,
    random_spd,
)

RTOL, ATOL = 1e-8, 1e-9  # scan-tier tolerance policy
DENSE_TOL = 1e-8


def _rel_close(a, b, rtol, atol=ATOL):
    return bool(np.all(np.abs(a - b) <= atol + rtol * np.abs(b)))


def test_oracle_chain(record):
    start = time.perf_counter()
    rng = np.random.default_rng(20240101)
    dense_err, scan_ok = 0.0, True
    for i in range(50):
        nx, ny = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        # dense tier: small n against full joint-Gaussian conditioning
        prob = random_linear_problem(rng, nx, ny, int(rng.integers(2, 21)))
        args = (prob["lin"], prob["ys"], prob["m0"], prob["P0"], prob["Q"], prob["R"])
        prior = Gaussian(prob["m0"], prob["P0"])
        seq_f = kf_forward(*args)
        seq_s = rts_backward(seq_f, prob["lin"], prob["Q"], prior=prior)
        par_f = parallel_filter(*args)
        par_s = parallel_smooth(par_f, prob["lin"], prob["Q"], prior=prior)
        fm, fP = dense_filter(prob)
        sm, sP = dense_marginals(prob)
        for got, ref in ((seq_f.mean, fm), (seq_f.cov, fP), (par_f.mean, fm), (par_f.cov, fP),
                         (seq_s.mean, sm), (seq_s.cov, sP), (par_s.mean, sm), (par_s.cov, sP)):
            dense_err = max(dense_err, float(np.max(np.abs(got - ref))))
        # scan tier: long sequences, sequential recursions vs scans
        n_long = 1000 if i % 10 == 0 else int(rng.integers(50, 300))
        prob = random_linear_problem(rng, nx, ny, n_long)
        args = (prob["lin"], prob["ys"], prob["m0"], prob["P0"], prob["Q"], prob["R"])
        prior = Gaussian(prob["m0"], prob["P0"])
        seq_f = kf_forward(*args)
        par_f = parallel_filter(*args)
        seq_s = rts_backward(seq_f, prob["lin"], prob["Q"], prior=prior)
        par_s = parallel_smooth(par_f, prob["lin"], prob["Q"], prior=prior)
        for got, ref in ((par_f.mean, seq_f.mean), (par_f.cov, seq_f.cov),
                         (par_s.mean, seq_s.mean), (par_s.cov, seq_s.cov)):
            scan_ok &= _rel_close(got, ref, RTOL)
    elapsed = time.perf_counter() - start
    passed = dense_err < DENSE_TOL and scan_ok and elapsed < 60
    record(1, passed, f"dense max-abs err {dense_err:.2e} (<1e-8), scan tier rtol 1e-8 ok={scan_ok}, {elapsed:.1f}s (<60s)")
    assert dense_err < DENSE_TOL
    assert scan_ok
    assert elapsed < 60


def test_associativity(record):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    failures = 0
    for _ in range(1000):
        dim = int(rng.integers(1, 6))
        a, b, c = (random_filter_element(rng, dim) for _ in range(3))
        left, right = combine_filter(combine_filter(a, b), c), combine_filter(a, combine_filter(b, c))
        failures += not all(_rel_close(x, y, RTOL) for x, y in zip(left, right))
        a, b, c = (random_smoother_element(rng, dim) for _ in range(3))
        left, right = combine_smoother(combine_smoother(a, b), c), combine_smoother(a, combine_smoother(b, c))
        failures += not all(_rel_close(x, y, RTOL) for x, y in zip(left, right))
    elapsed = time.perf_counter() - start
    record(2, failures == 0 and elapsed < 10, f"{failures} failing triples of 2x1000, {elapsed:.1f}s (<10s)")
    assert failures == 0
    assert elapsed < 10


def test_scan_work_bound(record):
    details, ok = [], True
    for n in (2**4, 2**7, 2**10):
        plan = ScanPlan("parallel", count_combines=True)
        inclusive_scan(list(range(n)), lambda a, b: a + b, plan)
        closed = 2 * n - int(math.log2(n)) - 2
        ok &= plan.combine_calls == closed == parallel_combine_count(n)
        details.append(f"n={n}: {plan.combine_calls}/{closed}")
    record(3, ok, "counted/closed-form " + ", ".join(details))
    assert ok


def test_slr_affine_exactness(record):
    rng = np.random.default_rng(3)
    worst_F, worst_Lam = 0.0, 0.0
    for _ in range(20):
        nx, nz = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        A, b = rng.standard_normal((nz, nx)), rng.standard_normal(nz)
        F, c, Lam = slr_linearize_fn(lambda x: x @ A.T + b, rng.standard_normal(nx), random_spd(rng, nx))
        worst_F = max(worst_F, np.max(np.abs(F - A)), np.max(np.abs(c - b)))
        worst_Lam = max(worst_Lam, np.max(np.abs(Lam)))
    passed = worst_F < 1e-10 and worst_Lam < 1e-10
    record(4, passed, f"max |(F,c)-(A,b)| {worst_F:.1e}, max |Lam| {worst_Lam:.1e} (<1e-10)")
    assert passed


def test_linear_fixed_point(record):
    rng = np.random.default_rng(5)
    nx, ny, n = 4, 2, 60
    F = 0.95 * np.linalg.qr(rng.standard_normal((nx, nx)))[0]
    model = linear_gaussian_model(
        F, 0.1 * rng.standard_normal(nx), rng.standard_normal((ny, nx)), rng.standard_normal(ny),
        random_spd(rng, nx, 0.1), random_spd(rng, ny, 0.2), rng.standard_normal(nx), random_spd(rng, nx),
    )
    ys = simulate(model, n, 1).measurements
    # linearisation of an affine model is exact at any nominal point
    lin = taylor_linearize(model, NominalTrajectory(np.zeros((n + 1, nx))))
    filt = kf_forward(lin, ys, model.prior_mean, model.prior_cov, model.process_noise_cov, model.measurement_noise_cov)
    exact = rts_backward(filt, lin, model.process_noise_cov, prior=Gaussian(model.prior_mean, model.prior_cov))
    worst_change, worst_exact = 0.0, 0.0
    for method in ("ieks", "ipls"):
        for engine in ("sequential", "parallel"):
            trace = run_iterated(model, ys, IterationConfig(method, engine, 3))
            worst_change = max(worst_change, max(trace.mean_changes()))
            for nominal in trace.nominals[1:]:
                worst_exact = max(worst_exact, np.max(np.abs(nominal.mean - exact.mean)))
    passed = worst_change < 1e-10 and worst_exact < 1e-10
    record(5, passed, f"max change across iterations {worst_change:.1e}, max diff to KF/RTS {worst_exact:.1e} (<1e-10)")
    assert passed


def test_engine_equivalence_ct(record):
    start = time.perf_counter()
    model = coordinated_turn_model()
    ys = simulate(model, 1000, 0).measurements
    worst = {}
    for method in ("ieks", "ipls"):
        seq = run_iterated(model, ys, IterationConfig(method, "sequential", 10))
        par = run_iterated(model, ys, IterationConfig(method, "parallel", 10))
        assert seq.iterations == par.iterations == 10
        ratio = 0.0
        for a, b in zip(seq.nominals[1:], par.nominals[1:]):
            ratio = max(ratio, float(np.max(np.abs(b.mean - a.mean) / (ATOL + 1e-6 * np.abs(a.mean)))))
        worst[method] = ratio
    elapsed = time.perf_counter() - start
    passed = all(r <= 1.0 for r in worst.values()) and elapsed < 120
    record(6, passed, f"worst |diff|/(atol+rtol|x|): ieks {worst['ieks']:.2e}, ipls {worst['ipls']:.2e} (<=1), {elapsed:.1f}s (<120s)")
    assert passed


def test_statistical_sanity(record):
    model = coordinated_turn_model()
    rmse = {m: ([], []) for m in ("ieks", "ipls")}
    for seed in range(20):
        traj = simulate(model, 500, seed)
        for method, (filt, smooth) in rmse.items():
            trace = run_iterated(model, traj.measurements, IterationConfig(method, "parallel", 10))
            filt.append(position_rmse(trace.filtered.mean, traj.states[1:]))
            smooth.append(position_rmse(trace.smoothed.mean[1:], traj.states[1:]))
    med = {m: (np.median(f), np.median(s)) for m, (f, s) in rmse.items()}
    passed = all(s <= f for f, s in med.values())
    record(7, passed, ", ".join(f"{m}: filtered {f:.4f} smoothed {s:.4f}" for m, (f, s) in med.items()))
    assert passed


@pytest.mark.slow
def test_benchmark_protocol(tmp_path, record):
    out = tmp_path / "runtime.csv"
    grid = [10, 31, 100, 316, 1000, 2048, 4096, 8192, 15000]
    code = cli_main(["bench", "--grid", ",".join(map(str, grid)), "--repeats", "1", "--warmups", "0",
                     "--seed", "0", "--out", str(out)])
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(grid) * 4
    times = {(int(r["n"]), r["method"], r["engine"]): float(r["mean_s"]) for r in rows}
    ratios = []
    for method in ("ieks", "ipls"):
        big = [n for n in grid if n >= 2**12]
        for n1, n2 in zip(big[:-1], big[1:]):
            slope = math.log(times[n2, method, "seq"] / times[n1, method, "seq"]) / math.log(n2 / n1)
            ratios.append(2.0**slope)
    crossover = []
    for method in ("ieks", "ipls"):
        faster = [n for n in grid if times[n, method, "par"] < times[n, method, "seq"]]
        crossover.append(f"{method} parallel faster from n={faster[0]}" if faster else f"{method} parallel never faster")
    passed = all(1.4 <= r <= 2.6 for r in ratios)
    record(8, passed, f"sequential doubling ratios {[round(r, 2) for r in ratios]} (2.0+-0.6); " + "; ".join(crossover))
    assert passed
