"""Iterated extended (IEKS) and posterior-linearisation (IPLS) smoothers.

Each iteration relinearises the whole model about the previous smoothing
pass, then runs a filter + smoother over the affine approximation with
either the sequential recursions or the scan-based parallel formulation.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .gaussmath import SingularMatrixError
from .linearize import (
    LinearizationParams,
    NominalTrajectory,
    align_offsets,
    slr_linearize,
    slr_linearize_fn,
    taylor_linearize,
    taylor_linearize_fn,
)
from .parfilter import parallel_filter
from .parsmoother import parallel_smooth
from .scan import ScanError, ScanPlan
from .sequential import Gaussian, kf_forward, predict, rts_backward, update

logger = logging.getLogger(__name__)

METHODS = ("ieks", "ipls")
ENGINES = ("sequential", "parallel")


class IterationError(RuntimeError):
    """Numerical failure inside an iteration; carries iteration and step."""

    def __init__(self, message, iteration, step=None):
        where = f"iteration {iteration}" + (f", step {step}" if step is not None else "")
        super().__init__(f"{message} ({where})")
        self.iteration = iteration
        self.step = step


@dataclass
class IterationConfig:
    method: str = "ieks"
    engine: str = "parallel"
    iterations: int = 10
    early_stop_tol: Optional[float] = None
    plan: Optional[ScanPlan] = None

    def __post_init__(self):
        self.method = self.method.lower()
        self.engine = {"seq": "sequential", "par": "parallel"}.get(self.engine, self.engine)
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.plan is None:
            self.plan = ScanPlan("parallel")


@dataclass
class IterationTrace:
    """Record of an iterated smoothing run.

    ``nominals[0]`` is the initial trajectory; ``nominals[i]`` for ``i >= 1``
    is the smoothed trajectory (``x_0..x_n``) produced by iteration ``i``.
    """

    nominals: List[NominalTrajectory] = field(default_factory=list)
    wall_times: List[float] = field(default_factory=list)
    smoothed: Optional[Gaussian] = None
    filtered: Optional[Gaussian] = None
    linearization: Optional[LinearizationParams] = None
    diverged: bool = False
    diverged_at: Optional[tuple] = None  # (iteration, first non-finite step)

    @property
    def iterations(self):
        return len(self.nominals) - 1

    def mean_changes(self):
        """Max-abs change of the smoothed means between consecutive passes."""
        return [
            float(np.max(np.abs(b.mean - a.mean)))
            for a, b in zip(self.nominals[:-1], self.nominals[1:])
        ]


def _first_nonfinite(gauss):
    bad = ~(np.all(np.isfinite(gauss.mean), axis=-1) & np.all(np.isfinite(gauss.cov), axis=(-2, -1)))
    return int(np.argmax(bad)) if bad.any() else None


def initial_nominal(model, ys, method):
    """One classical extended / cubature filter-smoother pass.

    Every step linearises the transition at the current filtered moments and
    the observation at the predicted moments, as in a standard EKF or CKF.
    Returns ``(nominal, filtered, lin)``.
    """
    ys = np.asarray(ys, dtype=float)
    n, nx, ny = ys.shape[0], model.state_dim, model.obs_dim
    Q, R = model.process_noise_cov, model.measurement_noise_cov
    period = model.observation_period
    recs = [np.empty((n, nx, nx)), np.empty((n, nx)), np.empty((n, nx, nx)),
            np.empty((n, ny, nx)), np.empty((n, ny)), np.empty((n, ny, ny))]
    means, covs = np.empty((n, nx)), np.empty((n, nx, nx))
    m, P = model.prior_mean.astype(float), model.prior_cov.astype(float)
    for k in range(n):
        if method == "ieks":
            F, c, Lam = taylor_linearize_fn(model.transition, model.transition_jacobian, m)
        else:
            F, c, Lam = slr_linearize_fn(model.transition, m, P)
        m, P = predict(m, P, F, c, Q + Lam)
        if method == "ieks":
            H, d, Om = taylor_linearize_fn(model.observation, model.observation_jacobian, m)
        else:
            H, d, Om = slr_linearize_fn(model.observation, m, P, period)
        d = align_offsets(d, H, m, ys[k], period)
        m, P = update(m, P, H, d, R + Om, ys[k], step=k + 1)
        for rec, val in zip(recs, (F, c, Lam, H, d, Om)):
            rec[k] = val
        means[k], covs[k] = m, P
    lin = LinearizationParams(*recs)
    filtered = Gaussian(means, covs)
    prior = Gaussian(model.prior_mean, model.prior_cov)
    smoothed = rts_backward(filtered, lin, Q, prior=prior)
    return NominalTrajectory(smoothed.mean, smoothed.cov), filtered, lin


def smoothing_pass(model, ys, lin, engine, plan=None):
    """Filter + smoother over fixed linearisations.

    Returns ``(filtered, smoothed)`` with the smoothed beliefs covering
    ``x_0..x_n``.
    """
    prior = Gaussian(model.prior_mean, model.prior_cov)
    Q, R = model.process_noise_cov, model.measurement_noise_cov
    if engine == "sequential":
        filtered = kf_forward(lin, ys, prior.mean, prior.cov, Q, R)
        smoothed = rts_backward(filtered, lin, Q, prior=prior)
    else:
        filtered = parallel_filter(lin, ys, prior.mean, prior.cov, Q, R, plan)
        smoothed = parallel_smooth(filtered, lin, Q, plan, prior=prior)
    return filtered, smoothed


def run_iterated(model, ys, config=None):
    """Run IEKS or IPLS for ``config.iterations`` relinearisation passes.

    Raises:
        IterationError: wrapping any singular-matrix or scan failure.
    """
    config = IterationConfig() if config is None else config
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 2 or ys.shape[0] < 1:
        raise ValueError("need at least one measurement")
    linearize = taylor_linearize if config.method == "ieks" else slr_linearize
    trace = IterationTrace()
    try:
        nominal, filtered, lin = initial_nominal(model, ys, config.method)
    except SingularMatrixError as exc:
        raise IterationError(str(exc), 0, exc.step) from exc
    trace.nominals.append(nominal)
    trace.filtered, trace.linearization = filtered, lin
    trace.smoothed = Gaussian(nominal.mean, nominal.cov)
    bad = _first_nonfinite(trace.smoothed)
    if bad is not None:
        logger.warning("initial pass produced non-finite estimates at step %d", bad)
        trace.diverged, trace.diverged_at = True, (0, bad)
        return trace

    for i in range(1, config.iterations + 1):
        start = time.perf_counter()
        try:
            lin = linearize(model, nominal, ys)
            filtered, smoothed = smoothing_pass(model, ys, lin, config.engine, config.plan)
        except (SingularMatrixError, ScanError) as exc:
            raise IterationError(str(exc), i, getattr(exc, "step", None)) from exc
        trace.wall_times.append(time.perf_counter() - start)
        nominal = NominalTrajectory(smoothed.mean, smoothed.cov)
        trace.nominals.append(nominal)
        trace.filtered, trace.smoothed, trace.linearization = filtered, smoothed, lin
        bad = _first_nonfinite(smoothed)
        if bad is not None:
            logger.warning("iteration %d produced non-finite estimates at step %d", i, bad)
            trace.diverged, trace.diverged_at = True, (i, bad)
            break
        change = trace.mean_changes()[-1]
        logger.debug("iteration %d: max mean change %.3e", i, change)
        if config.early_stop_tol is not None and change < config.early_stop_tol:
            break
    return trace
