"""State-space models with additive Gaussian noise.

The coordinated-turn / bearings-only tracking model used for benchmarking
lives here together with a simulator and a small CSV format for storing
simulated trajectories.
"""
import csv
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, NamedTuple, Optional

import numpy as np

from .gaussmath import symmetrize

#: below this |omega * dt| the coordinated-turn update uses its series form
SMALL_TURN = 1e-8


class DegenerateGeometryError(ValueError):
    """The target sits exactly on a bearing sensor."""


@dataclass(frozen=True)
class StateSpaceModel:
    """Nonlinear model ``x_k = f(x_{k-1}) + q``, ``y_k = h(x_k) + r``.

    ``transition``/``observation`` and their Jacobians must accept stacked
    states of shape ``(..., n_x)``; Jacobians return ``(..., n_x, n_x)`` and
    ``(..., n_y, n_x)``.

    ``observation_period`` optionally marks angular measurement components:
    entry ``s`` is the period (``2*pi`` for bearings) or 0 for an ordinary
    component. Linearisation uses it to keep residuals on one branch.
    """

    transition: Callable
    observation: Callable
    transition_jacobian: Callable
    observation_jacobian: Callable
    process_noise_cov: np.ndarray
    measurement_noise_cov: np.ndarray
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    observation_period: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict, compare=False)

    @property
    def state_dim(self):
        return self.prior_mean.shape[-1]

    @property
    def obs_dim(self):
        return self.measurement_noise_cov.shape[-1]

    def check(self):
        """Validate shapes and covariance definiteness; returns ``self``."""
        nx, ny = self.state_dim, self.obs_dim
        for name, mat, dim in (
            ("process_noise_cov", self.process_noise_cov, nx),
            ("measurement_noise_cov", self.measurement_noise_cov, ny),
            ("prior_cov", self.prior_cov, nx),
        ):
            if mat.shape != (dim, dim):
                raise ValueError(f"{name} has shape {mat.shape}, expected {(dim, dim)}")
            if not np.allclose(mat, mat.T):
                raise ValueError(f"{name} is not symmetric")
            if np.linalg.eigvalsh(mat).min() < -1e-12 * max(1.0, np.abs(mat).max()):
                raise ValueError(f"{name} is not positive semidefinite")
        if np.linalg.eigvalsh(self.measurement_noise_cov).min() <= 0.0:
            raise ValueError("measurement_noise_cov must be positive definite")
        return self


def linear_gaussian_model(F, c, H, d, Q, R, m0, P0):
    """Affine model ``f(x) = F x + c``, ``h(x) = H x + d``."""
    F, c, H, d = (np.asarray(a, dtype=float) for a in (F, c, H, d))
    return StateSpaceModel(
        transition=lambda x: x @ F.T + c,
        observation=lambda x: x @ H.T + d,
        transition_jacobian=lambda x: np.broadcast_to(F, x.shape[:-1] + F.shape),
        observation_jacobian=lambda x: np.broadcast_to(H, x.shape[:-1] + H.shape),
        process_noise_cov=symmetrize(Q),
        measurement_noise_cov=symmetrize(R),
        prior_mean=np.asarray(m0, dtype=float),
        prior_cov=symmetrize(P0),
    )


def _turn_terms(omega, dt):
    """sin(w dt)/w, (1 - cos(w dt))/w and their derivatives in w.

    Falls back to Taylor series when |w dt| is tiny so that w = 0 gives the
    straight-line limit without dividing by zero.
    """
    wt = omega * dt
    small = np.abs(wt) < SMALL_TURN
    w = np.where(small, 1.0, omega)
    sin, cos = np.sin(wt), np.cos(wt)
    a = np.where(small, dt * (1.0 - wt**2 / 6.0), sin / w)
    b = np.where(small, dt * wt / 2.0, (1.0 - cos) / w)
    da = np.where(small, -omega * dt**3 / 3.0, (dt * cos * w - sin) / w**2)
    db = np.where(small, dt**2 / 2.0 - omega**2 * dt**4 / 8.0, (dt * sin * w - (1.0 - cos)) / w**2)
    return sin, cos, a, b, da, db


def ct_transition(state, dt):
    """Coordinated-turn update of ``[px, py, vx, vy, omega]`` over ``dt``.

    Velocity rotates by ``omega * dt``; the turn rate is carried unchanged.
    """
    state = np.asarray(state, dtype=float)
    px, py, vx, vy, om = np.moveaxis(state, -1, 0)
    sin, cos, a, b, _, _ = _turn_terms(om, dt)
    return np.stack(
        [
            px + a * vx - b * vy,
            py + b * vx + a * vy,
            cos * vx - sin * vy,
            sin * vx + cos * vy,
            om,
        ],
        axis=-1,
    )


def ct_jacobian(state, dt):
    state = np.asarray(state, dtype=float)
    px, py, vx, vy, om = np.moveaxis(state, -1, 0)
    sin, cos, a, b, da, db = _turn_terms(om, dt)
    one, zero = np.ones_like(px), np.zeros_like(px)
    rows = [
        [one, zero, a, -b, da * vx - db * vy],
        [zero, one, b, a, db * vx + da * vy],
        [zero, zero, cos, -sin, dt * (-sin * vx - cos * vy)],
        [zero, zero, sin, cos, dt * (cos * vx - sin * vy)],
        [zero, zero, zero, zero, one],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def ct_process_noise(dt, q1, q2):
    """Discretised CT process noise for white-acceleration density ``q1``
    and turn-rate density ``q2``."""
    Q = np.zeros((5, 5))
    pos = q1 * dt**3 / 3.0
    cross = q1 * dt**2 / 2.0
    vel = q1 * dt
    for i in range(2):
        Q[i, i] = pos
        Q[i, i + 2] = Q[i + 2, i] = cross
        Q[i + 2, i + 2] = vel
    Q[4, 4] = q2 * dt
    return Q


def bearing_observation(state, sensors):
    """Bearings ``atan2(py - s_y, px - s_x)`` from each sensor, in (-pi, pi].

    Raises:
        DegenerateGeometryError: if the target coincides with a sensor.
    """
    state = np.asarray(state, dtype=float)
    sensors = np.atleast_2d(np.asarray(sensors, dtype=float))
    dx = state[..., None, 0] - sensors[:, 0]
    dy = state[..., None, 1] - sensors[:, 1]
    if np.any((dx == 0.0) & (dy == 0.0)):
        raise DegenerateGeometryError("target position coincides with a sensor")
    angles = np.arctan2(dy, dx)
    # atan2 returns -pi on the negative real axis with a signed zero
    return np.where(angles == -np.pi, np.pi, angles)


def bearing_jacobian(state, sensors):
    state = np.asarray(state, dtype=float)
    sensors = np.atleast_2d(np.asarray(sensors, dtype=float))
    dx = state[..., None, 0] - sensors[:, 0]
    dy = state[..., None, 1] - sensors[:, 1]
    r2 = dx**2 + dy**2
    if np.any(r2 == 0.0):
        raise DegenerateGeometryError("target position coincides with a sensor")
    jac = np.zeros(state.shape[:-1] + (sensors.shape[0], state.shape[-1]))
    jac[..., 0] = -dy / r2
    jac[..., 1] = dx / r2
    return jac


DEFAULT_SENSORS = ((-1.5, 0.5), (1.0, 1.0))


def coordinated_turn_model(
    dt=0.01,
    q1=0.1,
    q2=0.01,
    bearing_std=0.05,
    sensors=DEFAULT_SENSORS,
    prior_mean=(0.1, 0.2, 1.0, 0.0, 0.0),
    prior_cov_scale=0.1,
):
    """Coordinated-turn dynamics observed through bearings-only sensors.

    The defaults are a reasonable tracking scenario, not values fixed by any
    reference experiment; every one of them can be overridden.
    """
    sensors = np.atleast_2d(np.asarray(sensors, dtype=float))
    ny = sensors.shape[0]
    return StateSpaceModel(
        transition=partial(ct_transition, dt=dt),
        observation=partial(bearing_observation, sensors=sensors),
        transition_jacobian=partial(ct_jacobian, dt=dt),
        observation_jacobian=partial(bearing_jacobian, sensors=sensors),
        process_noise_cov=ct_process_noise(dt, q1, q2),
        measurement_noise_cov=bearing_std**2 * np.eye(ny),
        prior_mean=np.asarray(prior_mean, dtype=float),
        prior_cov=prior_cov_scale * np.eye(5),
        observation_period=np.full(ny, 2.0 * np.pi),
        params=dict(dt=dt, q1=q1, q2=q2, bearing_std=bearing_std, sensors=sensors.tolist()),
    )


class Trajectory(NamedTuple):
    """Simulated states ``x_0..x_n`` (``(n+1, n_x)``) and measurements
    ``y_1..y_n`` (``(n, n_y)``). ``states`` may be None for measured data."""

    states: Optional[np.ndarray]
    measurements: np.ndarray
    seed: Optional[int] = None


def _sqrt_psd(cov):
    # eigh-based square root works for singular (e.g. zero) covariances
    vals, vecs = np.linalg.eigh(symmetrize(cov))
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def simulate(model, n, seed):
    """Draw a trajectory of ``n`` steps.

    Gaussian draws are standard normals from ``numpy.random.default_rng(seed)``
    (PCG64) mapped through the eigen-square-root of each covariance, drawn in
    the order x0, then (q_k, r_k) for k = 1..n.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    nx, ny = model.state_dim, model.obs_dim
    sq_p0 = _sqrt_psd(model.prior_cov)
    sq_q = _sqrt_psd(model.process_noise_cov)
    sq_r = _sqrt_psd(model.measurement_noise_cov)
    states = np.empty((n + 1, nx))
    ys = np.empty((n, ny))
    states[0] = model.prior_mean + sq_p0 @ rng.standard_normal(nx)
    for k in range(1, n + 1):
        q = sq_q @ rng.standard_normal(nx)
        r = sq_r @ rng.standard_normal(ny)
        states[k] = model.transition(states[k - 1]) + q
        ys[k - 1] = model.observation(states[k]) + r
    return Trajectory(states, ys, seed)


CSV_HEADER = ("k", "px", "py", "vx", "vy", "omega", "y1", "y2")


def _fmt(v):
    return repr(float(v))


def write_trajectory_csv(path, traj):
    """Write a CT trajectory as ``k,px,py,vx,vy,omega,y1,y2`` rows.

    Row ``k = 0`` has empty measurement cells; state cells are empty when
    the trajectory carries no ground truth.
    """
    n = traj.measurements.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for k in range(n + 1):
            st = [_fmt(v) for v in traj.states[k]] if traj.states is not None else [""] * 5
            ys = [_fmt(v) for v in traj.measurements[k - 1]] if k > 0 else ["", ""]
            writer.writerow([k] + st + ys)


def read_trajectory_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        rows = [r for r in reader if r]
    if not rows or int(rows[0][0]) != 0:
        raise ValueError(f"{path}: first data row must be k=0")
    for i, r in enumerate(rows):
        if len(r) != len(CSV_HEADER) or int(r[0]) != i:
            raise ValueError(f"{path}: malformed row {i + 1}")
    has_states = all(r[1] != "" for r in rows)
    states = np.array([[float(v) for v in r[1:6]] for r in rows]) if has_states else None
    ys = np.array([[float(v) for v in r[6:8]] for r in rows[1:]])
    if ys.shape[0] < 1:
        raise ValueError(f"{path}: no measurements")
    return Trajectory(states, ys, None)
