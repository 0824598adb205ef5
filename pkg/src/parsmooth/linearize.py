"""Affine approximations ``f(x) ~ F x + c + e``, ``e ~ N(0, Lambda)``.

Two backends are provided:

* first-order Taylor expansion about a nominal mean (used by the iterated
  extended Kalman smoother, residual covariances are exactly zero), and
* statistical linear regression (SLR) over third-degree cubature points
  about a nominal mean and covariance (posterior linearisation smoother).

Both work on stacked nominal trajectories, all steps at once.
"""
from typing import NamedTuple, Optional

import numpy as np

from .gaussmath import cholesky, psd_clip, spd_solve, symmetrize


class LinearizationParams(NamedTuple):
    """Per-step affine approximations, stacked over steps ``k = 1..n``.

    Record ``k-1`` holds the transition ``(F, c, Lam)`` for ``k-1 -> k`` and
    the observation ``(H, d, Omega)`` at step ``k``.
    """

    F: np.ndarray  # (n, nx, nx)
    c: np.ndarray  # (n, nx)
    Lam: np.ndarray  # (n, nx, nx)
    H: np.ndarray  # (n, ny, nx)
    d: np.ndarray  # (n, ny)
    Omega: np.ndarray  # (n, ny, ny)

    def __len__(self):
        return self.F.shape[0]

    def at(self, k):
        """Record ``k`` (0-based) as unbatched arrays."""
        return LinearizationParams(*(a[k] for a in self))


class NominalTrajectory(NamedTuple):
    """Means ``(n+1, nx)`` of ``x_0..x_n`` and optionally their covariances."""

    mean: np.ndarray
    cov: Optional[np.ndarray] = None


def taylor_linearize_fn(fn, jac, mean):
    """First-order expansion of ``fn`` about ``mean``: ``(J, fn(mean) - J mean, 0)``."""
    mean = np.asarray(mean, dtype=float)
    J = np.asarray(jac(mean), dtype=float)
    offset = fn(mean) - np.einsum("...ij,...j->...i", J, mean)
    resid = np.zeros(J.shape[:-1] + J.shape[-2:-1])
    return J, offset, resid


def cubature_points(mean, cov):
    """Third-degree spherical cubature rule for ``N(mean, cov)``.

    Returns ``points`` of shape ``(..., 2 nx, nx)``, ``mean +/- sqrt(nx)``
    times the Cholesky columns, and equal ``weights`` ``1 / (2 nx)``.
    """
    mean = np.asarray(mean, dtype=float)
    nx = mean.shape[-1]
    chol = cholesky(symmetrize(cov))
    offsets = np.sqrt(nx) * np.swapaxes(chol, -1, -2)  # rows are columns of chol
    offsets = np.concatenate([offsets, -offsets], axis=-2)
    points = mean[..., None, :] + offsets
    weights = np.full(2 * nx, 1.0 / (2 * nx))
    return points, weights


def _wrap(x, period):
    """Map ``x`` into (-period/2, period/2] where ``period > 0``."""
    periodic = period > 0
    p = np.where(periodic, period, 1.0)
    wrapped = x - p * np.round(x / p)
    # np.round sends the half-way point to even; push -p/2 onto +p/2
    wrapped = np.where(wrapped <= -p / 2, wrapped + p, wrapped)
    return np.where(periodic, wrapped, x)


def slr_linearize_fn(fn, mean, cov, period=None):
    """Statistical linear regression of ``fn`` under ``N(mean, cov)``.

    Moments ``z_bar``, ``Psi`` (cross) and ``Phi`` (output covariance) are
    taken over the cubature points. Returns ``(F, c, Lam)`` with
    ``F = Psi^T cov^{-1}`` obtained from a solve against ``cov``,
    ``c = z_bar - F mean`` and ``Lam = Phi - F cov F^T`` clipped to PSD.

    ``period`` marks angular output components; their transformed points
    are unwrapped around ``fn(mean)`` before averaging.
    """
    mean = np.asarray(mean, dtype=float)
    cov = symmetrize(cov)
    points, weights = cubature_points(mean, cov)
    Z = fn(points)
    if period is not None:
        ref = fn(mean)[..., None, :]
        Z = ref + _wrap(Z - ref, np.asarray(period))
    z_bar = np.einsum("j,...ji->...i", weights, Z)
    dx = points - mean[..., None, :]
    dz = Z - z_bar[..., None, :]
    Psi = np.einsum("j,...ja,...jb->...ab", weights, dx, dz)
    Phi = np.einsum("j,...ja,...jb->...ab", weights, dz, dz)
    F = np.swapaxes(spd_solve(cov, Psi), -1, -2)
    c = z_bar - np.einsum("...ij,...j->...i", F, mean)
    Lam = psd_clip(Phi - F @ cov @ np.swapaxes(F, -1, -2))
    return F, c, Lam


def align_offsets(d, H, mean, ys, period):
    """Shift angular offsets by whole periods so that ``y - (H mean + d)``
    lies on the principal branch. Non-angular components are untouched."""
    if period is None or ys is None:
        return d
    period = np.asarray(period, dtype=float)
    pred = np.einsum("...ij,...j->...i", H, mean) + d
    resid = np.asarray(ys) - pred
    return d + (resid - _wrap(resid, period))


def _check_nominal(nominal, need_cov):
    mean = np.asarray(nominal.mean, dtype=float)
    if mean.ndim != 2 or mean.shape[0] < 2:
        raise ValueError("nominal trajectory needs n+1 >= 2 stacked means")
    if need_cov and nominal.cov is None:
        raise ValueError("SLR linearisation needs nominal covariances")
    return mean


def taylor_linearize(model, nominal, ys=None):
    """Taylor-linearise the transition at ``x_{k-1}`` and observation at ``x_k``.

    If measurements ``ys`` are given and the model has angular observation
    components, the offsets ``d`` are aligned to the measurement branch.
    """
    mean = _check_nominal(nominal, need_cov=False)
    F, c, Lam = taylor_linearize_fn(model.transition, model.transition_jacobian, mean[:-1])
    H, d, Omega = taylor_linearize_fn(model.observation, model.observation_jacobian, mean[1:])
    d = align_offsets(d, H, mean[1:], ys, model.observation_period)
    return LinearizationParams(F, c, Lam, H, d, Omega)


def slr_linearize(model, nominal, ys=None):
    """Cubature SLR of the transition at ``(x_{k-1}, P_{k-1})`` and the
    observation at ``(x_k, P_k)`` for every step at once."""
    mean = _check_nominal(nominal, need_cov=True)
    cov = np.asarray(nominal.cov, dtype=float)
    F, c, Lam = slr_linearize_fn(model.transition, mean[:-1], cov[:-1])
    period = model.observation_period
    H, d, Omega = slr_linearize_fn(model.observation, mean[1:], cov[1:], period)
    d = align_offsets(d, H, mean[1:], ys, period)
    return LinearizationParams(F, c, Lam, H, d, Omega)
