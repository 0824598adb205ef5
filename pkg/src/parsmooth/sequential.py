"""Classical Kalman filter and Rauch-Tung-Striebel smoother.

These run step by step over a sequence of affine approximations and are
deliberately written for clarity (Joseph-form updates, solves instead of
inverses). They are the reference the scan-based versions are checked
against, and the sequential engine of the iterated smoothers.
"""
from typing import NamedTuple

import numpy as np

from .gaussmath import spd_solve, symmetrize


class Gaussian(NamedTuple):
    """Gaussian belief(s); fields may carry a leading time axis."""

    mean: np.ndarray
    cov: np.ndarray

    def __len__(self):
        return self.mean.shape[0]

    def at(self, k):
        return Gaussian(self.mean[k], self.cov[k])


def _per_step(mat, n):
    """Broadcast a constant covariance to ``n`` steps (or validate a stack)."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim == 2:
        return np.broadcast_to(mat, (n,) + mat.shape)
    if mat.shape[0] != n:
        raise ValueError(f"expected {n} per-step matrices, got {mat.shape[0]}")
    return mat


def predict(mean, cov, F, c, Qp):
    m = F @ mean + c
    P = symmetrize(F @ cov @ F.T + Qp)
    return m, P


def update(mean, cov, H, d, Rp, y, step=None):
    """Kalman update with the Joseph-form covariance."""
    S = symmetrize(H @ cov @ H.T + Rp)
    K = spd_solve(S, H @ cov, step).T
    m = mean + K @ (y - H @ mean - d)
    I_KH = np.eye(mean.shape[0]) - K @ H
    P = symmetrize(I_KH @ cov @ I_KH.T + K @ Rp @ K.T)
    return m, P


def kf_forward(lin, ys, m0, P0, Q, R):
    """Filter ``ys`` (``y_1..y_n``) through the linearised model.

    Uses ``Q' = Q + Lam`` and ``R' = R + Omega`` at each step. Returns the
    filtered beliefs for steps ``1..n`` stacked along axis 0.
    """
    ys = np.asarray(ys, dtype=float)
    n = ys.shape[0]
    if len(lin) != n:
        raise ValueError(f"{len(lin)} linearisations for {n} measurements")
    Qp = _per_step(Q, n) + lin.Lam
    Rp = _per_step(R, n) + lin.Omega
    nx = lin.F.shape[-1]
    means, covs = np.empty((n, nx)), np.empty((n, nx, nx))
    m, P = np.asarray(m0, dtype=float), np.asarray(P0, dtype=float)
    for k in range(n):
        m, P = predict(m, P, lin.F[k], lin.c[k], Qp[k])
        m, P = update(m, P, lin.H[k], lin.d[k], Rp[k], ys[k], step=k + 1)
        means[k], covs[k] = m, P
    return Gaussian(means, covs)


def rts_step(filt_mean, filt_cov, next_mean, next_cov, F, c, Qp, step=None):
    """One backward RTS step from the smoothed belief at ``k+1`` to ``k``."""
    m_pred, P_pred = predict(filt_mean, filt_cov, F, c, Qp)
    G = spd_solve(P_pred, F @ filt_cov, step).T
    m = filt_mean + G @ (next_mean - m_pred)
    P = symmetrize(filt_cov + G @ (next_cov - P_pred) @ G.T)
    return m, P


def rts_backward(filtered, lin, Q, prior=None):
    """Rauch-Tung-Striebel smoothing of filtered beliefs for steps ``1..n``.

    The transition ``k -> k+1`` is taken from record ``k`` of ``lin``
    (0-based record ``k`` holds ``F_k``). If ``prior`` (the belief on
    ``x_0``) is given, the recursion continues one step further and the
    result covers ``x_0..x_n``.
    """
    n = len(filtered)
    Qp = _per_step(Q, n) + lin.Lam
    means, covs = filtered.mean.copy(), filtered.cov.copy()
    for k in range(n - 2, -1, -1):
        means[k], covs[k] = rts_step(
            filtered.mean[k], filtered.cov[k], means[k + 1], covs[k + 1],
            lin.F[k + 1], lin.c[k + 1], Qp[k + 1], step=k + 1,
        )
    if prior is None:
        return Gaussian(means, covs)
    m0, P0 = rts_step(
        np.asarray(prior.mean, float), np.asarray(prior.cov, float), means[0], covs[0],
        lin.F[0], lin.c[0], Qp[0], step=0,
    )
    return Gaussian(np.concatenate([m0[None], means]), np.concatenate([P0[None], covs]))
