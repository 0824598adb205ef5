"""Parallel-in-time RTS smoothing via a suffix scan.

Element ``k`` is the backward conditional ``p(x_k | y_{1:k}, x_{k+1}) =
N(E x_{k+1} + g, L)``; the last element is the final filtering marginal
(``E = 0``). Suffix products give the smoothing marginals.
"""
from typing import NamedTuple

import numpy as np

from .gaussmath import SingularMatrixError, spd_solve, symmetrize
from .scan import reverse_scan
from .sequential import Gaussian


class SmootherElement(NamedTuple):
    E: np.ndarray
    g: np.ndarray
    L: np.ndarray


def make_smoother_element(mean, cov, F, c, Qp, is_last=False):
    """Backward element from a filtered belief and the transition to ``k+1``.

    ``Qp`` is the transition noise including the linearisation residual.
    Works on stacks of steps. For ``is_last`` the transition is ignored.
    """
    mean, cov = np.asarray(mean, float), np.asarray(cov, float)
    if is_last:
        return SmootherElement(np.zeros_like(cov), mean.copy(), cov.copy())
    FP = F @ cov
    S = symmetrize(FP @ np.swapaxes(F, -1, -2) + Qp)
    E = np.swapaxes(spd_solve(S, FP), -1, -2)
    g = mean - np.einsum("...ij,...j->...i", E, np.einsum("...ij,...j->...i", F, mean) + c)
    L = symmetrize(cov - E @ FP)
    return SmootherElement(E, g, L)


def combine_smoother(ei, ej):
    """``ei (x) ej`` where ``ei`` is the earlier time step."""
    return SmootherElement(
        E=ei.E @ ej.E,
        g=np.einsum("...ij,...j->...i", ei.E, ej.g) + ei.g,
        L=symmetrize(ei.E @ ej.L @ np.swapaxes(ei.E, -1, -2) + ei.L),
    )


def smoother_elements(filtered, lin, Q, prior=None):
    """Stacked elements for ``x_1..x_n`` (or ``x_0..x_n`` with ``prior``)."""
    n = len(filtered)
    if len(lin) != n:
        raise ValueError(f"{len(lin)} linearisations for {n} filtered beliefs")
    Q = np.asarray(Q, float)
    Qp = (Q if Q.ndim == 3 else Q[None]) + lin.Lam
    if prior is not None:
        means = np.concatenate([np.asarray(prior.mean, float)[None], filtered.mean])
        covs = np.concatenate([np.asarray(prior.cov, float)[None], filtered.cov])
        F, c, offset = lin.F, lin.c, 0
    else:
        means, covs = filtered.mean, filtered.cov
        F, c, Qp, offset = lin.F[1:], lin.c[1:], Qp[1:], 1
    try:
        head = make_smoother_element(means[:-1], covs[:-1], F, c, Qp)
    except SingularMatrixError as exc:
        raise SingularMatrixError("singular smoother gain matrix", (exc.step or 0) + offset) from exc
    last = make_smoother_element(means[-1], covs[-1], None, None, None, is_last=True)
    return SmootherElement(*(np.concatenate([h, l[None]]) for h, l in zip(head, last)))


def parallel_smooth(filtered, lin, Q, plan=None, prior=None):
    """Smoothing marginals from filtered ones via a suffix scan.

    ``filtered`` covers ``x_1..x_n``; if ``prior`` (belief on ``x_0``) is
    given the output covers ``x_0..x_n``.
    """
    elems = smoother_elements(filtered, lin, Q, prior)
    suffix = reverse_scan(elems, combine_smoother, plan)
    return Gaussian(suffix.g, suffix.L)
