"""Parallel-in-time Kalman filtering via an associative scan.

Each step contributes an element ``(A, b, C, eta, J)``: the conditional
``p(x_k | y_k, x_{k-1}) = N(A x_{k-1} + b, C)`` together with the
information-form likelihood ``p(y_k | x_{k-1}) ~ N_I(eta, J)``. Prefix
products of these elements are the filtering marginals.
"""
from typing import NamedTuple

import numpy as np

from .gaussmath import SingularMatrixError, spd_solve, symmetrize
from .scan import ScanError, inclusive_scan
from .sequential import Gaussian, predict, update


class FilterElement(NamedTuple):
    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    eta: np.ndarray
    J: np.ndarray


def _mv(M, v):
    return np.einsum("...ij,...j->...i", M, v)


def _T(M):
    return np.swapaxes(M, -1, -2)


def make_filter_element(lin, y, Q, R):
    """Scan element for a generic step ``k >= 2``.

    ``lin`` may be a single record or a stack of records (with ``y``
    stacked to match); ``Q``/``R`` broadcast against ``Lam``/``Omega``.
    A failing innovation matrix raises :class:`SingularMatrixError` whose
    ``step`` is the position within the stack.
    """
    F, c, Lam, H, d, Omega = lin
    Qp = symmetrize(np.asarray(Q) + Lam)
    Rp = symmetrize(np.asarray(R) + Omega)
    S = symmetrize(H @ Qp @ _T(H) + Rp)
    K = _T(spd_solve(S, H @ Qp))
    resid = np.asarray(y) - _mv(H, c) - d
    I_KH = np.eye(F.shape[-1]) - K @ H
    HF = H @ F
    S_inv_HF = spd_solve(S, HF)
    S_inv_resid = spd_solve(S, resid[..., None])[..., 0]
    return FilterElement(
        A=I_KH @ F,
        b=c + _mv(K, resid),
        C=symmetrize(I_KH @ Qp),
        eta=_mv(_T(HF), S_inv_resid),
        J=symmetrize(_T(HF) @ S_inv_HF),
    )


def make_first_element(m0, P0, lin, y, Q, R):
    """Element for step 1: the filtering density ``p(x_1 | y_1)`` itself.

    It is independent of ``x_0``, hence ``A = 0`` and ``eta = J = 0``.
    """
    m, P = predict(np.asarray(m0, float), np.asarray(P0, float), lin.F, lin.c, Q + lin.Lam)
    m, P = update(m, P, lin.H, lin.d, R + lin.Omega, y, step=1)
    nx = m.shape[0]
    return FilterElement(np.zeros((nx, nx)), m, P, np.zeros(nx), np.zeros((nx, nx)))


def combine_filter(ei, ej):
    """``ei (x) ej``; ``ei`` is the earlier element. Works on stacks."""
    nx = ei.A.shape[-1]
    eye = np.eye(nx)
    M = eye + ei.C @ ej.J
    Mt = eye + ej.J @ ei.C
    try:
        # (I + C_i J_j)^{-1} applied to A_i, b_i + C_i eta_j and C_i in one solve
        rhs = np.concatenate(
            [ei.A, (ei.b + _mv(ei.C, ej.eta))[..., None], ei.C], axis=-1
        )
        sol = np.linalg.solve(M, rhs)
        rhs_t = np.concatenate([(ej.eta - _mv(ej.J, ei.b))[..., None], ej.J @ ei.A], axis=-1)
        sol_t = np.linalg.solve(Mt, rhs_t)
    except np.linalg.LinAlgError as exc:
        raise ScanError(f"filter combine failed: {exc}") from exc
    AjM_A, M_b, M_C = sol[..., :nx], sol[..., nx], sol[..., nx + 1 :]
    Mt_eta, Mt_JA = sol_t[..., 0], sol_t[..., 1:]
    At_i = _T(ei.A)
    return FilterElement(
        A=ej.A @ AjM_A,
        b=_mv(ej.A, M_b) + ej.b,
        C=symmetrize(ej.A @ M_C @ _T(ej.A) + ej.C),
        eta=_mv(At_i, Mt_eta) + ei.eta,
        J=symmetrize(At_i @ Mt_JA + ei.J),
    )


def filter_elements(lin, ys, m0, P0, Q, R):
    """All ``n`` elements stacked, the first one built from the prior."""
    ys = np.asarray(ys, dtype=float)
    n = ys.shape[0]
    if len(lin) != n:
        raise ValueError(f"{len(lin)} linearisations for {n} measurements")
    Q, R = np.asarray(Q, float), np.asarray(R, float)
    Qs = Q if Q.ndim == 3 else Q[None]
    Rs = R if R.ndim == 3 else R[None]
    try:
        elems = make_filter_element(lin, ys, Qs, Rs)
    except SingularMatrixError as exc:
        raise SingularMatrixError("singular innovation covariance", (exc.step or 0) + 1) from exc
    first = make_first_element(m0, P0, lin.at(0), ys[0], Qs[0], Rs[0])
    for field, value in zip(elems, first):
        field[0] = value
    return elems


def parallel_filter(lin, ys, m0, P0, Q, R, plan=None):
    """Filtering marginals for steps ``1..n`` via a prefix scan.

    Returns:
        :class:`Gaussian` with means ``(n, nx)`` and covariances
        ``(n, nx, nx)``.
    """
    elems = filter_elements(lin, ys, m0, P0, Q, R)
    try:
        prefix = inclusive_scan(elems, combine_filter, plan)
    except ScanError as exc:
        raise ScanError(str(exc), (1, len(lin))) from exc
    return Gaussian(prefix.b, prefix.C)
