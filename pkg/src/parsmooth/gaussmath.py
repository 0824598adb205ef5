"""Dense symmetric / positive-definite matrix helpers.

Every function accepts a single matrix or a stack of matrices with arbitrary
leading batch dimensions, so the same code path serves the sequential
recursions and the vectorised scan elements.
"""
import numpy as np

#: relative jitter levels tried (after a jitter-free attempt) when a
#: Cholesky factorisation fails; scaled by trace(a)/dim
JITTER_LADDER = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix that must be positive definite cannot be factorised.

    ``step`` is the time-step index (0-based position in the batch, or the
    index supplied by the caller) at which the failure happened, when known.
    """

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


def _check_square(m):
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {m.shape}")
    return m


def symmetrize(m):
    """Return ``(m + m^T) / 2`` (batched over leading axes)."""
    m = _check_square(m)
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def _jittered_cholesky(a, step=None):
    """Cholesky of a single matrix, escalating diagonal jitter on failure."""
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    dim = a.shape[-1]
    scale = np.trace(a) / dim
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    eye = np.eye(dim)
    for level in JITTER_LADDER:
        try:
            return np.linalg.cholesky(a + level * scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise SingularMatrixError("matrix is not positive definite after jitter", step)


def cholesky(a, step=None):
    """Lower Cholesky factor with the jitter ladder applied per matrix.

    For a batch the whole stack is factorised at once; only if that fails are
    the matrices revisited one by one so that the failing index can be
    reported through :class:`SingularMatrixError`.
    """
    a = _check_square(a)
    if a.ndim == 2:
        return _jittered_cholesky(a, step)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    flat = a.reshape((-1,) + a.shape[-2:])
    out = np.empty_like(flat)
    for i, ai in enumerate(flat):
        out[i] = _jittered_cholesky(ai, i if step is None else step)
    return out.reshape(a.shape)


def spd_solve(a, b, step=None):
    """Solve ``a x = b`` for symmetric positive definite ``a``.

    ``b`` must be a matrix (or stack of matrices) whose row count matches
    ``a``; pass vectors as column matrices. The solve goes through a
    Cholesky factor, never an explicit inverse.

    Raises:
        SingularMatrixError: if ``a`` stays indefinite after the jitter ladder.
    """
    a = _check_square(a)
    b = np.asarray(b, dtype=float)
    if b.ndim < 2 or b.shape[-2] != a.shape[-1]:
        raise ValueError(f"right-hand side shape {b.shape} does not match {a.shape}")
    chol = cholesky(a, step)
    y = np.linalg.solve(chol, b)
    return np.linalg.solve(np.swapaxes(chol, -1, -2), y)


def psd_clip(m):
    """Project a symmetric matrix onto the PSD cone by zeroing negative eigenvalues.

    Matrices that are already PSD are returned unchanged.
    """
    m = symmetrize(m)
    vals, vecs = np.linalg.eigh(m)
    if np.all(vals >= 0.0):
        return m
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals[..., None, :]) @ np.swapaxes(vecs, -1, -2)
    return symmetrize(out)
