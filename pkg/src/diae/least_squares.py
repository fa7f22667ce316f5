"""Dense least-squares kernel used by every block update.

Two orientations of the same Frobenius-norm problem are provided:

* :func:`solve_right` minimizes ``||A - W @ C||_F^2 + damping * ||W||_F^2``
  over ``W`` (the unknown multiplies from the left of ``C``).
* :func:`solve_left` minimizes ``||A - C @ W||_F^2 + damping * ||W||_F^2``
  over ``W`` (the unknown multiplies from the right of ``C``).

Both reduce to a symmetric positive (semi-)definite system of normal
equations.  A Cholesky factorization is the primary solver for determinism;
if it fails with ``damping > 0`` (extreme conditioning), a conjugate
gradient fallback handles the solve.  A failed factorization at
``damping == 0`` means the minimizer is not unique and is reported as an
error asking the caller to raise the damping.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .validation import DimensionMismatchError, as_matrix

__all__ = [
    "LeastSquaresError",
    "SingularSystemError",
    "solve_right",
    "solve_left",
    "vstack",
]


class LeastSquaresError(RuntimeError):
    """Base class for solver failures."""


class SingularSystemError(LeastSquaresError):
    """Normal equations are numerically singular or the solve did not verify."""


def _cg_solve(G: np.ndarray, R: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Conjugate gradient on ``G @ X = R`` for SPD ``G``, all columns at once.

    Each column carries its own step sizes; converged columns simply stall
    (their residual is already below tolerance).
    """
    X = np.zeros_like(R)
    r = R.copy()
    p = r.copy()
    rs = np.einsum("ij,ij->j", r, r)
    target = (tol * np.sqrt(np.einsum("ij,ij->j", R, R) + 1e-300)) ** 2
    for _ in range(max_iter):
        if np.all(rs <= target):
            break
        Gp = G @ p
        pGp = np.einsum("ij,ij->j", p, Gp)
        safe = pGp > 0
        alpha = np.where(safe, rs / np.where(safe, pGp, 1.0), 0.0)
        X += alpha * p
        r -= alpha * Gp
        rs_new = np.einsum("ij,ij->j", r, r)
        beta = np.where(rs > 0, rs_new / np.where(rs > 0, rs, 1.0), 0.0)
        p = r + beta * p
        rs = rs_new
    return X


def _solve_normal(G: np.ndarray, R: np.ndarray, damping: float,
                  cg_tol: float, cg_max_iter: int | None,
                  check_tol: float) -> np.ndarray:
    """Solve ``G @ X = R`` with ``G`` symmetric PSD (+ damping on the diagonal)."""
    k = G.shape[0]
    if damping > 0.0:
        G = G + damping * np.eye(k)
    try:
        factor = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
        X = scipy.linalg.cho_solve(factor, R, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        if damping == 0.0:
            raise SingularSystemError(
                "normal equations are numerically singular at damping=0; "
                "raise the damping parameter to regularize the solve"
            ) from exc
        X = _cg_solve(G, R, tol=cg_tol, max_iter=cg_max_iter or 10 * k)
    # Backward-error check: ~eps for any stable solve, large only on failure.
    scale = np.linalg.norm(G) * np.linalg.norm(X) + np.linalg.norm(R)
    resid = np.linalg.norm(G @ X - R)
    if not np.isfinite(X).all() or (scale > 0 and resid / scale > check_tol):
        raise SingularSystemError(
            f"least-squares solve failed verification (damping={damping!r}); "
            "raise the damping parameter"
        )
    return X


def solve_right(A, C, damping: float = 0.0, *,
                cg_tol: float = 1e-14, cg_max_iter: int | None = None,
                check_tol: float = 1e-8) -> np.ndarray:
    """Return ``W`` minimizing ``||A - W @ C||_F^2 + damping * ||W||_F^2``.

    Parameters
    ----------
    A : (m, n) array-like
        Target matrix.
    C : (k, n) array-like
        Regressor matrix; must share the column count of ``A``.
    damping : float
        Non-negative Tikhonov weight on ``||W||_F^2``.
    cg_tol, cg_max_iter, check_tol : float, int, float
        Tolerances for the conjugate-gradient fallback and the final
        backward-error verification.

    Returns
    -------
    (m, k) ndarray
    """
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    if A.shape[1] != C.shape[1]:
        raise DimensionMismatchError(
            f"A has {A.shape[1]} columns but C has {C.shape[1]}"
        )
    if damping < 0.0:
        raise ValueError("damping must be non-negative")
    G = C @ C.T
    R = C @ A.T
    Wt = _solve_normal(G, R, damping, cg_tol, cg_max_iter, check_tol)
    return np.ascontiguousarray(Wt.T)


def solve_left(A, C, damping: float = 0.0, *,
               cg_tol: float = 1e-14, cg_max_iter: int | None = None,
               check_tol: float = 1e-8) -> np.ndarray:
    """Return ``W`` minimizing ``||A - C @ W||_F^2 + damping * ||W||_F^2``.

    ``A`` is (m, n) and ``C`` is (m, k); the result is (k, n).
    """
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    if A.shape[0] != C.shape[0]:
        raise DimensionMismatchError(
            f"A has {A.shape[0]} rows but C has {C.shape[0]}"
        )
    if damping < 0.0:
        raise ValueError("damping must be non-negative")
    G = C.T @ C
    R = C.T @ A
    return np.ascontiguousarray(
        _solve_normal(G, R, damping, cg_tol, cg_max_iter, check_tol)
    )


def vstack(blocks) -> np.ndarray:
    """Stack matrices top to bottom, enforcing a shared column count."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("vstack requires at least one block")
    mats = [as_matrix(b, f"block {i}") for i, b in enumerate(blocks)]
    ncols = mats[0].shape[1]
    for i, m in enumerate(mats[1:], start=1):
        if m.shape[1] != ncols:
            raise DimensionMismatchError(
                f"block {i} has {m.shape[1]} columns, expected {ncols}"
            )
    return np.concatenate(mats, axis=0)
