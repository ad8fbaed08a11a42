"""Dense SPD solves, the rank-one (Sherman-Morrison) inverse, and a
central finite-difference gradient used as a test oracle."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, LeverageSingular, NonFiniteLoss, NotSPD

SYM_TOL = 1e-10
LEVERAGE_TOL = 1e-10


def _check_square(A: np.ndarray, n: int) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] != n:
        raise DimensionMismatch(f"matrix is {A.shape[0]}x{A.shape[0]} but vector has length {n}")


def cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive-definite ``A``."""
    A = np.asarray(A, dtype=float)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if not np.allclose(A, A.T, rtol=0.0, atol=SYM_TOL * scale):
        raise NotSPD("matrix is not symmetric")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotSPD("non-positive pivot during Cholesky factorization") from exc
    if not np.all(np.diag(L) > 0):
        raise NotSPD("non-positive pivot during Cholesky factorization")
    return L


def cho_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    z = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, z, lower=False, check_finite=False)


def spd_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive-definite ``A``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_square(A, b.shape[0])
    return cho_solve(cholesky(A), b)


def rank_one_inverse_apply(A, x) -> np.ndarray:
    """Return ``(A - x x^T)^{-1} x`` as ``A^{-1}x / (1 - x^T A^{-1} x)``.

    Raises LeverageSingular when ``x^T A^{-1} x`` is within 1e-10 of one.
    """
    x = np.asarray(x, dtype=float)
    Ainv_x = spd_solve(A, x)
    denom = 1.0 - float(x @ Ainv_x)
    if abs(denom) < LEVERAGE_TOL:
        raise LeverageSingular(f"1 - x^T A^-1 x = {denom:.3e}")
    return Ainv_x / denom


def finite_diff_gradient(
    loss_fn: Callable[[np.ndarray], float],
    params,
    step: float = 1e-5,
    coords: Sequence[int] | None = None,
) -> np.ndarray:
    """Central differences ``(f(p + h e_i) - f(p - h e_i)) / 2h``.

    With ``coords`` only those coordinates are probed and the result has
    ``len(coords)`` entries.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    p = np.array(params, dtype=float)
    idx = range(p.size) if coords is None else coords
    out = np.empty(len(idx))
    for k, i in enumerate(idx):
        orig = p[i]
        p[i] = orig + step
        fp = float(loss_fn(p))
        p[i] = orig - step
        fm = float(loss_fn(p))
        p[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteLoss(f"non-finite loss probing coordinate {i}")
        out[k] = (fp - fm) / (2.0 * step)
    return out
