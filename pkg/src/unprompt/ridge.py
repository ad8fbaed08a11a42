"""Closed-form single-row unlearning for ridge regression.

Compares exact unlearning (drop row ``i`` and refit) with surrogate
unlearning (replace row ``i`` by an edited pair and refit).  Both have
closed forms in terms of ``A = X^T X + penalty * I`` and the original
solution ``theta* = A^{-1} X^T y``; :func:`retrain_oracle` refits from
scratch and is the ground truth for both.

The ridge penalty is called ``penalty`` throughout so it cannot be
confused with the diffusion timestep weight.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEdit, DimensionMismatch, LeverageSingular
from .linalg import LEVERAGE_TOL, cholesky, cho_solve, spd_solve


@dataclass(frozen=True)
class RidgeProblem:
    X: np.ndarray
    y: np.ndarray
    penalty: float = 1.0
    allow_zero_penalty: bool = False

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        n, d = X.shape
        if n < 1 or d < 1:
            raise DimensionMismatch("need at least one row and one column")
        if y.shape[0] != n:
            raise DimensionMismatch(f"X has {n} rows but y has {y.shape[0]} entries")
        if self.penalty < 0:
            raise ValueError("penalty must be non-negative")
        if self.penalty == 0:
            if not self.allow_zero_penalty:
                raise ValueError("penalty must be > 0 (pass allow_zero_penalty=True to override)")
            warnings.warn("penalty=0: A may be singular", RuntimeWarning, stacklevel=2)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def gram(self) -> np.ndarray:
        """``A = X^T X + penalty * I``."""
        return self.X.T @ self.X + self.penalty * np.eye(self.d)


class EditMode(enum.Enum):
    REMOVE = "remove"
    REPLACE = "replace"


@dataclass(frozen=True)
class RowEdit:
    index: int
    mode: EditMode = EditMode.REMOVE
    x_new: np.ndarray | None = None
    y_new: float | None = None

    @classmethod
    def remove(cls, index: int) -> "RowEdit":
        return cls(index, EditMode.REMOVE)

    @classmethod
    def replace(cls, index: int, x_new, y_new: float) -> "RowEdit":
        return cls(index, EditMode.REPLACE, np.asarray(x_new, dtype=float).reshape(-1), float(y_new))

    def validate(self, p: RidgeProblem) -> None:
        if not 0 <= self.index < p.n:
            raise IndexError(f"row {self.index} out of range for n={p.n}")
        if self.mode is EditMode.REMOVE and p.n < 2:
            raise ValueError("cannot remove the only row")
        if self.mode is EditMode.REPLACE:
            if self.x_new is None or self.y_new is None:
                raise ValueError("Replace requires both x_new and y_new")
            if self.x_new.shape != (p.d,):
                raise DimensionMismatch(f"x_new must have length {p.d}")


def ridge_fit(p: RidgeProblem) -> np.ndarray:
    """``theta* = A^{-1} X^T y``."""
    return spd_solve(p.gram(), p.X.T @ p.y)


def retrain_oracle(p: RidgeProblem, e: RowEdit) -> np.ndarray:
    """Refit from scratch on the edited dataset."""
    e.validate(p)
    X, y = p.X.copy(), p.y.copy()
    if e.mode is EditMode.REMOVE:
        X = np.delete(X, e.index, axis=0)
        y = np.delete(y, e.index)
    else:
        X[e.index] = e.x_new
        y[e.index] = e.y_new
    return ridge_fit(RidgeProblem(X, y, p.penalty, p.allow_zero_penalty))


def _leverage_terms(p: RidgeProblem, i: int):
    A = p.gram()
    L = cholesky(A)
    theta = cho_solve(L, p.X.T @ p.y)
    xi = p.X[i]
    Ainv_x = cho_solve(L, xi)
    return A, theta, xi, Ainv_x, float(xi @ Ainv_x)


def leverage(p: RidgeProblem, i: int) -> float:
    """``x_i^T A^{-1} x_i``."""
    return _leverage_terms(p, i)[-1]


def exact_unlearn(p: RidgeProblem, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Remove row ``i`` without refitting.

    ``delta = (x_i^T theta* - y_i) / (1 - x_i^T A^{-1} x_i) * A^{-1} x_i``
    Returns ``(delta, theta* + delta)``.
    """
    RowEdit.remove(i).validate(p)
    _, theta, xi, Ainv_x, lev = _leverage_terms(p, i)
    denom = 1.0 - lev
    if abs(denom) < LEVERAGE_TOL:
        raise LeverageSingular(f"row {i} has leverage {lev!r}")
    delta = (float(xi @ theta) - p.y[i]) / denom * Ainv_x
    return delta, theta + delta


def surrogate_unlearn(p: RidgeProblem, e: RowEdit) -> tuple[np.ndarray, np.ndarray]:
    """Replace row ``i`` by ``(x_i', y_i')`` without refitting from scratch.

    With ``r = x_i' - x_i`` and ``s = y_i' - y_i`` the normal equations of
    the edited problem are ``(A + M) theta = X^T y + B`` where
    ``M = x_i r^T + r x_i^T + r r^T`` and ``B = x_i s + r y_i'``.
    Returns ``(delta, theta* + delta)``.
    """
    if e.mode is not EditMode.REPLACE:
        raise ValueError("surrogate_unlearn needs a Replace edit")
    e.validate(p)
    A = p.gram()
    Xty = p.X.T @ p.y
    theta = spd_solve(A, Xty)
    xi, yi = p.X[e.index], p.y[e.index]
    r = e.x_new - xi
    s = e.y_new - yi
    M = np.outer(xi, r) + np.outer(r, xi) + np.outer(r, r)
    B = xi * s + r * e.y_new
    delta = spd_solve(A + M, Xty + B) - theta
    return delta, theta + delta


def preservation_ratio(p: RidgeProblem, i: int, y_new: float) -> float:
    """``||theta~ - theta*|| / ||theta+ - theta*||`` for a label-only edit.

    Equals ``|x_i^T theta* - y_i| / (|y_new - y_i| * |1 - leverage_i|)``;
    values above 1 mean the surrogate edit moves the solution less than
    removing the row.
    """
    RowEdit.remove(i).validate(p)
    _, theta, xi, _, lev = _leverage_terms(p, i)
    if not np.any(xi):
        raise DegenerateEdit("x_i = 0")
    if y_new == p.y[i]:
        raise DegenerateEdit("y_new equals y_i")
    if abs(1.0 - lev) < LEVERAGE_TOL:
        raise LeverageSingular(f"row {i} has leverage {lev!r}")
    return abs(float(xi @ theta) - p.y[i]) / (abs(y_new - p.y[i]) * abs(1.0 - lev))


def rel_err(a, b) -> float:
    """``||a - b|| / (1 + ||b||)``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / (1.0 + np.linalg.norm(b)))


def ridge_demo_sweep(
    p: RidgeProblem, i: int, y_grid, x_new=None
) -> list[dict[str, float]]:
    """Sweep surrogate labels and record both parameter shifts.

    Each row: ``y_new``, ``exact_shift`` = ||theta~ - theta*||,
    ``surrogate_shift`` = ||theta+ - theta*||, ``ratio`` = exact/surrogate.
    """
    exact_delta, _ = exact_unlearn(p, i)
    exact_shift = float(np.linalg.norm(exact_delta))
    xi = p.X[i] if x_new is None else np.asarray(x_new, dtype=float)
    rows = []
    for y_new in y_grid:
        delta, _ = surrogate_unlearn(p, RowEdit.replace(i, xi, y_new))
        sur = float(np.linalg.norm(delta))
        rows.append(
            {
                "y_new": float(y_new),
                "exact_shift": exact_shift,
                "surrogate_shift": sur,
                "ratio": exact_shift / sur if sur > 0 else float("inf"),
            }
        )
    return rows


def find_preserving_surrogate(rows: list[dict[str, float]], factor: float = 0.5) -> dict | None:
    """First sweep row whose surrogate shift is below ``factor`` times the
    exact-unlearning shift."""
    for row in rows:
        if 0 < row["surrogate_shift"] < factor * row["exact_shift"]:
            return row
    return None


def default_demo_problem() -> tuple[RidgeProblem, int]:
    """1-D instance used by the ridge demo: two points, drop/edit the first."""
    return RidgeProblem(np.array([[1.0], [2.0]]), np.array([1.0, 3.0]), penalty=0.1), 0
