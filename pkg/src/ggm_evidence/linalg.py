"""Dense symmetric / SPD matrix primitives.

All functions take and return plain ``numpy`` arrays and never mutate their
inputs. Index sets are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, IndexOutOfRange, NotPositiveDefinite

# Cholesky pivots below this fraction of the largest diagonal entry are
# treated as numerically singular.
PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class SpdCheckResult:
    is_spd: bool
    chol_factor: Optional[np.ndarray] = None


def symmetrize(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def _square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, raising ``NotPositiveDefinite`` on failure.

    Only the lower triangle of ``a`` is read.
    """
    a = _square(a)
    if a.shape[0] == 0:
        return np.zeros((0, 0))
    scale = float(np.max(np.diag(a)))
    if not np.isfinite(scale) or scale <= 0.0:
        raise NotPositiveDefinite("non-positive diagonal")
    try:
        low = np.linalg.cholesky(np.tril(a) + np.tril(a, -1).T)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    piv = np.diag(low) ** 2
    if np.any(piv <= PIVOT_RTOL * scale) or not np.all(np.isfinite(low)):
        raise NotPositiveDefinite("Cholesky pivot below relative threshold")
    return low


def spd_check(a: np.ndarray) -> SpdCheckResult:
    try:
        low = cholesky(a)
    except NotPositiveDefinite:
        return SpdCheckResult(False, None)
    return SpdCheckResult(True, low)


def spd_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix through its Cholesky factor."""
    low = cholesky(a)
    eye = np.eye(a.shape[0])
    linv = solve_triangular(low, eye, lower=True)
    return symmetrize(linv.T @ linv)


def logdet_spd(a: np.ndarray) -> float:
    low = cholesky(a)
    return 2.0 * float(np.sum(np.log(np.diag(low))))


def schur_remove_last(omega: np.ndarray) -> np.ndarray:
    """Schur complement of the last diagonal entry.

    Returns ``omega[:-1, :-1] - w w^T / omega[-1, -1]`` with ``w`` the
    off-diagonal part of the last column.
    """
    omega = _square(omega)
    j = omega.shape[0]
    if j < 2:
        raise DimensionMismatch("need dimension >= 2")
    wjj = omega[-1, -1]
    if not wjj > 0.0:
        raise NotPositiveDefinite(f"last diagonal entry {wjj} is not positive")
    col = omega[:-1, -1]
    return symmetrize(omega[:-1, :-1] - np.outer(col, col) / wjj)


def submatrix(a: np.ndarray, idx: Sequence[int]) -> np.ndarray:
    """Rows and columns of ``a`` selected by a strictly increasing index set."""
    a = _square(a)
    idx = np.asarray(list(idx), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise IndexOutOfRange(f"indices {idx.tolist()} out of range for dim {a.shape[0]}")
    if idx.size > 1 and np.any(np.diff(idx) <= 0):
        raise IndexOutOfRange("index set must be strictly increasing")
    return a[np.ix_(idx, idx)].copy()


def random_spd(p: int, rng: np.random.Generator, cond: float = 50.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues spread over [1, cond]."""
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), size=p))
    return symmetrize((q * eig) @ q.T)
