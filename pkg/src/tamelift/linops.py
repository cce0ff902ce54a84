"""Matrices of linear maps on ``m x m`` matrices (row-major vectorization)."""

from __future__ import annotations

import numpy as np


def left(A: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> A X``."""
    m = A.shape[0]
    return np.kron(A, np.eye(m, dtype=np.int64))


def right(B: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> X B``."""
    m = B.shape[0]
    return np.kron(np.eye(m, dtype=np.int64), B.T)


def transpose(m: int) -> np.ndarray:
    """Permutation matrix of ``X -> X^T``."""
    P = np.zeros((m * m, m * m), dtype=np.int64)
    for r in range(m):
        for c in range(m):
            P[c * m + r, r * m + c] = 1
    return P


def commutator(N: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> X N - N X``."""
    return right(N) - left(N)


def skew_form(J: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> X^T J + J X``."""
    m = J.shape[0]
    return transpose(m) @ left(J.T) + left(J)


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1)


def unvec(v: np.ndarray, m: int) -> np.ndarray:
    return np.asarray(v).reshape(m, m)
