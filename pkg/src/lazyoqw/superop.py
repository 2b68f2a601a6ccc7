"""Row-stacking vectorisation and superoperator matrices.

With row stacking, ``vec(A X B) = (A kron B^T) vec(X)``.  All superoperators
in this package use that convention, so ``vec`` is simply a C-order reshape.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def vec(a: np.ndarray) -> np.ndarray:
    """Stack the rows of ``a`` into one vector."""
    return np.asarray(a).reshape(-1)


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec` for square matrices."""
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim)


def kraus_superop(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix of ``X -> sum_j A_j X A_j^dagger``, i.e. ``sum_j A_j kron conj(A_j)``."""
    return sum(np.kron(a, a.conj()) for a in ops)


def dual_superop(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix of ``X -> sum_j A_j^dagger X A_j``, i.e. ``sum_j A_j^dagger kron A_j^T``."""
    return sum(np.kron(a.conj().T, a.T) for a in ops)


def lindblad_superop(H: np.ndarray, jumps: Sequence[np.ndarray]) -> np.ndarray:
    """GKSL generator ``-i[H, .] + sum_j D(Q_j)`` as a matrix."""
    eye = np.eye(H.shape[0])
    out = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for q in jumps:
        k = q.conj().T @ q
        out = out + np.kron(q, q.conj()) - 0.5 * np.kron(k, eye) - 0.5 * np.kron(eye, k.T)
    return out


def lindblad_dual_superop(H: np.ndarray, jumps: Sequence[np.ndarray]) -> np.ndarray:
    """Heisenberg-picture generator ``i[H, .] + sum_j (Q^dag . Q - {Q^dag Q, .}/2)``."""
    eye = np.eye(H.shape[0])
    out = 1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for q in jumps:
        k = q.conj().T @ q
        out = out + np.kron(q.conj().T, q.T) - 0.5 * np.kron(k, eye) - 0.5 * np.kron(eye, k.T)
    return out


def lindblad_apply(H: np.ndarray, jumps: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Apply the GKSL generator directly, without building the superoperator."""
    out = -1j * (H @ rho - rho @ H)
    for q in jumps:
        qd = q.conj().T
        k = qd @ q
        out = out + q @ rho @ qd - 0.5 * (k @ rho + rho @ k)
    return out
