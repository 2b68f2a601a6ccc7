"""Independent reference implementations used by the tests.

Nothing here imports the package's numerical kernels; each function works
from the defining formulas with plain numpy loops.
"""

from __future__ import annotations

import itertools

import numpy as np


def random_kraus(rng, d: int, D: int, lazy_weight: float | None = None):
    """Random exactly trace-preserving family ``A_0..A_2d`` from an isometry."""
    J = 2 * d + 1
    G = rng.normal(size=(J * D, D)) + 1j * rng.normal(size=(J * D, D))
    V, _ = np.linalg.qr(G)
    ops = [V[j * D:(j + 1) * D] for j in range(J)]
    return ops


def displacement(j: int, d: int) -> np.ndarray:
    e = np.zeros(d, dtype=int)
    if 1 <= j <= d:
        e[j - 1] = 1
    elif j > d:
        e[j - d - 1] = -1
    return e


def brute_force_sites(ops, d: int, tau0, n: int) -> dict:
    """Sum over every branch sequence of length ``n`` of the unnormalised outcome."""
    sites: dict = {}
    for seq in itertools.product(range(len(ops)), repeat=n):
        tau = np.array(tau0, dtype=complex)
        x = np.zeros(d, dtype=int)
        for j in seq:
            tau = ops[j] @ tau @ ops[j].conj().T
            x = x + displacement(j, d)
        key = tuple(int(v) for v in x)
        sites[key] = sites.get(key, 0) + tau
    return sites


def convolution_power(step: np.ndarray, n: int) -> np.ndarray:
    """``n``-fold convolution of a step law on offsets ``-1, 0, +1`` (given as [p_-1, p_0, p_+1])."""
    out = np.array([1.0])
    for _ in range(n):
        out = np.convolve(out, step)
    return out


def pinv_L(ops, rho, m_i, i: int, d: int):
    """Pseudoinverse solution of the vectorised L equation, Hermitised and made traceless."""
    D = ops[0].shape[0]
    M = np.eye(D * D, dtype=complex)
    for a in ops:
        M -= np.kron(a.conj().T, a.T)
    At = ops[i].conj().T @ ops[i] - ops[i + d].conj().T @ ops[i + d]
    x = np.linalg.pinv(M, rcond=1e-10) @ (At - m_i * np.eye(D)).reshape(-1)
    L = x.reshape(D, D)
    L = (L + L.conj().T) / 2
    return L - np.trace(L) / D * np.eye(D)


def fixed_point_by_power(ops, iters: int = 20000):
    """Steady state by repeated application of the averaged coin map."""
    D = ops[0].shape[0]
    rho = np.eye(D, dtype=complex) / D
    for _ in range(iters):
        rho = 0.5 * (rho + sum(a @ rho @ a.conj().T for a in ops))
    return rho / np.trace(rho)


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
