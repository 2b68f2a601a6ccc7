"""Walk model: the homogeneous lazy open quantum walk on Z^d.

A model is the ordered list ``A_0, A_1..A_d, A_{d+1}..A_{2d}`` of coin
operators. ``A_0`` keeps the walker in place, ``A_i`` moves it along ``+e_i``
and ``A_{i+d}`` along ``-e_i``.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass, field
from typing import Sequence

import numpy as np

from ._validation import (
    check_density_matrix,
    check_operators,
    check_positive_int,
    check_square_matrix,
    hermitize,
    max_abs,
)
from .exceptions import NormalizationError, StructureError

EXACT_TOL = 1e-12


@dataclass(frozen=True)
class MicroscopicSpec:
    """Local Hamiltonian, jump operators and time step of a discretised GKSL walk.

    ``jumps`` holds ``Q_1..Q_2d`` in the same direction order as the walk
    operators; rates are absorbed into the operators.
    """

    H0: np.ndarray
    jumps: tuple
    delta: float

    def __post_init__(self):
        H0 = check_square_matrix(self.H0, name="H0")
        if max_abs(H0 - H0.conj().T) > 1e-12:
            raise StructureError("H0 must be Hermitian")
        jumps = list(self.jumps)
        if len(jumps) == 0 or len(jumps) % 2:
            raise StructureError(f"need 2d jump operators, got {len(jumps)}")
        jumps = tuple(
            check_square_matrix(q, name=f"Q_{k}", dim=H0.shape[0])
            for k, q in enumerate(jumps, start=1)
        )
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise StructureError(f"time step must be positive, got {self.delta}")
        for a in (H0, *jumps):
            a.setflags(write=False)
        object.__setattr__(self, "H0", H0)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def d(self) -> int:
        return len(self.jumps) // 2

    @property
    def D(self) -> int:
        return self.H0.shape[0]

    def net_drift_operators(self) -> list[np.ndarray]:
        """``Q_i^dag Q_i - Q_{i+d}^dag Q_{i+d}`` for each axis."""
        d, q = self.d, self.jumps
        return [q[i].conj().T @ q[i] - q[i + d].conj().T @ q[i + d] for i in range(d)]


@dataclass(frozen=True)
class WalkModel:
    """Immutable walk definition.

    Parameters
    ----------
    d : int
        Lattice dimension.
    ops : sequence of (D, D) arrays
        ``A_0 .. A_2d``.
    tol_norm : float
        Largest accepted entry of ``sum_j A_j^dag A_j - I``.
    micro : MicroscopicSpec, optional
        Set when the model was discretised from a GKSL generator.
    check : bool
        When false the completeness relation is not enforced at construction,
        which lets callers load and then report on a broken model.
    """

    d: int
    ops: tuple
    tol_norm: float = EXACT_TOL
    micro: MicroscopicSpec | None = None
    name: str | None = None
    check: InitVar[bool] = True
    _residual: float = field(init=False, repr=False, compare=False)

    def __post_init__(self, check):
        d = check_positive_int(self.d, "d")
        ops = check_operators(self.ops, d)
        if not (self.tol_norm >= 0):
            raise StructureError(f"tol_norm must be non-negative, got {self.tol_norm}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "tol_norm", float(self.tol_norm))
        if self.micro is not None and (self.micro.d != d or self.micro.D != ops[0].shape[0]):
            raise StructureError("microscopic generator does not match the walk dimensions")
        residual = normalization_residual(ops)
        object.__setattr__(self, "_residual", residual)
        if check and residual > self.tol_norm:
            raise NormalizationError(
                f"sum_j A_j^dag A_j deviates from I by {residual:.3e} "
                f"(tolerance {self.tol_norm:.1e})",
                residual=residual,
            )

    @property
    def D(self) -> int:
        return self.ops[0].shape[0]

    @property
    def n_ops(self) -> int:
        return 2 * self.d + 1

    @property
    def residual(self) -> float:
        return self._residual

    @property
    def displacements(self) -> np.ndarray:
        """Integer array of shape ``(2d+1, d)`` with row ``j`` equal to ``e_j``."""
        return displacement_vectors(self.d)

    def __eq__(self, other):
        if not isinstance(other, WalkModel):
            return NotImplemented
        return (
            self.d == other.d
            and self.D == other.D
            and all(np.array_equal(a, b) for a, b in zip(self.ops, other.ops))
        )

    __hash__ = object.__hash__


def displacement_vectors(d: int) -> np.ndarray:
    """``e_0 = 0``, ``e_i`` the unit vectors, ``e_{i+d} = -e_i``."""
    eye = np.eye(d, dtype=np.int64)
    return np.vstack([np.zeros((1, d), dtype=np.int64), eye, -eye])


def normalization_residual(ops: Sequence[np.ndarray]) -> float:
    D = ops[0].shape[0]
    total = sum(a.conj().T @ a for a in ops)
    return max_abs(total - np.eye(D))


def validate_normalization(model: WalkModel) -> float:
    """Return ``max |sum_j A_j^dag A_j - I|`` for ``model``.

    Raises :class:`NormalizationError` if it exceeds ``model.tol_norm``.
    """
    residual = normalization_residual(model.ops)
    if residual > model.tol_norm:
        raise NormalizationError(
            f"normalization residual {residual:.3e} exceeds {model.tol_norm:.1e}",
            residual=residual,
        )
    return residual


def apply_coin_map(model: WalkModel, tau) -> np.ndarray:
    """One application of the coin-space map ``tau -> sum_j A_j tau A_j^dag``."""
    tau = check_square_matrix(tau, name="tau", dim=model.D)
    out = np.zeros_like(tau)
    for a in model.ops:
        out += a @ tau @ a.conj().T
    return hermitize(out)


def apply_dual_map(model: WalkModel, x) -> np.ndarray:
    """Heisenberg-picture map ``X -> sum_j A_j^dag X A_j``."""
    x = check_square_matrix(x, name="X", dim=model.D)
    out = np.zeros_like(x)
    for a in model.ops:
        out += a.conj().T @ x @ a
    return out


def coin_state(mat, dim=None, tol=EXACT_TOL) -> np.ndarray:
    """Validate ``mat`` as a coin density matrix and return it as an array."""
    return check_density_matrix(mat, dim, tol=tol, name="coin state")


def maximally_mixed(D: int) -> np.ndarray:
    return np.eye(D, dtype=np.complex128) / D
