"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import InvalidStateError, StructureError


def check_square_matrix(a, *, name="matrix", dim=None) -> np.ndarray:
    """Return ``a`` as a complex128 square array, raising on bad shapes."""
    try:
        arr = np.asarray(a, dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise StructureError(f"{name} is not a numeric array: {exc}") from exc
    if arr.ndim == 0 and (dim is None or dim == 1):
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise StructureError(f"{name} must be a square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise StructureError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise StructureError(f"{name} contains non-finite entries")
    return arr


def check_operators(ops, d: int) -> tuple[np.ndarray, ...]:
    """Validate the ordered operator list ``A_0 .. A_2d``.

    The first matrix fixes the coin dimension; every later one must agree.
    Errors name the offending index.
    """
    ops = list(ops)
    if len(ops) != 2 * d + 1:
        raise StructureError(
            f"expected {2 * d + 1} operators for d={d}, got {len(ops)}"
        )
    first = check_square_matrix(ops[0], name="A_0")
    D = first.shape[0]
    out = [first]
    for j, op in enumerate(ops[1:], start=1):
        out.append(check_square_matrix(op, name=f"A_{j}", dim=D))
    for op in out:
        op.setflags(write=False)
    return tuple(out)


def check_positive_int(value, name: str, *, allow_zero=False) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise StructureError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < 0 or (value == 0 and not allow_zero):
        bound = "non-negative" if allow_zero else "positive"
        raise StructureError(f"{name} must be {bound}, got {value}")
    return value


def check_density_matrix(rho, dim=None, *, tol=1e-12, name="state") -> np.ndarray:
    """Validate a unit-trace Hermitian positive semidefinite matrix."""
    rho = check_square_matrix(rho, name=name, dim=dim)
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise InvalidStateError(f"{name} is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise InvalidStateError(f"{name} has trace {np.trace(rho).real:.3g}, expected 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise InvalidStateError(f"{name} is not positive semidefinite")
    return rho


def hermitize(a: np.ndarray) -> np.ndarray:
    """Average with the adjoint over the last two axes."""
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0
