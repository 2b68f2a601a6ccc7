"""Central-limit analytics: steady state, drift, L operators and covariance.

Two routes are available.

``"kraus"``
    Works directly with the discrete coin map ``sum_j A_j . A_j^dag``.  This is
    exact for models whose operators satisfy the completeness relation to
    machine precision.
``"gksl"``
    For models discretised from a GKSL generator with time step ``delta``.
    The steady state, drift and L operators are computed from the generator and
    its Heisenberg-picture dual, and mean and covariance are reported to
    leading order in ``delta`` (both are linear in ``delta``; the ``m_i m_j``
    product is second order and dropped).

``"auto"`` selects ``"gksl"`` when the model carries a microscopic generator and
``"kraus"`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import check_square_matrix, hermitize, max_abs
from .exceptions import (
    InconsistentSystem,
    NonUniqueSteadyState,
    NoPhysicalFixedPoint,
    NumericalFailure,
    StructureError,
)
from .model import WalkModel, apply_coin_map, maximally_mixed
from .superop import (
    dual_superop,
    kraus_superop,
    lindblad_apply,
    lindblad_dual_superop,
    lindblad_superop,
    unvec,
    vec,
)

METHODS = ("auto", "kraus", "gksl")
EIG_CLUSTER_TOL = 1e-8
RESIDUAL_TOL = 1e-10
INCONSISTENT_TOL = 1e-8
ITERATION_DIM = 64  # D^2 above which the steady state is found by iteration


def resolve_method(model: WalkModel, method: str = "auto") -> str:
    if method not in METHODS:
        raise StructureError(f"unknown method {method!r}; choose from {METHODS}")
    if method == "auto":
        return "gksl" if model.micro is not None else "kraus"
    if method == "gksl" and model.micro is None:
        raise StructureError("the gksl route needs a model built from a microscopic generator")
    return method


def _fixed_point_tol(model: WalkModel) -> float:
    # a Delta-discretised model is trace preserving only up to its residual
    return RESIDUAL_TOL + model.D * model.residual


# ---------------------------------------------------------------------------
# steady state
# ---------------------------------------------------------------------------


def _physical_from_vector(v: np.ndarray, D: int) -> np.ndarray:
    X = unvec(v, D)
    tr = np.trace(X)
    if abs(tr) < 1e-12:
        raise NoPhysicalFixedPoint("fixed-point eigenvector is traceless")
    rho = hermitize(X / tr)
    if np.linalg.eigvalsh(rho).min() < -1e-8:
        raise NoPhysicalFixedPoint("fixed-point eigenvector is not positive semidefinite")
    return rho


def _select_eigvec(superop: np.ndarray, target: complex, D: int, what: str):
    evals, evecs = np.linalg.eig(superop)
    k = int(np.argmin(np.abs(evals - target)))
    multiplicity = int(np.sum(np.abs(evals - evals[k]) <= EIG_CLUSTER_TOL))
    if multiplicity > 1:
        raise NonUniqueSteadyState(
            f"{what} has a {multiplicity}-fold eigenvalue at {evals[k]:.6g}",
            multiplicity=multiplicity,
        )
    return _physical_from_vector(evecs[:, k], D)


def _iterate_fixed_point(model: WalkModel, rho0: np.ndarray, tol=1e-14, max_iter=1_000_000):
    rho = rho0
    for _ in range(max_iter):
        # averaging with the identity removes periodic peripheral eigenvalues
        nxt = 0.5 * (rho + apply_coin_map(model, rho))
        nxt /= np.trace(nxt)
        if max_abs(nxt - rho) < tol:
            return nxt
        rho = nxt
    raise NumericalFailure("fixed-point iteration did not converge")


def steady_state(model: WalkModel, method: str = "auto") -> np.ndarray:
    """Unique invariant coin state of the walk.

    Raises
    ------
    NonUniqueSteadyState
        The invariant eigenspace is more than one-dimensional.
    NoPhysicalFixedPoint
        The invariant eigenvector is not a positive, trace-normalisable matrix.
    """
    method = resolve_method(model, method)
    D = model.D
    if method == "gksl":
        micro = model.micro
        rho = _select_eigvec(lindblad_superop(micro.H0, micro.jumps), 0.0, D, "GKSL generator")
        if max_abs(lindblad_apply(micro.H0, micro.jumps, rho)) > RESIDUAL_TOL:
            raise NumericalFailure("GKSL steady state residual above tolerance")
        return rho
    if D * D > ITERATION_DIM:
        rho = _iterate_fixed_point(model, maximally_mixed(D))
        probe = np.zeros((D, D), dtype=np.complex128)
        probe[0, 0] = 1.0
        if max_abs(_iterate_fixed_point(model, probe) - rho) > 1e-8:
            raise NonUniqueSteadyState("fixed-point iteration depends on the start state")
    else:
        rho = _select_eigvec(kraus_superop(model.ops), 1.0, D, "coin map")
    if max_abs(apply_coin_map(model, rho) - rho) > _fixed_point_tol(model):
        raise NumericalFailure("steady state residual above tolerance")
    return rho


def steady_state_residual(model: WalkModel, rho: np.ndarray, method: str = "auto") -> float:
    method = resolve_method(model, method)
    if method == "gksl":
        return max_abs(lindblad_apply(model.micro.H0, model.micro.jumps, rho))
    return max_abs(apply_coin_map(model, rho) - rho)


# ---------------------------------------------------------------------------
# drift
# ---------------------------------------------------------------------------


def net_drift_operators(model: WalkModel) -> list[np.ndarray]:
    """``A_i^dag A_i - A_{i+d}^dag A_{i+d}`` for ``i = 1..d``."""
    a, d = model.ops, model.d
    return [a[i].conj().T @ a[i] - a[i + d].conj().T @ a[i + d] for i in range(1, d + 1)]


def jump_probabilities(model: WalkModel, rho) -> np.ndarray:
    """``Tr(A_j rho A_j^dag)`` for ``j = 0..2d``."""
    return np.array([np.trace(a @ rho @ a.conj().T).real for a in model.ops])


def mean_vector(model: WalkModel, rho_inf, method: str = "auto") -> np.ndarray:
    """Mean displacement per step in the steady state."""
    method = resolve_method(model, method)
    rho = check_square_matrix(rho_inf, name="rho_inf", dim=model.D)
    if method == "gksl":
        micro = model.micro
        return micro.delta * np.array(
            [np.trace(q @ rho).real for q in micro.net_drift_operators()]
        )
    return np.array([np.trace(a @ rho).real for a in net_drift_operators(model)])


# ---------------------------------------------------------------------------
# L operators
# ---------------------------------------------------------------------------


class LSolution(NamedTuple):
    L_ops: tuple
    residuals: tuple
    gauge: str


def _gauge_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Minimum-norm solution of ``M x = rhs`` with the known one-dimensional kernel removed.

    ``M`` annihilates ``vec(I)`` (exactly, or up to the discretisation
    residual), so the solve drops the smallest singular triple and inverts the
    rest.  A second near-zero singular value means the kernel is larger than
    the gauge freedom.
    """
    U, s, Vh = np.linalg.svd(M)
    if s.size > 1 and s[-2] <= EIG_CLUSTER_TOL * max(1.0, s[0]):
        raise InconsistentSystem("L system has a kernel larger than the identity direction")
    keep = s.size - 1
    return Vh[:keep].conj().T @ ((U[:, :keep].conj().T @ rhs) / s[:keep])


def _finish_L(x: np.ndarray, D: int) -> np.ndarray:
    L = hermitize(unvec(x, D))
    return L - (np.trace(L).real / D) * np.eye(D)


def solve_L(model: WalkModel, rho_inf, m, method: str = "auto") -> LSolution:
    """Solve ``L_i - Ldual(L_i) = Atilde_i - m_i I`` for every axis.

    The solutions are Hermitised and shifted to zero trace; they are unique
    up to multiples of the identity, which the covariance does not see.
    """
    method = resolve_method(model, method)
    D = model.D
    rho = check_square_matrix(rho_inf, name="rho_inf", dim=D)
    m = np.asarray(m, dtype=np.float64).reshape(-1)
    if m.size != model.d:
        raise StructureError(f"mean vector has length {m.size}, expected {model.d}")
    eye = np.eye(D)
    if method == "gksl":
        micro = model.micro
        M = -lindblad_dual_superop(micro.H0, micro.jumps)
        drivers = micro.net_drift_operators()
        shifts = m / micro.delta
        tol = INCONSISTENT_TOL
    else:
        M = np.eye(D * D) - dual_superop(model.ops)
        drivers = net_drift_operators(model)
        shifts = m
        tol = INCONSISTENT_TOL + 10 * model.residual
    L_ops, residuals = [], []
    for drv, shift in zip(drivers, shifts):
        rhs = vec(drv - shift * eye)
        L = _finish_L(_gauge_solve(M, rhs), D)
        res = max_abs(M @ vec(L) - rhs)
        if res > tol:
            raise InconsistentSystem(
                f"L equation residual {res:.3e} exceeds {tol:.1e}; steady state or mean is inconsistent",
                residual=res,
            )
        L_ops.append(L)
        residuals.append(res)
    return LSolution(tuple(L_ops), tuple(residuals), "trace-zero")


def l_equation_residual(model: WalkModel, L, m_i: float, axis: int, method: str = "auto") -> float:
    """Substitute ``L`` back into the defining equation for ``axis`` (0-based)."""
    method = resolve_method(model, method)
    D = model.D
    L = np.asarray(L, dtype=np.complex128)
    if method == "gksl":
        micro = model.micro
        lhs = -unvec(lindblad_dual_superop(micro.H0, micro.jumps) @ vec(L), D)
        rhs = micro.net_drift_operators()[axis] - (m_i / micro.delta) * np.eye(D)
    else:
        lhs = L - sum(a.conj().T @ L @ a for a in model.ops)
        rhs = net_drift_operators(model)[axis] - m_i * np.eye(D)
    return max_abs(lhs - rhs)


# ---------------------------------------------------------------------------
# covariance
# ---------------------------------------------------------------------------


def _covariance_terms(moves: Sequence[np.ndarray], d: int, rho, m, L_ops, mean_product: bool):
    """Covariance formula with ``moves[i]``/``moves[i+d]`` the +/- operators of axis ``i``."""
    def weighted(a, X=None):
        out = a @ rho @ a.conj().T
        return np.trace(out if X is None else out @ X)

    C = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            val = 0.0
            if i == j:
                val += weighted(moves[i]) + weighted(moves[i + d])
            if mean_product:
                val -= m[i] * m[j]
            val += (
                weighted(moves[i], L_ops[j])
                + weighted(moves[j], L_ops[i])
                - weighted(moves[i + d], L_ops[j])
                - weighted(moves[j + d], L_ops[i])
            )
            val -= m[i] * np.trace(rho @ L_ops[j]) + m[j] * np.trace(rho @ L_ops[i])
            C[i, j] = np.real(val)
    return 0.5 * (C + C.T)


def covariance(model: WalkModel, rho_inf, m, L_ops, method: str = "auto") -> np.ndarray:
    """CLT covariance matrix from the steady state, drift and L operators."""
    method = resolve_method(model, method)
    rho = check_square_matrix(rho_inf, name="rho_inf", dim=model.D)
    m = np.asarray(m, dtype=np.float64).reshape(-1)
    L_ops = [np.asarray(L, dtype=np.complex128) for L in L_ops]
    if len(L_ops) != model.d:
        raise StructureError(f"expected {model.d} L operators, got {len(L_ops)}")
    if method == "gksl":
        micro = model.micro
        return micro.delta * _covariance_terms(
            micro.jumps, model.d, rho, m / micro.delta, L_ops, mean_product=False
        )
    return _covariance_terms(model.ops[1:], model.d, rho, m, L_ops, mean_product=True)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CltReport:
    rho_inf: np.ndarray
    m: np.ndarray
    L_ops: tuple
    C: np.ndarray
    method: str
    residuals: dict = field(default_factory=dict)
    gauge: str = "trace-zero"
    model_name: str | None = None

    @property
    def d(self) -> int:
        return self.m.size

    def check_invariants(self, tol: float = RESIDUAL_TOL) -> "CltReport":
        if max_abs(self.C - self.C.T) > 1e-12:
            raise NumericalFailure("covariance is not symmetric")
        if np.linalg.eigvalsh(self.C).min() < -tol:
            raise NumericalFailure("covariance is not positive semidefinite")
        if np.any(np.abs(self.m) > 1 + 1e-12):
            raise NumericalFailure("mean displacement per step exceeds 1")
        for L in self.L_ops:
            if max_abs(L - L.conj().T) > tol:
                raise NumericalFailure("L operator is not Hermitian")
        return self


def clt_report(model: WalkModel, method: str = "auto") -> CltReport:
    """Run steady state, mean, L and covariance in sequence."""
    method = resolve_method(model, method)
    rho = steady_state(model, method)
    m = mean_vector(model, rho, method)
    sol = solve_L(model, rho, m, method)
    C = covariance(model, rho, m, sol.L_ops, method)
    residuals = {
        "normalization": model.residual,
        "steady_state": steady_state_residual(model, rho, method),
        "L": list(sol.residuals),
    }
    report = CltReport(rho, m, sol.L_ops, C, method, residuals, sol.gauge, model.name)
    return report.check_invariants()
