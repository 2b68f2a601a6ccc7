"""Concrete walks with known moments.

Includes the two-dimensional-coin line walk with ``1/sqrt(6)`` operators, a
builder that discretises a zero-temperature GKSL generator, the dissipative
walk on the line driven by a spin Hamiltonian (``circle``), and two
two-dimensional variants.  The ``*_analytic`` functions evaluate closed forms
for the drift and covariance and serve as independent oracles for the generic
CLT pipeline.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ._validation import max_abs
from .exceptions import NormalizationError, StructureError
from .model import EXACT_TOL, MicroscopicSpec, WalkModel, normalization_residual
from .superop import lindblad_apply

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=np.complex128)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
I2 = np.eye(2, dtype=np.complex128)


def paper_line_walk() -> WalkModel:
    """Line walk with ``D = 2`` and three operators of norm ``1/sqrt(6)``."""
    w = np.exp(1j * np.pi / 3)
    s = 1 / np.sqrt(6)
    a0 = s * np.array([[1, w**2], [1, -1]])
    a1 = s * np.array([[1, 1], [1, w]])
    a2 = s * np.array([[1, np.conj(w) ** 2], [1, np.conj(w)]])
    return WalkModel(1, (a0, a1, a2), name="paper-line")


def classical_walk(p0: float, p1: float, p2: float) -> WalkModel:
    """Scalar (``D = 1``) lazy walk that stays, steps right or left with the given probabilities."""
    ops = [np.sqrt(np.array([[p]], dtype=np.float64)) for p in (p0, p1, p2)]
    return WalkModel(1, ops, name="classical")


def lazy_identity(d: int = 1, D: int = 2) -> WalkModel:
    """Walk that never moves: ``A_0 = I`` and every other operator zero."""
    zero = np.zeros((D, D))
    return WalkModel(d, (np.eye(D),) + (zero,) * (2 * d), name="lazy")


# ---------------------------------------------------------------------------
# microscopic builder
# ---------------------------------------------------------------------------


def microscopic_residual_bound(spec: MicroscopicSpec) -> float:
    """Upper bound ``Delta^2 (|K|/2 + |H|)^2`` on the normalization residual, ``K = sum Q^dag Q``."""
    K = sum(q.conj().T @ q for q in spec.jumps)
    return spec.delta**2 * (np.linalg.norm(K, 2) / 2 + np.linalg.norm(spec.H0, 2)) ** 2


def build_microscopic(spec: MicroscopicSpec, tol: float | None = None, name: str | None = None) -> WalkModel:
    """Discretise a GKSL generator with time step ``delta``.

    ``A_j = sqrt(delta) Q_j`` for the moves and
    ``A_0 = I - (delta/2) sum_j Q_j^dag Q_j - i H0 delta`` for the stay
    operator.  The completeness relation then holds up to ``O(delta^2)``.

    Parameters
    ----------
    tol : float, optional
        Accepted normalization residual; defaults to
        :func:`microscopic_residual_bound` (plus rounding slack), which the
        construction never exceeds.
    """
    D = spec.D
    K = sum(q.conj().T @ q for q in spec.jumps)
    a0 = np.eye(D) - 0.5 * spec.delta * K - 1j * spec.delta * spec.H0
    ops = (a0,) + tuple(np.sqrt(spec.delta) * q for q in spec.jumps)
    if tol is None:
        tol = microscopic_residual_bound(spec) + EXACT_TOL
    residual = normalization_residual(ops)
    if residual > tol:
        raise NormalizationError(
            f"normalization residual {residual:.3e} exceeds {tol:.1e} at delta={spec.delta}",
            residual=residual,
        )
    return WalkModel(spec.d, ops, tol_norm=tol, micro=spec, name=name)


def residual_constant(model: WalkModel) -> float:
    """``c`` in ``residual = c * delta^2`` for a microscopically built model."""
    if model.micro is None:
        raise StructureError("model was not built from a microscopic generator")
    return model.residual / model.micro.delta**2


def gksl_residual(model: WalkModel, rho) -> float:
    """Max-norm of the GKSL generator applied to ``rho``."""
    if model.micro is None:
        raise StructureError("model was not built from a microscopic generator")
    rho = np.asarray(rho, dtype=np.complex128)
    return max_abs(lindblad_apply(model.micro.H0, model.micro.jumps, rho))


def _spin_hamiltonian(lam: float, n_vec) -> np.ndarray:
    nx, ny, nz = n_vec
    return lam * (nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z)


def _check_unit(n_vec) -> tuple:
    v = np.asarray(n_vec, dtype=np.float64).reshape(-1)
    if v.size != 3 or abs(v @ v - 1.0) > 1e-12:
        raise StructureError(f"n_vec must be a real unit 3-vector, got {n_vec}")
    return tuple(float(x) for x in v)


def _check_nonneg(**values):
    for key, val in values.items():
        if not (np.isfinite(val) and val >= 0):
            raise StructureError(f"{key} must be non-negative, got {val}")


def _check_delta(delta):
    if not (np.isfinite(delta) and delta > 0):
        raise StructureError(f"delta must be positive, got {delta}")


# ---------------------------------------------------------------------------
# walk on the line driven by a spin Hamiltonian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleParams:
    gamma: float = 0.1
    nbar: float = 1.0
    lam: float = 0.3
    n_vec: tuple = (0.0, 1.0, 0.0)
    delta: float = 0.05

    def __post_init__(self):
        _check_nonneg(gamma=self.gamma, nbar=self.nbar)
        _check_delta(self.delta)
        object.__setattr__(self, "n_vec", _check_unit(self.n_vec))

    def to_dict(self) -> dict:
        return asdict(self)


def circle_spec(p: CircleParams) -> MicroscopicSpec:
    jumps = (
        np.sqrt(p.gamma * (p.nbar + 1)) * SIGMA_MINUS,
        np.sqrt(p.gamma * p.nbar) * SIGMA_PLUS,
    )
    return MicroscopicSpec(_spin_hamiltonian(p.lam, p.n_vec), jumps, p.delta)


def build_circle(p: CircleParams) -> WalkModel:
    """``B`` (forward), ``C`` (backward) and the stay operator ``A`` written out explicitly."""
    g, nb, lam, dl = p.gamma, p.nbar, p.lam, p.delta
    B = np.sqrt(dl * g * (nb + 1)) * SIGMA_MINUS
    C = np.sqrt(dl * g * nb) * SIGMA_PLUS
    A = (
        I2
        - 0.5 * dl * (g * (nb + 1) * SIGMA_PLUS @ SIGMA_MINUS + g * nb * SIGMA_MINUS @ SIGMA_PLUS)
        - 1j * dl * _spin_hamiltonian(lam, p.n_vec)
    )
    spec = circle_spec(p)
    return WalkModel(1, (A, B, C), tol_norm=microscopic_residual_bound(spec) + EXACT_TOL,
                     micro=spec, name="circle")


def circle_analytic(p: CircleParams) -> tuple[float, float]:
    """Closed-form drift ``m`` and variance ``sigma^2`` to leading order in ``delta``."""
    g, nb, lam, dl = p.gamma, p.nbar, p.lam, p.delta
    nz = p.n_vec[2]
    tp, tm = 1 + nz**2, 1 - nz**2
    s1, s2 = 1 + nb, 1 + 2 * nb
    base = g**2 * s2**2 + 8 * tp * lam**2
    m = dl * 4 * tm * g * lam**2 / base
    bracket = (
        s2**6 * g**4
        + 8 * s2**2 * g**2 * lam**2 * (8 * tp * s1 * nb + 5 * nz**2 - 1)
        + 64 * lam**4 * (s2**2 + 4 * nz**2 * (s2 + 2 * nb**2) + nz**4 * (4 * s1 * nb - 1))
    )
    sigma2 = 4 * dl * tm * g * lam**2 / (s2 * base**3) * bracket
    return m, sigma2


# ---------------------------------------------------------------------------
# two-dimensional walks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Example2Params:
    """Dissipative hopping along x, decoherent (``sigma_z``) hopping along y."""

    gamma: float = 0.1
    gamma_y_plus: float = 0.5
    gamma_y_minus: float = 0.5
    nbar: float = 1.0
    lam: float = 0.3
    n_vec: tuple = (0.0, 1.0, 0.0)
    delta: float = 0.05

    def __post_init__(self):
        _check_nonneg(gamma=self.gamma, gamma_y_plus=self.gamma_y_plus,
                      gamma_y_minus=self.gamma_y_minus, nbar=self.nbar)
        _check_delta(self.delta)
        object.__setattr__(self, "n_vec", _check_unit(self.n_vec))

    def to_dict(self) -> dict:
        return asdict(self)


def example2_spec(p: Example2Params) -> MicroscopicSpec:
    jumps = (
        np.sqrt(p.gamma * (p.nbar + 1)) * SIGMA_MINUS,
        np.sqrt(p.gamma_y_plus) * SIGMA_Z,
        np.sqrt(p.gamma * p.nbar) * SIGMA_PLUS,
        np.sqrt(p.gamma_y_minus) * SIGMA_Z,
    )
    return MicroscopicSpec(_spin_hamiltonian(p.lam, p.n_vec), jumps, p.delta)


def build_example2(p: Example2Params) -> WalkModel:
    """Operators in the order ``A, B_x, B_y, C_x, C_y``.

    The occupation factor on the y rates is absorbed into ``gamma_y_plus`` and
    ``gamma_y_minus``, which keeps the stay operator consistent with them.
    """
    g, nb, dl = p.gamma, p.nbar, p.delta
    gp, gm = p.gamma_y_plus, p.gamma_y_minus
    Bx = np.sqrt(dl * g * (nb + 1)) * SIGMA_MINUS
    By = np.sqrt(dl * gp) * SIGMA_Z
    Cx = np.sqrt(dl * g * nb) * SIGMA_PLUS
    Cy = np.sqrt(dl * gm) * SIGMA_Z
    A = (
        I2
        - 0.5 * dl * (g * (nb + 1) * SIGMA_PLUS @ SIGMA_MINUS + g * nb * SIGMA_MINUS @ SIGMA_PLUS
                      + (gp + gm) * I2)
        - 1j * dl * _spin_hamiltonian(p.lam, p.n_vec)
    )
    spec = example2_spec(p)
    return WalkModel(2, (A, Bx, By, Cx, Cy), tol_norm=microscopic_residual_bound(spec) + EXACT_TOL,
                     micro=spec, name="example2")


def example2_analytic(p: Example2Params) -> tuple[np.ndarray, np.ndarray]:
    g, nb, lam, dl = p.gamma, p.nbar, p.lam, p.delta
    nz = p.n_vec[2]
    s1, s2 = 1 + nb, 1 + 2 * nb
    rp, rm = p.gamma_y_plus + p.gamma_y_minus, p.gamma_y_plus - p.gamma_y_minus
    T = g * s2 + 4 * rp
    ezm, ezp = nz**2 - 1, nz**2 + 1
    tm = 1 - nz**2

    mx = 4 * g * dl * lam**2 * tm * T / (8 * lam**2 * tm * T + g * s2 * (16 * lam**2 * nz**2 + T**2))
    my = dl * rm

    pre = -4 * g * dl * lam**2 * T * ezm / (g * s2 * T**2 + 8 * lam**2 * (g * s2 * ezp - 4 * rp * ezm)) ** 3
    bracket = (
        64 * lam**4 * (
            -8 * g * rp * ezm * ((8 * nb * s1 - s2**2 + 1) * nz**2 + s2**2)
            + g**2 * s2 * (s2**2 * (5 * nz**4 - 2 * nz**2 + 1) - 2 * (8 * nb * s1 + 3) * nz**2 * ezm)
            + 16 * rp**2 * s2 * ezm**2
        )
        + 8 * g * lam**2 * (4 * rp + g * s2) ** 2 * (
            g * s2 * ((8 * nb * (2 * nb - s1 + 2) + 5) * nz**2 + 8 * nb * s1 - 1)
            - 4 * rp * (8 * nb * s1 + 1) * ezm
        )
        + g**2 * s2**3 * (4 * rp + g * s2) ** 4
    )
    cxx = pre * bracket
    cyy = dl * rp
    cxy = (
        16 * g**2 * dl * lam**2 * ezm * rm * s2
        * (-16 * lam**2 * nz**2 + 16 * rp**2 + 8 * g * s2 * rp + g**2 * s2**2)
        / (8 * lam**2 * (2 * g * nz**2 * s2 - nz**2 * T + T) + g * s2 * T**2) ** 2
    )
    return np.array([mx, my]), np.array([[cxx, cxy], [cxy, cyy]])


@dataclass(frozen=True)
class Example3Params:
    """Dissipative hopping along both axes with ``H0 = lam sigma_y``."""

    gamma_x: float = 0.55
    gamma_y: float = 0.45
    nbar: float = 1.0
    lam: float = 0.3
    delta: float = 0.05
    n_vec: tuple = (0.0, 1.0, 0.0)

    def __post_init__(self):
        _check_nonneg(gamma_x=self.gamma_x, gamma_y=self.gamma_y, nbar=self.nbar)
        _check_delta(self.delta)
        if tuple(float(v) for v in self.n_vec) != (0.0, 1.0, 0.0):
            raise StructureError("this model fixes n_vec = (0, 1, 0)")
        object.__setattr__(self, "n_vec", (0.0, 1.0, 0.0))

    def to_dict(self) -> dict:
        return asdict(self)


def example3_spec(p: Example3Params) -> MicroscopicSpec:
    nb = p.nbar
    jumps = (
        np.sqrt(p.gamma_x * (nb + 1)) * SIGMA_MINUS,
        np.sqrt(p.gamma_y * (nb + 1)) * SIGMA_MINUS,
        np.sqrt(p.gamma_x * nb) * SIGMA_PLUS,
        np.sqrt(p.gamma_y * nb) * SIGMA_PLUS,
    )
    return MicroscopicSpec(p.lam * SIGMA_Y, jumps, p.delta)


def build_example3(p: Example3Params) -> WalkModel:
    gx, gy, nb, dl = p.gamma_x, p.gamma_y, p.nbar, p.delta
    Bx = np.sqrt(dl * gx * (nb + 1)) * SIGMA_MINUS
    By = np.sqrt(dl * gy * (nb + 1)) * SIGMA_MINUS
    Cx = np.sqrt(dl * gx * nb) * SIGMA_PLUS
    Cy = np.sqrt(dl * gy * nb) * SIGMA_PLUS
    A = (
        I2
        - 0.5 * dl * ((gx + gy) * (nb + 1) * SIGMA_PLUS @ SIGMA_MINUS
                      + (gx + gy) * nb * SIGMA_MINUS @ SIGMA_PLUS)
        - 1j * dl * p.lam * SIGMA_Y
    )
    spec = example3_spec(p)
    return WalkModel(2, (A, Bx, By, Cx, Cy), tol_norm=microscopic_residual_bound(spec) + EXACT_TOL,
                     micro=spec, name="example3")


def example3_analytic(p: Example3Params) -> tuple[np.ndarray, np.ndarray]:
    gx, gy, nb, lam, dl = p.gamma_x, p.gamma_y, p.nbar, p.lam, p.delta
    s1, s2 = 1 + nb, 1 + 2 * nb
    r = gx + gy
    den = 8 * lam**2 + r**2 * s2**2
    m = np.array([4 * gx * dl * lam**2 / den, 4 * gy * dl * lam**2 / den])

    def diag(ga):
        return dl / den**2 * (
            -2 * nb * r * s2**2 * ga**2 * (4 * lam**2 + (nb + 1) * r**2 * s2)
            + 8 * lam**2 * r * ga**2 * (-4 * lam**2 * (4 * nb * (nb + 2) + 3) - nb * r**2 * s2**3) / den
            + s1 * ga * den * (4 * lam**2 + nb * r**2 * s2)
            + nb * ga * (4 * lam**2 + r**2 * s1 * s2) * den
        )

    cxy = -2 * dl * gx * gy * (
        8 * lam**4 * (8 * nb**2 + 8 * nb + 6) * r * s2
        + nb * r**5 * s1 * s2**5
        + 16 * lam**2 * nb * r**3 * s1 * s2**3
    ) / den**3
    return m, np.array([[diag(gx), cxy], [cxy, diag(gy)]])


@dataclass(frozen=True)
class ClassicalParams:
    p0: float = 0.5
    p1: float = 0.25
    p2: float = 0.25


@dataclass(frozen=True)
class LazyParams:
    d: int = 1
    D: int = 2


ZOO = {
    "paper-line": (None, lambda _p: paper_line_walk()),
    "classical": (ClassicalParams, lambda p: classical_walk(p.p0, p.p1, p.p2)),
    "lazy": (LazyParams, lambda p: lazy_identity(p.d, p.D)),
    "circle": (CircleParams, build_circle),
    "example2": (Example2Params, build_example2),
    "example3": (Example3Params, build_example3),
}


def zoo_model(name: str, params: dict | None = None) -> WalkModel:
    """Build a named walk; ``params`` overrides the default parameter values."""
    if name not in ZOO:
        raise StructureError(f"unknown model {name!r}; known: {sorted(ZOO)}")
    cls, builder = ZOO[name]
    if cls is None:
        if params:
            raise StructureError(f"model {name!r} takes no parameters")
        return builder(None)
    try:
        p = cls(**(params or {}))
    except TypeError as exc:
        raise StructureError(f"bad parameters for {name!r}: {exc}") from None
    return builder(p)


def zoo_analytic(name: str, params: dict | None = None):
    """Closed-form ``(m, C)`` for a named walk as arrays of shape ``(d,)`` and ``(d, d)``."""
    if name == "circle":
        m, s2 = circle_analytic(CircleParams(**(params or {})))
        return np.array([m]), np.array([[s2]])
    if name == "example2":
        return example2_analytic(Example2Params(**(params or {})))
    if name == "example3":
        return example3_analytic(Example3Params(**(params or {})))
    raise StructureError(f"no closed form for model {name!r}")
