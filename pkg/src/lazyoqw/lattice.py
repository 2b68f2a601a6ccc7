"""Exact density-matrix evolution of the walk on the lattice.

States are position-diagonal, ``rho = sum_x tau_x (x) |x><x|``, and are stored
sparsely as a sorted coordinate array plus a stack of coin blocks.  Sites whose
block has trace below ``CLIP_TRACE`` are dropped after every step.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ._validation import check_positive_int, check_square_matrix, hermitize
from .exceptions import InvalidStateError, StructureError
from .model import WalkModel, displacement_vectors, maximally_mixed
from .superop import kraus_superop

CLIP_TRACE = 1e-15


def _as_coords(coords, d=None) -> np.ndarray:
    arr = np.asarray(coords, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if d in (None, 1) else arr.reshape(1, -1)
    if arr.ndim != 2 or (d is not None and arr.shape[1] != d):
        raise StructureError(f"coordinates must have shape (K, {d}), got {arr.shape}")
    return arr


def _lexsort_unique(coords: np.ndarray):
    """Unique rows in lexicographic order, with the inverse map."""
    uniq, inverse = np.unique(coords, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


@dataclass(frozen=True)
class LatticeState:
    """Position-diagonal walker state.

    ``coords`` is an ``(K, d)`` integer array in lexicographic order and
    ``taus[k]`` the unnormalised coin block at ``coords[k]``.
    """

    coords: np.ndarray
    taus: np.ndarray
    step_count: int = 0

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=np.complex128)
        if taus.ndim != 3 or taus.shape[1] != taus.shape[2]:
            raise StructureError(f"coin blocks must have shape (K, D, D), got {taus.shape}")
        coords = _as_coords(self.coords)
        if coords.shape[0] != taus.shape[0]:
            raise StructureError("coords and taus disagree on the number of sites")
        if coords.shape[0] > 1:
            order = np.lexsort(coords.T[::-1])
            coords, taus = coords[order], taus[order]
            if np.any(np.all(coords[1:] == coords[:-1], axis=1)):
                raise StructureError("duplicate lattice sites")
        check_positive_int(self.step_count, "step_count", allow_zero=True)
        coords.setflags(write=False)
        taus.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "step_count", int(self.step_count))

    @classmethod
    def point(cls, tau, site=None, d: int = 1) -> "LatticeState":
        """Walker localised at ``site`` (origin by default) with coin ``tau``."""
        tau = check_square_matrix(tau, name="tau")
        site = np.zeros(d, dtype=np.int64) if site is None else np.asarray(site, dtype=np.int64)
        return cls(site.reshape(1, -1), tau[None])

    @classmethod
    def initial(cls, model: WalkModel, tau=None, site=None) -> "LatticeState":
        """Default start ``(I/D) (x) |0><0|`` unless ``tau``/``site`` override it."""
        tau = maximally_mixed(model.D) if tau is None else tau
        return cls.point(tau, site, d=model.d)

    @classmethod
    def from_sites(cls, sites: Mapping, step_count: int = 0) -> "LatticeState":
        keys = list(sites)
        if not keys:
            raise StructureError("a lattice state needs at least one site")
        coords = np.array([np.atleast_1d(k) for k in keys], dtype=np.int64)
        taus = np.stack([np.asarray(sites[k], dtype=np.complex128) for k in keys])
        return cls(coords, taus, step_count)

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def D(self) -> int:
        return self.taus.shape[1]

    @property
    def sites(self) -> dict:
        """``{tuple(x): tau_x}`` view of the support."""
        return {tuple(int(v) for v in c): t for c, t in zip(self.coords, self.taus)}

    def traces(self) -> np.ndarray:
        return np.real(np.einsum("kii->k", self.taus))

    def total_trace(self) -> float:
        return float(np.sum(self.traces()))

    def validate(self, tol: float = 1e-10) -> "LatticeState":
        if abs(self.total_trace() - 1.0) > tol:
            raise InvalidStateError(f"total trace {self.total_trace():.12g} differs from 1")
        herm = np.max(np.abs(self.taus - np.conj(np.swapaxes(self.taus, 1, 2))), initial=0.0)
        if herm > tol:
            raise InvalidStateError("coin blocks are not Hermitian")
        if np.linalg.eigvalsh(hermitize(self.taus)).min() < -tol:
            raise InvalidStateError("coin blocks are not positive semidefinite")
        return self


@dataclass(frozen=True)
class Distribution:
    """Position distribution ``p(x) = Tr(tau_x)`` in lexicographic site order."""

    coords: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        coords = _as_coords(self.coords)
        probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if coords.shape[0] != probs.size:
            raise StructureError("coords and probs disagree on the number of sites")
        coords.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "probs", probs)

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in c): float(p) for c, p in zip(self.coords, self.probs)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x_{i}" for i in range(1, self.d + 1)] + ["p"])
        for c, p in zip(self.coords, self.probs):
            writer.writerow([int(v) for v in c] + [repr(float(p))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Distribution":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        d = len(header) - 1
        if header != [f"x_{i}" for i in range(1, d + 1)] + ["p"]:
            raise StructureError(f"unexpected distribution header {header}")
        coords = np.array([[int(v) for v in r[:d]] for r in body], dtype=np.int64).reshape(-1, d)
        probs = np.array([float(r[d]) for r in body])
        return cls(coords, probs)


def _clip(coords, taus, traces):
    keep = traces >= CLIP_TRACE
    if keep.all():
        return coords, taus
    if not keep.any():
        # never drop the whole support
        keep[np.argmax(traces)] = True
    return coords[keep], taus[keep]


def step_lattice(model: WalkModel, state: LatticeState) -> LatticeState:
    """One application of the walk map: ``tau'_x = sum_j A_j tau_{x-e_j} A_j^dag``."""
    if state.d != model.d or state.D != model.D:
        raise StructureError("state dimensions do not match the model")
    disp = model.displacements
    new_coords = (state.coords[None, :, :] + disp[:, None, :]).reshape(-1, model.d)
    contrib = np.stack([a @ state.taus @ a.conj().T for a in model.ops]).reshape(-1, model.D, model.D)
    uniq, inverse = _lexsort_unique(new_coords)
    out = np.zeros((uniq.shape[0], model.D, model.D), dtype=np.complex128)
    # np.add.at accumulates in index order, so the combine order is fixed (j-major)
    np.add.at(out, inverse, contrib)
    out = hermitize(out)
    coords, taus = _clip(uniq, out, np.real(np.einsum("kii->k", out)))
    return LatticeState(coords, taus, state.step_count + 1)


def _evolve_dense_1d(model: WalkModel, state: LatticeState, n: int) -> LatticeState:
    D = model.D
    lo, hi = int(state.coords[0, 0]), int(state.coords[-1, 0])
    window = np.zeros((hi - lo + 1, D * D), dtype=np.complex128)
    window[state.coords[:, 0] - lo] = state.taus.reshape(-1, D * D)
    # row-stacked vec(A tau A^dag) = (A kron conj A) vec(tau); rows act from the right
    s_stay, s_fwd, s_back = (kraus_superop([a]).T.copy() for a in model.ops)
    perm = np.arange(D * D).reshape(D, D).T.reshape(-1)
    diag = np.arange(D) * (D + 1)
    for _ in range(n):
        W = window.shape[0]
        new = np.zeros((W + 2, D * D), dtype=np.complex128)
        new[1 : W + 1] += window @ s_stay
        new[2 : W + 2] += window @ s_fwd
        new[0:W] += window @ s_back
        new = 0.5 * (new + new[:, perm].conj())
        lo -= 1
        tr = new[:, diag].real.sum(axis=1)
        big = np.nonzero(tr >= CLIP_TRACE)[0]
        if big.size:
            first, last = big[0], big[-1]
            if first > 0 or last < new.shape[0] - 1:
                new = new[first : last + 1]
                lo += int(first)
        window = new
    tr = window[:, diag].real.sum(axis=1)
    coords = np.arange(lo, lo + window.shape[0], dtype=np.int64).reshape(-1, 1)
    coords, taus = _clip(coords, window.reshape(-1, D, D), tr)
    return LatticeState(coords, taus, state.step_count + n)


def evolve(model: WalkModel, init: LatticeState, n: int, *, dense: bool | None = None) -> LatticeState:
    """``n``-fold composition of :func:`step_lattice`.

    For ``d = 1`` a dense sliding window is used unless ``dense=False``; both
    paths apply the same per-site arithmetic and clipping threshold.
    """
    n = check_positive_int(n, "n", allow_zero=True)
    if init.d != model.d or init.D != model.D:
        raise StructureError("state dimensions do not match the model")
    if n == 0:
        return init
    if dense is None:
        dense = model.d == 1
    if dense:
        if model.d != 1:
            raise StructureError("the dense path only supports d = 1")
        return _evolve_dense_1d(model, init, n)
    state = init
    for _ in range(n):
        state = step_lattice(model, state)
    return state


def position_distribution(state: LatticeState) -> Distribution:
    return Distribution(state.coords, state.traces())


def distribution_moments(dist: Distribution):
    """Exact mean vector and covariance matrix of ``dist``."""
    p = dist.probs
    x = dist.coords.astype(np.float64)
    total = p.sum()
    mean = p @ x / total
    centred = x - mean
    cov = (centred * p[:, None]).T @ centred / total
    return mean, 0.5 * (cov + cov.T)


def apply_full_map(model: WalkModel, blocks: Mapping) -> dict:
    """Apply the walk map to a state that may carry position coherences.

    ``blocks`` maps ``(x, y)`` site pairs to coin blocks of
    ``rho = sum tau_{x,y} (x) |x><y|``.  The full operators
    ``A_j (x) |i+e_j><i|`` are built densely on the finite set of sites
    involved, applied as an ordinary Kraus map, and the result is cut back
    into blocks.  Blocks that come out exactly zero are omitted.
    """
    d, D = model.d, model.D
    disp = displacement_vectors(d)
    src_sites = {tuple(int(v) for v in np.atleast_1d(k)) for pair in blocks for k in pair}
    all_sites = sorted({tuple(np.add(s, e)) for s in src_sites for e in disp} | src_sites)
    index = {s: k for k, s in enumerate(all_sites)}
    P = len(all_sites)
    rho = np.zeros((D * P, D * P), dtype=np.complex128)
    for (x, y), tau in blocks.items():
        ket = np.zeros((P, P))
        ket[index[tuple(np.atleast_1d(x))], index[tuple(np.atleast_1d(y))]] = 1.0
        rho += np.kron(np.asarray(tau, dtype=np.complex128), ket)
    out = np.zeros_like(rho)
    for i in sorted(src_sites):
        for a, e in zip(model.ops, disp):
            shift = np.zeros((P, P))
            shift[index[tuple(np.add(i, e))], index[i]] = 1.0
            m = np.kron(a, shift)
            out += m @ rho @ m.conj().T
    result = {}
    view = out.reshape(D, P, D, P)
    for x in all_sites:
        for y in all_sites:
            block = view[:, index[x], :, index[y]]
            if np.any(block != 0):
                result[(x, y)] = block.copy()
    return result


def c_sim(model: WalkModel, n: int, init: LatticeState | None = None) -> np.ndarray:
    """Finite-``n`` covariance estimate ``Cov(X_{n+1}) / n`` from exact evolution.

    The extra step is the counting convention under which the published
    reference values were produced: the walk is seeded at the origin and then
    stepped ``n`` times *after* a first application of the map.  Use
    ``distribution_moments`` directly for ``Cov(X_n)/n``.
    """
    n = check_positive_int(n, "n")
    init = LatticeState.initial(model) if init is None else init
    state = evolve(model, init, n + 1)
    return distribution_moments(position_distribution(state))[1] / n
