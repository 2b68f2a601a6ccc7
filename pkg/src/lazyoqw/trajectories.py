"""Quantum-trajectory unravelling of the walk.

Each trajectory is the classical Markov chain ``(tau_n, X_n)``: at every step
branch ``j`` is chosen with probability ``Tr(A_j tau A_j^dag)``, the coin state
becomes ``A_j tau A_j^dag`` renormalised, and the position moves by ``e_j``.

Trajectory ``k`` of a run with seed ``s`` draws its uniforms from its own
Philox stream keyed by ``(s, k)``, so a trajectory's path does not depend on
how the ensemble is split into blocks or across worker processes.  Single
trajectories and ensembles share the same vectorised kernel, which makes
:func:`run_trajectory` replay any member of an ensemble bitwise.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int, check_square_matrix, hermitize
from .exceptions import BudgetExceeded, NumericalFailure, StructureError
from .lattice import Distribution, LatticeState, position_distribution
from .model import WalkModel, coin_state, maximally_mixed
from .superop import kraus_superop

BRANCH_BUDGET = 10**7
DEFAULT_BLOCK = 4096
MIN_PROB = 1e-15


@dataclass(frozen=True)
class TrajectoryState:
    tau: np.ndarray
    x: np.ndarray
    n: int = 0

    def __post_init__(self):
        tau = coin_state(self.tau)
        x = np.asarray(self.x, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "n", check_positive_int(self.n, "n", allow_zero=True))

    @classmethod
    def initial(cls, model: WalkModel, tau=None, site=None) -> "TrajectoryState":
        tau = maximally_mixed(model.D) if tau is None else tau
        site = np.zeros(model.d, dtype=np.int64) if site is None else site
        return cls(tau, site)


def trajectory_rng(seed: int, k: int) -> np.random.Generator:
    """Independent generator for trajectory ``k`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(k)])))


def _check_init(model: WalkModel, init) -> TrajectoryState:
    if init is None:
        return TrajectoryState.initial(model)
    if not isinstance(init, TrajectoryState):
        init = TrajectoryState.initial(model, tau=init)
    if init.tau.shape[0] != model.D or init.x.size != model.d:
        raise StructureError("initial state dimensions do not match the model")
    return init


class _Kernel:
    """Row-vector form of all branch maps: ``vec(tau) @ S`` gives every ``vec(A_j tau A_j^dag)``."""

    def __init__(self, model: WalkModel):
        D, J = model.D, model.n_ops
        self.D, self.J = D, J
        self.S = np.hstack([kraus_superop([a]).T for a in model.ops])
        diag = np.arange(D) * (D + 1)
        self.trace_cols = (np.arange(J)[:, None] * D * D + diag[None]).reshape(-1)
        self.perm = np.arange(D * D).reshape(D, D).T.reshape(-1)
        self.disp = model.displacements

    def branch(self, v):
        """Candidates ``(B, J, D^2)`` and weights ``(B, J)`` for row-vectorised states ``v``."""
        cand = (v @ self.S).reshape(v.shape[0], self.J, self.D * self.D)
        probs = cand.reshape(v.shape[0], -1)[:, self.trace_cols].real
        probs = probs.reshape(v.shape[0], self.J, self.D).sum(axis=2)
        return cand, probs


def _advance(model: WalkModel, taus, xs, uniforms, *, record=False, accumulate=False, kernel=None):
    """Advance a block of trajectories through ``uniforms.shape[1]`` steps.

    ``taus`` (B, D, D) and ``xs`` (B, d) are updated in place.  Returns the
    recorded positions ``(B, n+1, d)`` when ``record`` is set and the running
    sum of coin states when ``accumulate`` is set.
    """
    k = kernel or _Kernel(model)
    B, n = uniforms.shape
    rows = np.arange(B)
    v = taus.reshape(B, -1).copy()
    path = np.empty((B, n + 1, model.d), dtype=np.int64) if record else None
    total = np.zeros_like(v) if accumulate else None
    if record:
        path[:, 0] = xs
    for step in range(n):
        cand, probs = k.branch(v)
        norm = probs.sum(axis=1)
        if np.any(norm < MIN_PROB):
            raise NumericalFailure("all branch probabilities vanish; coin state is corrupted")
        # renormalising by the total absorbs the O(delta^2) defect of discretised models
        cdf = np.cumsum(probs, axis=1) / norm[:, None]
        j = np.minimum((cdf < uniforms[:, step : step + 1]).sum(axis=1), k.J - 1)
        p = probs[rows, j]
        if np.any(p < MIN_PROB):
            raise NumericalFailure("selected branch has vanishing probability")
        v = cand[rows, j] / p[:, None]
        v = 0.5 * (v + v[:, k.perm].conj())
        xs += k.disp[j]
        if record:
            path[:, step + 1] = xs
        if accumulate:
            total += v
    taus[:] = v.reshape(taus.shape)
    if accumulate:
        total = total.reshape(taus.shape)
    return path, total


def _block_uniforms(seed, start, stop, n):
    return np.stack([trajectory_rng(seed, k).random(n) for k in range(start, stop)]) if stop > start else np.empty((0, n))


@dataclass(frozen=True)
class TrajectoryPath:
    taus: np.ndarray
    xs: np.ndarray
    seed: int
    traj_id: int


def sample_step(model: WalkModel, state: TrajectoryState, rng: np.random.Generator) -> TrajectoryState:
    """One jump of the trajectory chain, drawing a single uniform from ``rng``."""
    state = _check_init(model, state)
    taus = state.tau[None].copy()
    xs = state.x[None].copy()
    _advance(model, taus, xs, np.array([[rng.random()]]))
    return TrajectoryState(taus[0], xs[0], state.n + 1)


def jump_law(model: WalkModel, tau) -> np.ndarray:
    """Branch probabilities ``Tr(A_j tau A_j^dag)`` normalised to sum to one."""
    tau = check_square_matrix(tau, name="tau", dim=model.D)
    _, probs = _Kernel(model).branch(tau.reshape(1, -1))
    return probs[0] / probs[0].sum()


def sample_jumps(model: WalkModel, tau, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent branch indices drawn from the same coin state ``tau``.

    Uses one uniform per draw from ``rng`` and the same selection rule as
    :func:`sample_step`.
    """
    size = check_positive_int(size, "size")
    cdf = np.cumsum(jump_law(model, tau))
    u = rng.random(size)
    return np.minimum((cdf[None, :] < u[:, None]).sum(axis=1), model.n_ops - 1)


def run_trajectory(model: WalkModel, init=None, n: int = 0, seed: int = 0, traj_id: int = 0) -> TrajectoryPath:
    """Full path ``(tau_0..tau_n, x_0..x_n)`` of trajectory ``traj_id``."""
    init = _check_init(model, init)
    n = check_positive_int(n, "n", allow_zero=True)
    uniforms = trajectory_rng(seed, traj_id).random(n)[None]
    taus = init.tau[None].copy()
    xs = init.x[None].copy()
    kernel = _Kernel(model)
    tau_path = np.empty((n + 1, model.D, model.D), dtype=np.complex128)
    tau_path[0] = taus[0]
    path = np.empty((n + 1, model.d), dtype=np.int64)
    path[0] = xs[0]
    for step in range(n):
        _advance(model, taus, xs, uniforms[:, step : step + 1], kernel=kernel)
        tau_path[step + 1] = taus[0]
        path[step + 1] = xs[0]
    return TrajectoryPath(tau_path, path, int(seed), int(traj_id))


def ergodic_average(model: WalkModel, init=None, n: int = 1, seed: int = 0, traj_id: int = 0) -> np.ndarray:
    """Time average ``(1/n) sum_{k=1}^n tau_k`` along a single trajectory."""
    init = _check_init(model, init)
    n = check_positive_int(n, "n")
    taus = init.tau[None].copy()
    xs = init.x[None].copy()
    _, total = _advance(model, taus, xs, trajectory_rng(seed, traj_id).random(n)[None], accumulate=True)
    return hermitize(total[0] / n)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


def default_workers() -> int:
    env = os.environ.get("OQW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise StructureError(f"OQW_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _run_block(model, tau0, x0, n, seed, start, stop, record):
    B = stop - start
    taus = np.broadcast_to(tau0, (B,) + tau0.shape).copy()
    xs = np.broadcast_to(x0, (B, x0.size)).copy()
    path, _ = _advance(model, taus, xs, _block_uniforms(seed, start, stop, n), record=record)
    return xs, path


def simulate_positions(model: WalkModel, init=None, n_steps: int = 1, n_traj: int = 1, seed: int = 0,
                       *, block: int = DEFAULT_BLOCK, workers: int | None = None, record: bool = False):
    """Final positions ``(n_traj, d)`` and, if ``record``, full paths ``(n_traj, n+1, d)``.

    Blocks are dispatched to worker processes and collected in block order, so
    the output is identical for any ``workers`` and ``block``.
    """
    init = _check_init(model, init)
    n_steps = check_positive_int(n_steps, "n_steps", allow_zero=True)
    n_traj = check_positive_int(n_traj, "n_traj")
    block = check_positive_int(block, "block")
    workers = default_workers() if workers is None else check_positive_int(workers, "workers")
    bounds = [(s, min(s + block, n_traj)) for s in range(0, n_traj, block)]
    args = [(model, init.tau, init.x, n_steps, seed, s, e, record) for s, e in bounds]
    if workers == 1 or len(bounds) == 1:
        results = [_run_block(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
            results = list(pool.map(_run_block, *zip(*args)))
    finals = np.concatenate([r[0] for r in results])
    paths = np.concatenate([r[1] for r in results]) if record else None
    return finals, paths


def _batch_stderr(values: np.ndarray, stat, n_batches: int):
    """Batch-means standard error of ``stat`` over contiguous batches of ``values``."""
    N = values.shape[0]
    nb = min(n_batches, N // 2)
    if nb < 2:
        return None
    usable = (N // nb) * nb
    batches = np.stack([stat(b) for b in np.split(values[:usable], nb)])
    return batches.std(axis=0, ddof=1) / np.sqrt(nb)


@dataclass(frozen=True)
class TrajectoryEnsembleStats:
    n_traj: int
    n_steps: int
    seed: int
    m: np.ndarray
    emp_mean: np.ndarray
    emp_cov: np.ndarray
    scaled_mean: np.ndarray
    scaled_cov: np.ndarray
    stderr: np.ndarray
    scaled_cov_stderr: np.ndarray
    mean_stderr: np.ndarray
    kurtosis: np.ndarray
    n_batches: int
    model_name: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def mean_per_step(self) -> np.ndarray:
        return self.emp_mean / max(self.n_steps, 1)


def ensemble_stats(model: WalkModel, init=None, n_steps: int = 1, n_traj: int = 2, seed: int = 0, m=None,
                   *, n_batches: int = 100, block: int = DEFAULT_BLOCK, workers: int | None = None,
                   positions=None) -> TrajectoryEnsembleStats:
    """Moments of ``X_n`` over an ensemble and their CLT-scaled versions.

    ``scaled_cov`` is the covariance of ``(X_n - n m)/sqrt(n)``; ``stderr``
    holds batch-means standard errors of its diagonal and ``mean_stderr``
    those of the mean displacement per step.  Pass ``positions`` to reuse
    final positions from :func:`simulate_positions`.
    """
    if positions is None:
        positions, _ = simulate_positions(model, init, n_steps, n_traj, seed, block=block, workers=workers)
    X = np.asarray(positions, dtype=np.float64)
    n_traj, n_steps = X.shape[0], check_positive_int(n_steps, "n_steps")
    if m is None:
        from .clt import clt_report

        m = clt_report(model).m
    m = np.asarray(m, dtype=np.float64).reshape(-1)
    if m.size != model.d:
        raise StructureError(f"mean vector has length {m.size}, expected {model.d}")

    def cov(v):
        return np.atleast_2d(np.cov(v, rowvar=False, ddof=1))

    emp_mean = X.mean(axis=0)
    emp_cov = cov(X) if n_traj > 1 else np.zeros((model.d, model.d))
    scaled = (X - n_steps * m) / np.sqrt(n_steps)
    scaled_cov = emp_cov / n_steps

    cov_se = _batch_stderr(scaled, cov, n_batches)
    mean_se = _batch_stderr(X / n_steps, lambda b: b.mean(axis=0), n_batches)
    used = min(n_batches, n_traj // 2)
    if cov_se is None:
        # too few trajectories to batch: normal-theory fallbacks
        used = 1
        var = np.diag(scaled_cov)
        cov_se = np.diag(var * np.sqrt(2.0 / max(n_traj - 1, 1)))
        mean_se = np.sqrt(np.diag(emp_cov) / max(n_traj, 1)) / n_steps

    centred = scaled - scaled.mean(axis=0)
    m2 = np.mean(centred**2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        kurt = np.where(m2 > 0, np.mean(centred**4, axis=0) / m2**2, np.nan)

    return TrajectoryEnsembleStats(
        n_traj=n_traj,
        n_steps=n_steps,
        seed=int(seed),
        m=m,
        emp_mean=emp_mean,
        emp_cov=0.5 * (emp_cov + emp_cov.T),
        scaled_mean=scaled.mean(axis=0),
        scaled_cov=0.5 * (scaled_cov + scaled_cov.T),
        stderr=np.diag(cov_se).copy(),
        scaled_cov_stderr=cov_se,
        mean_stderr=mean_se,
        kurtosis=kurt,
        n_batches=used,
        model_name=model.name,
    )


def positions_csv(paths: np.ndarray, start_id: int = 0) -> str:
    """CSV dump ``traj_id,n,x_1..x_d`` of recorded paths of shape (K, n+1, d)."""
    K, steps, d = paths.shape
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["traj_id", "n"] + [f"x_{i}" for i in range(1, d + 1)])
    for k in range(K):
        for s in range(steps):
            w.writerow([start_id + k, s, *(int(v) for v in paths[k, s])])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# exhaustive enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BranchResult:
    distribution: Distribution
    state: LatticeState
    n_branches: int


def enumerate_branches(model: WalkModel, tau=None, n: int = 0, site=None,
                       budget: int = BRANCH_BUDGET) -> BranchResult:
    """Sum ``weight x outcome`` over every sequence of ``n`` Kraus branches.

    Raises
    ------
    BudgetExceeded
        If ``(2d+1)^n`` exceeds ``budget``.
    """
    n = check_positive_int(n, "n", allow_zero=True)
    count = model.n_ops**n
    if count > budget:
        raise BudgetExceeded(f"{model.n_ops}^{n} = {count} branches exceeds the budget of {budget}")
    tau = maximally_mixed(model.D) if tau is None else check_square_matrix(tau, name="tau", dim=model.D)
    x0 = np.zeros(model.d, dtype=np.int64) if site is None else np.asarray(site, dtype=np.int64).reshape(-1)
    taus = tau[None].copy()
    xs = x0[None].copy()
    kernel = _Kernel(model)
    for _ in range(n):
        cand, _ = kernel.branch(taus.reshape(taus.shape[0], -1))
        # branch-major order so that displacement j pairs with block j
        taus = np.swapaxes(cand, 0, 1).reshape(-1, model.D, model.D)
        xs = (model.displacements[:, None, :] + xs[None]).reshape(-1, model.d)
    weights = np.real(np.einsum("kii->k", taus))
    live = weights > 0
    outcomes = taus[live] / weights[live, None, None]
    contrib = weights[live, None, None] * outcomes
    uniq, inverse = np.unique(xs[live], axis=0, return_inverse=True)
    summed = np.zeros((uniq.shape[0], model.D, model.D), dtype=np.complex128)
    np.add.at(summed, inverse.reshape(-1), contrib)
    state = LatticeState(uniq, hermitize(summed), n)
    return BranchResult(position_distribution(state), state, count)
