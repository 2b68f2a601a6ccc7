"""Estimator-style wrappers around the CLT and trajectory engines.

Both classes follow the scikit-learn conventions: constructor arguments are
stored verbatim (so ``get_params``/``set_params``/``clone`` work), ``fit``
takes a :class:`~lazyoqw.model.WalkModel` and sets trailing-underscore
attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .clt import METHODS, clt_report
from .exceptions import StructureError
from .model import WalkModel
from .trajectories import ensemble_stats


def _check_model(model) -> WalkModel:
    if not isinstance(model, WalkModel):
        raise StructureError(f"expected a WalkModel, got {type(model).__name__}")
    return model


class LazyWalkCLT(BaseEstimator):
    """Gaussian limit of a lazy walk: drift ``mean_`` and covariance ``covariance_``.

    Parameters
    ----------
    method : {"auto", "kraus", "gksl"}
        Route used for the analytics; see :mod:`lazyoqw.clt`.
    """

    def __init__(self, method: str = "auto"):
        self.method = method

    def fit(self, model, y=None):
        if self.method not in METHODS:
            raise StructureError(f"method must be one of {METHODS}, got {self.method!r}")
        report = clt_report(_check_model(model), self.method)
        self.report_ = report
        self.rho_inf_ = report.rho_inf
        self.mean_ = report.m
        self.L_ops_ = report.L_ops
        self.covariance_ = report.C
        self.residuals_ = report.residuals
        self.method_ = report.method
        self.n_dims_ = model.d
        return self

    def _fitted(self):
        if not hasattr(self, "report_"):
            raise NotFittedError("call fit before using this estimator")

    def predict_moments(self, n: int):
        """Mean and covariance of ``X_n`` to leading order in ``n``."""
        self._fitted()
        return n * self.mean_, n * self.covariance_

    def gaussian_density(self, points, n: int):
        """Limiting Gaussian density of ``X_n`` at ``points`` of shape ``(K, d)``."""
        self._fitted()
        mu, cov = self.predict_moments(n)
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        diff = pts - mu
        inv = np.linalg.inv(cov)
        norm = np.sqrt((2 * np.pi) ** self.n_dims_ * np.linalg.det(cov))
        return np.exp(-0.5 * np.einsum("ki,ij,kj->k", diff, inv, diff)) / norm


class TrajectoryEnsemble(BaseEstimator):
    """Monte Carlo estimate of the CLT moments from seeded quantum trajectories."""

    def __init__(self, n_steps: int = 1000, n_traj: int = 10_000, seed: int = 0,
                 n_batches: int = 100, workers: int | None = None, m=None):
        self.n_steps = n_steps
        self.n_traj = n_traj
        self.seed = seed
        self.n_batches = n_batches
        self.workers = workers
        self.m = m

    def fit(self, model, y=None, init=None):
        stats = ensemble_stats(
            _check_model(model), init, self.n_steps, self.n_traj, self.seed, self.m,
            n_batches=self.n_batches, workers=self.workers,
        )
        self.stats_ = stats
        self.mean_ = stats.mean_per_step
        self.covariance_ = stats.scaled_cov
        self.stderr_ = stats.stderr
        self.mean_stderr_ = stats.mean_stderr
        return self
