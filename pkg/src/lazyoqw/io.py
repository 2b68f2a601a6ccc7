"""JSON and CSV serialisation of models and reports.

Complex matrices are written as arrays of rows whose entries are ``[re, im]``
pairs.  Floats go through ``json`` unchanged, which uses the shortest
round-tripping decimal representation.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import StructureError
from .model import EXACT_TOL, MicroscopicSpec, WalkModel

CLT_FORMAT = "clt-report/1"
TRAJ_FORMAT = "traj-report/1"


def matrix_to_json(a) -> list:
    a = np.asarray(a, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(rows, name="matrix") -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=np.float64)
    except (TypeError, ValueError):
        raise StructureError(f"{name}: entries must be [re, im] pairs") from None
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise StructureError(f"{name}: expected rows of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def model_to_dict(model: WalkModel, init_tau=None, init_site=None) -> dict:
    out = {
        "d": model.d,
        "D": model.D,
        "tol_norm": model.tol_norm,
        "ops": [matrix_to_json(a) for a in model.ops],
    }
    if model.name:
        out["name"] = model.name
    if model.micro is not None:
        out["micro"] = {
            "H0": matrix_to_json(model.micro.H0),
            "jumps": [matrix_to_json(q) for q in model.micro.jumps],
            "delta": model.micro.delta,
        }
    if init_tau is not None or init_site is not None:
        out["init"] = {}
        if init_tau is not None:
            out["init"]["tau"] = matrix_to_json(init_tau)
        if init_site is not None:
            out["init"]["site"] = [int(v) for v in np.atleast_1d(init_site)]
    return out


def model_from_dict(data: dict, *, check: bool = True, tol: float | None = None) -> WalkModel:
    """Rebuild a model; ``tol`` overrides the stored ``tol_norm``."""
    if not isinstance(data, dict):
        raise StructureError("model file must hold a JSON object")
    missing = {"d", "ops"} - set(data)
    if missing:
        raise StructureError(f"model file lacks field(s) {sorted(missing)}")
    ops = [matrix_from_json(a, name=f"A_{j}") for j, a in enumerate(data["ops"])]
    if "D" in data and any(a.shape != (data["D"], data["D"]) for a in ops):
        raise StructureError(f"operators do not match the declared coin dimension D={data['D']}")
    micro = None
    if "micro" in data:
        mc = data["micro"]
        micro = MicroscopicSpec(
            matrix_from_json(mc["H0"], name="H0"),
            tuple(matrix_from_json(q, name=f"Q_{k}") for k, q in enumerate(mc["jumps"], 1)),
            float(mc["delta"]),
        )
    tol_norm = float(data.get("tol_norm", EXACT_TOL)) if tol is None else float(tol)
    return WalkModel(int(data["d"]), tuple(ops), tol_norm=tol_norm, micro=micro,
                     name=data.get("name"), check=check)


def initial_from_dict(data: dict):
    """``(tau, site)`` overrides stored under ``init``; either may be ``None``."""
    init = data.get("init") or {}
    tau = matrix_from_json(init["tau"], name="init.tau") if "tau" in init else None
    site = np.asarray(init["site"], dtype=np.int64) if "site" in init else None
    return tau, site


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise StructureError(f"{path}: invalid JSON ({exc})") from None


def load_model(path, *, check: bool = True, tol: float | None = None) -> WalkModel:
    return model_from_dict(load_json(path), check=check, tol=tol)


def save_model(model: WalkModel, path, **kwargs) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, **kwargs), indent=2))


def clt_report_to_dict(report) -> dict:
    return {
        "format": CLT_FORMAT,
        "model": report.model_name,
        "method": report.method,
        "d": int(report.m.size),
        "D": int(report.rho_inf.shape[0]),
        "rho_inf": matrix_to_json(report.rho_inf),
        "m": [float(v) for v in report.m],
        "L_ops": [matrix_to_json(L) for L in report.L_ops],
        "C": [[float(v) for v in row] for row in report.C],
        "residuals": {
            "normalization": float(report.residuals["normalization"]),
            "steady_state": float(report.residuals["steady_state"]),
            "L": [float(r) for r in report.residuals["L"]],
        },
        "gauge": {"choice": report.gauge, "description": "Hermitised, then shifted so that Tr(L_i) = 0"},
    }


def clt_report_from_dict(data: dict):
    from .clt import CltReport

    if data.get("format") != CLT_FORMAT:
        raise StructureError(f"not a {CLT_FORMAT} document")
    return CltReport(
        rho_inf=matrix_from_json(data["rho_inf"]),
        m=np.asarray(data["m"], dtype=np.float64),
        L_ops=tuple(matrix_from_json(L) for L in data["L_ops"]),
        C=np.asarray(data["C"], dtype=np.float64),
        method=data["method"],
        residuals=data["residuals"],
        gauge=data["gauge"]["choice"],
        model_name=data.get("model"),
    )


def traj_stats_to_dict(stats) -> dict:
    def vec(a):
        return [float(v) for v in np.asarray(a).reshape(-1)]

    def mat(a):
        return [[float(v) for v in row] for row in np.atleast_2d(a)]

    return {
        "format": TRAJ_FORMAT,
        "model": stats.model_name,
        "seed": int(stats.seed),
        "n_traj": int(stats.n_traj),
        "n_steps": int(stats.n_steps),
        "m": vec(stats.m),
        "emp_mean": vec(stats.emp_mean),
        "mean_per_step": vec(stats.mean_per_step),
        "mean_stderr": vec(stats.mean_stderr),
        "emp_cov": mat(stats.emp_cov),
        "scaled_mean": vec(stats.scaled_mean),
        "scaled_cov": mat(stats.scaled_cov),
        "scaled_cov_stderr": mat(stats.scaled_cov_stderr),
        "stderr": vec(stats.stderr),
        "kurtosis": vec(stats.kurtosis),
        "n_batches": int(stats.n_batches),
    }
