"""Command line front end.

Exit status: 0 success, 1 usage error, 2 validation failure, 3 non-unique
steady state, 4 numerical residual failure (including a failed comparison).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .clt import METHODS, clt_report
from .exceptions import OQWError, StructureError
from .io import (
    clt_report_to_dict,
    initial_from_dict,
    load_json,
    model_from_dict,
    traj_stats_to_dict,
)
from .lattice import LatticeState, distribution_moments, evolve, position_distribution
from .model import normalization_residual
from .trajectories import TrajectoryState, ensemble_stats, positions_csv, simulate_positions
from .zoo import ZOO, zoo_analytic, zoo_model

EXIT_USAGE = 1
EXIT_COMPARE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--model", required=True,
                   help=f"zoo name ({', '.join(sorted(ZOO))}) or path to a model JSON file")
    p.add_argument("--params", help="JSON file with parameters for a zoo model")
    p.add_argument("--tol", type=float, help="normalization tolerance override")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lazyoqw", description="Lazy open quantum walks on Z^d.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check the Kraus completeness relation")
    _common(p)

    p = sub.add_parser("evolve", help="exact density-matrix evolution")
    _common(p)
    p.add_argument("--steps", required=True, help="step count, or comma-separated list of counts")
    p.add_argument("--dist-out", help="write the distribution CSV of the last step count here")

    p = sub.add_parser("clt", help="steady state, drift, L operators and covariance")
    _common(p)
    p.add_argument("--method", choices=METHODS, default="auto")
    p.add_argument("--steps", type=int, default=1000, help="n for the Gaussian grid (csv format)")
    p.add_argument("--grid", type=int, default=81, help="grid points per axis (csv format)")

    p = sub.add_parser("traj", help="quantum-trajectory ensemble statistics")
    _common(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--trajectories", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=METHODS, default="auto", help="route for the centring drift")
    p.add_argument("--dump", help="write per-trajectory positions as CSV to this path")

    p = sub.add_parser("compare", help="analytic vs evolved vs sampled moments")
    _common(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--trajectories", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=METHODS, default="auto")
    p.add_argument("--sigmas", type=float, default=4.0,
                   help="trajectory agreement threshold in standard errors")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _load(args, *, check=True):
    """Model plus initial state overrides and the zoo params used (if any)."""
    path = Path(args.model)
    params = load_json(args.params) if args.params else None
    if args.model in ZOO:
        model = zoo_model(args.model, params)
        if args.tol is not None and model.residual > args.tol and check:
            raise StructureError(f"normalization residual {model.residual:.3e} exceeds --tol {args.tol:.1e}")
        return model, (None, None), params
    if not path.exists():
        raise UsageError(f"--model {args.model!r} is neither a zoo name nor an existing file")
    if params:
        raise UsageError("--params only applies to zoo models")
    data = load_json(path)
    return model_from_dict(data, check=check, tol=args.tol), initial_from_dict(data), None


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _steps(spec: str) -> list[int]:
    try:
        steps = [int(s) for s in str(spec).split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--steps expects integers, got {spec!r}") from None
    if not steps or min(steps) < 0:
        raise UsageError("--steps must be non-negative")
    return steps


def gaussian_grid_csv(m, C, n: int, points: int = 81, width: float = 4.0) -> str:
    """Density of ``N(n m, n C)`` on a regular grid, one row per point."""
    m, C = np.asarray(m, float), np.atleast_2d(np.asarray(C, float))
    d = m.size
    if d > 2:
        raise UsageError("the Gaussian grid is only emitted for d <= 2")
    mu, cov = n * m, n * C
    sd = np.sqrt(np.diag(cov))
    axes = [np.linspace(mu[i] - width * sd[i], mu[i] + width * sd[i], points) for i in range(d)]
    mesh = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    diff = mesh - mu
    dens = np.exp(-0.5 * np.einsum("ki,ij,kj->k", diff, np.linalg.inv(cov), diff))
    dens /= np.sqrt((2 * np.pi) ** d * np.linalg.det(cov))
    lines = [",".join([f"x_{i}" for i in range(1, d + 1)] + ["density"])]
    lines += [",".join([repr(float(v)) for v in row] + [repr(float(p))]) for row, p in zip(mesh, dens)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    model, _, _ = _load(args, check=False)
    residual = normalization_residual(model.ops)
    tol = model.tol_norm
    ok = residual <= tol
    report = {"model": model.name, "d": model.d, "D": model.D, "residual": residual, "tol": tol, "ok": ok}
    if model.micro is not None:
        report["delta"] = model.micro.delta
        report["residual_over_delta2"] = residual / model.micro.delta**2
    if args.format == "csv":
        text = "residual,tol,ok\n" + f"{residual!r},{tol!r},{int(ok)}\n"
    else:
        text = _dump_json(report)
    _emit(text, args.out)
    return 0 if ok else 2


def cmd_evolve(args) -> int:
    model, (tau, site), _ = _load(args)
    steps = sorted(set(_steps(args.steps)))
    state = LatticeState.initial(model, tau, site)
    rows, done, dist = [], 0, None
    for n in steps:
        state = evolve(model, state, n - done)
        done = n
        dist = position_distribution(state)
        mean, cov = distribution_moments(dist)
        after = distribution_moments(position_distribution(evolve(model, state, 1)))[1]
        rows.append({
            "n": n,
            "total_probability": float(dist.probs.sum()),
            "mean": mean.tolist(),
            "cov": cov.tolist(),
            "var_over_n": (np.diag(cov) / n).tolist() if n else None,
            "c_sim": (np.diag(after) / n).tolist() if n else None,
            "support": int(dist.coords.shape[0]),
        })
    if args.dist_out:
        Path(args.dist_out).write_text(dist.to_csv())
    if args.format == "csv":
        _emit(dist.to_csv(), args.out)
    else:
        _emit(_dump_json({"format": "evolve-report/1", "model": model.name, "results": rows}), args.out)
    return 0


def cmd_clt(args) -> int:
    model, _, _ = _load(args)
    report = clt_report(model, args.method)
    if args.format == "csv":
        _emit(gaussian_grid_csv(report.m, report.C, args.steps, args.grid), args.out)
    else:
        _emit(_dump_json(clt_report_to_dict(report)), args.out)
    return 0


def cmd_traj(args) -> int:
    model, (tau, site), _ = _load(args)
    if args.steps < 1 or args.trajectories < 1:
        raise UsageError("--steps and --trajectories must be positive")
    init = TrajectoryState.initial(model, tau, site)
    m = clt_report(model, args.method).m
    finals, paths = simulate_positions(model, init, args.steps, args.trajectories, args.seed,
                                       record=bool(args.dump) or args.format == "csv")
    stats = ensemble_stats(model, init, args.steps, args.trajectories, args.seed, m, positions=finals)
    if args.dump:
        Path(args.dump).write_text(positions_csv(paths))
    if args.format == "csv":
        _emit(positions_csv(paths), args.out)
    else:
        _emit(_dump_json(traj_stats_to_dict(stats)), args.out)
    return 0


def cmd_compare(args) -> int:
    model, (tau, site), params = _load(args)
    n = args.steps
    if n < 1:
        raise UsageError("--steps must be positive")
    report = clt_report(model, args.method)
    tol = args.tol if args.tol is not None else 1e-4
    out = {
        "format": "compare-report/1",
        "model": model.name,
        "n": n,
        "analytic": {"m": report.m.tolist(), "C": report.C.tolist(), "method": report.method},
        "checks": [],
    }
    if model.name in ("circle", "example2", "example3"):
        am, aC = zoo_analytic(model.name, params)
        out["closed_form"] = {"m": am.tolist(), "C": aC.tolist()}
        rel = float(np.max(np.abs(aC - report.C)) / np.max(np.abs(report.C)))
        out["checks"].append({"name": "closed_form_vs_pipeline", "rel_diff": rel, "tol": 1e-8, "pass": rel <= 1e-8})

    state = evolve(model, LatticeState.initial(model, tau, site), n)
    mean, cov = distribution_moments(position_distribution(state))
    shifted = distribution_moments(position_distribution(evolve(model, state, 1)))[1] / n
    diff = float(np.max(np.abs(cov / n - report.C)))
    out["evolved"] = {"mean_per_step": (mean / n).tolist(), "var_over_n": (cov / n).tolist(),
                      "c_sim": shifted.tolist()}
    out["checks"].append({"name": "evolved_vs_analytic", "max_abs_diff": diff, "tol": tol, "pass": diff <= tol})

    if args.trajectories > 0:
        stats = ensemble_stats(model, TrajectoryState.initial(model, tau, site), n, args.trajectories,
                               args.seed, report.m)
        dev = np.abs(np.diag(stats.scaled_cov) - np.diag(report.C)) / stats.stderr
        out["trajectories"] = traj_stats_to_dict(stats)
        out["checks"].append({"name": "trajectory_vs_analytic", "sigmas": dev.tolist(),
                              "threshold": args.sigmas, "pass": bool(np.all(dev <= args.sigmas))})
    ok = all(c["pass"] for c in out["checks"])
    out["pass"] = ok
    if args.format == "csv":
        lines = ["check,value,threshold,pass"]
        for c in out["checks"]:
            val = c.get("rel_diff", c.get("max_abs_diff", max(c.get("sigmas", [0]))))
            lines.append(f"{c['name']},{val!r},{c.get('tol', c.get('threshold'))!r},{int(c['pass'])}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(_dump_json(out), args.out)
    return 0 if ok else EXIT_COMPARE


COMMANDS = {
    "validate": cmd_validate,
    "evolve": cmd_evolve,
    "clt": cmd_clt,
    "traj": cmd_traj,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"lazyoqw: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OQWError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}),
              file=sys.stderr)
        return exc.exit_code
    except (OSError, KeyError, TypeError) as exc:
        print(f"lazyoqw: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run():
    sys.exit(main())
