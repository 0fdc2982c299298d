"""Command-line entry point: experiment orchestration and artifacts.

Subcommands mirror the experiment kinds (simulate, picard, inequality,
besov) plus snapshot inspection. Every run writes a diagnostics CSV,
binary snapshots where fields are produced, and a manifest echoing the
resolved configuration with pass/fail flags. Identical configs and
seeds reproduce identical bytes.

Exit codes: 0 all checks passed, 1 numerical failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    CHECKS,
    ConfigError,
    ExperimentConfig,
    build_initial_field,
    parse_config,
)
from .inequalities import (
    EnsembleSpec,
    check_bernstein,
    check_cz,
    check_embedding,
    check_gradvel_bound,
    check_hls,
    check_l2_conservation,
    default_embedding_chain,
)
from .littlewood_paley import BesovParams, besov_norm, build_partition, dyadic_block, lp_norm, sobolev_norm
from .picard import (
    BallSpec,
    DISTANCE_FLOOR,
    HorizonError,
    contraction_factor,
    picard_iterate,
    select_horizon,
)
from .snapshots import SnapshotError, emit_diagnostics, read_snapshot, write_snapshot
from .spectral import compute_velocity
from .transport import TransportError, solve_nonlinear, stable_dt

_OUTPUT_ENV = "GSQG_OUTPUT_DIR"
_TRAJECTORY_COLUMNS = ["time", "l2", "linf", "hs", "iterate", "d_k", "kappa_k"]


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isinf(value) or math.isnan(value):
            return repr(value)
        return value
    return value


def _write_manifest(outdir: Path, cfg: ExperimentConfig, passes: dict, failure: str | None, extra: dict):
    manifest = {
        "config": _json_safe(cfg.as_dict()),
        "versions": {"gsqg": __version__, "numpy": np.__version__},
        "pass": _json_safe(passes),
        "failure": failure,
        "details": _json_safe(extra),
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _trajectory_rows(traj, s):
    rows = []
    for t, f in zip(traj.times, traj.fields):
        rows.append(
            {
                "time": float(t),
                "l2": lp_norm(f, 2.0),
                "linf": lp_norm(f, math.inf),
                "hs": sobolev_norm(f, s),
            }
        )
    return rows


def _write_trajectory_snapshots(outdir: Path, traj, alpha: float) -> list[str]:
    names = []
    for i, (t, f) in enumerate(zip(traj.times, traj.fields)):
        name = f"state_{i:04d}.gsqg"
        write_snapshot(f, alpha, float(t), outdir / name)
        names.append(name)
    return names


def _resolve_dt(cfg: ExperimentConfig, theta0) -> float:
    if cfg.dt is not None:
        return cfg.dt
    u0 = compute_velocity(theta0, cfg.alpha, cfg.velocity_law())
    return stable_dt(u0, theta0.grid, cfg.cfl)


def _run_simulate(cfg: ExperimentConfig, outdir: Path) -> int:
    grid = cfg.grid()
    theta0 = build_initial_field(cfg, grid)
    law = cfg.velocity_law()
    try:
        traj = solve_nonlinear(
            theta0, cfg.alpha, law, cfg.T, _resolve_dt(cfg, theta0), n_nodes=cfg.nodes
        )
    except TransportError as exc:
        _write_manifest(outdir, cfg, {"completed": False}, str(exc), {})
        return 1
    drift = check_l2_conservation(traj, law)
    rows = _trajectory_rows(traj, cfg.s)
    emit_diagnostics(rows, outdir / "diagnostics.csv", _TRAJECTORY_COLUMNS)
    artifacts = _write_trajectory_snapshots(outdir, traj, cfg.alpha)
    passes = {"completed": True, "l2_drift": drift.passed}
    _write_manifest(
        outdir,
        cfg,
        passes,
        None,
        {"l2_drift_sup": drift.sup_ratio, "l2_drift_bound": drift.bound, "artifacts": artifacts},
    )
    return 0 if all(passes.values()) else 1


def _run_picard(cfg: ExperimentConfig, outdir: Path) -> int:
    grid = cfg.grid()
    theta0 = build_initial_field(cfg, grid)
    law = cfg.velocity_law()
    dt = _resolve_dt(cfg, theta0)
    try:
        if cfg.T is None or cfg.auto_horizon:
            ball = select_horizon(theta0, cfg.alpha, law, cfg.s, dt=dt, n_nodes=cfg.nodes)
        else:
            ball = BallSpec(2.0 * sobolev_norm(theta0, cfg.s), cfg.s, cfg.T)
        traj, report = picard_iterate(
            theta0,
            cfg.alpha,
            law,
            ball,
            tol=cfg.tol,
            max_iter=cfg.max_iter,
            dt=dt,
            n_nodes=cfg.nodes,
        )
    except (TransportError, HorizonError) as exc:
        _write_manifest(outdir, cfg, {"converged": False}, str(exc), {})
        return 1
    rows = _trajectory_rows(traj, cfg.s)
    for k, d in enumerate(report.distances):
        kappa = None
        if k >= 1 and report.distances[k - 1] > DISTANCE_FLOOR:
            kappa = d / report.distances[k - 1]
        rows.append({"iterate": k, "d_k": d, "kappa_k": kappa})
    emit_diagnostics(rows, outdir / "diagnostics.csv", _TRAJECTORY_COLUMNS)
    artifacts = _write_trajectory_snapshots(outdir, traj, cfg.alpha)
    passes = {"converged": report.converged, "in_ball": all(m >= 0.0 for m in report.ball_margins)}
    details = {
        "horizon": ball.horizon,
        "radius": ball.radius,
        "iterations": report.iterations,
        "kappa": contraction_factor(report),
        "artifacts": artifacts,
    }
    _write_manifest(outdir, cfg, passes, report.message, details)
    return 0 if all(passes.values()) else 1


def _run_inequality(cfg: ExperimentConfig, outdir: Path) -> int:
    grid = cfg.grid()
    ensemble = EnsembleSpec(cfg.count, cfg.seed, grid, cfg.gamma, cfg.band)
    if cfg.check == "hls":
        report = check_hls(ensemble, cfg.alpha)
    elif cfg.check == "cz":
        report = check_cz(ensemble, cfg.p)
    elif cfg.check == "bernstein":
        partition = build_partition(grid)
        j_list = [j for j in (2, 3, 4, 5) if j <= partition.j_max]
        report = check_bernstein(grid, j_list, [(2.0, math.inf)], ensemble=ensemble)
    elif cfg.check == "embedding":
        report = check_embedding(ensemble, default_embedding_chain(cfg.s))
    elif cfg.check == "gradvel":
        report = check_gradvel_bound(ensemble, cfg.alpha, cfg.s)
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"check: unknown check {cfg.check!r}")
    rows = [{"sample": i, "ratio": r} for i, r in enumerate(report.ratios)]
    rows.append({"sample": "sup", "ratio": report.sup_ratio})
    emit_diagnostics(rows, outdir / "ratios.csv", ["sample", "ratio"])
    passes = {"bound": report.passed}
    _write_manifest(
        outdir,
        cfg,
        passes,
        None,
        {"check": report.name, "sup_ratio": report.sup_ratio, "bound": report.bound,
         "metadata": dict(report.metadata)},
    )
    return 0 if report.passed else 1


def _run_besov(cfg: ExperimentConfig, outdir: Path) -> int:
    grid = cfg.grid()
    theta0 = build_initial_field(cfg, grid)
    partition = build_partition(grid)
    p = cfg.p if cfg.p is not None else 2.0
    rows = []
    for j in range(-1, partition.j_max + 1):
        block = dyadic_block(theta0, j, partition)
        norm = lp_norm(block, p)
        weight = 2.0 ** (cfg.s * (j + 1))
        rows.append({"j": j, "block_lp": norm, "weight": weight, "weighted": weight * norm})
    emit_diagnostics(rows, outdir / "blocks.csv", ["j", "block_lp", "weight", "weighted"])
    params = BesovParams(cfg.s, p, 2.0)
    details = {
        "besov": besov_norm(theta0, params, partition),
        "sobolev": sobolev_norm(theta0, cfg.s),
        "l2": lp_norm(theta0, 2.0),
        "p": p,
        "q": 2.0,
    }
    _write_manifest(outdir, cfg, {"completed": True}, None, details)
    return 0


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run one experiment; writes artifacts and returns the exit code."""
    outdir = Path(cfg.outdir or os.environ.get(_OUTPUT_ENV, "gsqg-out"))
    outdir.mkdir(parents=True, exist_ok=True)
    runner = {
        "simulate": _run_simulate,
        "picard": _run_picard,
        "inequality": _run_inequality,
        "besov": _run_besov,
    }[cfg.kind]
    return runner(cfg, outdir)


def _inspect(path: str) -> int:
    try:
        field, alpha, t = read_snapshot(path)
    except (SnapshotError, OSError) as exc:
        print(f"cannot read snapshot: {exc}", file=sys.stderr)
        return 2
    print(f"n      = {field.grid.n}")
    print(f"alpha  = {alpha:.17g}")
    print(f"time   = {t:.17g}")
    print(f"l2     = {lp_norm(field, 2.0):.17g}")
    print(f"linf   = {lp_norm(field, math.inf):.17g}")
    print(f"mean   = {field.mean():.17g}")
    return 0


def _add_common_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--config", help="YAML config document; flags override its keys")
    sub.add_argument("--n", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--law", choices=("perp", "grad"))
    sub.add_argument("--s", type=float)
    sub.add_argument("--T", type=float, dest="T")
    sub.add_argument("--auto-horizon", action=argparse.BooleanOptionalAction, default=None)
    sub.add_argument("--dt", type=float)
    sub.add_argument("--cfl", type=float)
    sub.add_argument("--tol", type=float)
    sub.add_argument("--max-iter", type=int, dest="max_iter")
    sub.add_argument("--nodes", type=int)
    sub.add_argument("--initial")
    sub.add_argument("--check", choices=CHECKS)
    sub.add_argument("--p", type=float)
    sub.add_argument("--count", type=int)
    sub.add_argument("--gamma", type=float)
    sub.add_argument("--band", help="synthesis band as lo:hi")
    sub.add_argument("--outdir")
    sub.add_argument("--seed", type=int)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsqg",
        description="Pseudo-spectral generalized SQG experiments: direct runs, "
        "fixed-point construction, inequality checks, Besov diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"gsqg {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for kind in ("simulate", "picard", "inequality", "besov"):
        sub = subs.add_parser(kind, help=f"run a {kind} experiment")
        _add_common_flags(sub)
    inspect = subs.add_parser("inspect", help="print a snapshot header and norms")
    inspect.add_argument("snapshot")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "inspect":
        return _inspect(args.snapshot)
    doc = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
            return 2
        try:
            import yaml

            loaded = yaml.safe_load(text)
        except Exception as exc:
            print(f"config error: malformed YAML: {exc}", file=sys.stderr)
            return 2
        doc = dict(loaded or {})
    overrides = {
        name: getattr(args, name)
        for name in (
            "n", "alpha", "law", "s", "T", "auto_horizon", "dt", "cfl", "tol",
            "max_iter", "nodes", "initial", "check", "p", "count", "gamma",
            "band", "outdir", "seed",
        )
        if getattr(args, name, None) is not None
    }
    doc.update(overrides)
    doc["kind"] = args.command
    try:
        cfg = parse_config(doc)
        return run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
