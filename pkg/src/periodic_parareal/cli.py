"""Command-line front end: ``solve``, ``compare`` and ``oracle``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import plotting
from .config import ConfigError, RunConfig, build_problem, parse_config
from .engine import PararealSettings, SolverVariant, run_variant
from .problem import PeriodicProblem
from .propagators import TimeMesh
from .report import write_csv, write_history, write_json, write_trajectory

logger = logging.getLogger("periodic_parareal")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2

_SOLVER_ERRORS = (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError, OSError)


def _settings(cfg: RunConfig, prob: PeriodicProblem, mesh: TimeMesh) -> PararealSettings:
    return PararealSettings(
        mesh,
        tol=cfg.tol,
        max_iter=cfg.kmax,
        workers=cfg.workers,
        real_symmetry=cfg.real_symmetry,
        fixed_point_tol=cfg.fixed_point_tol,
        fixed_point_max_sweeps=cfg.fixed_point_max_sweeps,
        frozen_reference=cfg.frozen_state(prob.dim),
    )


def _setup(cfg: RunConfig):
    prob = build_problem(cfg)
    mesh = TimeMesh(cfg.N, prob.period, cfg.fine_steps)
    return prob, mesh, _settings(cfg, prob, mesh)


def _report(cfg, prob, mesh, variant, history, total) -> dict:
    return {
        "variant": variant,
        "problem": prob.name,
        "dim": prob.dim,
        "linear": prob.is_linear,
        "N": mesh.N,
        "fine_steps": mesh.fine_steps,
        "coarse_dt": mesh.coarse_dt,
        "fine_dt": mesh.fine_dt,
        "tol": cfg.tol,
        "workers": cfg.workers,
        "status": history.status,
        "converged": history.converged,
        "iterations": history.iterations,
        "jump_norms": history.jumps,
        "timings": {**history.timings, "total": total},
        "notes": history.notes,
    }


def run_solve(cfg: RunConfig, variant: str | None = None) -> int:
    """Run one variant and write trajectory.csv, history.csv and report.json."""
    variant = SolverVariant.parse(variant or cfg.variant).value
    t0 = time.perf_counter()
    try:
        prob, mesh, settings = _setup(cfg)
        U, history = run_variant(prob, variant, settings, cfg.max_periods)
    except _SOLVER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    total = time.perf_counter() - t0

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    times = mesh.boundaries()[: mesh.N]
    write_trajectory(out / "trajectory.csv", times, U)
    write_history(out / "history.csv", history)
    write_json(out / "report.json", _report(cfg, prob, mesh, variant, history, total))
    if cfg.plots:
        plotting.plot_history(history, out / "history.png", cfg.tol)
        plotting.plot_trajectory(times, U, out / "trajectory.png")
    print(f"{variant}: {history.status} after {history.iterations} iterations "
          f"({total:.3f} s) -> {out}")
    return EXIT_OK if history.converged else EXIT_NOT_CONVERGED


def run_compare(cfg: RunConfig, variants: list[str] | None = None) -> int:
    """Run several variants on the same problem and initial iterate."""
    variants = [SolverVariant.parse(v).value for v in (variants or cfg.variants)]
    if len(variants) < 2:
        raise ConfigError("compare needs at least two variants")
    try:
        prob, mesh, settings = _setup(cfg)
    except _SOLVER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, histories = [], {}
    for i, name in enumerate(variants):
        label = name if name not in histories else f"{name}#{i}"
        t0 = time.perf_counter()
        try:
            _, history = run_variant(prob, name, settings, cfg.max_periods)
        except _SOLVER_ERRORS as exc:
            rows.append([label, 0, False, time.perf_counter() - t0, "error", str(exc)])
            histories[label] = None
            continue
        histories[label] = history
        rows.append([label, history.iterations, history.converged, time.perf_counter() - t0,
                     history.status, ""])
        write_history(out / f"history_{label.replace('#', '_')}.csv", history)

    write_csv(out / "compare.csv",
              ["variant", "iterations", "converged", "wall_time_s", "status", "error"], rows)
    write_json(out / "compare.json", {
        "problem": prob.name, "dim": prob.dim, "N": mesh.N, "fine_steps": mesh.fine_steps,
        "tol": cfg.tol,
        "rows": [dict(zip(["variant", "iterations", "converged", "wall_time_s", "status", "error"], r))
                 for r in rows],
    })
    if cfg.plots:
        plotting.plot_compare(histories, out / "compare.png")

    print(f"{'variant':<24}{'iterations':>11}{'converged':>11}{'wall [s]':>11}")
    for label, its, conv, wall, status, err in sorted(rows, key=lambda r: (r[4] == "error", r[1])):
        print(f"{label:<24}{its:>11d}{str(conv):>11}{wall:>11.3f}" + (f"  {err}" if err else ""))
    return EXIT_ERROR if all(r[4] == "error" for r in rows) else EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--problem", help="built-in name (coax, coax_linear, scalar, dae_pair) "
                                     "or MASS.mtx,STIFFNESS.mtx")
    p.add_argument("--excitation", help="excitation JSON for Matrix Market problems")
    p.add_argument("--N", type=int, help="number of subintervals")
    p.add_argument("--fine-steps", type=int, help="fine steps per subinterval")
    p.add_argument("--tol", type=float)
    p.add_argument("--kmax", type=int, help="maximum outer iterations")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-real-symmetry", action="store_true",
                   help="solve all N harmonics instead of mirroring negative frequencies")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="periodic-parareal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="run one solver variant")
    _add_common(solve)
    solve.add_argument("--variant", help="solver variant, e.g. PP_PC_multiharmonic")
    compare = sub.add_parser("compare", help="run several variants on the same problem")
    _add_common(compare)
    compare.add_argument("--variants", help="comma-separated variant list")
    oracle = sub.add_parser("oracle", help="sequential time stepping to the steady state")
    _add_common(oracle)
    oracle.add_argument("--max-periods", type=int)
    return parser


def _overrides(args) -> dict:
    ov = {
        "N": args.N,
        "fine_steps": args.fine_steps,
        "tol": args.tol,
        "kmax": args.kmax,
        "workers": args.workers,
        "out": args.out,
        "variant": getattr(args, "variant", None),
        "max_periods": getattr(args, "max_periods", None),
    }
    if getattr(args, "variants", None):
        ov["variants"] = [v for v in args.variants.split(",") if v]
    if args.no_real_symmetry:
        ov["real_symmetry"] = False
    if args.no_plots:
        ov["plots"] = False
    if args.problem:
        if "," in args.problem:
            mass, stiffness = args.problem.split(",", 1)
            ov.update(problem="files", mass=mass, stiffness=stiffness)
        else:
            ov["problem"] = args.problem
    if args.excitation:
        ov["excitation"] = args.excitation
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, _overrides(args))
        if args.command == "solve":
            return run_solve(cfg)
        if args.command == "oracle":
            return run_solve(cfg, SolverVariant.SEQUENTIAL.value)
        return run_compare(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
