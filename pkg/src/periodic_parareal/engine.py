"""
Outer Parareal iterations: classical (initial value), PP-IC and PP-PC.

All variants share the subinterval propagators and the convergence measure
:func:`jump_norm`. Per iteration the N fine and N coarse propagations run
as independent tasks on a :class:`PropagatorPool`.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .parallel import PropagatorPool
from .problem import PeriodicProblem, linearized
from .propagators import (
    DEFAULT_NEWTON,
    NewtonSettings,
    TimeMesh,
    coarse_propagate,
    fine_period,
    jump_norm,
    sequential_steady_state,
)
from .spectral import (
    CyclicSystem,
    assemble_rhs,
    solve_cyclic_direct,
    solve_cyclic_fixed_point,
    solve_cyclic_multiharmonic,
)

logger = logging.getLogger(__name__)

__all__ = [
    "SolverVariant",
    "IterationRecord",
    "ConvergenceHistory",
    "PararealSettings",
    "jump_norm",
    "classic_parareal",
    "ppic_solve",
    "pppc_solve",
    "frozen_coarse_linearization",
    "coarse_sweep",
    "run_variant",
    "sequential_oracle",
    "periodicity_defect",
]


class SolverVariant(str, enum.Enum):
    SEQUENTIAL = "SequentialOracle"
    CLASSIC = "ClassicParareal"
    PP_IC = "PP_IC"
    PP_PC_DIRECT = "PP_PC_direct"
    PP_PC_FIXEDPOINT = "PP_PC_fixedpoint"
    PP_PC_MULTIHARMONIC = "PP_PC_multiharmonic"

    @classmethod
    def parse(cls, name: "str | SolverVariant") -> "SolverVariant":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        for v in cls:
            if key in (v.value.lower(), v.name.lower()):
                return v
        aliases = {"sequential": cls.SEQUENTIAL, "oracle": cls.SEQUENTIAL, "classic": cls.CLASSIC,
                   "parareal": cls.CLASSIC, "ppic": cls.PP_IC, "pppc": cls.PP_PC_MULTIHARMONIC, "multiharmonic": cls.PP_PC_MULTIHARMONIC,
                   "direct": cls.PP_PC_DIRECT, "fixedpoint": cls.PP_PC_FIXEDPOINT}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown solver variant {name!r}; choose from {[v.value for v in cls]}")

    @property
    def coarse_variant(self) -> str | None:
        return {
            SolverVariant.PP_PC_DIRECT: "direct",
            SolverVariant.PP_PC_FIXEDPOINT: "fixedpoint",
            SolverVariant.PP_PC_MULTIHARMONIC: "multiharmonic",
        }.get(self)


@dataclass
class IterationRecord:
    k: int
    jump_norm: float
    wall_time: float
    coarse_stats: dict = field(default_factory=dict)


@dataclass
class ConvergenceHistory:
    variant: str
    records: list[IterationRecord] = field(default_factory=list)
    status: str = "max_iter"
    timings: dict = field(default_factory=lambda: {"fine": 0.0, "coarse": 0.0, "spectral_solve": 0.0})
    total_time: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def jumps(self) -> list[float]:
        return [r.jump_norm for r in self.records]


@dataclass
class PararealSettings:
    mesh: TimeMesh
    tol: float = 1e-6
    max_iter: int = 50
    initial: np.ndarray | None = None
    workers: int = 1
    real_symmetry: bool = True
    fixed_point_tol: float = 1e-12
    fixed_point_max_sweeps: int = 100_000
    frozen_reference: np.ndarray | None = None
    newton: NewtonSettings = DEFAULT_NEWTON

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


class _Timer:
    def __init__(self, history: ConvergenceHistory, phase: str):
        self.history, self.phase = history, phase

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.history.timings[self.phase] += time.perf_counter() - self.t0


def frozen_coarse_linearization(prob: PeriodicProblem,
                                reference_state: np.ndarray | None = None) -> PeriodicProblem:
    """Linear problem with K fixed at K(reference_state); identity for linear input."""
    return linearized(prob, reference_state)


def coarse_sweep(prob: PeriodicProblem, mesh: TimeMesh, u0: np.ndarray | None = None,
                 newton: NewtonSettings = DEFAULT_NEWTON) -> np.ndarray:
    """Sequential coarse propagation over one period; states at T_0..T_N."""
    states = [np.zeros(prob.dim) if u0 is None else np.asarray(u0, dtype=float)]
    for n in range(1, mesh.N + 1):
        states.append(coarse_propagate(prob, states[-1], n, mesh, newton))
    return np.vstack(states)


def _status(jump: float, tol: float) -> str | None:
    if not np.isfinite(jump):
        return "diverged"
    if jump <= tol:
        return "converged"
    return None


def _finish(history: ConvergenceHistory, t_start: float) -> ConvergenceHistory:
    history.total_time = time.perf_counter() - t_start
    if history.status != "converged":
        logger.warning("%s stopped with status %s after %d iterations",
                       history.variant, history.status, history.iterations)
    return history


def _parareal_corrections(U_new: np.ndarray, F: np.ndarray, G_old: np.ndarray,
                          prob: PeriodicProblem, mesh: TimeMesh, newton: NewtonSettings) -> None:
    """In-place sequential update U_n = F_n + G_n(U_{n-1}^new) - G_n^old, n = 1..N."""
    for n in range(1, mesh.N + 1):
        U_new[n] = F[n - 1] + coarse_propagate(prob, U_new[n - 1], n, mesh, newton) - G_old[n - 1]


def classic_parareal(prob: PeriodicProblem, mesh: TimeMesh, u0: np.ndarray,
                     settings: PararealSettings, pool: PropagatorPool | None = None):
    """Initial-value Parareal on [0, T]; returns states at T_0..T_N and the history."""
    t_start = time.perf_counter()
    history = ConvergenceHistory(SolverVariant.CLASSIC.value)
    own_pool = pool is None
    pool = pool or PropagatorPool(prob, prob, mesh, settings.workers, settings.newton)
    try:
        with _Timer(history, "coarse"):
            U = coarse_sweep(prob, mesh, u0, settings.newton)
        for k in range(1, settings.max_iter + 1):
            t_it = time.perf_counter()
            with _Timer(history, "fine"):
                F = pool.fine(U[:-1])
            with _Timer(history, "coarse"):
                G = pool.coarse(U[:-1])
                U_new = U.copy()
                _parareal_corrections(U_new, F, G, prob, mesh, settings.newton)
            jump = jump_norm(U_new, U)
            U = U_new
            history.records.append(IterationRecord(k, jump, time.perf_counter() - t_it))
            status = _status(jump, settings.tol)
            if status:
                history.status = status
                break
    finally:
        if own_pool:
            pool.close()
    return U, _finish(history, t_start)


def ppic_solve(prob: PeriodicProblem, settings: PararealSettings,
               pool: PropagatorPool | None = None):
    """Periodic Parareal with initial-value coarse problem.

    The initial value of every iteration is the fine end state
    F_N(U_{N-1}^k) of the previous iterate.
    """
    mesh = settings.mesh
    t_start = time.perf_counter()
    history = ConvergenceHistory(SolverVariant.PP_IC.value)
    own_pool = pool is None
    pool = pool or PropagatorPool(prob, prob, mesh, settings.workers, settings.newton)
    try:
        with _Timer(history, "coarse"):
            if settings.initial is not None:
                U = coarse_sweep(prob, mesh, settings.initial[0], settings.newton)
                U[:-1] = settings.initial
            else:
                U = coarse_sweep(prob, mesh, None, settings.newton)
        for k in range(1, settings.max_iter + 1):
            t_it = time.perf_counter()
            with _Timer(history, "fine"):
                F = pool.fine(U[:-1])
            with _Timer(history, "coarse"):
                G = pool.coarse(U[:-1])
                U_new = np.empty_like(U)
                U_new[0] = F[-1]
                _parareal_corrections(U_new, F, G, prob, mesh, settings.newton)
            jump = jump_norm(U_new[:-1], U[:-1])
            scale = max(1.0, np.linalg.norm(U_new, axis=1).max())
            defect = float(np.linalg.norm(U_new[-1] - U_new[0]) / scale)
            U = U_new
            history.records.append(
                IterationRecord(k, jump, time.perf_counter() - t_it, {"periodicity_defect": defect})
            )
            status = _status(max(jump, defect), settings.tol)
            if status:
                history.status = status
                break
    finally:
        if own_pool:
            pool.close()
    return U[:-1], _finish(history, t_start)


def _coarse_solver(variant: str, settings: PararealSettings):
    if variant == "direct":
        return lambda system: (solve_cyclic_direct(system), {})
    if variant == "fixedpoint":
        def solve(system):
            res = solve_cyclic_fixed_point(system, settings.fixed_point_tol, settings.fixed_point_max_sweeps)
            if not res.converged:
                logger.warning("fixed-point coarse solve did not converge in %d sweeps", res.sweeps)
            return res.trajectory, {"sweeps": res.sweeps, "sweeps_converged": res.converged}
        return solve
    if variant == "multiharmonic":
        n_solves = lambda N: N // 2 + 1 if settings.real_symmetry else N  # noqa: E731
        return lambda system: (
            solve_cyclic_multiharmonic(system, settings.real_symmetry),
            {"harmonic_solves": n_solves(system.N)},
        )
    raise ValueError(f"unknown coarse variant {variant!r}")


def pppc_solve(prob: PeriodicProblem, settings: PararealSettings,
               coarse_variant: str = "multiharmonic", pool: PropagatorPool | None = None):
    """Periodic Parareal with periodic coarse problem.

    Each iteration propagates every U_{n-1}^k with F and G, assembles the
    cyclic right-hand side and solves the coarse periodic system for
    U^{k+1}. Nonlinear problems use a frozen stiffness on the coarse side.
    """
    mesh = settings.mesh
    if coarse_variant == "multiharmonic" and mesh.N % 2:
        raise ValueError(f"odd harmonic count unsupported (N={mesh.N})")
    t_start = time.perf_counter()
    variant_name = SolverVariant(f"PP_PC_{coarse_variant}").value
    history = ConvergenceHistory(variant_name)
    coarse_prob = prob
    if not prob.is_linear:
        coarse_prob = frozen_coarse_linearization(prob, settings.frozen_reference)
        history.notes.append("coarse level uses frozen stiffness K(u_ref); fine level is nonlinear")
    system = CyclicSystem.from_problem(coarse_prob, mesh)
    solve = _coarse_solver(coarse_variant, settings)
    own_pool = pool is None
    pool = pool or PropagatorPool(prob, coarse_prob, mesh, settings.workers, settings.newton)
    try:
        if settings.initial is not None:
            U = np.array(settings.initial, dtype=float).reshape(mesh.N, prob.dim)
        else:
            with _Timer(history, "coarse"):
                U = coarse_sweep(coarse_prob, mesh, None, settings.newton)[:-1]
        for k in range(1, settings.max_iter + 1):
            t_it = time.perf_counter()
            with _Timer(history, "fine"):
                F = pool.fine(U)
            with _Timer(history, "coarse"):
                G = pool.coarse(U)
            with _Timer(history, "spectral_solve"):
                r = assemble_rhs(F, G, coarse_prob, mesh)
                U_new, stats = solve(system.with_rhs(r))
            jump = jump_norm(U_new, U)
            U = U_new
            history.records.append(IterationRecord(k, jump, time.perf_counter() - t_it, stats))
            status = _status(jump, settings.tol)
            if status:
                history.status = status
                break
    finally:
        if own_pool:
            pool.close()
    return U, _finish(history, t_start)


def sequential_oracle(prob: PeriodicProblem, settings: PararealSettings, max_periods: int = 10_000):
    """Sequential time stepping wrapped in the engine's result shape."""
    t_start = time.perf_counter()
    history = ConvergenceHistory(SolverVariant.SEQUENTIAL.value)
    with _Timer(history, "fine"):
        res = sequential_steady_state(prob, settings.mesh, max_periods, settings.tol,
                                      settings.initial[0] if settings.initial is not None else None,
                                      settings.newton)
    per_period = history.timings["fine"] / max(1, res.periods)
    for m, defect in enumerate(res.defects, start=1):
        history.records.append(IterationRecord(m, defect / max(1.0, np.linalg.norm(res.trajectory[0])),
                                               per_period))
    history.status = "converged" if res.converged else "max_iter"
    return res.trajectory, _finish(history, t_start)


def run_variant(prob: PeriodicProblem, variant, settings: PararealSettings, max_periods: int = 10_000):
    """Dispatch to the selected solver; returns (trajectory U_0..U_{N-1}, history)."""
    variant = SolverVariant.parse(variant)
    if variant is SolverVariant.SEQUENTIAL:
        return sequential_oracle(prob, settings, max_periods)
    if variant is SolverVariant.CLASSIC:
        u0 = np.zeros(prob.dim) if settings.initial is None else settings.initial[0]
        U, history = classic_parareal(prob, settings.mesh, u0, settings)
        return U[:-1], history
    if variant is SolverVariant.PP_IC:
        return ppic_solve(prob, settings)
    return pppc_solve(prob, settings, variant.coarse_variant)


def periodicity_defect(prob: PeriodicProblem, trajectory: np.ndarray, mesh: TimeMesh,
                       newton: NewtonSettings = DEFAULT_NEWTON) -> float:
    """|u(T) - u(0)| / max(1, |u(0)|) after one more fine period from U_0."""
    states = fine_period(prob, trajectory[0], mesh, newton)
    return float(np.linalg.norm(states[-1] - states[0]) / max(1.0, np.linalg.norm(states[0])))
