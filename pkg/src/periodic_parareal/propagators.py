"""
Coarse and fine implicit-Euler propagators over Parareal subintervals.

Both propagators solve ``(M/dt) (u - u_prev) + K(u) u = f(t_next)`` step by
step; the coarse one takes a single step of size T/N per subinterval, the
fine one takes ``fine_steps`` steps of size T/(N * fine_steps).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse.linalg as spla

from .problem import PeriodicProblem

logger = logging.getLogger(__name__)


class NewtonDivergence(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"Newton divergence: no convergence after {iterations} iterations "
            f"(last residual norm {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class TimeMesh:
    """N subintervals of [0, T], each split into ``fine_steps`` fine steps."""

    N: int
    period: float
    fine_steps: int = 1

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"N must be at least 2, got {self.N}")
        if self.fine_steps < 1:
            raise ValueError(f"fine_steps must be at least 1, got {self.fine_steps}")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def coarse_dt(self) -> float:
        return self.period / self.N

    @property
    def fine_dt(self) -> float:
        return self.coarse_dt / self.fine_steps

    def boundary(self, n: int) -> float:
        """T_n = n T / N, computed directly so T_N == T."""
        return n * self.period / self.N

    def boundaries(self) -> np.ndarray:
        return np.array([self.boundary(n) for n in range(self.N + 1)])

    def fine_times(self, n: int) -> np.ndarray:
        """Right endpoints of the fine steps inside subinterval n (1-based)."""
        t0, t1 = self.boundary(n - 1), self.boundary(n)
        s = self.fine_steps
        times = t0 + (t1 - t0) * np.arange(1, s + 1) / s
        times[-1] = t1
        return times

    @classmethod
    def from_steps(cls, period: float, N: int, coarse_dt: float, fine_dt: float) -> "TimeMesh":
        s = int(round(coarse_dt / fine_dt))
        if abs(s * fine_dt - coarse_dt) > 1e-9 * coarse_dt:
            raise ValueError("coarse step must be an integer multiple of the fine step")
        return cls(N, period, s)


@dataclass(frozen=True)
class NewtonSettings:
    tol_rel: float = 1e-10
    tol_abs: float = 1e-12
    max_iter: int = 50
    damping: float = 1.0

    def __post_init__(self):
        if self.tol_rel <= 0 or self.tol_abs <= 0:
            raise ValueError("Newton tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


DEFAULT_NEWTON = NewtonSettings()


class NewtonResult(NamedTuple):
    u: np.ndarray
    iterations: int
    residuals: list[float]


def jump_norm(U_new: np.ndarray, U_old: np.ndarray) -> float:
    """max_n |U_new[n] - U_old[n]| / max(1, max_n |U_new[n]|), rows are states."""
    U_new = np.atleast_2d(np.asarray(U_new, dtype=float))
    U_old = np.atleast_2d(np.asarray(U_old, dtype=float))
    if U_new.shape != U_old.shape:
        raise ValueError(f"shape mismatch: {U_new.shape} vs {U_old.shape}")
    num = np.linalg.norm(U_new - U_old, axis=1).max()
    return float(num / max(1.0, np.linalg.norm(U_new, axis=1).max()))


def _check_finite(u: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(u)):
        raise FloatingPointError(f"non-finite state after {where}")
    return u


def newton_solve(prob: PeriodicProblem, u_prev: np.ndarray, t_next: float, dt: float,
                 settings: NewtonSettings = DEFAULT_NEWTON) -> NewtonResult:
    """Damped Newton for one implicit-Euler step, starting from ``u_prev``.

    At least one update is always taken, so a linear residual terminates
    after exactly one iteration. ``residuals`` holds the initial residual
    norm followed by the norm after each update.

    The relative tolerance is scaled by the largest of |f|, |C u_prev + f|
    and |K(u_prev) u_prev|; near zero crossings of f the stiffness term
    sets the round-off floor.
    """
    C = prob.mass / dt
    f = prob.excitation(t_next)
    rhs = C @ u_prev + f
    u = np.array(u_prev, dtype=float)
    scale = max(np.linalg.norm(f), np.linalg.norm(rhs),
                np.linalg.norm(prob.stiffness_matrix(u) @ u))
    tol = settings.tol_abs + settings.tol_rel * scale
    r = C @ u + prob.stiffness_matrix(u) @ u - rhs
    residuals = [float(np.linalg.norm(r))]
    for it in range(1, settings.max_iter + 1):
        J = (C + prob.stiffness_jacobian(u)).tocsc()
        du = spla.spsolve(J, -r)
        u = u + settings.damping * np.atleast_1d(du)
        r = C @ u + prob.stiffness_matrix(u) @ u - rhs
        res = float(np.linalg.norm(r))
        residuals.append(res)
        if res <= tol:
            return NewtonResult(_check_finite(u, "Newton step"), it, residuals)
    raise NewtonDivergence(settings.max_iter, res)


def newton_step(prob: PeriodicProblem, u_prev: np.ndarray, t_next: float, dt: float,
                settings: NewtonSettings = DEFAULT_NEWTON) -> np.ndarray:
    return newton_solve(prob, u_prev, t_next, dt, settings).u


def implicit_euler_step(prob: PeriodicProblem, u_prev: np.ndarray, t_next: float, dt: float,
                        newton: NewtonSettings = DEFAULT_NEWTON) -> np.ndarray:
    if not prob.is_linear:
        return newton_step(prob, u_prev, t_next, dt, newton)
    lu = prob.step_factor(dt)
    rhs = prob.mass @ u_prev / dt + prob.excitation(t_next)
    return _check_finite(lu.solve(rhs), "implicit Euler step")


def coarse_step(prob: PeriodicProblem, u_prev: np.ndarray, t_next: float, dt: float,
                newton: NewtonSettings = DEFAULT_NEWTON) -> np.ndarray:
    """Solve ``(M/dt + K) u = (M/dt) u_prev + f(t_next)``."""
    return implicit_euler_step(prob, np.asarray(u_prev, dtype=float), t_next, dt, newton)


def coarse_propagate(prob: PeriodicProblem, u_start: np.ndarray, n: int, mesh: TimeMesh,
                     newton: NewtonSettings = DEFAULT_NEWTON) -> np.ndarray:
    if not 1 <= n <= mesh.N:
        raise ValueError(f"subinterval index {n} outside 1..{mesh.N}")
    return coarse_step(prob, u_start, mesh.boundary(n), mesh.coarse_dt, newton)


def fine_propagate(prob: PeriodicProblem, u_start: np.ndarray, n: int, mesh: TimeMesh,
                   newton: NewtonSettings = DEFAULT_NEWTON) -> np.ndarray:
    if not 1 <= n <= mesh.N:
        raise ValueError(f"subinterval index {n} outside 1..{mesh.N}")
    if mesh.fine_steps == 1:
        return coarse_propagate(prob, u_start, n, mesh, newton)
    u = np.asarray(u_start, dtype=float)
    dt = mesh.fine_dt
    for t in mesh.fine_times(n):
        u = implicit_euler_step(prob, u, t, dt, newton)
    return u


def fine_period(prob: PeriodicProblem, u0: np.ndarray, mesh: TimeMesh,
                newton: NewtonSettings = DEFAULT_NEWTON) -> np.ndarray:
    """Fine propagation over one period; returns states at T_0..T_N."""
    states = [np.asarray(u0, dtype=float)]
    for n in range(1, mesh.N + 1):
        states.append(fine_propagate(prob, states[-1], n, mesh, newton))
    return np.vstack(states)


@dataclass
class SteadyStateResult:
    trajectory: np.ndarray
    periods: int
    converged: bool
    defects: list[float] = field(default_factory=list)

    def __iter__(self):
        # Unpacks as (trajectory, periods_used).
        return iter((self.trajectory, self.periods))


def sequential_steady_state(prob: PeriodicProblem, mesh: TimeMesh, max_periods: int = 10_000,
                            tol: float = 1e-6, u0: np.ndarray | None = None,
                            newton: NewtonSettings = DEFAULT_NEWTON) -> SteadyStateResult:
    """Time-step whole periods until ``u(mT)`` stops changing.

    Stops when ``|u(mT) - u((m-1)T)| <= tol * max(1, |u(mT)|)`` and returns
    the last period sampled at T_0..T_{N-1}.
    """
    if max_periods < 1:
        raise ValueError("max_periods must be at least 1")
    u = np.zeros(prob.dim) if u0 is None else np.asarray(u0, dtype=float)
    defects = []
    for m in range(1, max_periods + 1):
        states = fine_period(prob, u, mesh, newton)
        u_end = states[-1]
        defect = np.linalg.norm(u_end - u)
        defects.append(float(defect))
        if defect <= tol * max(1.0, np.linalg.norm(u_end)):
            return SteadyStateResult(states[:-1], m, True, defects)
        u = u_end
    logger.warning("sequential time stepping not periodic after %d periods", max_periods)
    return SteadyStateResult(states[:-1], max_periods, False, defects)
