"""
Time-periodic first-order systems of eddy-current type.

A problem instance describes

    M du/dt + K(u) u = f(t),    t in (0, T),    u(0) = u(T),

where M is symmetric positive semi-definite (possibly singular, e.g. zero
conductivity in air), K is the curl-curl stiffness (fixed, or assembled from
the current state for saturable materials) and f is a finite sum of
sinusoids whose frequencies are integer multiples of 1/T.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ProblemError(ValueError):
    """Raised for malformed or degenerate problem definitions."""


class NonlinearStiffness(Protocol):
    """State-dependent stiffness u -> K(u) with the Jacobian of K(u) u."""

    dim: int

    def matrix(self, u: np.ndarray) -> sp.csr_matrix: ...

    def jacobian(self, u: np.ndarray) -> sp.csr_matrix: ...

    def is_constant(self) -> bool: ...


@dataclass(frozen=True)
class ExcitationTerm:
    pattern: np.ndarray
    amplitude: float
    frequency: float
    phase: float = 0.0


@dataclass(frozen=True)
class Excitation:
    """f(t) = sum_j pattern_j * amplitude_j * sin(2 pi nu_j t + phase_j)."""

    terms: tuple[ExcitationTerm, ...]
    period: float
    dim: int

    def __post_init__(self):
        if not self.period > 0:
            raise ProblemError(f"period must be positive, got {self.period}")
        for term in self.terms:
            if np.shape(term.pattern) != (self.dim,):
                raise ProblemError(
                    f"excitation pattern has shape {np.shape(term.pattern)}, expected ({self.dim},)"
                )
            harmonic = term.frequency * self.period
            if abs(harmonic - round(harmonic)) > 1e-9 * max(1.0, abs(harmonic)):
                raise ProblemError(
                    f"frequency {term.frequency} Hz is not an integer multiple of 1/T = {1 / self.period} Hz"
                )

    @classmethod
    def zero(cls, dim: int, period: float) -> "Excitation":
        return cls((), period, dim)

    def __call__(self, t: float) -> np.ndarray:
        # Reducing modulo T keeps f(T_N) == f(T_0) bit-for-bit.
        tau = float(t) % self.period
        out = np.zeros(self.dim)
        for term in self.terms:
            out += term.pattern * (
                term.amplitude * np.sin(2.0 * np.pi * term.frequency * tau + term.phase)
            )
        return out


@dataclass(frozen=True, eq=False)
class PeriodicProblem:
    """Space-discrete time-periodic problem ``M u' + K(u) u = f(t)``.

    ``stiffness`` is either a sparse matrix (linear problem) or an object
    following :class:`NonlinearStiffness`.
    """

    mass: sp.csr_matrix
    stiffness: object
    excitation: Excitation
    name: str = "problem"
    metadata: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        d = self.mass.shape[0]
        if self.mass.shape != (d, d):
            raise ProblemError(f"mass matrix must be square, got {self.mass.shape}")
        if self.is_linear and self.stiffness.shape != (d, d):
            raise ProblemError(
                f"dimension mismatch: mass is {d}x{d}, stiffness is {self.stiffness.shape}"
            )
        if not self.is_linear and self.stiffness.dim != d:
            raise ProblemError(
                f"dimension mismatch: mass is {d}x{d}, stiffness has dim {self.stiffness.dim}"
            )
        if self.excitation.dim != d:
            raise ProblemError(f"excitation has dim {self.excitation.dim}, expected {d}")

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_cache")
        state.pop("_lock")
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        object.__setattr__(self, "_cache", {})
        object.__setattr__(self, "_lock", threading.Lock())

    @property
    def dim(self) -> int:
        return self.mass.shape[0]

    @property
    def period(self) -> float:
        return self.excitation.period

    @property
    def is_linear(self) -> bool:
        return sp.issparse(self.stiffness)

    def stiffness_matrix(self, u: np.ndarray | None = None) -> sp.csr_matrix:
        if self.is_linear:
            return self.stiffness
        if u is None:
            u = np.zeros(self.dim)
        return self.stiffness.matrix(u)

    def stiffness_jacobian(self, u: np.ndarray) -> sp.csr_matrix:
        if self.is_linear:
            return self.stiffness
        return self.stiffness.jacobian(u)

    def step_factor(self, dt: float) -> spla.SuperLU:
        """Cached sparse LU of ``M/dt + K`` (linear problems only)."""
        if not self.is_linear:
            raise ProblemError("step_factor requires a linear problem")
        key = float(dt)
        with self._lock:
            lu = self._cache.get(key)
        if lu is None:
            A = (self.mass / key + self.stiffness).tocsc()
            try:
                lu = spla.splu(A)
            except RuntimeError as exc:
                raise np.linalg.LinAlgError(
                    f"coarse step unsolvable: M/dt + K is singular for dt={dt}"
                ) from exc
            with self._lock:
                self._cache.setdefault(key, lu)
        return lu


def eval_excitation(prob: PeriodicProblem, t: float) -> np.ndarray:
    return prob.excitation(t)


def _as_csr(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def build_scalar_test(m: float, k: float, amplitude: float, frequency: float) -> PeriodicProblem:
    """Scalar ``m u' + k u = a sin(2 pi nu t)`` with period ``1/nu``."""
    if not frequency > 0:
        raise ProblemError("frequency must be positive")
    if m < 0:
        raise ProblemError("m must be non-negative")
    if m == 0 and k <= 0:
        raise ProblemError("degenerate system: m = 0 requires k > 0")
    if k <= 0:
        raise ProblemError("k must be positive")
    period = 1.0 / frequency
    terms = (ExcitationTerm(np.ones(1), float(amplitude), float(frequency)),) if amplitude else ()
    return PeriodicProblem(
        _as_csr([[m]]),
        _as_csr([[k]]),
        Excitation(terms, period, 1),
        name="scalar",
        metadata={"m": m, "k": k, "amplitude": amplitude, "frequency": frequency},
    )


def build_dae_pair(frequency: float = 50.0) -> PeriodicProblem:
    """Two-dof index-1 DAE with singular mass ``diag(1, 0)``."""
    M = _as_csr(np.diag([1.0, 0.0]))
    K = _as_csr([[2.0, -1.0], [-1.0, 2.0]])
    f = Excitation((ExcitationTerm(np.array([1.0, 0.0]), 1.0, frequency),), 1.0 / frequency, 2)
    return PeriodicProblem(M, K, f, name="dae_pair")


def excitation_from_spec(spec: dict, dim: int) -> Excitation:
    """Build an :class:`Excitation` from its JSON form.

    ``{"period": T, "terms": [{"dofs": {"0": 1.0}, "amplitude": a,
    "frequency": nu, "phase": 0.0}]}``; ``"pattern": [...]`` may replace
    ``"dofs"`` with a dense vector.
    """
    if "period" not in spec:
        raise ProblemError("excitation spec requires 'period'")
    terms = []
    for raw in spec.get("terms", []):
        if "pattern" in raw:
            pattern = np.asarray(raw["pattern"], dtype=float)
        else:
            pattern = np.zeros(dim)
            for idx, weight in raw.get("dofs", {}).items():
                i = int(idx)
                if not 0 <= i < dim:
                    raise ProblemError(f"excitation dof {i} out of range [0, {dim})")
                pattern[i] = float(weight)
        terms.append(
            ExcitationTerm(
                pattern,
                float(raw.get("amplitude", 1.0)),
                float(raw["frequency"]),
                float(raw.get("phase", 0.0)),
            )
        )
    return Excitation(tuple(terms), float(spec["period"]), dim)


def _read_mtx(path) -> sp.csr_matrix:
    try:
        A = scipy.io.mmread(str(path))
    except (OSError, ValueError) as exc:
        raise ProblemError(f"cannot read Matrix Market file {path}: {exc}") from exc
    if not sp.issparse(A):
        A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ProblemError(f"{path}: matrix must be square, got {A.shape}")
    return _as_csr(A)


def _max_abs(A: sp.spmatrix) -> float:
    return float(abs(A).max()) if A.nnz else 0.0


def load_problem(mass_path, stiffness_path, excitation_spec: dict | str | Path) -> PeriodicProblem:
    """Linear problem from two Matrix Market files and an excitation spec.

    Symmetric-storage files are expanded by ``scipy.io.mmread``.
    """
    M = _read_mtx(mass_path)
    K = _read_mtx(stiffness_path)
    if M.shape != K.shape:
        raise ProblemError(f"dimension mismatch: mass {M.shape} vs stiffness {K.shape}")
    asym = _max_abs(M - M.T)
    if asym > 1e-12 * _max_abs(M):
        raise ProblemError(f"mass matrix is not symmetric (max |M - M^T| = {asym:.3e})")
    if not isinstance(excitation_spec, dict):
        excitation_spec = json.loads(Path(excitation_spec).read_text())
    f = excitation_from_spec(excitation_spec, M.shape[0])
    return PeriodicProblem(M, K, f, name=Path(stiffness_path).stem)


def write_problem(prob: PeriodicProblem, mass_path, stiffness_path) -> None:
    """Write M and the (linear) K as Matrix Market coordinate files."""
    scipy.io.mmwrite(str(mass_path), prob.mass.tocoo(), precision=17)
    scipy.io.mmwrite(str(stiffness_path), prob.stiffness_matrix().tocoo(), precision=17)


def excitation_to_spec(f: Excitation) -> dict:
    return {
        "period": f.period,
        "terms": [
            {
                "pattern": t.pattern.tolist(),
                "amplitude": t.amplitude,
                "frequency": t.frequency,
                "phase": t.phase,
            }
            for t in f.terms
        ],
    }


def linearized(prob: PeriodicProblem, reference_state: np.ndarray | None = None,
               name: str | None = None) -> PeriodicProblem:
    """Copy of ``prob`` with the stiffness frozen at ``K(reference_state)``."""
    if prob.is_linear:
        return prob
    u_ref = np.zeros(prob.dim) if reference_state is None else np.asarray(reference_state, float)
    return PeriodicProblem(
        prob.mass,
        _as_csr(prob.stiffness.matrix(u_ref)),
        prob.excitation,
        name=name or f"{prob.name}-frozen",
        metadata=dict(prob.metadata, frozen_linearization=True),
    )
