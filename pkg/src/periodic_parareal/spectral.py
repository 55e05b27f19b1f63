"""
Coarse time-periodic system of the periodic-coarse Parareal iteration.

With implicit Euler on the coarse grid the new iterate solves the
block-circulant system

    Q U_0 - C U_{N-1} = r_0
    Q U_n - C U_{n-1} = r_n,        n = 1, ..., N-1

where C = M/dT and Q = C + K. Under the unitary DFT along the time index,
U_hat_p = N^{-1/2} sum_n U_n exp(-2 pi i p n / N), the shift U_{n-1} maps to
exp(-2 pi i p / N) U_hat_p, so the system decouples into N independent
sparse solves

    (Q - exp(-2 pi i p / N) C) U_hat_p = r_hat_p,     p in {-N/2+1, ..., N/2}.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .propagators import TimeMesh, jump_norm
from .problem import PeriodicProblem


class CyclicSolveError(np.linalg.LinAlgError):
    pass


def frequency_set(N: int, period: float) -> list[tuple[int, float]]:
    """Harmonic indices and angular frequencies in FFT bin order."""
    if N < 2:
        raise ValueError("N must be at least 2")
    if N % 2:
        raise ValueError(f"odd harmonic count unsupported (N={N})")
    return [(p, 2.0 * np.pi * p / period) for p in harmonic_indices(N)]


def harmonic_indices(N: int) -> np.ndarray:
    """p for each FFT bin b: p = b for b <= N/2, else b - N."""
    b = np.arange(N)
    return np.where(b <= N // 2, b, b - N)


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Unitary DFT coefficients, shape (N, d), rows in FFT bin order."""

    coeffs: np.ndarray
    period: float = 1.0

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    @property
    def indices(self) -> np.ndarray:
        return harmonic_indices(self.N)

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * np.pi * self.indices / self.period

    def __getitem__(self, p: int) -> np.ndarray:
        """Coefficient vector of harmonic p (negative p allowed)."""
        return self.coeffs[p % self.N]


def forward_dft(traj: np.ndarray, period: float = 1.0) -> HarmonicSpectrum:
    traj = np.atleast_2d(np.asarray(traj))
    if traj.shape[0] % 2:
        raise ValueError(f"odd harmonic count unsupported (N={traj.shape[0]})")
    return HarmonicSpectrum(np.fft.fft(traj, axis=0, norm="ortho"), period)


def inverse_dft(spec: HarmonicSpectrum | np.ndarray) -> np.ndarray:
    coeffs = spec.coeffs if isinstance(spec, HarmonicSpectrum) else np.asarray(spec)
    U = np.fft.ifft(coeffs, axis=0, norm="ortho")
    real = U.real
    residue = np.linalg.norm(U.imag)
    if residue > 1e-10 * np.linalg.norm(real):
        raise CyclicSolveError(
            f"conjugate symmetry violated: imaginary part {residue:.3e} of inverse DFT"
        )
    return real


@dataclass(eq=False)
class CyclicSystem:
    """Block-circulant coarse system with blocks C = M/dT and K.

    Factorizations are cached per harmonic and shared by every system
    derived through :meth:`with_rhs`.
    """

    C: sp.csr_matrix
    K: sp.csr_matrix
    N: int
    rhs: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.C = sp.csr_matrix(self.C)
        self.K = sp.csr_matrix(self.K)
        if self.rhs is not None:
            self.rhs = np.asarray(self.rhs, dtype=float).reshape(self.N, self.dim)

    @classmethod
    def from_problem(cls, prob: PeriodicProblem, mesh: TimeMesh, rhs=None) -> "CyclicSystem":
        if not prob.is_linear:
            raise ValueError("cyclic coarse system needs a linear (or frozen) problem")
        return cls(prob.mass / mesh.coarse_dt, prob.stiffness, mesh.N, rhs)

    @property
    def dim(self) -> int:
        return self.C.shape[0]

    @property
    def Q(self) -> sp.csr_matrix:
        with self._lock:
            Q = self._cache.get("Q")
            if Q is None:
                Q = self._cache["Q"] = (self.C + self.K).tocsr()
        return Q

    def with_rhs(self, rhs: np.ndarray) -> "CyclicSystem":
        return CyclicSystem(self.C, self.K, self.N, rhs, self._cache, self._lock)

    def matrix(self) -> sp.csr_matrix:
        """Assembled (N d) x (N d) block-circulant matrix."""
        N = self.N
        shift = sp.csr_matrix((np.ones(N), ((np.arange(N)), (np.arange(N) - 1) % N)), shape=(N, N))
        return (sp.kron(sp.identity(N), self.Q) - sp.kron(shift, self.C)).tocsr()

    def factor(self, key, build: Callable[[], sp.spmatrix], what: str = "block") -> spla.SuperLU:
        with self._lock:
            lu = self._cache.get(key)
        if lu is None:
            try:
                lu = spla.splu(build().tocsc())
            except RuntimeError as exc:
                raise CyclicSolveError(f"{what} singular") from exc
            with self._lock:
                lu = self._cache.setdefault(key, lu)
        return lu

    def _require_rhs(self) -> np.ndarray:
        if self.rhs is None:
            raise ValueError("cyclic system has no right-hand side")
        return self.rhs


def _shift_factor(p: int, N: int) -> complex:
    """exp(-2 pi i p / N), exact at p = 0 and p = N/2."""
    p %= N
    if p == 0:
        return 1.0
    if 2 * p == N:
        return -1.0
    return np.exp(-2j * np.pi * p / N)


def harmonic_block(sys: CyclicSystem, p: int) -> sp.csr_matrix:
    """Diagonal block Q - exp(-2 pi i p/N) C of the transformed system.

    p = 0 returns K itself; p = N/2 is real.
    """
    z = _shift_factor(p, sys.N)
    if z == 1.0:
        return sys.K
    if z == -1.0:
        return (sys.Q + sys.C).tocsr()
    return (sys.Q.astype(complex) - z * sys.C).tocsr()


def assemble_rhs(fine: np.ndarray, coarse: np.ndarray, prob: PeriodicProblem,
                 mesh: TimeMesh) -> np.ndarray:
    """Right-hand side r_n = Q (F_n - G_n) + f(T_n), wrap-around entry first.

    ``fine[n-1]`` and ``coarse[n-1]`` hold F_n and G_n for n = 1..N; row 0
    of the result corresponds to n = N.
    """
    fine = np.asarray(fine, dtype=float)
    coarse = np.asarray(coarse, dtype=float)
    if fine.shape != coarse.shape or fine.shape[0] != mesh.N:
        raise ValueError(
            f"length mismatch: fine {fine.shape}, coarse {coarse.shape}, N={mesh.N}"
        )
    Q = (prob.mass / mesh.coarse_dt + prob.stiffness_matrix()).tocsr()
    b = np.roll(fine - coarse, 1, axis=0)
    r = (Q @ b.T).T
    for row in range(mesh.N):
        n = mesh.N if row == 0 else row
        r[row] += prob.excitation(mesh.boundary(n))
    return r


def solve_cyclic_direct(sys: CyclicSystem) -> np.ndarray:
    r = sys._require_rhs()
    lu = sys.factor("direct", sys.matrix, "cyclic system")
    return lu.solve(r.ravel()).reshape(sys.N, sys.dim)


class SweepResult(NamedTuple):
    trajectory: np.ndarray
    sweeps: int
    converged: bool


def solve_cyclic_fixed_point(sys: CyclicSystem, tol: float = 1e-12,
                             max_sweeps: int = 10_000) -> SweepResult:
    """Cyclic forward substitution sweeps from a zero initial guess."""
    r = sys._require_rhs()
    lu = sys.factor("Q_lu", lambda: sys.Q, "diagonal block Q")
    C = sys.C
    U = np.zeros((sys.N, sys.dim))
    for sweep in range(1, max_sweeps + 1):
        old = U.copy()
        prev = U[-1]
        for n in range(sys.N):
            U[n] = lu.solve(C @ prev + r[n])
            prev = U[n]
        if jump_norm(U, old) <= tol:
            return SweepResult(U, sweep, True)
    return SweepResult(U, max_sweeps, False)


def _solve_harmonic(sys: CyclicSystem, b: int, r_hat: np.ndarray) -> np.ndarray:
    p = int(harmonic_indices(sys.N)[b])
    lu = sys.factor(("harmonic", b), lambda: harmonic_block(sys, p), f"harmonic block at p={p}")
    try:
        # The p = 0 and p = N/2 blocks are real; so is their right-hand side.
        x = lu.solve(r_hat.real if p in (0, sys.N // 2) else r_hat)
    except RuntimeError as exc:
        raise CyclicSolveError(f"harmonic block singular at p={p}") from exc
    if not np.all(np.isfinite(x)):
        raise CyclicSolveError(f"harmonic block singular at p={p}")
    return x


def solve_cyclic_multiharmonic(sys: CyclicSystem, real_symmetry: bool = True,
                               map_fn: Callable[..., Iterable] = map) -> np.ndarray:
    """Solve the cyclic system harmonic by harmonic.

    With ``real_symmetry`` only bins 0..N/2 are solved and the negative
    frequencies follow by conjugation. ``map_fn`` distributes the
    independent per-harmonic solves (any ``map``-compatible callable).
    """
    r = sys._require_rhs()
    N = sys.N
    if N % 2:
        raise ValueError(f"odd harmonic count unsupported (N={N})")
    if real_symmetry:
        r_hat = np.fft.rfft(r, axis=0, norm="ortho")
        bins = range(N // 2 + 1)
    else:
        r_hat = np.fft.fft(r, axis=0, norm="ortho")
        bins = range(N)
    try:
        solved = list(map_fn(lambda b: _solve_harmonic(sys, b, r_hat[b]), bins))
    except RuntimeError as exc:
        raise CyclicSolveError(str(exc)) from exc
    U_hat = np.array(solved, dtype=complex)
    if real_symmetry:
        return np.fft.irfft(U_hat, n=N, axis=0, norm="ortho")
    return inverse_dft(U_hat)
