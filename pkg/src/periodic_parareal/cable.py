"""
Axisymmetric 1D finite-element model of a coaxial cable.

The cross-section consists of three concentric regions: an inner conductor
(0, r1) carrying the source current, a sleeve (r1, r2) that may be made of a
saturable steel, and an outer shield (r2, r3). The unknown is the axial
magnetic vector potential A_z(r) on linear radial elements; A_z(r3) = 0.

Per unit axial length and with weight 2*pi*r:

    M_ij = int sigma phi_i phi_j 2 pi r dr
    K_ij = int nu(B^2) phi_i' phi_j' 2 pi r dr,    B = |dA/dr|
    f_i  = int J_s phi_i 2 pi r dr,                 J_s = I(t) / area(source)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .problem import Excitation, ExcitationTerm, PeriodicProblem, ProblemError

MU0 = 4e-7 * math.pi
NU0 = 1.0 / MU0


@dataclass(frozen=True)
class ReluctivityCurve:
    """nu(B^2) = k1 exp(k2 B^2) + k3 (Brauer), or a constant reluctivity.

    Units: k1, k3 in A/(m T), k2 in 1/T^2.
    """

    k1: float = 0.0
    k2: float = 0.0
    k3: float = NU0
    model: str = "brauer"

    def __post_init__(self):
        if self.model not in ("brauer", "constant"):
            raise ProblemError(f"unknown reluctivity model {self.model!r}")
        if self.model == "brauer" and (self.k1 < 0 or self.k2 < 0 or self.k1 + self.k3 <= 0):
            raise ProblemError("Brauer curve needs k1 >= 0, k2 >= 0 and k1 + k3 > 0")
        if self.model == "constant" and self.k3 <= 0:
            raise ProblemError("constant reluctivity must be positive")

    @classmethod
    def constant(cls, nu: float) -> "ReluctivityCurve":
        return cls(0.0, 0.0, float(nu), model="constant")

    @classmethod
    def relative_permeability(cls, mu_r: float) -> "ReluctivityCurve":
        return cls.constant(NU0 / mu_r)

    @property
    def is_constant(self) -> bool:
        return self.model == "constant" or self.k1 == 0.0 or self.k2 == 0.0

    def nu(self, b2: np.ndarray) -> np.ndarray:
        b2 = np.asarray(b2, dtype=float)
        if self.model == "constant":
            return np.full_like(b2, self.k3)
        return self.k1 * np.exp(self.k2 * b2) + self.k3

    def dnu_db2(self, b2: np.ndarray) -> np.ndarray:
        b2 = np.asarray(b2, dtype=float)
        if self.model == "constant":
            return np.zeros_like(b2)
        return self.k1 * self.k2 * np.exp(self.k2 * b2)

    def at_zero(self) -> "ReluctivityCurve":
        return ReluctivityCurve.constant(float(self.nu(0.0)))


# Declared defaults: the reference cable's geometry and material data are not
# published, these values give a slowly settling (tau >> T) shielded cable.
STEEL = ReluctivityCurve(k1=3.8, k2=2.17, k3=396.2)
COPPER_SIGMA = 5.8e7
STEEL_SIGMA = 5.0e6


@dataclass(frozen=True)
class CoaxCableParams:
    radii: tuple[float, float, float] = (2.0e-3, 7.0e-3, 9.0e-3)
    conductivities: tuple[float, float, float] = (COPPER_SIGMA, STEEL_SIGMA, COPPER_SIGMA)
    curves: tuple[ReluctivityCurve, ...] = field(
        default_factory=lambda: (ReluctivityCurve.constant(NU0), STEEL, ReluctivityCurve.constant(NU0))
    )
    source_region: int = 0
    current: float = 150.0
    frequency: float = 50.0
    n_r: int = 200

    def __post_init__(self):
        r = self.radii
        if len(r) != 3 or not (0 < r[0] < r[1] < r[2]):
            raise ProblemError(f"radii must be positive and strictly increasing, got {r}")
        if len(self.conductivities) != 3 or len(self.curves) != 3:
            raise ProblemError("need one conductivity and one reluctivity curve per region")
        if any(s < 0 for s in self.conductivities):
            raise ProblemError(f"negative conductivity in {self.conductivities}")
        if self.source_region not in (0, 1, 2):
            raise ProblemError("source_region must be 0, 1 or 2")
        if self.n_r < 4:
            raise ProblemError("n_r must be at least 4 to give each region one element")
        if not self.frequency > 0:
            raise ProblemError("frequency must be positive")

    def linear(self) -> "CoaxCableParams":
        """Same cable with every curve replaced by its small-field value."""
        return CoaxCableParams(
            self.radii, self.conductivities, tuple(c.at_zero() for c in self.curves),
            self.source_region, self.current, self.frequency, self.n_r,
        )

    def with_nodes(self, n_r: int) -> "CoaxCableParams":
        return CoaxCableParams(
            self.radii, self.conductivities, self.curves,
            self.source_region, self.current, self.frequency, n_r,
        )


def radial_mesh(radii, n_r: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on [0, r3] with region interfaces on nodes; returns (nodes, element region ids)."""
    edges = np.concatenate([[0.0], radii])
    widths = np.diff(edges)
    n_el = n_r - 1
    counts = np.maximum(1, np.round(widths / edges[-1] * n_el).astype(int))
    while counts.sum() > n_el:
        counts[np.argmax(counts)] -= 1
    while counts.sum() < n_el:
        counts[np.argmax(widths / counts)] += 1
    nodes = [np.zeros(1)]
    regions = []
    for i, c in enumerate(counts):
        nodes.append(np.linspace(edges[i], edges[i + 1], c + 1)[1:])
        regions.append(np.full(c, i))
    return np.concatenate(nodes), np.concatenate(regions)


class _ChainPattern:
    """CSR sparsity of a tridiagonal chain matrix; only ``data`` changes."""

    def __init__(self, n: int):
        self.n = n
        rows, cols = [], []
        for i in range(n):
            for j in (i - 1, i, i + 1):
                if 0 <= j < n:
                    rows.append(i)
                    cols.append(j)
        self.indices = np.array(cols, dtype=np.int32)
        self.indptr = np.searchsorted(rows, np.arange(n + 1)).astype(np.int32)
        rows = np.array(rows)
        self._diag = np.flatnonzero(rows == self.indices)
        self._lower = np.flatnonzero(rows == self.indices + 1)
        self._upper = np.flatnonzero(rows + 1 == self.indices)

    def build(self, main: np.ndarray, off: np.ndarray) -> sp.csr_matrix:
        data = np.empty(len(self.indices))
        data[self._diag] = main
        data[self._lower] = off
        data[self._upper] = off
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


def _tridiag(diag_el: np.ndarray, off_el: np.ndarray, pattern: _ChainPattern) -> sp.csr_matrix:
    """Assemble per-element 2x2 symmetric blocks [[a, b], [b, c]] on a chain.

    ``diag_el`` has shape (n_el, 2) holding (a, c); the last node is
    eliminated by the Dirichlet condition.
    """
    n = pattern.n
    main = np.zeros(n + 1)
    main[:-1] += diag_el[:, 0]
    main[1:] += diag_el[:, 1]
    return pattern.build(main[:n], off_el[: n - 1])


class CableStiffness:
    """u -> K(u) and the Jacobian of K(u) u for the radial cable mesh."""

    def __init__(self, nodes: np.ndarray, regions: np.ndarray, curves):
        self.nodes = nodes
        self.regions = regions
        self.curves = tuple(curves)
        self.dim = len(nodes) - 1
        h = np.diff(nodes)
        self._h = h
        self._w = 2.0 * np.pi * 0.5 * (nodes[:-1] + nodes[1:]) / h
        self._pattern = _ChainPattern(self.dim)

    def is_constant(self) -> bool:
        return all(c.is_constant for c in self.curves)

    def flux_density_sq(self, u: np.ndarray) -> np.ndarray:
        full = np.append(u, 0.0)
        return (np.diff(full) / self._h) ** 2

    def _per_element(self, b2: np.ndarray, fn: str) -> np.ndarray:
        out = np.empty_like(b2)
        for i, curve in enumerate(self.curves):
            sel = self.regions == i
            out[sel] = getattr(curve, fn)(b2[sel])
        return out

    def _assemble(self, coeff: np.ndarray) -> sp.csr_matrix:
        k = coeff * self._w
        return _tridiag(np.column_stack([k, k]), -k, self._pattern)

    def matrix(self, u: np.ndarray) -> sp.csr_matrix:
        return self._assemble(self._per_element(self.flux_density_sq(u), "nu"))

    def jacobian(self, u: np.ndarray) -> sp.csr_matrix:
        b2 = self.flux_density_sq(u)
        nu = self._per_element(b2, "nu")
        dnu = self._per_element(b2, "dnu_db2")
        return self._assemble(nu + 2.0 * dnu * b2)


def build_coax_cable(p: CoaxCableParams | None = None, *, force_nonlinear: bool = False) -> PeriodicProblem:
    """Assemble the cable problem.

    The stiffness is a fixed matrix when every curve is constant, unless
    ``force_nonlinear`` asks for the state-dependent assembler anyway.
    """
    p = p or CoaxCableParams()
    nodes, regions = radial_mesh(p.radii, p.n_r)
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    d = p.n_r - 1
    sigma = np.asarray(p.conductivities, dtype=float)[regions]

    two_pi = 2.0 * np.pi
    m_diag = np.column_stack([h * (3 * a + b) / 12.0, h * (a + 3 * b) / 12.0]) * (two_pi * sigma)[:, None]
    m_off = h * (a + b) / 12.0 * two_pi * sigma
    M = _tridiag(m_diag, m_off, _ChainPattern(d))
    M.eliminate_zeros()

    src = p.source_region
    r_in = 0.0 if src == 0 else p.radii[src - 1]
    area = np.pi * (p.radii[src] ** 2 - r_in**2)
    in_src = regions == src
    load = np.zeros(p.n_r)
    np.add.at(load, np.arange(p.n_r - 1)[in_src], (two_pi * h * (2 * a + b) / 6.0)[in_src])
    np.add.at(load, np.arange(1, p.n_r)[in_src], (two_pi * h * (a + 2 * b) / 6.0)[in_src])
    # A source in the shield loses the Dirichlet node's share of the current.
    pattern = load[:d] / area

    period = 1.0 / p.frequency
    f = Excitation((ExcitationTerm(pattern, float(p.current), float(p.frequency)),), period, d)
    stiff = CableStiffness(nodes, regions, p.curves)
    linear = stiff.is_constant() and not force_nonlinear
    K = stiff.matrix(np.zeros(d)) if linear else stiff
    return PeriodicProblem(
        M,
        K,
        f,
        name="coax_linear" if linear else "coax",
        metadata={"nodes": nodes, "regions": regions, "params": p, "assembler": stiff},
    )


def magnetic_energy(prob: PeriodicProblem, u: np.ndarray) -> float:
    """Stored energy per unit length, 0.5 u^T K u (linear stiffness)."""
    K = prob.stiffness_matrix(u)
    return 0.5 * float(u @ (K @ u))
