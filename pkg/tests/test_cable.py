import json
from pathlib import Path

import numpy as np
import pytest

from periodic_parareal.cable import (
    NU0,
    CableStiffness,
    CoaxCableParams,
    ReluctivityCurve,
    STEEL,
    build_coax_cable,
    magnetic_energy,
    radial_mesh,
)
from periodic_parareal.problem import ProblemError
from periodic_parareal.propagators import TimeMesh, newton_solve
from periodic_parareal.spectral import CyclicSystem, solve_cyclic_direct

FIXTURES = Path(__file__).parent / "fixtures"


def test_brauer_curve_positive_monotone():
    b2 = np.linspace(0, 9, 200)
    nu = STEEL.nu(b2)
    assert np.all(nu > 0)
    assert np.all(np.diff(nu) >= 0)
    assert STEEL.nu(0.0) == pytest.approx(3.8 + 396.2)


def test_brauer_derivative_matches_finite_difference():
    b2 = np.array([0.1, 0.8, 1.7])
    h = 1e-6
    fd = (STEEL.nu(b2 + h) - STEEL.nu(b2 - h)) / (2 * h)
    assert STEEL.dnu_db2(b2) == pytest.approx(fd, rel=1e-7)


@pytest.mark.parametrize("kwargs, msg", [
    ({"radii": (2e-3, 1e-3, 3e-3)}, "strictly increasing"),
    ({"conductivities": (1.0, -1.0, 1.0)}, "negative conductivity"),
])
def test_invalid_params(kwargs, msg):
    with pytest.raises(ProblemError, match=msg):
        CoaxCableParams(**kwargs)


def test_mesh_has_interfaces_on_nodes():
    p = CoaxCableParams(n_r=57)
    nodes, regions = radial_mesh(p.radii, p.n_r)
    assert len(nodes) == 57
    for r in p.radii:
        assert np.min(np.abs(nodes - r)) < 1e-15
    assert np.all(np.diff(regions) >= 0)


def test_zero_conductivity_gives_zero_mass():
    p = CoaxCableParams(conductivities=(0.0, 0.0, 0.0), n_r=20).linear()
    prob = build_coax_cable(p)
    assert prob.mass.nnz == 0
    assert prob.is_linear


def test_source_pattern_sums_to_current():
    prob = build_coax_cable(CoaxCableParams(current=123.0))
    (term,) = prob.excitation.terms
    assert term.pattern.sum() * term.amplitude == pytest.approx(123.0, abs=1e-12)


def test_mass_matches_quadrature():
    # M_ij = int sigma phi_i phi_j 2 pi r dr by 4-point Gauss per element.
    p = CoaxCableParams(n_r=12).linear()
    prob = build_coax_cable(p)
    nodes, regions = radial_mesh(p.radii, p.n_r)
    M = np.zeros((p.n_r, p.n_r))
    x, w = np.polynomial.legendre.leggauss(4)
    for e in range(p.n_r - 1):
        a, b = nodes[e], nodes[e + 1]
        r = 0.5 * (b - a) * x + 0.5 * (a + b)
        phi = np.vstack([(b - r) / (b - a), (r - a) / (b - a)])
        loc = (phi * w * r) @ phi.T * 0.5 * (b - a) * 2 * np.pi * p.conductivities[regions[e]]
        M[e:e + 2, e:e + 2] += loc
    assert np.allclose(prob.mass.toarray(), M[:-1, :-1], rtol=1e-12, atol=0)


def test_jacobian_matches_finite_difference(rng):
    p = CoaxCableParams(n_r=25)
    prob = build_coax_cable(p)
    st = prob.stiffness
    u = 2e-3 * rng.standard_normal(prob.dim)
    J = st.jacobian(u).toarray()
    h = 1e-9
    fd = np.empty_like(J)
    for j in range(prob.dim):
        e = np.zeros(prob.dim)
        e[j] = h
        fd[:, j] = (st.matrix(u + e) @ (u + e) - st.matrix(u - e) @ (u - e)) / (2 * h)
    assert np.allclose(J, fd, rtol=1e-5, atol=1e-6 * np.abs(J).max())


def test_constant_curves_give_linear_problem():
    p = CoaxCableParams(n_r=20).linear()
    assert build_coax_cable(p).is_linear
    assert not build_coax_cable(p, force_nonlinear=True).is_linear
    assert not build_coax_cable(CoaxCableParams(n_r=20)).is_linear


def _periodic_energy(n_r):
    prob = build_coax_cable(CoaxCableParams(n_r=n_r).linear())
    mesh = TimeMesh(20, prob.period, 1)
    r = np.array([prob.excitation(mesh.boundary(n if n else mesh.N)) for n in range(mesh.N)])
    U = solve_cyclic_direct(CyclicSystem.from_problem(prob, mesh).with_rhs(r))
    return np.mean([magnetic_energy(prob, u) for u in U])


def test_energy_mesh_convergence():
    reference = _periodic_energy(1000)
    for n_r in (100, 200):
        assert abs(_periodic_energy(n_r) - reference) / reference < 0.01


def test_newton_trace_regression():
    """Full-step Newton on the n_r = 100 cable, one coarse step from a nonzero state."""
    fixture = json.loads((FIXTURES / "newton_trace.json").read_text())
    prob = build_coax_cable(CoaxCableParams(n_r=100))
    u_prev = newton_solve(prob, np.zeros(prob.dim), 0.004, 1e-3).u
    res = newton_solve(prob, u_prev, 0.005, 1e-3)
    assert all(b < a for a, b in zip(res.residuals, res.residuals[1:]))
    assert res.iterations == fixture["iterations"]
    n_cmp = fixture["compare_first"]
    assert res.residuals[:n_cmp] == pytest.approx(fixture["residuals"][:n_cmp], rel=1e-6)
