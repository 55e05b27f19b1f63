import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_psd, random_spd
from periodic_parareal.propagators import TimeMesh, coarse_propagate, fine_propagate
from periodic_parareal.spectral import (
    CyclicSolveError,
    CyclicSystem,
    HarmonicSpectrum,
    assemble_rhs,
    forward_dft,
    frequency_set,
    harmonic_block,
    inverse_dft,
    solve_cyclic_direct,
    solve_cyclic_fixed_point,
    solve_cyclic_multiharmonic,
)


def scalar_system(C, K, N, r):
    return CyclicSystem(sp.csr_matrix([[C]]), sp.csr_matrix([[K]]), N, np.asarray(r, float))


def random_system(rng, N, d, rhs=True, contraction=None):
    K = random_spd(rng, d)
    M = random_psd(rng, d, rank=max(1, d - 1))
    C = M * rng.uniform(0.1, 10.0)
    if contraction is not None:
        rho = max(abs(np.linalg.eigvals(np.linalg.solve(C + K, C))))
        if rho >= contraction:
            C *= 0.5 * contraction / rho
    r = rng.standard_normal((N, d)) if rhs else None
    return CyclicSystem(sp.csr_matrix(C), sp.csr_matrix(K), N, r)


def dft_matrix(N, d):
    n = np.arange(N)
    F = np.exp(-2j * np.pi * np.outer(n, n) / N) / np.sqrt(N)
    return np.kron(F, np.eye(d))


# -- frequency set and transforms -------------------------------------------

def test_frequency_set_reference_case():
    pairs = frequency_set(20, 0.02)
    assert sorted(p for p, _ in pairs) == list(range(-9, 11))
    for p, w in pairs:
        assert w == pytest.approx(100 * np.pi * p)
    # FFT bin order: bin b holds p = b mod N
    assert [p % 20 for p, _ in pairs] == list(range(20))


def test_frequency_set_smallest():
    assert frequency_set(2, 1.0) == [(0, 0.0), (1, pytest.approx(2 * np.pi))]


def test_frequency_set_rejects_odd():
    with pytest.raises(ValueError, match="odd harmonic count"):
        frequency_set(7, 1.0)


def test_forward_dft_constant():
    v = np.array([1.0, -2.0, 0.5])
    spec = forward_dft(np.tile(v, (6, 1)))
    assert spec[0] == pytest.approx(np.sqrt(6) * v, abs=1e-14)
    assert np.abs(spec.coeffs[1:]).max() < 1e-14


def test_forward_dft_two_points():
    spec = forward_dft(np.array([[1.0], [1.0]]))
    assert spec[0][0] == pytest.approx(np.sqrt(2))
    assert abs(spec[1][0]) < 1e-15


def test_inverse_dft_simple_cases():
    assert np.all(inverse_dft(HarmonicSpectrum(np.zeros((4, 3), complex))) == 0)
    v = np.array([2.0, -1.0])
    coeffs = np.zeros((8, 2), complex)
    coeffs[0] = np.sqrt(8) * v
    assert inverse_dft(HarmonicSpectrum(coeffs)) == pytest.approx(np.tile(v, (8, 1)), abs=1e-14)


def test_inverse_dft_rejects_asymmetric_spectrum():
    coeffs = np.zeros((4, 1), complex)
    coeffs[1] = 1.0
    with pytest.raises(CyclicSolveError, match="conjugate symmetry"):
        inverse_dft(coeffs)


def test_dft_roundtrip_and_parseval(rng):
    for _ in range(50):
        N = 2 * rng.integers(1, 17)
        x = rng.standard_normal((N, rng.integers(1, 21)))
        spec = forward_dft(x)
        assert np.linalg.norm(inverse_dft(spec) - x) <= 1e-12 * np.linalg.norm(x)
        e = np.linalg.norm(x) ** 2
        assert abs(e - np.linalg.norm(spec.coeffs) ** 2) <= 1e-10 * e


def test_real_input_conjugate_symmetry(rng):
    x = rng.standard_normal((10, 4))
    spec = forward_dft(x)
    for p in range(-4, 5):
        assert spec[-p] == pytest.approx(np.conj(spec[p]), abs=1e-13)


# -- block structure ---------------------------------------------------------

def test_harmonic_block_zero_is_K(rng):
    sys = random_system(rng, 6, 5, rhs=False)
    assert np.array_equal(harmonic_block(sys, 0).toarray(), sys.K.toarray())


def test_harmonic_block_nyquist(rng):
    sys = random_system(rng, 6, 5, rhs=False)
    assert np.array_equal(harmonic_block(sys, 3).toarray(), (sys.Q + sys.C).toarray())


def test_dense_diagonalization_brute_force(rng):
    N, d = 4, 2
    sys = random_system(rng, N, d, rhs=False)
    G = sys.matrix().toarray()
    F = dft_matrix(N, d)
    Ghat = F @ G @ F.conj().T
    for a in range(N):
        for b in range(N):
            block = Ghat[a * d:(a + 1) * d, b * d:(b + 1) * d]
            if a == b:
                p = a if a <= N // 2 else a - N
                expected = sys.Q.toarray() - np.exp(-2j * np.pi * p / N) * sys.C.toarray()
                assert np.abs(block - expected).max() < 1e-12
                assert np.abs(harmonic_block(sys, p).toarray() - expected).max() < 1e-12
            else:
                assert np.linalg.norm(block) < 1e-12


def test_cyclic_matrix_layout():
    sys = scalar_system(1.0, 1.0, 3, np.zeros(3))
    assert np.array_equal(sys.matrix().toarray(), [[2, 0, -1], [-1, 2, 0], [0, -1, 2]])


# -- solvers -----------------------------------------------------------------

def test_direct_two_by_two():
    U = solve_cyclic_direct(scalar_system(1.0, 1.0, 2, [[1.0], [1.0]]))
    assert U[:, 0] == pytest.approx([1.0, 1.0], abs=1e-15)


def test_direct_zero_rhs(rng):
    sys = random_system(rng, 6, 3, rhs=False).with_rhs(np.zeros((6, 3)))
    assert np.all(solve_cyclic_direct(sys) == 0)


def test_direct_decoupled_when_C_vanishes(rng):
    d, N = 4, 6
    K = random_spd(rng, d)
    r = rng.standard_normal((N, d))
    sys = CyclicSystem(sp.csr_matrix((d, d)), sp.csr_matrix(K), N, r)
    assert solve_cyclic_direct(sys) == pytest.approx(np.linalg.solve(K, r.T).T, rel=1e-12)


def test_direct_singular():
    sys = scalar_system(1.0, 0.0, 4, np.ones(4))
    with pytest.raises(CyclicSolveError, match="cyclic system singular"):
        solve_cyclic_direct(sys)


def test_fixed_point_zero_rhs():
    res = solve_cyclic_fixed_point(scalar_system(1.0, 1.0, 4, np.zeros(4)), 1e-12, 10)
    assert res.sweeps == 1 and res.converged
    assert np.all(res.trajectory == 0)


def test_fixed_point_two_by_two_contraction():
    sys = scalar_system(1.0, 1.0, 2, [[1.0], [1.0]])
    errors = []
    for m in range(1, 8):
        U = solve_cyclic_fixed_point(sys, 1e-300, m).trajectory
        errors.append(np.abs(U[:, 0] - 1.0).max())
    for a, b in zip(errors, errors[1:]):
        assert b <= 0.25 * a * (1 + 1e-12)
    assert solve_cyclic_fixed_point(sys, 1e-14).trajectory[:, 0] == pytest.approx([1, 1], abs=1e-13)


def test_fixed_point_agrees_with_direct(rng):
    tol = 1e-10
    for _ in range(20):
        N = int(2 * rng.integers(1, 9))
        sys = random_system(rng, N, int(rng.integers(1, 8)), contraction=0.9)
        res = solve_cyclic_fixed_point(sys, tol, 100_000)
        assert res.converged
        U = solve_cyclic_direct(sys)
        assert np.abs(res.trajectory - U).max() <= tol * 10 * max(1.0, np.abs(U).max())


def test_fixed_point_flags_non_convergence():
    res = solve_cyclic_fixed_point(scalar_system(1.0, 1e-3, 4, np.ones((4, 1))), 1e-14, 3)
    assert not res.converged and res.sweeps == 3


def test_multiharmonic_two_by_two():
    sys = scalar_system(1.0, 1.0, 2, [[1.0], [1.0]])
    # Lambda_0 = K = 1, Lambda_1 = Q + C = 3; r_hat = (sqrt 2, 0)
    assert harmonic_block(sys, 0).toarray()[0, 0] == 1.0
    assert harmonic_block(sys, 1).toarray()[0, 0] == 3.0
    U = solve_cyclic_multiharmonic(sys)
    assert U[:, 0] == pytest.approx([1.0, 1.0], abs=1e-15)


def test_multiharmonic_zero_rhs(rng):
    sys = random_system(rng, 8, 3, rhs=False).with_rhs(np.zeros((8, 3)))
    assert np.all(solve_cyclic_multiharmonic(sys) == 0)


def test_multiharmonic_dae_pair_matches_direct(dae, rng):
    mesh = TimeMesh(8, dae.period, 1)
    sys = CyclicSystem.from_problem(dae, mesh, rng.standard_normal((8, 2)))
    U = solve_cyclic_direct(sys)
    assert np.linalg.norm(solve_cyclic_multiharmonic(sys) - U) <= 1e-10 * np.linalg.norm(U)


def test_multiharmonic_singular_block():
    # K = 0 makes Lambda_0 singular while Q stays invertible.
    sys = scalar_system(1.0, 0.0, 4, np.ones((4, 1)))
    with pytest.raises(CyclicSolveError, match="p=0"):
        solve_cyclic_multiharmonic(sys)


def test_multiharmonic_custom_map(rng):
    from concurrent.futures import ThreadPoolExecutor

    sys = random_system(rng, 12, 6)
    with ThreadPoolExecutor(4) as ex:
        U = solve_cyclic_multiharmonic(sys, map_fn=ex.map)
    assert U == pytest.approx(solve_cyclic_direct(sys), rel=1e-10, abs=1e-12)


def test_factorizations_cached_across_rhs(rng):
    sys = random_system(rng, 8, 4)
    solve_cyclic_multiharmonic(sys)
    keys = set(sys._cache)
    other = sys.with_rhs(rng.standard_normal((8, 4)))
    solve_cyclic_multiharmonic(other)
    assert set(other._cache) == keys


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 16), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_diagonalization_equivalence(half_n, d, seed):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, 2 * half_n, d)
    U = solve_cyclic_direct(sys)
    U_mh = solve_cyclic_multiharmonic(sys)
    U_full = solve_cyclic_multiharmonic(sys, real_symmetry=False)
    scale = np.linalg.norm(U)
    assert np.linalg.norm(U_mh - U) <= 1e-10 * scale
    assert np.linalg.norm(U_full - U_mh) <= 1e-12 * scale


# -- right-hand side -----------------------------------------------------------

def test_rhs_without_correction_is_excitation(dae):
    mesh = TimeMesh(8, dae.period, 1)
    F = np.random.default_rng(1).standard_normal((8, 2))
    r = assemble_rhs(F, F, dae, mesh)
    expected = [dae.excitation(mesh.boundary(n)) for n in [8, 1, 2, 3, 4, 5, 6, 7]]
    assert np.array_equal(r, np.array(expected))


def test_rhs_zero():
    from periodic_parareal.problem import build_scalar_test

    prob = build_scalar_test(1, 1, 0, 50)
    mesh = TimeMesh(4, prob.period, 1)
    F = np.ones((4, 1))
    assert np.all(assemble_rhs(F, F, prob, mesh) == 0)


def test_rhs_length_mismatch(dae):
    mesh = TimeMesh(8, dae.period, 1)
    with pytest.raises(ValueError, match="length mismatch"):
        assemble_rhs(np.zeros((7, 2)), np.zeros((8, 2)), dae, mesh)


def fine_periodic_dense(prob, mesh):
    """Dense solve of the fine-grid implicit-Euler periodic system; states at T_0..T_{N-1}."""
    d, S = prob.dim, mesh.N * mesh.fine_steps
    C = prob.mass.toarray() / mesh.fine_dt
    Q = C + prob.stiffness.toarray()
    A = np.zeros((S * d, S * d))
    b = np.zeros(S * d)
    for j in range(S):
        A[j * d:(j + 1) * d, j * d:(j + 1) * d] = Q
        i = (j - 1) % S
        A[j * d:(j + 1) * d, i * d:(i + 1) * d] -= C
        b[j * d:(j + 1) * d] = prob.excitation((j + 1) * mesh.fine_dt)
    u = np.linalg.solve(A, b).reshape(S, d)    # u[j] is the state at t_{j+1}
    return np.roll(u, 1, axis=0)[::mesh.fine_steps]


def test_rhs_fixed_point_at_fine_periodic_solution(dae):
    mesh = TimeMesh(8, dae.period, 5)
    U = fine_periodic_dense(dae, mesh)
    F = np.array([fine_propagate(dae, U[n - 1], n, mesh) for n in range(1, 9)])
    assert np.abs(F - np.roll(U, -1, axis=0)).max() < 1e-14
    G = np.array([coarse_propagate(dae, U[n - 1], n, mesh) for n in range(1, 9)])
    sys = CyclicSystem.from_problem(dae, mesh, assemble_rhs(F, G, dae, mesh))
    assert np.abs(solve_cyclic_direct(sys) - U).max() < 1e-14
