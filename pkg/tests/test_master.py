import numpy as np
import pytest
from hypothesis import given, strategies as st

from repint.core import gibbs_state, kron, random_density_matrix, spin_algebra, von_neumann_entropy
from repint.errors import NumericalError
from repint.master import (
    Liouvillian, channel_superop, dissipator, ensemble_liouvillian, evolve, export_liouvillian,
    hamiltonian_liouvillian, lindblad_decomposition, lindblad_generator, load_liouvillian,
    member_jump, regular_map, spost, spre, sprepost, steady_state, unvec, vec,
)
from repint.model import build_measurement_model, build_single_spin_model, initial_state
from repint.core import hermitian_propagator
from repint.scattering import eikonal_operator

seeds = st.integers(0, 2**32 - 1)
S2 = spin_algebra(0.5)


def random_model(rng, J=None):
    J = J if J is not None else float(rng.choice([0.5, 1.0, 1.5]))
    ws, wp = rng.uniform(0.2, 2.0, 2)
    gx, gy, gz = rng.uniform(-1, 1, 3)
    return build_single_spin_model(J, ws, 0.5, wp, rng.uniform(0, 3), gx, gy, gz,
                                   rng.uniform(0.05, 10), rng.uniform(1e-3, 0.05))


@given(seeds)
def test_vectorization_convention(seed):
    rng = np.random.default_rng(seed)
    A, B, R = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    np.testing.assert_allclose(sprepost(A, B) @ vec(R), vec(A @ R @ B), atol=1e-12)
    np.testing.assert_allclose(spre(A) @ vec(R), vec(A @ R), atol=1e-12)
    np.testing.assert_allclose(spost(B) @ vec(R), vec(R @ B), atol=1e-12)
    np.testing.assert_array_equal(unvec(vec(R)), R)


@given(seeds)
def test_generator_reconstructs_action(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    mem = m.ensemble.members[0]
    S = member_jump(m, mem, "scattering").op
    L = ensemble_liouvillian(m)
    d, dp = m.dim, mem.probe_dim
    for _ in range(5):
        rho = random_density_matrix(d, rng)
        joint = S @ kron(rho, mem.eta) @ S.conj().T
        red = np.einsum("iaja->ij", joint.reshape(d, dp, d, dp))
        expect = -1j * (m.H_s @ rho - rho @ m.H_s) + m.gamma * (red - rho)
        np.testing.assert_allclose(unvec(L.matrix @ vec(rho), d), expect, atol=1e-10)


@given(seeds, st.sampled_from(["scattering", "bare-unitary", "eikonal"]))
def test_generator_invariants(seed, kind):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    L = ensemble_liouvillian(m, kind)
    d = m.dim
    assert np.abs(vec(np.eye(d)).conj() @ L.matrix).max() < 1e-10
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    lhs = unvec(L.matrix @ vec(X.conj().T), d)
    rhs = unvec(L.matrix @ vec(X), d).conj().T
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    assert L.eigenvalues().real.max() <= 1e-8 * L.norm


def test_dissipator_examples():
    eta = gibbs_state(S2.z, 0.7)
    assert not np.any(dissipator(np.eye(4), eta, 0.3).matrix)
    # product eikonal operators give unital maps
    U = eikonal_operator(0.8 * kron(S2.x + 0.3 * S2.z, S2.x), 2.3)
    D = dissipator(U, eta, 0.1)
    np.testing.assert_allclose(D(np.eye(2) / 2), 0, atol=1e-15)
    # resonant exchange with thermal probes annihilates the Gibbs state
    m = build_single_spin_model(0.5, 1.2, 0.5, 1.2, 0.7, 0.4, 0.4, 0.1, 3.3, 1e-2)
    mem = m.ensemble.members[0]
    D = dissipator(member_jump(m, mem, "scattering"), mem.eta, m.gamma)
    assert np.abs(D(gibbs_state(m.H_s, 0.7))).max() < 1e-9


def test_decomposition_counts():
    m = build_measurement_model(5.0, 0.0, 1.0, 0.4, 0.3, 1e-2)
    mem = m.ensemble.members[0]
    dec = lindblad_decomposition(member_jump(m, mem, "scattering"), mem.eta, m.gamma)
    assert len(dec.operators) == 2
    S = member_jump(m, m.ensemble.members[0], "scattering")
    dec = lindblad_decomposition(S, np.eye(2) / 2, 1.0)
    assert len(dec.operators) == 4 and np.allclose(dec.rates, 0.5)


@given(seeds)
def test_decomposition_reconstructs_dissipator(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    mem = m.ensemble.members[0]
    S = member_jump(m, mem, "scattering")
    dec = lindblad_decomposition(S, mem.eta, m.gamma)
    assert min(dec.rates) >= 0
    assert dec.completeness_error(m.gamma) < 1e-10
    D = dissipator(S, mem.eta, m.gamma).matrix
    for _ in range(10):
        r = vec(random_density_matrix(m.dim, rng))
        np.testing.assert_allclose(dec.superop() @ r, D @ r, atol=1e-10)


def test_ensemble_kinds():
    m = build_single_spin_model(0.5, 1.3, 0.5, 1.0, 1.0, 0, 0, 0, 2.0, 0.1)
    L = ensemble_liouvillian(m, "bare-unitary")
    U = hermitian_propagator(m.H_s, 2.0)
    expect = hamiltonian_liouvillian(m.H_s).matrix + 0.1 * (np.kron(U.conj(), U) - np.eye(4))
    np.testing.assert_allclose(L.matrix, expect, atol=1e-14)
    np.testing.assert_allclose(ensemble_liouvillian(m, "scattering").matrix,
                               hamiltonian_liouvillian(m.H_s).matrix, atol=1e-14)


def test_lindblad_generator_rejects_negative_rates():
    with pytest.raises(ValueError):
        lindblad_generator(S2.z, [S2.minus], [-1.0])


def _precession(rho0, H, t):
    U = hermitian_propagator(H, t)
    return U @ rho0 @ U.conj().T


@pytest.mark.parametrize("method", ["rk4", "exact"])
def test_free_evolution(method):
    H = 1.7 * S2.z + 0.4 * S2.x
    L = hamiltonian_liouvillian(H)
    rho0 = initial_state(build_single_spin_model(0.5, 1, 0.5, 1, 1, 0, 0, 0, 1, 0), "plus")
    t = np.linspace(0, 30, 31)
    out = evolve(L, rho0, t, method=method)
    for ti, r in zip(t, out):
        np.testing.assert_allclose(r, _precession(rho0, H, ti), atol=1e-9)


@given(seeds)
def test_rk4_matches_exact_and_preserves_trace(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    L = ensemble_liouvillian(m)
    rho0 = random_density_matrix(m.dim, rng)
    t = np.concatenate([[0], np.geomspace(0.1, 2000, 30)])
    a = evolve(L, rho0, t, "rk4")
    b = evolve(L, rho0, t, "exact")
    # RK4 phase error per step is ~(||L|| h)^5/120 with ||L|| h <= 0.01
    bound = 2 * L.norm * t[-1] * 0.01**4 / 120
    assert np.abs(a - b).max() < max(bound, 1e-9)
    assert np.abs(np.einsum("tii->t", a) - 1).max() < 1e-9


def test_evolve_validation():
    L = hamiltonian_liouvillian(S2.z)
    with pytest.raises(ValueError):
        evolve(L, np.eye(2) / 2, [1.0, 0.5])
    # a generator that is not completely positive drives the state negative
    bad = Liouvillian(2, -0.5 * np.eye(4) + 0.5 * np.kron(S2.x, S2.x) * 4 - 2 * np.eye(4), 1.0)
    with pytest.raises(NumericalError):
        evolve(bad, np.diag([1.0, 0.0]), np.linspace(0, 10, 5))


def test_steady_state_examples():
    m = build_single_spin_model(0.5, 1.0, 0.5, 1.0, 0.6, 0.3, 0.3, 0.0, 2.0, 1e-3)
    ss = steady_state(ensemble_liouvillian(m))
    assert ss.degeneracy == 1
    assert np.abs(ensemble_liouvillian(m).matrix @ vec(ss.rho)).max() < 1e-8
    np.testing.assert_allclose(ss.rho, gibbs_state(m.H_s, 0.6), atol=1e-10)
    dephase = build_single_spin_model(0.5, 1.0, 0.5, 1.0, 0.6, 0, 0, 0.4, 2.0, 1e-3)
    assert steady_state(ensemble_liouvillian(dephase)).degeneracy == 2
    meas = build_measurement_model(5.0, 0.0, 1.0, 0.0, 0.5, 1e-3)
    ss = steady_state(ensemble_liouvillian(meas))
    assert ss.degeneracy == 2
    np.testing.assert_allclose(ss.rho, np.eye(2) / 2, atol=1e-12)


def test_steady_state_degenerate_projection_follows_dynamics():
    # long-time limit from the maximally mixed state equals the reported projection
    m = build_single_spin_model(1.0, 1.0, 0.5, 1.0, 0.6, 0, 0, 0.4, 2.0, 0.05)
    L = ensemble_liouvillian(m)
    ss = steady_state(L)
    late = evolve(L, np.eye(3) / 3, [0, 1e6], "exact")[-1]
    np.testing.assert_allclose(ss.rho, late, atol=1e-9)


def test_steady_state_without_kernel():
    with pytest.raises(NumericalError):
        steady_state(Liouvillian(2, -np.eye(4), 1.0))


@given(seeds)
def test_product_eikonal_entropy_never_decreases(seed):
    rng = np.random.default_rng(seed)
    S3 = spin_algebra(1.0)
    A = rng.normal() * S3.x + rng.normal() * S3.y + rng.normal() * S3.z
    U = eikonal_operator(rng.uniform(0.1, 2) * kron(A, S2.z), rng.uniform(0.1, 5))
    eta = gibbs_state(S2.z, rng.uniform(0, 3))
    L = hamiltonian_liouvillian(rng.uniform(0.1, 2) * S3.z) + dissipator(U, eta, 0.05)
    rho0 = random_density_matrix(3, rng)
    s = [von_neumann_entropy(r) for r in evolve(L, rho0, np.linspace(0, 200, 21))]
    assert np.all(np.diff(s) >= -1e-10)


def test_regular_map():
    m = build_single_spin_model(0.5, 1.1, 0.5, 1.1, 0.8, 0.0, 0.0, 0.0, 1.5, 1e-3)
    Phi = regular_map(m, 1.5)
    rho = random_density_matrix(2, np.random.default_rng(0))
    U = hermitian_propagator(m.H_s, 1.5)
    np.testing.assert_allclose(Phi(rho), U @ rho @ U.conj().T, atol=1e-13)
    with pytest.raises(ValueError):
        regular_map(m, 1.0)
    ex = build_single_spin_model(0.5, 1.1, 0.5, 1.1, 0.8, 0.3, 0.3, 0.0, 1.5, 1e-3)
    Phi = regular_map(ex, 7.0)
    rng = np.random.default_rng(1)
    for _ in range(50):
        assert np.trace(Phi(random_density_matrix(2, rng))).real == pytest.approx(1, abs=1e-10)
    np.testing.assert_allclose(Phi.fixed_point(), gibbs_state(ex.H_s, 0.8), atol=1e-10)


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_liouvillian_export_roundtrip(tmp_path, fmt):
    L = ensemble_liouvillian(random_model(np.random.default_rng(4)))
    path = tmp_path / f"L.{fmt}"
    export_liouvillian(L, path, fmt)
    back = load_liouvillian(path, fmt)
    assert back.dim == L.dim and back.gamma == L.gamma
    np.testing.assert_array_equal(back.matrix, L.matrix)


def test_channel_superop_matches_partial_trace():
    rng = np.random.default_rng(9)
    from repint.core import random_hermitian
    U = hermitian_propagator(random_hermitian(6, rng), 1.0)
    eta = random_density_matrix(2, rng)
    rho = random_density_matrix(3, rng)
    joint = U @ kron(rho, eta) @ U.conj().T
    red = np.einsum("iaja->ij", joint.reshape(3, 2, 3, 2))
    np.testing.assert_allclose(unvec(channel_superop(U, eta) @ vec(rho), 3), red, atol=1e-14)
