import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from repint.core import gibbs_state, kron, spin_algebra
from repint.errors import MarkovianityWarning
from repint.master import dissipator, ensemble_liouvillian, member_jump
from repint.model import (
    LinearSpin, Measurement, ProbeEnsemble, ProbeMember, ProbeSpec, SingleSpin,
    RepeatedInteractionModel, beta_from_temperature, build_composite_model,
    build_measurement_model, build_model, build_single_spin_model, initial_state,
    linear_coupling, thermal_probe_ensemble,
)
from repint.scattering import free_hamiltonian, is_energy_preserving

couplings = st.floats(-2, 2, allow_nan=False)


def test_anisotropy_scan_model():
    m = build_single_spin_model(0.5, 4.4, 0.5, 4.4, 1 / (1.5 * 4.4), 1.0, 0.3, 0.0, 2.0, 1e-3)
    assert m.dim == 2 and m.ensemble.members[0].H_int.shape == (4, 4)
    eta = m.ensemble.members[0].eta
    assert eta[0, 0] / eta[1, 1] == pytest.approx(np.exp(-1 / 1.5))
    assert m.gamma_tau == pytest.approx(2e-3) and m.markovian


def test_zero_coupling_gives_zero_interaction():
    m = build_single_spin_model(1.5, 1.0, 0.5, 1.0, 1.0, 0, 0, 0, 1.0, 1e-3)
    assert not np.any(m.ensemble.members[0].H_int)


def test_spin_two_x_model_dimensions():
    m = build_single_spin_model(2, 4.4, 0.5, 4.4, 1.0, 1.0, 0, 0, 1.0, 1e-3)
    assert m.dim == 5 and m.ensemble.members[0].H_int.shape == (10, 10)


@given(couplings, couplings, couplings, st.sampled_from([0.5, 1.0, 1.5]))
def test_built_operators_hermitian(gx, gy, gz, J):
    m = build_single_spin_model(J, 1.0, 0.5, 0.8, 1.0, gx, gy, gz, 1.0, 1e-3)
    mem = m.ensemble.members[0]
    for op in (m.H_s, mem.H_p, mem.H_int):
        assert np.abs(op - op.conj().T).max() < 1e-12


@given(couplings, couplings, couplings, st.floats(0.3, 2.0), st.floats(0.3, 2.0))
def test_energy_preservation_iff_resonant_exchange(gx, gy, gz, ws, wp):
    m = build_single_spin_model(0.5, ws, 0.5, wp, 1.0, gx, gy, gz, 1.0, 1e-3)
    mem = m.ensemble.members[0]
    preserving = is_energy_preserving(free_hamiltonian(m.H_s, mem.H_p), mem.H_int)
    exchange_only = abs(gx - gy) < 1e-11 or (abs(gx) + abs(gy) < 1e-11)
    resonant = abs(ws - wp) < 1e-11 or (abs(gx) + abs(gy) < 1e-11)
    assert preserving == (exchange_only and resonant)


def test_measurement_model():
    m = build_measurement_model(5.0, 0.5, 1.0, np.pi / 2, 0.1, 1e-3)
    mem = m.ensemble.members[0]
    np.testing.assert_allclose(mem.eta, np.diag([0, 1]))
    S, s = spin_algebra(0.5), spin_algebra(0.5)
    np.testing.assert_allclose(mem.H_int, kron(S.x, s.x), atol=1e-15)
    # longitudinal case commutes with H_s
    m0 = build_measurement_model(5.0, 0.0, 1.0, 0.0, 0.1, 1e-3)
    Hint = m0.ensemble.members[0].H_int
    assert np.abs(Hint @ kron(m0.H_s, np.eye(2)) - kron(m0.H_s, np.eye(2)) @ Hint).max() < 1e-14
    np.testing.assert_allclose(m0.ensemble.members[0].eta, np.diag([0, 1]))


def test_composite_model_structure():
    m = build_composite_model(1.0, 1.3, 0.2, 0.1, 0.05, 0.5, 1.0, 1.0, 0.3, 0.3, 0.0, 1.0, 1e-3)
    assert m.dim == 4 and m.ensemble.members[0].H_int.shape == (8, 8)
    assert m.subsystem_dims == (2, 2)
    # with no internal coupling spin 2 only precesses: its populations are untouched
    m0 = build_composite_model(1.0, 1.3, 0, 0, 0, 0.5, 1.0, 1.0, 0.3, 0.2, 0.1, 1.0, 1e-3)
    L = ensemble_liouvillian(m0).matrix
    rng = np.random.default_rng(3)
    from repint.core import random_density_matrix
    from repint.master import unvec, vec
    rho = kron(random_density_matrix(2, rng), random_density_matrix(2, rng))
    drho = unvec(L @ vec(rho), 4).reshape(2, 2, 2, 2)
    red2 = np.einsum("iaib->ab", drho)
    B = spin_algebra(0.5)
    r2 = np.einsum("iaib->ab", rho.reshape(2, 2, 2, 2))
    np.testing.assert_allclose(red2, -1j * 1.3 * (B.z @ r2 - r2 @ B.z), atol=1e-13)


def test_markovianity_warning():
    with pytest.warns(MarkovianityWarning):
        m = build_single_spin_model(0.5, 1, 0.5, 1, 1.0, 0.1, 0, 0, 100.0, 1e-3)
    assert not m.markovian


def test_ensemble_validation():
    S = spin_algebra(0.5)
    H = kron(S.x, S.x)
    mem = ProbeMember(0.6, S.z, gibbs_state(S.z, 1.0), H, 1.0)
    with pytest.raises(ValueError):
        ProbeEnsemble((mem,))
    with pytest.raises(ValueError):
        thermal_probe_ensemble([], 1.0, lambda w: H, 1.0)


def test_single_member_ensemble_equals_plain_model():
    a = build_single_spin_model(0.5, 1.0, 0.5, 0.9, 0.7, 0.3, 0.1, 0.05, 2.0, 1e-3)
    b = build_single_spin_model(0.5, 1.0, 0.5, 0.9, 0.7, 0.3, 0.1, 0.05, 2.0, 1e-3,
                                frequencies=((1.0, 0.9),))
    np.testing.assert_allclose(ensemble_liouvillian(a).matrix, ensemble_liouvillian(b).matrix)


def test_ensemble_with_only_eta_varying_collapses():
    S = spin_algebra(0.5)
    H_int = linear_coupling(0.5, 0.5, 0.3, 0.1, 0.2)
    members = tuple(ProbeMember(0.5, S.z, gibbs_state(S.z, b), H_int, 1.5) for b in (0.2, 2.0))
    ens = ProbeEnsemble(members)
    model = RepeatedInteractionModel(1.1 * S.z, ens, 1e-3, 1.5, observables={})
    avg = RepeatedInteractionModel(1.1 * S.z, ens.collapsed(), 1e-3, 1.5, observables={})
    assert len(ens.collapsed().members) == 1
    np.testing.assert_allclose(ensemble_liouvillian(model).matrix,
                               ensemble_liouvillian(avg).matrix, atol=1e-15)


def test_frequency_ensemble_is_weighted_sum():
    ws, beta = 1.0, 0.8
    freqs = ((1 / 3, 0.8), (1 / 3, 1.0), (1 / 3, 1.2))
    m = build_single_spin_model(0.5, ws, 0.5, 1.0, beta, 0.2, 0.1, 0.0, 3.0, 1e-3, frequencies=freqs)
    total = sum(
        w * dissipator(member_jump(m, mem, "scattering"), mem.eta, m.gamma).matrix
        for (w, _), mem in zip(freqs, m.ensemble.members))
    L = ensemble_liouvillian(m).matrix
    from repint.master import hamiltonian_superop
    np.testing.assert_allclose(L, hamiltonian_superop(m.H_s) + total, atol=1e-15)


def test_build_model_dispatch_and_errors():
    m = build_model(SingleSpin(0.5, 5.0), ProbeSpec(0.5, 0.0, np.inf, "ground"),
                    Measurement(1.0, np.pi / 2), 0.1, 1e-3)
    assert m.label == "measurement"
    with pytest.raises(ValueError):
        build_model(SingleSpin(1.0, 5.0), ProbeSpec(), Measurement(), 0.1, 1e-3)
    with pytest.raises(ValueError):
        build_model(SingleSpin(0.5, 1.0), ProbeSpec(beta=-1.0), LinearSpin(1, 0, 0), 1.0, 1e-3)


def test_temperature_conversion():
    assert beta_from_temperature(0.5) == 2.0
    assert beta_from_temperature(0.0) == np.inf
    with pytest.raises(ValueError):
        beta_from_temperature(-1)


def test_initial_states():
    m = build_single_spin_model(1.0, 1.0, 0.5, 1.0, 1.0, 0.1, 0.1, 0, 1.0, 1e-3)
    np.testing.assert_allclose(np.diag(initial_state(m, "ground")).real, [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(np.diag(initial_state(m, "excited")).real, [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(initial_state(m, "plus"), np.ones((3, 3)) / 3)
    np.testing.assert_allclose(initial_state(m, "maximally-mixed"), np.eye(3) / 3)
    with pytest.raises(ValueError):
        initial_state(m, "thermal")


def test_digest_tracks_parameters():
    a = build_single_spin_model(0.5, 1.0, 0.5, 1.0, 1.0, 0.1, 0, 0, 1.0, 1e-3)
    b = build_single_spin_model(0.5, 1.0, 0.5, 1.0, 1.0, 0.1, 0, 0, 1.0, 1e-3)
    c = build_single_spin_model(0.5, 1.0, 0.5, 1.0, 1.0, 0.1, 0, 0, 1.0 + 1e-12, 1e-3)
    assert a.digest() == b.digest() != c.digest()
