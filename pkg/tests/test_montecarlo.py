import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from repint.core import hermitian_propagator, is_density_matrix
from repint.master import ensemble_liouvillian, evolve
from repint.model import build_single_spin_model, initial_state
from repint.montecarlo import (
    compare_kinds, fit_decay_rate, simulate, simulate_trajectory, trajectory_rng, waiting_times,
)


def _model(g=0.3, tau=0.5, gamma=0.05, ws=1.0, wp=0.8):
    return build_single_spin_model(0.5, ws, 0.5, wp, 1.0, g, 0.5 * g, 0.1 * g, tau, gamma)


def test_waiting_time_statistics():
    w = waiting_times(np.random.default_rng(3), 0.02, 200_000)
    assert w.mean() == pytest.approx(50.0, rel=0.01)
    assert np.all(np.isinf(waiting_times(np.random.default_rng(3), 0.0, 3)))


def test_trajectory_streams_are_independent_of_order():
    a = trajectory_rng(7, 5).random(4)
    trajectory_rng(7, 4).random(100)
    np.testing.assert_array_equal(a, trajectory_rng(7, 5).random(4))
    assert not np.array_equal(a, trajectory_rng(7, 6).random(4))
    assert not np.array_equal(a, trajectory_rng(8, 5).random(4))


def test_no_events_gives_free_evolution():
    m = _model(gamma=0.0)
    rho0 = initial_state(m, "plus")
    t = np.linspace(0, 20, 41)
    ens = simulate(m, rho0, t, 5, seed=1)
    assert ens.diagnostics["events"] == 0
    for ti, r in zip(t, ens.mean_state):
        U = hermitian_propagator(m.H_s, ti)
        np.testing.assert_allclose(r, U @ rho0 @ U.conj().T, atol=1e-12)
    np.testing.assert_array_equal(ens.stderr["Jz"], 0)


def test_uncoupled_windows_tile_free_evolution():
    # without coupling the physical event is free evolution over the window
    m = build_single_spin_model(0.5, 1.3, 0.5, 1.0, 1.0, 0, 0, 0, 0.01, 0.05)
    rho0 = initial_state(m, "plus")
    t = np.linspace(0, 200, 21)
    ens = simulate(m, rho0, t, 40, seed=2)
    assert ens.diagnostics["events"] > 100 and ens.diagnostics["clipped"] == 0
    free = evolve(ensemble_liouvillian(m), rho0, t, "exact")
    np.testing.assert_allclose(ens.mean_state, free, atol=1e-10)


def test_uncoupled_bare_unitary_dephases():
    ws, tau, gamma = 1.0, 1.5, 0.02
    m = build_single_spin_model(0.5, ws, 0.5, 1.0, 1.0, 0, 0, 0, tau, gamma)
    t = np.linspace(0, 150, 16)
    ens = simulate(m, initial_state(m, "plus"), t, 2000, seed=3, kind="bare-unitary", threads=4)
    expect = 0.5 * np.exp(-gamma * (1 - np.cos(ws * tau)) * t)
    z = np.abs(ens.mean["J+"] - expect) / np.maximum(ens.stderr["J+"], 1e-12)
    assert z[1:].max() < 5
    assert ens.mean["J+"][-1] < 0.5 * expect[0]


def test_thread_count_does_not_change_results():
    m = _model()
    t = np.linspace(0, 100, 11)
    rho0 = initial_state(m, "excited")
    a = simulate(m, rho0, t, 700, seed=11, threads=1)
    b = simulate(m, rho0, t, 700, seed=11, threads=3)
    for name in a.mean:
        np.testing.assert_array_equal(a.mean[name], b.mean[name])
        np.testing.assert_array_equal(a.stderr[name], b.stderr[name])
    np.testing.assert_array_equal(a.mean_state, b.mean_state)
    c = simulate(m, rho0, t, 700, seed=12)
    assert not np.array_equal(a.mean["Jz"], c.mean["Jz"])


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["centered", "verbatim"]),
       st.sampled_from(["kick", "pre-window"]))
def test_single_trajectory_states_are_valid(seed, convention, recording):
    m = _model(tau=2.0, gamma=0.2)
    states, diag = simulate_trajectory(m, initial_state(m, "plus"), np.linspace(0, 60, 121),
                                       np.random.default_rng(seed), convention=convention,
                                       recording=recording)
    assert all(is_density_matrix(r, tol=1e-10) for r in states)
    assert diag["events"] > 0


def test_single_trajectory_has_zero_stderr():
    m = _model()
    ens = simulate(m, initial_state(m, "plus"), np.linspace(0, 50, 6), 1, seed=0)
    assert ens.N == 1
    for v in ens.stderr.values():
        np.testing.assert_array_equal(v, 0)


@pytest.mark.parametrize("kwargs", [
    {"n_trajectories": 0}, {"n_trajectories": 2.5}, {"seed": -1}, {"seed": 1.5},
    {"kind": "nope"}, {"convention": "other"}, {"recording": "other"},
])
def test_invalid_arguments(kwargs):
    m = _model()
    args = dict(n_trajectories=4, seed=1)
    args.update(kwargs)
    with pytest.raises(ValueError):
        simulate(m, initial_state(m, "plus"), [0, 1], **args)
    with pytest.raises(ValueError):
        simulate(m, initial_state(m, "plus"), [1, 0], 4, 1)


def test_overlapping_windows_are_counted():
    m = _model(tau=5.0, gamma=0.5)
    ens = simulate(m, initial_state(m, "plus"), np.linspace(0, 100, 11), 20, seed=4)
    d = ens.diagnostics
    assert d["clipped"] > 0 and d["gamma_tau"] == pytest.approx(2.5)
    assert d["convention"] == "centered" and d["recording"] == "kick"


def test_fit_decay_rate():
    t = np.linspace(0, 10, 50)
    assert fit_decay_rate(t, 3 * np.exp(-0.7 * t)) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        fit_decay_rate(t, np.zeros_like(t))


def test_comparison_report_structure():
    m = _model(g=0.2, tau=0.5, gamma=0.05)
    t = np.linspace(0, 80, 9)
    rep = compare_kinds(m, initial_state(m, "plus"), t, 300, seed=5, threads=2)
    assert set(rep.curves) == {"scattering", "bare-unitary", "eikonal"}
    assert rep.oracle.N == 300
    for kind in rep.curves:
        assert set(rep.max_zscore[kind]) == {"Jz", "J+"}
        assert "J+" in rep.decay_rates[kind]
    assert rep.max_zscore["scattering"]["Jz"] < 5
