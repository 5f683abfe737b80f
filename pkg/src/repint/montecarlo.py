"""Stochastic simulation of Poisson-timed interaction events.

Each trajectory carries a density matrix. Randomness enters only through the
waiting times and the choice of ensemble member. Trajectory i draws from its
own stream ``SeedSequence(seed, spawn_key=(i,))``, so results do not depend on
how trajectories are distributed over threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import dagger, density_matrix
from .master import channel_superop, ensemble_liouvillian, evolve, vec
from .scattering import KINDS, event_unitary, free_hamiltonian

CHUNK = 256
CONVENTIONS = ("centered", "verbatim")
RECORDINGS = ("kick", "pre-window")


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def waiting_times(rng: np.random.Generator, gamma: float, size: int) -> np.ndarray:
    if gamma <= 0:
        return np.full(size, np.inf)
    return rng.exponential(1.0 / gamma, size)


@dataclass(frozen=True)
class TrajectoryEnsemble:
    times: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    n_trajectories: int
    seed: int
    kind: str
    mean_state: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.n_trajectories


class _Tables:
    """Event channels and observables expressed in the energy eigenbasis of H_s."""

    def __init__(self, model, kind: str, observables):
        d = model.dim
        E, V = np.linalg.eigh(model.H_s)
        self.d = d
        self.V = V
        self.freq = (E[:, None] - E[None, :]).reshape(-1, order="F")
        T = np.kron(V.T, dagger(V))           # vec(V^dag rho V) = T vec(rho)
        Tinv = dagger(T)
        self.channels, self.taus, self.weights = [], [], []
        for m in model.ensemble.members:
            W = event_unitary(kind, free_hamiltonian(model.H_s, m.H_p), m.H_int, m.tau)
            self.channels.append(T @ channel_superop(W, m.eta) @ Tinv)
            self.taus.append(float(m.tau))
            self.weights.append(float(m.weight))
        self.cum = np.cumsum(self.weights)
        self.cum[-1] = 1.0
        self.names = list(observables)
        # tr(rho A) = sum_ij rho_ij A_ji = vec(A^T) . vec(rho)
        self.obs = np.array([vec((dagger(V) @ A @ V).T) for A in observables.values()])
        self.hermitian = [np.allclose(A, dagger(A), atol=1e-12) for A in observables.values()]
        self.T, self.Tinv = T, Tinv

    def free(self, v, t):
        return v * np.exp(-1j * self.freq * t)

    def pick(self, rng):
        if len(self.channels) == 1:
            return 0
        return int(np.searchsorted(self.cum, rng.random(), side="right"))


def _run_trajectory(tab: _Tables, v0, t_grid, gamma, rng, convention, recording, record):
    """Advance one trajectory over ``t_grid``; ``record(k, v)`` stores grid point k."""
    t_max = t_grid[-1]
    n = t_grid.size
    k = 0
    v, t_now = v0, 0.0
    prev_tau = None
    diag = {"events": 0, "clipped": 0, "in_window": 0}
    buf, pos = waiting_times(rng, gamma, 64), 0
    while True:
        if pos == buf.size:
            buf, pos = waiting_times(rng, gamma, 64), 0
        dt = buf[pos]
        pos += 1
        j = tab.pick(rng)
        tau = tab.taus[j]
        if convention == "centered":
            # event centres are the Poisson points; the gap shrinks by both half windows
            free = dt - tau / 2 if prev_tau is None else dt - prev_tau / 2 - tau / 2
        else:
            free = dt - tau / 2
        if free < 0:
            diag["clipped"] += 1
            free = 0.0
        start = t_now + free
        if start > t_max:
            break
        while k < n and t_grid[k] <= start:
            record(k, tab.free(v, t_grid[k] - t_now))
            k += 1
        pre = tab.free(v, start - t_now)
        post = tab.channels[j] @ pre
        end, centre = start + tau, start + tau / 2
        while k < n and t_grid[k] < end:
            diag["in_window"] += 1
            if recording == "kick" and t_grid[k] >= centre:
                record(k, tab.free(post, t_grid[k] - end))
            else:
                record(k, tab.free(pre, t_grid[k] - start))
            k += 1
        diag["events"] += 1
        v, t_now, prev_tau = post, end, tau
    while k < n:
        record(k, tab.free(v, t_grid[k] - t_now))
        k += 1
    return diag


def _check_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] < 0 or np.any(np.diff(t) < 0):
        raise ValueError("time grid must be non-empty, ascending and start at t >= 0")
    return t


def simulate_trajectory(model, rho0, t_grid, rng, kind: str = "scattering",
                        convention: str = "centered", recording: str = "kick"):
    """States of a single trajectory on ``t_grid`` (original basis) plus diagnostics."""
    t = _check_grid(t_grid)
    tab = _Tables(model, kind, {})
    v0 = tab.T @ vec(density_matrix(rho0))
    out = np.empty((t.size, model.dim, model.dim), dtype=complex)

    def record(k, v):
        out[k] = tab.V @ v.reshape(tab.d, tab.d, order="F") @ dagger(tab.V)

    diag = _run_trajectory(tab, v0, t, model.gamma, rng, convention, recording, record)
    return out, diag


def _run_chunk(tab, v0, t, gamma, seed, indices, convention, recording):
    nobs = len(tab.names)
    vals = np.empty((len(indices), t.size, nobs), dtype=complex)
    state_sum = np.zeros((t.size, tab.d * tab.d), dtype=complex)
    diag = {"events": 0, "clipped": 0, "in_window": 0}
    for row, i in enumerate(indices):
        rng = trajectory_rng(seed, i)

        def record(k, v, row=row):
            vals[row, k] = tab.obs @ v
            state_sum[k] += v

        dd = _run_trajectory(tab, v0, t, gamma, rng, convention, recording, record)
        for key in diag:
            diag[key] += dd[key]
    return vals, state_sum, diag


def simulate(model, rho0, t_grid: Sequence[float], n_trajectories: int, seed: int,
             kind: str = "scattering", threads: int = 1, convention: str = "centered",
             recording: str = "kick", observables=None) -> TrajectoryEnsemble:
    """Average ``n_trajectories`` stochastic trajectories on ``t_grid``.

    ``convention="centered"`` places event centres at the Poisson points (free
    stretch dt - tau between windows, dt - tau/2 before the first one);
    ``"verbatim"`` uses a free stretch dt - tau/2 before every window. Negative
    stretches are clipped to zero and counted. With ``recording="kick"`` a grid
    point inside a window reports the state freely evolved from the window edge
    on its side of the window centre; ``"pre-window"`` always uses the opening edge.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown jump-operator kind {kind!r}")
    if convention not in CONVENTIONS or recording not in RECORDINGS:
        raise ValueError(f"convention must be in {CONVENTIONS}, recording in {RECORDINGS}")
    if int(n_trajectories) != n_trajectories or n_trajectories < 1:
        raise ValueError(f"trajectory count must be a positive integer, got {n_trajectories!r}")
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    n_trajectories, seed = int(n_trajectories), int(seed)
    t = _check_grid(t_grid)
    obs = dict(model.observables if observables is None else observables)
    tab = _Tables(model, kind, obs)
    v0 = tab.T @ vec(density_matrix(rho0))
    chunks = [range(a, min(a + CHUNK, n_trajectories)) for a in range(0, n_trajectories, CHUNK)]

    def job(idx):
        return _run_chunk(tab, v0, t, model.gamma, seed, idx, convention, recording)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, chunks))
    else:
        results = [job(c) for c in chunks]

    vals = np.concatenate([r[0] for r in results], axis=0)
    state_sum = np.zeros_like(results[0][1])
    diag = {"events": 0, "clipped": 0, "in_window": 0}
    for r in results:                       # fixed chunk order keeps sums reproducible
        state_sum += r[1]
        for key in diag:
            diag[key] += r[2][key]
    N = n_trajectories
    mean_c = vals.mean(axis=0)
    mean, stderr = {}, {}
    for j, name in enumerate(tab.names):
        x = vals[:, :, j]
        if tab.hermitian[j]:
            mean[name] = mean_c[:, j].real
            spread = x.real
        else:
            mean[name] = np.abs(mean_c[:, j])
            # delta method: fluctuations projected on the direction of the mean
            spread = (x * np.exp(-1j * np.angle(mean_c[:, j]))).real
        stderr[name] = spread.std(axis=0, ddof=1) / np.sqrt(N) if N > 1 else np.zeros(t.size)
    d = model.dim
    mean_state = np.array([tab.V @ (s / N).reshape(d, d, order="F") @ dagger(tab.V) for s in state_sum])
    diag.update(convention=convention, recording=recording, gamma_tau=model.gamma_tau)
    return TrajectoryEnsemble(t, mean, stderr, N, seed, kind, mean_state, diag)


def fit_decay_rate(t, values, floor: float = 1e-3) -> float:
    """Exponential decay rate from a log-linear least-squares fit."""
    t, y = np.asarray(t, float), np.asarray(values, float)
    keep = (y > floor * y[0]) if y[0] > 0 else np.zeros_like(y, bool)
    if keep.sum() < 2:
        raise ValueError("not enough points above the floor to fit a decay rate")
    slope = np.polyfit(t[keep], np.log(y[keep]), 1)[0]
    return float(-slope)


@dataclass(frozen=True)
class ComparisonReport:
    times: np.ndarray
    oracle: TrajectoryEnsemble
    curves: dict            # kind -> name -> ME values
    max_deviation: dict     # kind -> name -> max |ME - MC|
    max_zscore: dict        # kind -> name -> max |ME - MC| / stderr
    decay_rates: dict       # "oracle" or kind -> name -> fitted rate (non-Hermitian observables)


def _zscores(diff, err):
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(err > 0, diff / err, np.where(diff > 1e-12, np.inf, 0.0))
    return z


def compare_kinds(model, rho0, t_grid, n_trajectories: int, seed: int, threads: int = 1,
                  kinds: Sequence[str] = KINDS, oracle: TrajectoryEnsemble | None = None,
                  method: str = "rk4") -> ComparisonReport:
    """Master-equation curves for each jump-operator kind against the stochastic oracle."""
    t = _check_grid(t_grid)
    mc = oracle or simulate(model, rho0, t, n_trajectories, seed, "scattering", threads)
    herm = {n: np.allclose(A, dagger(A), atol=1e-12) for n, A in model.observables.items()}
    curves, dev, zs, rates = {}, {}, {}, {"oracle": {}}
    for name, h in herm.items():
        if not h:
            rates["oracle"][name] = fit_decay_rate(t, mc.mean[name])
    for kind in kinds:
        states = evolve(ensemble_liouvillian(model, kind), rho0, t, method=method)
        curves[kind], dev[kind], zs[kind], rates[kind] = {}, {}, {}, {}
        for name, A in model.observables.items():
            v = np.einsum("tij,ji->t", states, A)
            v = v.real if herm[name] else np.abs(v)
            diff = np.abs(v - mc.mean[name])
            curves[kind][name] = v
            dev[kind][name] = float(diff.max())
            zs[kind][name] = float(_zscores(diff, mc.stderr[name]).max())
            if not herm[name]:
                rates[kind][name] = fit_decay_rate(t, v)
    return ComparisonReport(t, mc, curves, dev, zs, rates)
