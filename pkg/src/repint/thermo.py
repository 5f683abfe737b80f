"""Observables, work bookkeeping and temperature diagnostics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import dagger, hermitian_propagator, kron, spin_algebra
from .errors import ResolutionWarning
from .master import Liouvillian, ensemble_liouvillian, evolve, member_jump
from .scattering import free_hamiltonian


@dataclass
class ObservableSeries:
    times: np.ndarray
    values: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) < 0):
            raise ValueError("times must be ascending")
        self.values = {k: np.asarray(v, dtype=float) for k, v in self.values.items()}
        for k, v in self.values.items():
            if v.shape != self.times.shape:
                raise ValueError(f"column {k!r} has {v.size} entries for {self.times.size} times")

    @property
    def columns(self) -> list[str]:
        return ["t", *self.values]

    def rows(self):
        cols = [self.times, *self.values.values()]
        return zip(*cols)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.times if name == "t" else self.values[name]


def observable_value(rho: np.ndarray, A: np.ndarray) -> float:
    """Real expectation for Hermitian A, modulus of the expectation otherwise."""
    v = np.trace(rho @ A)
    if np.allclose(A, dagger(A), atol=1e-12):
        return float(v.real)
    return float(abs(v))


def mean_spin_z(rho: np.ndarray) -> float:
    S = spin_algebra((rho.shape[0] - 1) / 2)
    v = np.trace(rho @ S.z)
    if abs(v.imag) > 1e-10:
        raise ValueError(f"<J_z> has imaginary part {v.imag:.3e}")
    return float(v.real)


def coherence_plus(rho: np.ndarray) -> float:
    S = spin_algebra((rho.shape[0] - 1) / 2)
    return float(abs(np.trace(rho @ S.plus)))


def system_energy(model, rho) -> float:
    return float(np.trace(rho @ model.H_s).real)


def _member_work_operator(model, member, kind):
    """(U_0(tau/2), S^dag H_0 S - H_0) for one ensemble member."""
    H_0 = free_hamiltonian(model.H_s, member.H_p)
    S = member_jump(model, member, kind).op
    return hermitian_propagator(H_0, member.tau / 2), dagger(S) @ H_0 @ S - H_0


def work_power(model, rho: np.ndarray, kind: str = "scattering") -> float:
    """Mean rate of work done by switching the interactions on and off."""
    total = 0.0 + 0.0j
    for m in model.ensemble.members:
        if m.weight == 0:
            continue
        U, W = _member_work_operator(model, m, kind)
        joint = U @ kron(rho, m.eta) @ dagger(U)
        total += m.weight * np.trace(joint @ W)
    total *= model.gamma
    scale = max(1.0, abs(total.real))
    if abs(total.imag) > 1e-10 * scale:
        raise ValueError(f"work power has imaginary part {total.imag:.3e}")
    return float(total.real)


def work_power_function(model, kind: str = "scattering"):
    """Vectorized rho -> work power, precomputing the per-member reduced operators."""
    d = model.dim
    Ws = []
    for m in model.ensemble.members:
        U, W = _member_work_operator(model, m, kind)
        dp = m.probe_dim
        # tr[U (rho x eta) U^dag W] = tr[rho X] with X = tr_p[(1 x eta) U^dag W U]
        Y = (dagger(U) @ W @ U).reshape(d, dp, d, dp)
        X = np.einsum("iajb,ba->ij", Y, m.eta)
        Ws.append(m.weight * X)
    X = model.gamma * sum(Ws)

    def power(rho):
        return np.real(np.einsum("...ij,ji->...", rho, X))

    return power


def cumulative_work(model, rho0, t_grid: Sequence[float], kind: str = "scattering",
                    method: str = "rk4", L: Liouvillian | None = None) -> ObservableSeries:
    """W(t) by trapezoidal integration of the work power on the evolve() grid.

    Returned columns: work, work_power, energy and each model observable.
    """
    t = np.asarray(t_grid, dtype=float)
    L = ensemble_liouvillian(model, kind) if L is None else L
    states = evolve(L, rho0, t, method=method)
    power = work_power_function(model, kind)(states)
    if t.size > 1:
        spacing = np.diff(t)
        coh = np.array([np.max(np.abs(s - np.diag(np.diag(s)))) for s in states])
        # only coherent motion can alias between grid points
        if np.any((spacing * L.norm > 1) & (coh[1:] > 1e-6)):
            warnings.warn("time grid does not resolve 1/||L||; work integral may be inaccurate",
                          ResolutionWarning, stacklevel=2)
    work = np.concatenate([[0.0], np.cumsum(0.5 * (power[1:] + power[:-1]) * np.diff(t))])
    energy = np.einsum("tij,ji->t", states, model.H_s).real
    values = {"work": work, "work_power": power, "energy": energy}
    for name, A in model.observables.items():
        values[name] = np.array([observable_value(s, A) for s in states])
    return ObservableSeries(t, values, {"model": model.digest(), "kind": kind})


def observable_series(model, states, t_grid, extra: dict | None = None) -> ObservableSeries:
    values = {name: np.array([observable_value(s, A) for s in states])
              for name, A in model.observables.items()}
    if extra:
        values.update(extra)
    return ObservableSeries(np.asarray(t_grid, float), values, {"model": model.digest()})


@dataclass(frozen=True)
class EffectiveTemperature:
    beta: float
    flag: str          # gibbs | inverted | maximally-mixed | non-gibbsian
    residual: float


def _eigen_populations(rho, H_s):
    w, V = np.linalg.eigh(H_s)
    r = dagger(V) @ rho @ V
    off = np.max(np.abs(r - np.diag(np.diag(r))), initial=0.0)
    return w, np.diag(r).real, off


def effective_beta(rho: np.ndarray, H_s: np.ndarray) -> EffectiveTemperature:
    """Fit log p_n = -beta E_n - log Z over the energy eigenbasis of H_s."""
    w, p, off = _eigen_populations(rho, H_s)
    if off > 1e-6:
        raise ValueError(f"state is not diagonal in the energy basis (off-diagonal {off:.2e})")
    spread = w[-1] - w[0]
    scale = spread / max(len(w) - 1, 1)
    if scale == 0:
        return EffectiveTemperature(0.0, "maximally-mixed", 0.0)
    p = np.clip(p, 0, None)
    if np.any(p <= 1e-300):
        nz = p > 1e-300
        if nz.sum() == 1 and nz[0]:
            return EffectiveTemperature(np.inf, "gibbs", 0.0)
        if nz.sum() == 1 and nz[-1]:
            return EffectiveTemperature(-np.inf, "inverted", 0.0)
        return EffectiveTemperature(np.nan, "non-gibbsian", np.inf)
    A = np.column_stack([-w, -np.ones_like(w)])
    sol, *_ = np.linalg.lstsq(A, np.log(p), rcond=None)
    beta = float(sol[0])
    resid = float(np.max(np.abs(A @ sol - np.log(p)))) if len(w) > 2 else 0.0
    if resid > 1e-3:
        flag = "non-gibbsian"
    elif abs(beta) * scale < 1e-3:
        flag = "maximally-mixed"
    elif beta < 0:
        flag = "inverted"
    else:
        flag = "gibbs"
    return EffectiveTemperature(beta, flag, resid)


def is_passive(rho: np.ndarray, H_s: np.ndarray, tol: float = 1e-8) -> bool:
    """Commutes with H_s and populations do not increase with energy."""
    if np.max(np.abs(rho @ H_s - H_s @ rho)) > tol * max(1.0, np.max(np.abs(H_s))):
        return False
    w, V = np.linalg.eigh(H_s)
    r = dagger(V) @ rho @ V
    scale = max(1.0, float(np.max(np.abs(w))))
    # group degenerate levels; within a level the populations are the block eigenvalues
    cuts = np.flatnonzero(np.diff(w) > 1e-9 * scale) + 1
    prev_min = np.inf
    for blk in np.split(np.arange(len(w)), cuts):
        p = np.linalg.eigvalsh(r[np.ix_(blk, blk)])
        if p[-1] > prev_min + tol:
            return False
        prev_min = p[0]
    return True
