"""System, probe and interaction builders for repeated-interaction models."""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .core import (
    density_matrix,
    gibbs_state,
    kron,
    require_hermitian,
    spin_algebra,
)
from .errors import MarkovianityWarning

MARKOV_BOUND = 0.1


@dataclass(frozen=True)
class ProbeMember:
    weight: float
    H_p: np.ndarray
    eta: np.ndarray
    H_int: np.ndarray
    tau: float

    @property
    def probe_dim(self) -> int:
        return self.H_p.shape[0]


@dataclass(frozen=True)
class ProbeEnsemble:
    members: tuple[ProbeMember, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("probe ensemble needs at least one member")
        object.__setattr__(self, "members", members)
        w = np.array([m.weight for m in members], dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError(f"ensemble weights must be non-negative and sum to 1, got {w}")
        dims = set()
        for m in members:
            dp = m.H_p.shape[0]
            require_hermitian(m.H_p, "H_p")
            require_hermitian(m.H_int, "H_int")
            if m.eta.shape != (dp, dp):
                raise ValueError("probe state and probe Hamiltonian dimensions differ")
            if m.H_int.shape[0] % dp:
                raise ValueError("H_int dimension is not a multiple of the probe dimension")
            if m.tau < 0:
                raise ValueError("interaction time must be non-negative")
            dims.add(m.H_int.shape[0] // dp)
        if len(dims) != 1:
            raise ValueError(f"ensemble members disagree on the system dimension: {sorted(dims)}")

    @property
    def system_dim(self) -> int:
        m = self.members[0]
        return m.H_int.shape[0] // m.probe_dim

    def collapsed(self) -> "ProbeEnsemble":
        """Single member with weight-averaged eta when only eta fluctuates."""
        first = self.members[0]
        same = all(
            m.H_p.shape == first.H_p.shape
            and np.array_equal(m.H_p, first.H_p)
            and np.array_equal(m.H_int, first.H_int)
            and m.tau == first.tau
            for m in self.members[1:]
        )
        if len(self.members) == 1 or not same:
            return self
        eta = sum(m.weight * m.eta for m in self.members)
        return ProbeEnsemble((ProbeMember(1.0, first.H_p, _ro(eta), first.H_int, first.tau),))


def _ro(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RepeatedInteractionModel:
    """H_s plus a stream of probes arriving at Poisson rate ``gamma``."""

    H_s: np.ndarray
    ensemble: ProbeEnsemble
    gamma: float
    tau: float | None = None
    subsystem_dims: tuple[int, ...] = ()
    observables: Mapping[str, np.ndarray] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        H_s = _ro(require_hermitian(self.H_s, "H_s"))
        object.__setattr__(self, "H_s", H_s)
        if self.ensemble.system_dim != H_s.shape[0]:
            raise ValueError(
                f"H_s has dimension {H_s.shape[0]} but probes couple to {self.ensemble.system_dim}"
            )
        if self.gamma < 0 or not np.isfinite(self.gamma):
            raise ValueError(f"collision rate must be finite and >= 0, got {self.gamma}")
        if self.tau is None:
            object.__setattr__(self, "tau", self.ensemble.members[0].tau)
        dims = tuple(self.subsystem_dims) or (H_s.shape[0],)
        if int(np.prod(dims)) != H_s.shape[0]:
            raise ValueError(f"subsystem dims {dims} do not multiply to {H_s.shape[0]}")
        object.__setattr__(self, "subsystem_dims", dims)
        object.__setattr__(self, "observables", {k: _ro(v) for k, v in self.observables.items()})
        if self.gamma_tau >= MARKOV_BOUND:
            warnings.warn(
                f"gamma*tau = {self.gamma_tau:.3g} >= {MARKOV_BOUND}: coarse-grained description "
                "is not expected to hold", MarkovianityWarning, stacklevel=3)

    @property
    def dim(self) -> int:
        return self.H_s.shape[0]

    @property
    def gamma_tau(self) -> float:
        return self.gamma * max(m.tau for m in self.ensemble.members)

    @property
    def markovian(self) -> bool:
        return self.gamma_tau < MARKOV_BOUND

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.H_s).tobytes())
        h.update(repr(float(self.gamma)).encode())
        for m in self.ensemble.members:
            for a in (m.H_p, m.eta, m.H_int):
                h.update(np.ascontiguousarray(a).tobytes())
            h.update(repr((float(m.weight), float(m.tau))).encode())
        return h.hexdigest()[:16]


# configuration-level descriptions

@dataclass(frozen=True)
class SingleSpin:
    J: float = 0.5
    omega_s: float = 1.0


@dataclass(frozen=True)
class TwoSpin:
    omega_1: float = 1.0
    omega_2: float = 1.0
    J1: float = 0.5
    J2: float = 0.5
    G_x: float = 0.0
    G_y: float = 0.0
    G_z: float = 0.0


@dataclass(frozen=True)
class LinearSpin:
    g_x: float = 0.0
    g_y: float = 0.0
    g_z: float = 0.0


@dataclass(frozen=True)
class Measurement:
    g: float = 1.0
    theta: float = 0.0


@dataclass(frozen=True)
class CompositeLocal:
    g_x: float = 0.0
    g_y: float = 0.0
    g_z: float = 0.0


SystemSpec = Union[SingleSpin, TwoSpin]
InteractionSpec = Union[LinearSpin, Measurement, CompositeLocal]


@dataclass(frozen=True)
class ProbeSpec:
    """Probe spin ``j`` with splitting ``omega_p``; ``frequencies`` makes an ensemble."""

    j: float = 0.5
    omega_p: float = 1.0
    beta: float = np.inf
    state: str = "thermal"
    frequencies: tuple[tuple[float, float], ...] = ()


def beta_from_temperature(kT: float) -> float:
    if kT < 0 or np.isnan(kT):
        raise ValueError(f"temperature must be >= 0, got {kT}")
    return np.inf if kT == 0 else 1.0 / kT


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if np.isnan(beta) or beta < 0:
        raise ValueError(f"beta must be >= 0 or +inf, got {beta}")
    return beta


def linear_coupling(J, j, g_x, g_y, g_z, embed: Callable[[np.ndarray], np.ndarray] | None = None):
    """Sum_k g_k J_k (x) j_k, with J_k optionally embedded in a larger system space."""
    S, s = spin_algebra(J), spin_algebra(j)
    embed = embed or (lambda a: a)
    return (g_x * kron(embed(S.x), s.x) + g_y * kron(embed(S.y), s.y)
            + g_z * kron(embed(S.z), s.z))


def thermal_probe_ensemble(frequencies: Sequence[tuple[float, float]], beta: float,
                           coupling: Callable[[float], tuple[np.ndarray, np.ndarray]],
                           tau: float) -> ProbeEnsemble:
    """One thermal probe member per ``(weight, omega_p)`` pair.

    ``coupling(omega_p)`` returns ``(H_p, H_int)`` for that probe frequency.
    """
    if len(frequencies) == 0:
        raise ValueError("empty probe frequency list")
    beta = _check_beta(beta)
    members = []
    for weight, omega_p in frequencies:
        H_p, H_int = coupling(float(omega_p))
        members.append(ProbeMember(float(weight), _ro(H_p), _ro(gibbs_state(H_p, beta)),
                                   _ro(H_int), float(tau)))
    return ProbeEnsemble(tuple(members))


def spin_observables(J) -> dict[str, np.ndarray]:
    S = spin_algebra(J)
    return {"Jz": S.z, "J+": S.plus}


def build_single_spin_model(J=0.5, omega_s=1.0, probe_J=0.5, omega_p=1.0, beta=np.inf,
                            g_x=0.0, g_y=0.0, g_z=0.0, tau=1.0, gamma=1e-3,
                            frequencies: Sequence[tuple[float, float]] = ()) -> RepeatedInteractionModel:
    S, s = spin_algebra(J), spin_algebra(probe_J)
    beta = _check_beta(beta)

    def coupling(wp):
        return wp * s.z, linear_coupling(J, probe_J, g_x, g_y, g_z)

    freqs = frequencies or ((1.0, omega_p),)
    ens = thermal_probe_ensemble(freqs, beta, coupling, tau)
    return RepeatedInteractionModel(omega_s * S.z, ens, gamma, float(tau),
                                    observables=spin_observables(S.J), label="single-spin")


def build_measurement_model(omega_s=1.0, omega_p=0.0, g=1.0, theta=0.0, tau=1.0,
                            gamma=1e-3) -> RepeatedInteractionModel:
    """Qubit observed by a qubit pointer coupled through (cos th J_z + sin th J_x) j_x.

    The pointer starts in the ground state of omega_p j_z; at omega_p = 0 this is
    taken as |-1/2>, the omega_p -> 0+ limit.
    """
    S = spin_algebra(0.5)
    H_p = omega_p * S.z
    if omega_p == 0:
        eta = np.diag([0.0, 1.0]).astype(complex)
    else:
        eta = gibbs_state(H_p, np.inf)
    H_int = g * kron(np.cos(theta) * S.z + np.sin(theta) * S.x, S.x)
    ens = ProbeEnsemble((ProbeMember(1.0, _ro(H_p), _ro(eta), _ro(H_int), float(tau)),))
    return RepeatedInteractionModel(omega_s * S.z, ens, gamma, float(tau),
                                    observables=spin_observables(0.5), label="measurement")


def build_composite_model(omega_1=1.0, omega_2=1.0, G_x=0.0, G_y=0.0, G_z=0.0,
                          probe_J=0.5, omega_p=1.0, beta=np.inf, g_x=0.0, g_y=0.0, g_z=0.0,
                          tau=1.0, gamma=1e-3, J1=0.5, J2=0.5) -> RepeatedInteractionModel:
    """Two coupled spins; only spin 1 meets the probes. Order: spin1 (x) spin2 (x) probe."""
    A, B, s = spin_algebra(J1), spin_algebra(J2), spin_algebra(probe_J)
    I2 = B.identity
    H_s = (omega_1 * kron(A.z, I2) + omega_2 * kron(A.identity, B.z)
           + G_x * kron(A.x, B.x) + G_y * kron(A.y, B.y) + G_z * kron(A.z, B.z))
    H_int = linear_coupling(J1, probe_J, g_x, g_y, g_z, embed=lambda a: kron(a, I2))
    H_p = omega_p * s.z
    eta = gibbs_state(H_p, _check_beta(beta))
    ens = ProbeEnsemble((ProbeMember(1.0, _ro(H_p), _ro(eta), _ro(H_int), float(tau)),))
    obs = {
        "Jz1": kron(A.z, I2), "Jz2": kron(A.identity, B.z),
        "J+1": kron(A.plus, I2), "J+2": kron(A.identity, B.plus),
    }
    return RepeatedInteractionModel(H_s, ens, gamma, float(tau), subsystem_dims=(A.dim, B.dim),
                                    observables=obs, label="composite")


def build_model(system: SystemSpec, probe: ProbeSpec, interaction: InteractionSpec,
                tau: float, gamma: float) -> RepeatedInteractionModel:
    """Dispatch on the configuration-level descriptions."""
    beta = _check_beta(probe.beta)
    if probe.state == "ground":
        beta = np.inf
    elif probe.state != "thermal":
        raise ValueError(f"unknown probe state {probe.state!r}")
    if isinstance(interaction, Measurement):
        if not isinstance(system, SingleSpin) or system.J != 0.5 or probe.j != 0.5:
            raise ValueError("measurement interaction needs a qubit system and a qubit pointer")
        return build_measurement_model(system.omega_s, probe.omega_p, interaction.g,
                                       interaction.theta, tau, gamma)
    if isinstance(interaction, CompositeLocal):
        if not isinstance(system, TwoSpin):
            raise ValueError("composite-local interaction needs a two-spin system")
        return build_composite_model(system.omega_1, system.omega_2, system.G_x, system.G_y,
                                     system.G_z, probe.j, probe.omega_p, beta, interaction.g_x,
                                     interaction.g_y, interaction.g_z, tau, gamma,
                                     system.J1, system.J2)
    if isinstance(interaction, LinearSpin):
        if not isinstance(system, SingleSpin):
            raise ValueError("linear-spin interaction needs a single-spin system")
        return build_single_spin_model(system.J, system.omega_s, probe.j, probe.omega_p, beta,
                                       interaction.g_x, interaction.g_y, interaction.g_z, tau,
                                       gamma, probe.frequencies)
    raise TypeError(f"unsupported interaction {interaction!r}")


def initial_state(model: RepeatedInteractionModel, name: str) -> np.ndarray:
    """Named initial states: ground, excited, plus, maximally-mixed."""
    d = model.dim
    w, v = np.linalg.eigh(model.H_s)
    if name == "ground":
        psi = v[:, 0]
    elif name == "excited":
        psi = v[:, -1]
    elif name == "plus":
        psi = np.ones(d) / np.sqrt(d)
    elif name in ("maximally-mixed", "mixed"):
        return np.eye(d, dtype=complex) / d
    else:
        raise ValueError(f"unknown initial state {name!r}")
    return density_matrix(np.outer(psi, psi.conj()))
