"""Jump operators for a single system-probe interaction event."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import commutator, dagger, hermitian_propagator, kron, require_hermitian

KINDS = ("scattering", "bare-unitary", "eikonal")


@dataclass(frozen=True)
class JumpOperator:
    op: np.ndarray
    kind: str
    tau: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown jump-operator kind {self.kind!r}; expected one of {KINDS}")
        op = np.array(self.op, dtype=complex)
        err = np.max(np.abs(dagger(op) @ op - np.eye(op.shape[0])))
        if err > 1e-10:
            raise ValueError(f"{self.kind} operator is not unitary (error {err:.2e})")
        op.setflags(write=False)
        object.__setattr__(self, "op", op)

    @property
    def dim(self) -> int:
        return self.op.shape[0]


def free_hamiltonian(H_s: np.ndarray, H_p: np.ndarray) -> np.ndarray:
    ds, dp = H_s.shape[0], H_p.shape[0]
    return kron(H_s, np.eye(dp)) + kron(np.eye(ds), H_p)


def _pair(H_0, H_int):
    H_0 = require_hermitian(H_0, "H_0")
    H_int = require_hermitian(H_int, "H_int")
    if H_0.shape != H_int.shape:
        raise ValueError(f"H_0 {H_0.shape} and H_int {H_int.shape} dimensions differ")
    return H_0, H_int


def scattering_operator(H_0, H_int, tau: float) -> JumpOperator:
    """Interaction unitary with the free evolution stripped off symmetrically."""
    H_0, H_int = _pair(H_0, H_int)
    half = hermitian_propagator(H_0, -tau / 2)
    return JumpOperator(half @ hermitian_propagator(H_0 + H_int, tau) @ half, "scattering", tau)


def bare_unitary(H_0, H_int, tau: float) -> JumpOperator:
    H_0, H_int = _pair(H_0, H_int)
    return JumpOperator(hermitian_propagator(H_0 + H_int, tau), "bare-unitary", tau)


def eikonal_operator(H_int, tau: float) -> JumpOperator:
    H_int = require_hermitian(H_int, "H_int")
    return JumpOperator(hermitian_propagator(H_int, tau), "eikonal", tau)


def jump_operator(kind: str, H_0, H_int, tau: float) -> JumpOperator:
    if kind == "scattering":
        return scattering_operator(H_0, H_int, tau)
    if kind == "bare-unitary":
        return bare_unitary(H_0, H_int, tau)
    if kind == "eikonal":
        return eikonal_operator(H_int, tau)
    raise ValueError(f"unknown jump-operator kind {kind!r}; expected one of {KINDS}")


def event_unitary(kind: str, H_0, H_int, tau: float) -> np.ndarray:
    """Full unitary applied across one interaction window of length tau.

    Free evolution over the two half windows brackets the kind's jump
    operator; for ``scattering`` this is exactly exp(-i(H_0+H_int)tau).
    """
    half = hermitian_propagator(H_0, tau / 2)
    return half @ jump_operator(kind, H_0, H_int, tau).op @ half


def is_energy_preserving(H_0, H_int, tol: float = 1e-10) -> bool:
    H_0, H_int = _pair(H_0, H_int)
    return bool(np.max(np.abs(commutator(H_int, H_0)), initial=0.0) < tol)


def bch_reference_log(H_0, H_int, tau: float) -> np.ndarray:
    """Third-order Baker-Campbell-Hausdorff estimate of log S."""
    H_0, H_int = _pair(H_0, H_int)
    c1 = commutator(H_int, commutator(H_int, H_0))
    c2 = commutator(H_0, commutator(H_0, H_int))
    return -1j * tau * (H_int + tau**2 / 12 * c1 - tau**2 / 24 * c2)


def unitary_log(U: np.ndarray) -> np.ndarray:
    """Principal logarithm of a unitary, eigenphases in (-pi, pi]."""
    # complex Schur form of a normal matrix is diagonal with orthonormal Z
    T, Z = scipy.linalg.schur(np.asarray(U, dtype=complex), output="complex")
    phases = np.angle(np.diag(T))
    phases[phases <= -np.pi] += 2 * np.pi
    return (Z * (1j * phases)) @ dagger(Z)


def system_probe_operators(H_s, member):
    """(H_0, H_int) of one ensemble member."""
    return free_hamiltonian(H_s, member.H_p), member.H_int
