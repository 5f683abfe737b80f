"""Coarse-grained Lindblad generators, time propagation and steady states.

Vectorization is column stacking: vec(rho) = rho.reshape(-1, order="F"), so
vec(A rho B) = (B^T (x) A) vec(rho).
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .core import dagger, density_matrix, hermitian_propagator
from .errors import InvalidStateError, NumericalError
from .scattering import JumpOperator, event_unitary, free_hamiltonian, jump_operator


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    d = int(round(math.sqrt(v.size))) if d is None else d
    return v.reshape(d, d, order="F")


def spre(A: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(A.shape[0]), A)


def spost(B: np.ndarray) -> np.ndarray:
    return np.kron(B.T, np.eye(B.shape[0]))


def sprepost(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(B.T, A)


def hamiltonian_superop(H: np.ndarray) -> np.ndarray:
    return -1j * (spre(H) - spost(H))


def lindblad_superop(L: np.ndarray) -> np.ndarray:
    """D[L] rho = L rho L^dag - {L^dag L, rho}/2."""
    LdL = dagger(L) @ L
    return sprepost(L, dagger(L)) - 0.5 * (spre(LdL) + spost(LdL))


@dataclass(frozen=True)
class Liouvillian:
    dim: int
    matrix: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.dim**2, self.dim**2):
            raise ValueError(f"superoperator shape {m.shape} does not match system dim {self.dim}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def __add__(self, other: "Liouvillian") -> "Liouvillian":
        if other.dim != self.dim:
            raise ValueError("cannot add generators of different dimension")
        return Liouvillian(self.dim, self.matrix + other.matrix, max(self.gamma, other.gamma))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, ord=np.inf))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)


def hamiltonian_liouvillian(H: np.ndarray) -> Liouvillian:
    return Liouvillian(H.shape[0], hamiltonian_superop(H))


def channel_superop(U: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> tr_p[U (rho (x) eta) U^dag], probe last."""
    dp = eta.shape[0]
    d = U.shape[0] // dp
    if d * dp != U.shape[0]:
        raise ValueError(f"unitary of size {U.shape[0]} is incompatible with probe dim {dp}")
    T = U.reshape(d, dp, d, dp)
    # out[i,k] = sum T[i,a,j,b] rho[j,l] eta[b,c] conj(T[k,a,l,c])
    M = np.einsum("iajb,bc,kalc->ikjl", T, eta, T.conj(), optimize=True)
    return M.transpose(1, 0, 3, 2).reshape(d * d, d * d)


def dissipator(S, eta: np.ndarray, gamma: float = 1.0) -> Liouvillian:
    """gamma (tr_p{S rho (x) eta S^dag} - rho), computed by the partial-trace route."""
    op = S.op if isinstance(S, JumpOperator) else np.asarray(S, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    M = channel_superop(op, eta)
    d = op.shape[0] // eta.shape[0]
    return Liouvillian(d, gamma * (M - np.eye(d * d)), gamma)


@dataclass(frozen=True)
class LindbladDecomposition:
    rates: tuple[float, ...]
    operators: tuple[np.ndarray, ...]

    def superop(self) -> np.ndarray:
        d = self.operators[0].shape[0]
        out = np.zeros((d * d, d * d), dtype=complex)
        for r, L in zip(self.rates, self.operators):
            out += r * lindblad_superop(L)
        return out

    def completeness_error(self, gamma: float = 1.0) -> float:
        d = self.operators[0].shape[0]
        acc = sum(r / gamma * dagger(L) @ L for r, L in zip(self.rates, self.operators))
        return float(np.max(np.abs(acc - np.eye(d))))


def lindblad_decomposition(S, eta: np.ndarray, gamma: float = 1.0,
                           cutoff: float = 1e-14) -> LindbladDecomposition:
    """Operators <l|S|k> with rates gamma*eta_k over eta's eigenbasis {|k>}."""
    op = S.op if isinstance(S, JumpOperator) else np.asarray(S, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    dp = eta.shape[0]
    d = op.shape[0] // dp
    w, v = np.linalg.eigh((eta + dagger(eta)) / 2)
    if w[0] < -1e-10:
        raise InvalidStateError(f"probe state has negative eigenvalue {w[0]:.3e}")
    T = op.reshape(d, dp, d, dp)
    rates, ops = [], []
    for k in range(dp):
        if w[k] <= cutoff:
            continue
        Sk = np.einsum("iajb,b->iaj", T, v[:, k])
        for ell in range(dp):
            rates.append(float(gamma * w[k]))
            ops.append(Sk[:, ell, :].copy())
    return LindbladDecomposition(tuple(rates), tuple(ops))


def lindblad_generator(H: np.ndarray | None, operators: Sequence[np.ndarray],
                       rates: Sequence[float], gamma: float = 0.0) -> Liouvillian:
    """-i[H, .] + sum_k rate_k D[L_k]."""
    d = (H if H is not None else operators[0]).shape[0]
    M = np.zeros((d * d, d * d), dtype=complex)
    if H is not None:
        M += hamiltonian_superop(H)
    for r, L in zip(rates, operators):
        if r < 0:
            raise ValueError(f"negative Lindblad rate {r}")
        M += r * lindblad_superop(L)
    return Liouvillian(d, M, gamma)


def member_jump(model, member, kind: str) -> JumpOperator:
    H_0 = free_hamiltonian(model.H_s, member.H_p)
    return jump_operator(kind, H_0, member.H_int, member.tau)


def ensemble_liouvillian(model, kind: str = "scattering") -> Liouvillian:
    """-i[H_s, .] plus the weight-averaged member dissipators."""
    d = model.dim
    M = hamiltonian_superop(model.H_s)
    for m in model.ensemble.members:
        if m.weight == 0:
            continue
        M = M + m.weight * dissipator(member_jump(model, m, kind), m.eta, model.gamma).matrix
    return Liouvillian(d, M, model.gamma)


# time propagation

def _rk4_step_matrix(M: np.ndarray, h: float) -> np.ndarray:
    A = h * M
    A2 = A @ A
    I = np.eye(M.shape[0])
    return I + A + A2 / 2 + A2 @ A / 6 + A2 @ A2 / 24


class _RK4Propagator:
    """Fixed-step RK4 over intervals of arbitrary length.

    The generator is constant, so n RK4 steps of size h collapse into the
    n-th power of the one-step polynomial; powers are cached per interval.
    """

    def __init__(self, M: np.ndarray, h_max: float):
        self.M = M
        self.h_max = h_max
        self._cache: dict[float, np.ndarray] = {}

    def __call__(self, dt: float) -> np.ndarray:
        key = float(f"{dt:.13g}")
        P = self._cache.get(key)
        if P is None:
            n = max(1, math.ceil(key / self.h_max - 1e-9))
            P = np.linalg.matrix_power(_rk4_step_matrix(self.M, key / n), n)
            self._cache[key] = P
        return P


def _validate(rho: np.ndarray, t: float, tol: float = 1e-8) -> np.ndarray:
    rho = (rho + dagger(rho)) / 2
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -tol:
        raise NumericalError(f"positivity violated at t={t:.6g}: min eigenvalue {lo:.3e}")
    tr = np.trace(rho).real
    if abs(tr - 1) > 1e-6:
        raise NumericalError(f"trace drifted to {tr!r} at t={t:.6g}")
    return rho


def evolve(L: Liouvillian, rho0: np.ndarray, t_grid: Sequence[float],
           method: str = "rk4", step: float | None = None) -> np.ndarray:
    """States on ``t_grid`` (ascending, non-negative), stacked as (len(t_grid), d, d).

    ``method="rk4"`` is fixed-step RK4 with step <= 0.01/||L||_inf;
    ``method="exact"`` uses the eigendecomposition of L.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a non-empty 1D sequence")
    if t[0] < 0 or np.any(np.diff(t) < 0):
        raise ValueError("time grid must be ascending and start at t >= 0")
    rho0 = density_matrix(rho0)
    d = L.dim
    if rho0.shape != (d, d):
        raise ValueError(f"initial state has shape {rho0.shape}, generator acts on dim {d}")
    M = L.matrix
    out = np.empty((t.size, d, d), dtype=complex)
    if method == "exact":
        prop = _exact_propagator(M)
    elif method == "rk4":
        norm = np.linalg.norm(M, ord=np.inf)
        h_max = step if step is not None else (0.01 / norm if norm > 0 else np.inf)
        prop = _RK4Propagator(M, h_max) if np.isfinite(h_max) else (lambda dt: np.eye(d * d))
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    v = vec(rho0)
    prev = 0.0
    for i, ti in enumerate(t):
        dt = ti - prev
        if dt > 0:
            v = prop(dt) @ v
        rho = _validate(unvec(v, d), ti)
        out[i] = rho
        v = vec(rho)
        prev = ti
    return out


def _exact_propagator(M: np.ndarray):
    lam, V = np.linalg.eig(M)
    if np.linalg.cond(V) > 1e10:
        return lambda dt: scipy.linalg.expm(M * dt)
    Vinv = np.linalg.inv(V)
    return lambda dt: (V * np.exp(lam * dt)) @ Vinv


class SteadyState(NamedTuple):
    rho: np.ndarray
    degeneracy: int


def steady_state(L: Liouvillian, tol: float = 1e-8) -> SteadyState:
    """Kernel of L; degenerate kernels are resolved from the maximally mixed state."""
    d = L.dim
    M = L.matrix
    scale = max(np.linalg.norm(M, ord=np.inf), np.finfo(float).tiny)
    lam, vl, vr = scipy.linalg.eig(M, left=True, right=True)
    ker = np.flatnonzero(np.abs(lam) < tol * scale)
    if ker.size == 0:
        raise NumericalError(
            f"generator has no kernel (smallest |eigenvalue| = {np.min(np.abs(lam)):.3e})")
    trace_row = vec(np.eye(d))
    if ker.size == 1:
        A = np.vstack([M, trace_row[None, :]])
        # equilibrate rows: slow population rows would otherwise drown in the
        # backward error of the fast coherent ones
        rows = np.max(np.abs(A), axis=1)
        rows[rows == 0] = 1.0
        b = np.zeros(d * d + 1, dtype=complex)
        b[-1] = 1.0
        x = np.linalg.lstsq(A / rows[:, None], b / rows, rcond=None)[0]
    else:
        R, Lh = vr[:, ker], vl[:, ker]
        x = R @ np.linalg.solve(dagger(Lh) @ R, dagger(Lh) @ vec(np.eye(d) / d))
    rho = unvec(x, d)
    rho = (rho + dagger(rho)) / 2
    rho /= np.trace(rho).real
    return SteadyState(density_matrix(rho), int(ker.size))


@dataclass(frozen=True)
class RegularMap:
    """Discrete map for one probe per period delta_t."""

    dim: int
    matrix: np.ndarray
    delta_t: float

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def fixed_point(self, tol: float = 1e-8) -> np.ndarray:
        lam, V = np.linalg.eig(self.matrix)
        i = int(np.argmin(np.abs(lam - 1)))
        if abs(lam[i] - 1) > tol:
            raise NumericalError(f"map has no eigenvalue 1 (closest {lam[i]:.6g})")
        rho = unvec(V[:, i], self.dim)
        rho = rho / np.trace(rho)
        return density_matrix((rho + dagger(rho)) / 2)


def regular_map(model, delta_t: float, kind: str = "scattering") -> RegularMap:
    """One period: interaction window of length tau, then free evolution for delta_t - tau.

    The window applies U_0(tau/2) X U_0(tau/2) with X the kind's jump operator,
    which is exactly U(tau) for ``kind="scattering"``.
    """
    d = model.dim
    M = np.zeros((d * d, d * d), dtype=complex)
    for m in model.ensemble.members:
        if delta_t < m.tau:
            raise ValueError(f"period {delta_t} shorter than interaction time {m.tau}")
        H_0 = free_hamiltonian(model.H_s, m.H_p)
        W = event_unitary(kind, H_0, m.H_int, m.tau)
        Us = hermitian_propagator(model.H_s, delta_t - m.tau)
        M += m.weight * sprepost(Us, dagger(Us)) @ channel_superop(W, m.eta)
    return RegularMap(d, M, float(delta_t))


# debugging dump: row-major, real/imag interleaved

_MAGIC = b"RPLIOUV1"


def export_liouvillian(L: Liouvillian, path, fmt: str = "csv") -> None:
    m = np.ascontiguousarray(L.matrix)
    if fmt == "csv":
        n = m.shape[0]
        inter = np.empty((n, 2 * n))
        inter[:, 0::2], inter[:, 1::2] = m.real, m.imag
        header = (f"dim={L.dim} gamma={L.gamma!r} vectorization=column-stacking "
                  "layout=row-major re,im interleaved")
        np.savetxt(path, inter, delimiter=",", fmt="%.17g", header=header)
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(_MAGIC + struct.pack("<Qd", L.dim, float(L.gamma)))
            fh.write(m.astype("<c16").tobytes())
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def load_liouvillian(path, fmt: str = "csv") -> Liouvillian:
    if fmt == "csv":
        with open(path) as fh:
            head = fh.readline()
        fields = dict(kv.split("=", 1) for kv in head.lstrip("# ").split() if "=" in kv)
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
        return Liouvillian(int(fields["dim"]), raw[:, 0::2] + 1j * raw[:, 1::2], float(fields["gamma"]))
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not a Liouvillian dump")
        dim, gamma = struct.unpack("<Qd", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<c16")
    return Liouvillian(int(dim), data.reshape(dim * dim, dim * dim), gamma)
