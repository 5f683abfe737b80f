"""Dense linear algebra and quantum-state primitives.

Operators are plain complex ``numpy.ndarray`` objects. Spin bases are ordered
m = J, J-1, ..., -J and composite spaces keep the probe as the trailing factor.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np

from .errors import InvalidStateError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(np.abs(a - dagger(a)), initial=0.0) < tol


def require_hermitian(a: np.ndarray, name: str = "operator", tol: float = HERMITIAN_TOL) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not is_hermitian(a, tol):
        err = np.max(np.abs(a - dagger(a)))
        raise ValueError(f"{name} is not Hermitian (max |A - A^dag| = {err:.3e})")
    return a


@dataclass(frozen=True)
class SpinAlgebra:
    J: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    plus: np.ndarray
    minus: np.ndarray

    @property
    def dim(self) -> int:
        return self.z.shape[0]

    @property
    def m_values(self) -> np.ndarray:
        return self.J - np.arange(self.dim)

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def basis(self, m: float) -> np.ndarray:
        """Column vector |m>."""
        idx = int(round(self.J - m))
        if not (0 <= idx < self.dim) or abs(self.J - m - idx) > 1e-12:
            raise ValueError(f"m={m} is not a valid projection for J={self.J}")
        v = np.zeros(self.dim, dtype=complex)
        v[idx] = 1.0
        return v


def _check_spin(J) -> float:
    twoJ = 2 * float(J)
    if J < 0 or abs(twoJ - round(twoJ)) > 1e-12:
        raise ValueError(f"spin must be a non-negative half-integer, got {J!r}")
    return round(twoJ) / 2


@lru_cache(maxsize=None)
def _spin_cached(J: float) -> SpinAlgebra:
    m = J - np.arange(int(round(2 * J)) + 1)
    # <m+1|J+|m> = sqrt(J(J+1) - m(m+1)); row index of m+1 is one above m
    ladder = np.sqrt(J * (J + 1) - m[1:] * (m[1:] + 1))
    jp = np.diag(ladder, k=1).astype(complex)
    jm = jp.T.copy()
    return SpinAlgebra(
        J=J,
        x=_frozen((jp + jm) / 2),
        y=_frozen((jp - jm) / 2j),
        z=_frozen(np.diag(m)),
        plus=_frozen(jp),
        minus=_frozen(jm),
    )


def spin_algebra(J) -> SpinAlgebra:
    """Spin-J matrices in the descending |J>, ..., |-J> basis."""
    return _spin_cached(_check_spin(J))


def kron(*ops: np.ndarray) -> np.ndarray:
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, (np.asarray(o, dtype=complex) for o in ops))


def partial_trace(op: np.ndarray, dims: Sequence[int], keep) -> np.ndarray:
    """Reduce ``op`` on the tensor product with factor sizes ``dims``.

    ``keep`` is a factor index or a sequence of indices (kept in order).
    """
    dims = tuple(int(d) for d in dims)
    op = np.asarray(op)
    n = int(np.prod(dims))
    if op.shape != (n, n):
        raise ValueError(f"operator shape {op.shape} does not match factor dims {dims}")
    keep = (keep,) if np.isscalar(keep) else tuple(keep)
    k = len(dims)
    if any(not 0 <= i < k for i in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid subsystem selection {keep} for {k} factors")
    t = op.reshape(dims + dims)
    traced = [i for i in range(k) if i not in keep]
    # trace the highest axes first so lower indices stay valid
    for count, i in enumerate(sorted(traced, reverse=True)):
        cur = k - count
        t = np.trace(t, axis1=i, axis2=i + cur)
    kept_sorted = sorted(keep)
    dk = [dims[i] for i in kept_sorted]
    m = int(np.prod(dk)) if dk else 1
    if list(keep) != kept_sorted:
        order = [kept_sorted.index(i) for i in keep]
        t = t.transpose(order + [o + len(keep) for o in order])
        dk = [dims[i] for i in keep]
    return t.reshape(m, m)


def hermitian_propagator(H: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) from the eigendecomposition of Hermitian ``H``."""
    H = require_hermitian(H, "generator")
    if t == 0:
        return np.eye(H.shape[0], dtype=complex)
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def gibbs_state(H: np.ndarray, beta: float) -> np.ndarray:
    """exp(-beta H)/Z; ``beta=inf`` gives the normalized ground-space projector."""
    H = require_hermitian(H, "Hamiltonian")
    if np.isnan(beta) or beta < 0:
        raise ValueError(f"beta must be >= 0 or +inf, got {beta}")
    w, v = np.linalg.eigh(H)
    if np.isinf(beta):
        scale = max(1.0, float(np.max(np.abs(w))))
        p = (w - w[0] < 1e-10 * scale).astype(float)
    else:
        p = np.exp(-beta * (w - w[0]))
    p /= p.sum()
    rho = (v * p) @ dagger(v)
    return (rho + dagger(rho)) / 2


def density_matrix(rho, tol: float = POSITIVITY_TOL) -> np.ndarray:
    """Validate ``rho`` and return its Hermitian part.

    Raises InvalidStateError when Hermiticity, unit trace or positivity fail.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix must be square, got {rho.shape}")
    herr = np.max(np.abs(rho - dagger(rho)))
    if herr > HERMITIAN_TOL * max(1.0, rho.shape[0]):
        raise InvalidStateError(f"density matrix not Hermitian (error {herr:.3e})")
    rho = (rho + dagger(rho)) / 2
    tr = np.trace(rho).real
    if abs(tr - 1) > 1e-9:
        raise InvalidStateError(f"density matrix trace is {tr!r}")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -tol:
        raise InvalidStateError(f"density matrix has eigenvalue {lo:.3e} < -{tol:g}")
    return rho


def is_density_matrix(rho, tol: float = POSITIVITY_TOL) -> bool:
    try:
        density_matrix(rho, tol)
    except InvalidStateError:
        return False
    return True


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def expectation(rho: np.ndarray, A: np.ndarray) -> complex:
    return complex(np.trace(rho @ A))


def von_neumann_entropy(rho: np.ndarray) -> float:
    lam = np.linalg.eigvalsh((rho + dagger(rho)) / 2)
    lam = lam[lam > 0]
    return float(max(0.0, -np.sum(lam * np.log(lam))))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    d = rho - sigma
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((d + dagger(d)) / 2))))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random state from the Ginibre ensemble (used by tests and scripts)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (a + dagger(a)) / 2
