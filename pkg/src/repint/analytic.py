"""Closed-form scattering operators and generators for the solvable families.

These are written independently of the generic pipeline (no matrix
exponentials or partial traces) so the two can be checked against each other.

Every 2x2 rotation block below has the form
    C = e^{-i w0 tau/2} (cos(r tau/2) + i (w/r) sin(r tau/2)),  K = (G/r) sin(r tau/2),
with r = sqrt(G^2 + w^2). This is an algebraically simplified form of the
fraction (e^{ir tau/2}(w+r)^2 + e^{-ir tau/2} G^2)/(G^2 + (w+r)^2) that stays
finite when w + r -> 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import dagger, spin_algebra
from .errors import NoRelaxationError
from .master import Liouvillian, hamiltonian_superop, lindblad_generator, lindblad_superop


def _sin_over(r, tau):
    """sin(r tau/2)/r, finite at r = 0."""
    return 0.5 * tau * np.sinc(r * tau / (2 * np.pi))


def rotation_block(w: float, G: float, tau: float, w0: float | None = None):
    """(C, K) for splitting ``w``, coupling ``G``, bare-phase frequency ``w0``."""
    w0 = w if w0 is None else w0
    r = np.hypot(G, w)
    s = _sin_over(r, tau)
    C = np.exp(-0.5j * w0 * tau) * (np.cos(r * tau / 2) + 1j * w * s)
    return C, G * s


def printed_block_fraction(w: float, G: float, tau: float, w0: float | None = None):
    """Unsimplified fraction form of :func:`rotation_block` (undefined when w + r = 0)."""
    w0 = w if w0 is None else w0
    r = np.sqrt(G**2 + w**2)
    x = w + r
    den = G**2 + x**2
    C = np.exp(-0.5j * w0 * tau) * (np.exp(0.5j * r * tau) * x**2 + np.exp(-0.5j * r * tau) * G**2) / den
    K = 2 * G * x / den * np.sin(r * tau / 2)
    return C, K


def _boltzmann(beta, omega_p):
    """(e^{beta w_p/2}/Z_p, e^{-beta w_p/2}/Z_p), i.e. probe ground / excited weights."""
    if omega_p == 0:
        return 0.5, 0.5
    if np.isinf(beta):
        return (1.0, 0.0) if omega_p > 0 else (0.0, 1.0)
    x = beta * omega_p
    # 1/(1+e^{-x}) written to avoid overflow for either sign of x
    lo = 0.5 * (1 + np.tanh(x / 2))
    return lo, 1 - lo


# qubit system, qubit probes, linear coupling

@dataclass(frozen=True)
class QubitLinearCoefficients:
    C_Omega: complex
    C_Delta: complex
    K_Omega: float
    K_Delta: float
    G_Delta: float
    G_Omega: float
    Omega: float
    Delta: float
    omega_s: float
    omega_p: float
    g_z: float
    tau: float
    beta: float
    gamma: float
    delta_omega: float
    Gamma_z: float
    Gamma_x: float
    Gamma_plus: float
    Gamma_minus: float

    @property
    def probe_weights(self):
        return _boltzmann(self.beta, self.omega_p)


def qubit_linear_coefficients(omega_s, omega_p, g_x, g_y, g_z, tau, beta, gamma=1.0) -> QubitLinearCoefficients:
    Omega, Delta = omega_s + omega_p, omega_s - omega_p
    G_D, G_O = (g_x + g_y) / 2, (g_x - g_y) / 2
    C_O, K_O = rotation_block(Omega, G_O, tau)
    C_D, K_D = rotation_block(Delta, G_D, tau)
    pg, pe = _boltzmann(beta, omega_p)
    ph = np.exp(0.25j * g_z * tau)
    shift = gamma * (pg * np.imag(C_O * C_D / ph**2) + pe * np.imag(C_O * C_D * ph**2))
    dephase = gamma * (pg * abs(C_O / ph - C_D.conjugate() * ph) ** 2
                       + pe * abs(C_O * ph - C_D.conjugate() / ph) ** 2)
    cross = K_O * K_D
    return QubitLinearCoefficients(
        C_Omega=complex(C_O), C_Delta=complex(C_D), K_Omega=float(K_O), K_Delta=float(K_D),
        G_Delta=G_D, G_Omega=G_O, Omega=Omega, Delta=Delta, omega_s=omega_s, omega_p=omega_p,
        g_z=g_z, tau=tau, beta=beta, gamma=gamma,
        delta_omega=float(shift), Gamma_z=float(dephase), Gamma_x=float(4 * gamma * cross),
        Gamma_plus=float(gamma * (pg * K_O**2 + pe * K_D**2 - cross)),
        Gamma_minus=float(gamma * (pg * K_D**2 + pe * K_O**2 - cross)),
    )


def qubit_linear_scattering(c: QubitLinearCoefficients) -> np.ndarray:
    """S on |s,p> with index 2*i_s + i_p and i = 0 for m = +1/2."""
    S = np.zeros((4, 4), dtype=complex)
    a, b = np.exp(-0.25j * c.g_z * c.tau), np.exp(0.25j * c.g_z * c.tau)
    # counter-rotating block {|++>, |-->}
    S[0, 0], S[3, 3] = a * c.C_Omega.conjugate(), a * c.C_Omega
    S[0, 3] = S[3, 0] = -1j * a * c.K_Omega
    # co-rotating block {|+->, |-+>}
    S[1, 1], S[2, 2] = b * c.C_Delta.conjugate(), b * c.C_Delta
    S[1, 2] = S[2, 1] = -1j * b * c.K_Delta
    return S


def _two_level_eigvecs(lower, upper, offdiag_coupling, splitting):
    """Eigenvectors of the block (1/2)[[w, G], [G, -w]], the slot ``upper`` carrying +w.

    Returns (vec_plus, vec_minus) for the +r/2 and -r/2 eigenvalues embedded in
    the 4-dim space, first nonzero component real positive.
    """
    G, w = offdiag_coupling, splitting
    r = np.hypot(G, w)
    # +r eigenvector of [[w, G], [G, -w]] is (w + r, G) ~ (G, r - w)
    a = np.array([w + r, G]) if w >= 0 else np.array([G, r - w])
    if r == 0:             # only then is the candidate vector zero
        a = np.array([1.0, 0.0])
    a = a / np.abs(a).max()     # rescale first so tiny couplings do not underflow
    a = a / np.linalg.norm(a)
    vp, vm = np.zeros(4, complex), np.zeros(4, complex)
    vp[upper], vp[lower] = a[0], a[1]
    vm[upper], vm[lower] = -a[1], a[0]
    return _fix_phase(vp), _fix_phase(vm)


def _fix_phase(v):
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size:
        v = v * np.exp(-1j * np.angle(v[nz[0]]))
    return v


def qubit_linear_eigensystem(omega_s, omega_p, g_x, g_y, g_z):
    """Eigenvalues and eigenvectors of H_0 + H_int, ordered (D+, D-, O+, O-)."""
    Omega, Delta = omega_s + omega_p, omega_s - omega_p
    G_D, G_O = (g_x + g_y) / 2, (g_x - g_y) / 2
    rD, rO = np.hypot(G_D, Delta), np.hypot(G_O, Omega)
    lam = np.array([(-g_z + 2 * rD) / 4, (-g_z - 2 * rD) / 4, (g_z + 2 * rO) / 4, (g_z - 2 * rO) / 4])
    # block {|+->, |-+>} reads (1/4)[[2D - gz, 2G], [2G, -2D - gz]]; |+-> carries +D
    dp, dm = _two_level_eigvecs(2, 1, G_D, Delta)
    op, om = _two_level_eigvecs(3, 0, G_O, Omega)
    return lam, np.column_stack([dp, dm, op, om])


def qubit_linear_liouvillian(c: QubitLinearCoefficients) -> Liouvillian:
    """Full qubit generator in the grouped shift/dephasing/exchange form."""
    S = spin_algebra(0.5)
    pg, pe = c.probe_weights
    cz, sz = np.cos(c.g_z * c.tau / 4), np.sin(c.g_z * c.tau / 4)
    gam, cross = c.gamma, c.K_Omega * c.K_Delta
    M = hamiltonian_superop((c.omega_s + c.delta_omega) * S.z)
    M = M + c.Gamma_z * lindblad_superop(S.z)
    M = M + c.Gamma_plus * lindblad_superop(S.plus) + c.Gamma_minus * lindblad_superop(S.minus)
    M = M + 4 * gam * cross * (pg * lindblad_superop(cz * S.x + sz * S.y)
                               + pe * lindblad_superop(cz * S.x - sz * S.y))
    return Liouvillian(2, M, gam)


def qubit_population_ratio(c: QubitLinearCoefficients, tol: float = 1e-14) -> float:
    """Steady-state ratio p(+1/2)/p(-1/2)."""
    pg, pe = c.probe_weights
    num = pg * c.K_Omega**2 + pe * c.K_Delta**2
    den = pg * c.K_Delta**2 + pe * c.K_Omega**2
    if c.K_Omega**2 + c.K_Delta**2 < tol:
        raise NoRelaxationError("K_Omega = K_Delta = 0: no relaxation, ratio undefined")
    if den == 0:
        return np.inf
    return float(num / den)


def qubit_population_ratio_short_time(g_x, g_y, beta, omega_p) -> float:
    x = beta * omega_p / 2
    return float(1 - 4 * g_x * g_y * np.sinh(x)
                 / ((g_x**2 + g_y**2) * np.cosh(x) + 2 * g_x * g_y * np.sinh(x)))


@dataclass(frozen=True)
class ResonantQubitRates:
    C: complex
    K: float
    delta_omega: float
    Gamma_z: float
    Gamma_x: float
    Gamma_plus: float
    Gamma_minus: float
    chi: float


def resonant_qubit_rates(omega_s, g_x, g_y, tau, beta, gamma=1.0) -> ResonantQubitRates:
    """Grouped rates at omega_s = omega_p, g_z = 0, evaluated from the fraction forms."""
    Gm, Gp = (g_x - g_y) / 2, (g_x + g_y) / 2
    C, K = printed_block_fraction(2 * omega_s, Gm, tau)
    s, c = np.sin(Gp * tau / 2), np.cos(Gp * tau / 2)
    x = beta * omega_s
    Zp = 2 * np.cosh(x / 2)
    with np.errstate(invalid="ignore", divide="ignore"):   # nan when nothing relaxes
        chi = (np.exp(x) * K**2 + s**2) / (K**2 + np.exp(x) * s**2)
    return ResonantQubitRates(
        C=complex(C), K=float(K),
        delta_omega=float(gamma * np.imag(C) * c),
        Gamma_z=float(gamma * abs(C - c) ** 2),
        Gamma_x=float(4 * gamma * K * s),
        Gamma_plus=float(gamma * np.exp(x / 2) / Zp * (K - s) * (K - np.exp(-x) * s)),
        Gamma_minus=float(gamma * np.exp(-x / 2) / Zp * (K - s) * (K - np.exp(x) * s)),
        chi=float(chi),
    )


# spin-J system, qubit probes, exchange coupling

@dataclass(frozen=True)
class SpinJExchangeData:
    J: float
    omega_s: float
    omega_p: float
    g: float
    g_z: float
    tau: float
    beta: float
    gamma: float
    m_values: np.ndarray      # m = J, J-1, ..., -J+1 (blocks pair |m,-1/2> with |m-1,+1/2>)
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    C: np.ndarray
    K: np.ndarray
    L_1: np.ndarray
    L_2: np.ndarray
    L_plus: np.ndarray
    L_minus: np.ndarray

    @property
    def probe_weights(self):
        return _boltzmann(self.beta, self.omega_p)


def _block_params(J, omega_s, omega_p, g, g_z):
    m = J - np.arange(int(round(2 * J)))  # J ... -J+1
    Delta = omega_s - omega_p
    Delta_m = Delta - (m - 0.5) * g_z
    coupling = g * np.sqrt(J * (J + 1) - m * (m - 1))
    return m, Delta, Delta_m, coupling


def spinJ_exchange_lindblads(J, omega_s, omega_p, g, g_z, tau, beta, gamma=1.0) -> SpinJExchangeData:
    S = spin_algebra(J)
    d = S.dim
    m, Delta, Delta_m, cpl = _block_params(S.J, omega_s, omega_p, g, g_z)
    C, K = rotation_block(Delta_m, cpl, tau, w0=Delta)
    r = np.hypot(Delta_m, cpl)
    mid = (m - 0.5) * omega_s - g_z / 4
    ph, edge = np.exp(0.25j * g_z * tau), np.exp(-0.5j * g_z * S.J * tau)
    idx = np.arange(m.size)                 # row index of |m> is J - m
    L1 = np.zeros((d, d), complex)
    L1[idx, idx] = ph * C.conj()
    L1[d - 1, d - 1] = edge
    L2 = np.zeros((d, d), complex)
    L2[idx + 1, idx + 1] = ph * C           # |m-1><m-1| carries C_m
    L2[0, 0] = edge
    Lp = np.zeros((d, d), complex)
    Lp[idx, idx + 1] = ph * K               # |m><m-1|
    return SpinJExchangeData(
        J=S.J, omega_s=omega_s, omega_p=omega_p, g=g, g_z=g_z, tau=tau, beta=beta, gamma=gamma,
        m_values=m, lambda_plus=mid + r / 2, lambda_minus=mid - r / 2, C=C, K=K,
        L_1=L1, L_2=L2, L_plus=Lp, L_minus=dagger(Lp),
    )


def spinJ_exchange_liouvillian(data: SpinJExchangeData) -> Liouvillian:
    S = spin_algebra(data.J)
    pg, pe = data.probe_weights
    return lindblad_generator(
        data.omega_s * S.z,
        [data.L_1, data.L_2, data.L_minus, data.L_plus],
        [data.gamma * pg, data.gamma * pe, data.gamma * pg, data.gamma * pe],
        data.gamma,
    )


def _sp_index(J, m, probe_up: bool):
    return 2 * int(round(J - m)) + (0 if probe_up else 1)


def spinJ_exchange_scattering(data: SpinJExchangeData) -> np.ndarray:
    J = data.J
    D = 2 * int(round(2 * J + 1))
    S = np.zeros((D, D), complex)
    ph, edge = np.exp(0.25j * data.g_z * data.tau), np.exp(-0.5j * data.g_z * J * data.tau)
    for m, C, K in zip(data.m_values, data.C, data.K):
        a, b = _sp_index(J, m, False), _sp_index(J, m - 1, True)
        S[a, a], S[b, b] = ph * np.conj(C), ph * C
        S[a, b] = S[b, a] = -1j * ph * K
    S[_sp_index(J, -J, False), _sp_index(J, -J, False)] = edge
    S[_sp_index(J, J, True), _sp_index(J, J, True)] = edge
    return S


def spinJ_exchange_eigensystem(J, omega_s, omega_p, g, g_z):
    """Eigenvalues and normalized eigenvectors of H_0 + H_int (exchange, qubit probe).

    Columns: (psi_m^+, psi_m^-) for each m = J ... -J+1, then |J,+1/2>, |-J,-1/2>.
    """
    S = spin_algebra(J)
    J = S.J
    D = 2 * S.dim
    m, Delta, Delta_m, cpl = _block_params(J, omega_s, omega_p, g, g_z)
    r = np.hypot(Delta_m, cpl)
    mid = (m - 0.5) * omega_s - g_z / 4
    lams, vecs = [], []
    for k in range(m.size):
        a, b = _sp_index(J, m[k], False), _sp_index(J, m[k] - 1, True)
        # block on (|m,-1/2>, |m-1,+1/2>) = mid + (1/2)[[D_m, G], [G, -D_m]]
        w, G = Delta_m[k], cpl[k]
        v = np.array([w + r[k], G]) if w >= 0 else np.array([G, r[k] - w])
        if r[k] == 0:
            v = np.array([1.0, 0.0])
        v = v / np.abs(v).max()
        v = v / np.linalg.norm(v)
        vp, vm = np.zeros(D, complex), np.zeros(D, complex)
        vp[a], vp[b] = v[0], v[1]
        vm[a], vm[b] = -v[1], v[0]
        lams += [mid[k] + r[k] / 2, mid[k] - r[k] / 2]
        vecs += [_fix_phase(vp), _fix_phase(vm)]
    top, bottom = np.zeros(D, complex), np.zeros(D, complex)
    top[_sp_index(J, J, True)] = 1
    bottom[_sp_index(J, -J, False)] = 1
    lams += [omega_s * J + omega_p / 2 + g_z * J / 2, -omega_s * J - omega_p / 2 + g_z * J / 2]
    vecs += [top, bottom]
    return np.array(lams), np.column_stack(vecs)


def spinJ_exchange_unitary(J, omega_s, omega_p, g, g_z, tau) -> np.ndarray:
    lam, V = spinJ_exchange_eigensystem(J, omega_s, omega_p, g, g_z)
    return (V * np.exp(-1j * lam * tau)) @ dagger(V)


def spin_half_exchange_liouvillian(omega_s, omega_p, g, tau, beta, gamma=1.0) -> Liouvillian:
    """Spin-1/2 exchange generator as shift + dephasing + J_-/J_+ damping (valid at g_z = 0)."""
    S = spin_algebra(0.5)
    C, K = rotation_block(omega_s - omega_p, g, tau)
    pg, pe = _boltzmann(beta, omega_p)
    return lindblad_generator(
        (omega_s + gamma * np.imag(C)) * S.z,
        [S.z, S.minus, S.plus],
        [gamma * abs(1 - C) ** 2, gamma * K**2 * pg, gamma * K**2 * pe],
        gamma,
    )


def standard_thermalization_liouvillian(J, omega_s, Gamma, beta) -> Liouvillian:
    """-i w_s[J_z, .] + Gamma e^{beta w_s/2} D[J_-] + Gamma e^{-beta w_s/2} D[J_+]."""
    S = spin_algebra(J)
    x = beta * omega_s / 2
    return lindblad_generator(omega_s * S.z, [S.minus, S.plus],
                              [Gamma * np.exp(x), Gamma * np.exp(-x)], Gamma)


# ideal measurement pointer

@dataclass(frozen=True)
class MeasurementKrausData:
    omega_s: float
    g: float
    theta: float
    tau: float
    gamma: float
    A_pm: tuple[float, float]
    B_pm: tuple[float, float]
    C_pm: tuple[float, float]
    R_pm: tuple[float, float]
    K_plus: np.ndarray
    K_minus: np.ndarray


def measurement_kraus(omega_s, g, theta, tau, gamma=1.0) -> MeasurementKrausData:
    """Block operators of S on the j_x = +-1/2 pointer sectors.

    The pointer's j_x eigenvalues are +-1/2, so each sector sees the system
    field (w_s +- (g/2) cos th) J_z +- (g/2) sin th J_x.
    """
    S = spin_algebra(0.5)
    h = g / 4   # appears as 2h = g/2 in the sector fields
    A, B, C, R = [], [], [], []
    for sgn in (1, -1):
        lin = omega_s + sgn * 2 * h * np.cos(theta)
        r = np.sqrt(4 * h**2 + omega_s**2 + sgn * 4 * h * omega_s * np.cos(theta)) / 2
        sr = tau * np.sinc(r * tau / np.pi)   # sin(r tau)/r
        c0, s0 = np.cos(omega_s * tau / 2), np.sin(omega_s * tau / 2)
        A.append(float(c0 * np.cos(r * tau) + s0 * lin * sr / 2))
        B.append(float(s0 * np.cos(r * tau) - c0 * lin * sr / 2))
        C.append(float(h * np.sin(theta) * sr))
        R.append(float(r))
    I = S.identity
    Kp = A[0] * I + 2j * B[0] * S.z - 2j * C[0] * S.x
    Km = A[1] * I + 2j * B[1] * S.z + 2j * C[1] * S.x
    return MeasurementKrausData(omega_s, g, theta, tau, gamma, tuple(A), tuple(B), tuple(C),
                                tuple(R), Kp, Km)


def measurement_liouvillian(data: MeasurementKrausData, form: str = "kraus") -> Liouvillian:
    """Generator either as the equal-weight Kraus mixture or as two dephasing-type dissipators."""
    S = spin_algebra(0.5)
    gam = data.gamma
    if form == "kraus":
        return lindblad_generator(data.omega_s * S.z, [data.K_plus, data.K_minus],
                                  [gam / 2, gam / 2], gam)
    if form == "dissipators":
        (Ap, Am), (Bp, Bm), (Cp, Cm) = data.A_pm, data.B_pm, data.C_pm
        H = (data.omega_s - gam * (Ap * Bp + Am * Bm)) * S.z + gam * (Ap * Cp - Am * Cm) * S.x
        return lindblad_generator(H, [Bp * S.z - Cp * S.x, Bm * S.z + Cm * S.x],
                                  [2 * gam, 2 * gam], gam)
    raise ValueError(f"unknown form {form!r}")


def product_interaction_blocks(A: np.ndarray, b: np.ndarray, g: float, tau: float):
    """exp(-i g b_k tau A) for probe eigenvalues b_k of a diagonal probe operator."""
    w, V = np.linalg.eigh(A)
    return [(V * np.exp(-1j * g * bk * tau * w)) @ dagger(V) for bk in np.asarray(b).real]

