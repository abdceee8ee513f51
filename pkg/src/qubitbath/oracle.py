"""Independent references for the momentum-space engine.

Dense exact diagonalization
    Full spin Hamiltonian in the 2**(N+1) tensor basis. The qubit is the most
    significant bit, bath site 1 the next one and bath site N the least
    significant bit; a set bit means spin up. Only N <= 8 is allowed.
Closed forms
    J = 0 Rabi formulas for any N, the N = 2 three-cosine formula, and the
    second-order perturbative decoherence factor with its Gaussian rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, SizeError
from .spinbath import ModelParams, coherent_coefficients, dispersion, grid_for_count
from .slater import combos, get_f_table, rank_indices

MAX_DENSE_N = 8


def _check_dense(N: int):
    if N > MAX_DENSE_N:
        raise SizeError(f"dense oracle supports N <= {MAX_DENSE_N}, got N = {N}")


def _bit(N: int, site: int) -> int:
    """Bit mask of bath site ``site`` (1-based)."""
    return 1 << (N - site)


def _qubit_bit(N: int) -> int:
    return 1 << N


def bath_hamiltonian(N: int, J: float, h: float) -> np.ndarray:
    """Periodic XX ring ``(J/2) sum (s+_j s-_{j+1} + h.c.) - h sum n_j`` on 2**N states."""
    dim = 1 << N
    H = np.zeros((dim, dim))
    for s in range(dim):
        H[s, s] -= h * bin(s).count("1")
        for j in range(1, N + 1):
            a, b = _bit(N, j), _bit(N, j % N + 1)
            # s+_j s-_{j+1}: site j down -> up, site j+1 up -> down
            if not s & a and s & b:
                H[s ^ a ^ b, s] += 0.5 * J
            if s & a and not s & b:
                H[s ^ a ^ b, s] += 0.5 * J
    return H


def full_hamiltonian(params: ModelParams) -> np.ndarray:
    N = params.N
    _check_dense(N)
    HB = bath_hamiltonian(N, params.J, params.h)
    dimb = 1 << N
    q = _qubit_bit(N)
    H = np.zeros((2 * dimb, 2 * dimb))
    H[:dimb, :dimb] = HB
    H[dimb:, dimb:] = HB + params.omega * np.eye(dimb)
    for s in range(dimb):
        for j in range(1, N + 1):
            a = _bit(N, j)
            if not s & a:
                # qubit up, site down  <->  qubit down, site up
                up_state = q | s
                dn_state = s | a
                H[dn_state, up_state] += params.g[j - 1]
                H[up_state, dn_state] += params.g[j - 1]
    return H


def magnetization(N: int) -> np.ndarray:
    """Diagonal of ``M = sigma_z/2 + L_z`` in the full basis."""
    dim = 1 << (N + 1)
    return np.array([bin(s).count("1") - (N + 1) / 2 for s in range(dim)], dtype=float)


@dataclass
class DenseState:
    N: int
    vec: np.ndarray

    def __post_init__(self):
        _check_dense(self.N)
        if self.vec.shape != (1 << (self.N + 1),):
            raise InvalidParameterError("state has wrong dimension")
        if abs(np.linalg.norm(self.vec) - 1) > 1e-10:
            raise InvalidParameterError("state is not normalized")


class DenseOracle:
    """Eigendecomposition propagator for one parameter set."""

    def __init__(self, params: ModelParams):
        _check_dense(params.N)
        self.params = params
        self.H = full_hamiltonian(params)
        self.evals, self.evecs = np.linalg.eigh(self.H)

    def propagate(self, psi0: np.ndarray, times) -> np.ndarray:
        """Schrodinger-picture states, shape (len(times), dim)."""
        times = np.asarray(times, dtype=float)
        c0 = self.evecs.conj().T @ np.asarray(psi0, dtype=complex)
        phases = np.exp(-1j * np.outer(times, self.evals))
        return (phases * c0) @ self.evecs.T


def exact_propagate(params: ModelParams, initial, times) -> np.ndarray:
    if not isinstance(initial, DenseState):
        initial = DenseState(params.N, np.asarray(initial, dtype=complex))
    return DenseOracle(params).propagate(initial.vec, times)


# ---------------------------------------------------------------- states


def dicke_state(N: int, n: int) -> np.ndarray:
    """Bath Dicke state with n up spins, dimension 2**N."""
    vec = np.zeros(1 << N, dtype=complex)
    for s in range(1 << N):
        if bin(s).count("1") == n:
            vec[s] = 1.0
    return vec / math.sqrt(math.comb(N, n))


def bath_coherent_state(N: int, z: complex) -> np.ndarray:
    coh = coherent_coefficients(N, z)
    return sum(coh.Cn[n] * dicke_state(N, n) for n in range(N + 1))


def bath_ground_vector(N: int, J: float, h: float, gap_tol: float = 1e-8) -> tuple:
    """Lowest eigenvector of the bath Hamiltonian by dense diagonalization."""
    evals, evecs = np.linalg.eigh(bath_hamiltonian(N, J, h))
    if evals[1] - evals[0] < gap_tol:
        raise InvalidParameterError(f"bath ground state is degenerate (gap {evals[1] - evals[0]:.2e})")
    return evals[0], evecs[:, 0].astype(complex)


def product_state(qubit_up: complex, qubit_down: complex, bath: np.ndarray) -> np.ndarray:
    return np.concatenate([qubit_down * bath, qubit_up * bath])


def reduced_qubit(states: np.ndarray) -> np.ndarray:
    """Qubit density matrices in the (up, down) basis, shape (T, 2, 2)."""
    states = np.atleast_2d(states)
    half = states.shape[1] // 2
    dn, up = states[:, :half], states[:, half:]
    rho = np.empty((states.shape[0], 2, 2), dtype=complex)
    rho[:, 0, 0] = np.sum(np.abs(up) ** 2, axis=1)
    rho[:, 1, 1] = np.sum(np.abs(dn) ** 2, axis=1)
    rho[:, 0, 1] = np.sum(up * dn.conj(), axis=1)
    rho[:, 1, 0] = rho[:, 0, 1].conj()
    return rho


def bloch_from_rho(rho: np.ndarray) -> tuple:
    sx = 2 * rho[:, 0, 1].real
    sy = -2 * rho[:, 0, 1].imag
    sz = (rho[:, 0, 0] - rho[:, 1, 1]).real
    purity = 0.5 * (1 + sx**2 + sy**2 + sz**2)
    return sx, sy, sz, purity


def project_momentum(states: np.ndarray, N: int, n: int, qubit_up: bool) -> np.ndarray:
    """Overlaps of dense states with momentum configurations of n bath fermions.

    Returns Schrodinger-picture amplitudes indexed by configuration rank on
    the grid of parity n, using ``c^dag_{j1}..c^dag_{jn}|0>`` = spin state with
    ups at ``j1 < .. < jn``.
    """
    from .slater import tables_for_count

    states = np.atleast_2d(states)
    half = 1 << N
    block = states[:, half:] if qubit_up else states[:, :half]
    sites = combos(N, n)
    idx = np.array([sum(_bit(N, j + 1) for j in row) for row in sites], dtype=np.int64)
    site_amp = block[:, idx]  # ranked by site subset
    U = tables_for_count(N, n).level(n)  # [J, K]
    return site_amp @ U.conj()


# ---------------------------------------------------------------- closed forms


def _rabi_coefficients(N: int, g: float, detuning: float, times: np.ndarray):
    n = np.arange(N + 1)
    gt = g * np.sqrt((n + 1.0) * (N - n))
    Om = np.sqrt(4 * gt**2 + detuning**2)
    t = times[:, None]
    safe = np.where(Om > 0, Om, 1.0)
    s = np.where(Om > 0, np.sin(0.5 * Om * t) / safe, 0.5 * t)
    c = np.cos(0.5 * Om * t)
    a = np.exp(0.5j * detuning * t) * (-1j * detuning * s + c)
    b = -2j * gt * np.exp(-0.5j * detuning * t) * s
    return a, b


def analytic_j0(N: int, z: complex, g: float, h: float, omega: float, times) -> dict:
    """Bloch vector and purity for J = 0, uniform coupling ``g`` (any N)."""
    times = np.asarray(times, dtype=float)
    Cn = coherent_coefficients(N, z).Cn
    a, b = _rabi_coefficients(N, g, h + omega, times)
    w = np.abs(Cn) ** 2
    sz = np.sum(w * (np.abs(a) ** 2 - np.abs(b) ** 2), axis=1)
    Z = np.sum(np.conj(Cn[:-1]) * Cn[1:] * np.conj(b[:, :-1]) * a[:, 1:], axis=1)
    rot = np.exp(-1j * omega * times) * Z
    sx = 2 * rot.real
    sy = -2 * rot.imag
    purity = 0.5 * (1 + sz**2) + 2 * np.abs(Z) ** 2
    return {"t": times, "sx": sx, "sy": sy, "sz": sz, "purity": purity}


def analytic_j0_sz(N: int, z: complex, g: float, detuning: float, times) -> np.ndarray:
    """Polarization in the single-sum form ``1 - 8 sum g_n^2 |C_n|^2 sin^2(...)/(...)``."""
    times = np.asarray(times, dtype=float)
    Cn = coherent_coefficients(N, z).Cn
    n = np.arange(N + 1)
    gt2 = g**2 * (n + 1.0) * (N - n)
    den = 4 * gt2 + detuning**2
    num = gt2 * np.abs(Cn) ** 2 * np.sin(0.5 * times[:, None] * np.sqrt(den)) ** 2
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return 1 - 8 * terms.sum(axis=1)


def analytic_n2(z: complex, g: float, J: float, h: float, omega: float, times) -> np.ndarray:
    """``<sigma_z>`` for a two-site bath with uniform coupling."""
    times = np.asarray(times, dtype=float)
    Cn = coherent_coefficients(2, z).Cn
    out = np.full(times.shape, abs(Cn[2]) ** 2)
    for w, Jx in ((abs(Cn[0]) ** 2, h + omega - J), (abs(Cn[1]) ** 2, h + omega + J)):
        den = 8 * g**2 + Jx**2
        out = out + w * (8 * g**2 * np.cos(times * math.sqrt(den)) + Jx**2) / den
    return out


def _gs_couplings(N: int, gs) -> tuple:
    """Couplings of the ground-state configuration to its m and m+2 neighbours."""
    m = gs.m
    idx = gs.indices
    r = rank_indices(idx, N)
    down = get_f_table(N, m).values[r] if m >= 0 else np.zeros(0)
    up = get_f_table(N, m + 1).values[:, r] if m + 1 < N else np.zeros(0)
    return down, up


def perturbative_alpha(N: int, gs) -> float:
    """Gaussian short-time rate from the uniform (g = 1) f-function.

    Sum of |f|^2 over all m- and (m+2)-configs connected to the filled sea.
    """
    down, up = _gs_couplings(N, gs)
    return float(np.sum(np.abs(down) ** 2) + np.sum(np.abs(up) ** 2))


def collective_alpha(N: int, bath: np.ndarray) -> float:
    """``<S+ S- + S- S+>`` of a bath state; equals the Gaussian rate."""
    dim = 1 << N
    Sp = np.zeros((dim, dim))
    for s in range(dim):
        for j in range(1, N + 1):
            a = _bit(N, j)
            if not s & a:
                Sp[s | a, s] = 1.0
    Sm = Sp.T
    op = Sp @ Sm + Sm @ Sp
    return float(np.real(np.vdot(bath, op @ bath)))


def perturbative_r2(params: ModelParams, gs, times) -> np.ndarray:
    """Second-order |r(t)|^2 including the full cosine sums (uniform coupling)."""
    N, J, h, w = params.N, params.J, params.h, params.omega
    g = params.g[0]
    times = np.asarray(times, dtype=float)
    m = gs.m
    e_k = float(np.sum(dispersion(gs.ks, J, h)))
    down, up = _gs_couplings(N, gs)
    out = np.ones_like(times)

    def add(weights, delta):
        nz = weights != 0
        wts, d = weights[nz], delta[nz]
        t = times[:, None]
        safe = np.where(np.abs(d) > 0, d, 1.0)
        term = np.where(np.abs(d) > 0, (np.cos(d * t) - 1) / safe**2, -0.5 * t**2)
        return 2 * g**2 * (term * wts).sum(axis=1)

    if down.size:
        grid = grid_for_count(N, m)
        cfg = combos(N, m)
        eps = dispersion(grid.ks, J, h)
        e_p = eps[cfg].sum(axis=1) if m else np.zeros(len(cfg))
        out = out + add(np.abs(down) ** 2, w - e_k + e_p)
    if up.size:
        grid = grid_for_count(N, m + 2)
        cfg = combos(N, m + 2)
        eps = dispersion(grid.ks, J, h)
        e_p = eps[cfg].sum(axis=1)
        out = out + add(np.abs(up) ** 2, w + e_k - e_p)
    return out
