"""Interaction-picture equations of motion per conserved-magnetization sector.

Sector ``n`` pairs the qubit-up states with n bath fermions (the *upper* block,
grid of parity n) and the qubit-down states with n+1 bath fermions (the
*lower* block, grid of parity n+1)::

    i dU[p]/dt =  sum_K  f~(K; p)   exp(+i (e_up[p] - e_dn[K]) t) L[K]
    i dL[K]/dt =  sum_p  f~*(K; p)  exp(-i (e_up[p] - e_dn[K]) t) U[p]

with ``e_up[p] = (h + omega) + J sum cos p`` and ``e_dn[K] = J sum cos K``.
Shifting both by the same constant leaves the system unchanged, so h and
omega only appear through the detuning h + omega.

The spin-coherent run uses sectors 0..N with Dicke initial conditions. The
ground-state run uses sector m (A in the lower block, C in the upper block)
and sector m + 1 (B upper, D lower) for a bath filled with m + 1 fermions.

Only the part of a sector connected to the initial support through nonzero
f-table entries is integrated; the rest of the amplitudes stay exactly zero.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import IntegrationError, InvalidParameterError, PreconditionError, SizeError
from .slater import FTable, combos, dicke_initial_amplitudes, get_f_table, rank_indices
from .spinbath import CoherentSpec, GroundStateSpec, ModelParams, grid_for_count

MAX_COHERENT_N = 12


@dataclass
class EvolutionPlan:
    """Time grid in units of 1/g (g = largest |g_j|).

    ``dt=None`` picks ``min(1e-3, 0.05 g / max(|h+omega|, |J| N, g sqrt(N)))``.
    If ``output_dt`` is given the step is shrunk so that an integer number of
    steps spans each output interval; otherwise every ``stride``-th step is kept.
    """

    gt_max: float
    dt: float | None = None
    stride: int | None = None
    output_dt: float | None = None
    norm_tol: float = 1e-8

    def __post_init__(self):
        if not self.gt_max >= 0:
            raise InvalidParameterError("gt_max must be >= 0")
        if self.dt is not None and not self.dt > 0:
            raise InvalidParameterError("dt must be > 0")
        if self.stride is not None and self.stride < 1:
            raise InvalidParameterError("stride must be >= 1")
        if self.output_dt is not None and not self.output_dt > 0:
            raise InvalidParameterError("output_dt must be > 0")

    def resolve(self, params: ModelParams) -> tuple:
        """Return ``(dt, stride, n_out)`` in units of 1/g."""
        dt = self.dt if self.dt is not None else default_dt(params)
        if self.output_dt is not None:
            stride = max(1, math.ceil(self.output_dt / dt - 1e-9))
            dt = self.output_dt / stride
            n_out = int(round(self.gt_max / self.output_dt))
        else:
            stride = self.stride or 1
            n_out = int(round(self.gt_max / (dt * stride)))
        return dt, stride, n_out


def default_dt(params: ModelParams) -> float:
    g = params.g_scale
    if g == 0:
        return 1e-3
    rate = max(abs(params.detuning), abs(params.J) * params.N, g * math.sqrt(params.N)) / g
    return min(1e-3, 0.05 / rate)


@dataclass
class SectorState:
    """Amplitudes of one sector: ``upper`` over n-configs, ``lower`` over (n+1)-configs."""

    n: int
    upper: np.ndarray
    lower: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.upper) ** 2) + np.sum(np.abs(self.lower) ** 2)))


@dataclass
class SectorTrajectory:
    """Sector amplitudes at the output times, restricted to the active block.

    ``upper[:, i]`` belongs to configuration rank ``upper_idx[i]``; amplitudes
    of configurations outside the block are identically zero.
    """

    n: int
    gt: np.ndarray
    upper_idx: np.ndarray
    lower_idx: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    upper_dim: int
    lower_dim: int
    drift: float = 0.0

    def full_upper(self) -> np.ndarray:
        out = np.zeros((len(self.gt), self.upper_dim), dtype=complex)
        out[:, self.upper_idx] = self.upper
        return out

    def full_lower(self) -> np.ndarray:
        out = np.zeros((len(self.gt), self.lower_dim), dtype=complex)
        out[:, self.lower_idx] = self.lower
        return out

    def state(self, i: int) -> SectorState:
        return SectorState(self.n, self.full_upper()[i], self.full_lower()[i])

    def upper_weight(self) -> np.ndarray:
        return np.sum(np.abs(self.upper) ** 2, axis=1)

    def lower_weight(self) -> np.ndarray:
        return np.sum(np.abs(self.lower) ** 2, axis=1)


def sector_dims(N: int, n: int) -> tuple:
    up = math.comb(N, n) if 0 <= n <= N else 0
    dn = math.comb(N, n + 1) if 0 <= n + 1 <= N else 0
    return up, dn


def config_energies(N: int, n: int, J: float) -> np.ndarray:
    """``J * sum(cos k)`` for every n-fermion configuration on the grid of parity n."""
    if n < 0 or n > N:
        return np.zeros(0)
    if n == 0:
        return np.zeros(1)
    cosk = np.cos(grid_for_count(N, n).ks)
    return J * cosk[combos(N, n)].sum(axis=1)


def sector_energies(N: int, n: int, J: float, detuning: float) -> tuple:
    return detuning + config_energies(N, n, J), config_energies(N, n + 1, J)


@njit(cache=True, nogil=True)
def _rhs(t, rows, cols, vals, e_up, e_dn, y_up, y_dn, d_up, d_dn):
    pu = np.exp(1j * e_up * t)
    pd = np.exp(1j * e_dn * t)
    d_up[:] = 0
    d_dn[:] = 0
    for e in range(vals.size):
        r = rows[e]
        c = cols[e]
        v = vals[e]
        d_up[c] += v * np.conj(pd[r]) * y_dn[r]
        d_dn[r] += np.conj(v) * np.conj(pu[c]) * y_up[c]
    for c in range(d_up.size):
        d_up[c] *= -1j * pu[c]
    for r in range(d_dn.size):
        d_dn[r] *= -1j * pd[r]


@njit(cache=True, nogil=True)
def _rk4_kernel(rows, cols, vals, e_up, e_dn, up0, dn0, dt, stride, n_out):
    nu = up0.size
    nd = dn0.size
    out_up = np.empty((n_out + 1, nu), dtype=np.complex128)
    out_dn = np.empty((n_out + 1, nd), dtype=np.complex128)
    yu = up0.copy()
    yd = dn0.copy()
    out_up[0] = yu
    out_dn[0] = yd
    k1u = np.empty(nu, dtype=np.complex128)
    k2u = np.empty(nu, dtype=np.complex128)
    k3u = np.empty(nu, dtype=np.complex128)
    k4u = np.empty(nu, dtype=np.complex128)
    k1d = np.empty(nd, dtype=np.complex128)
    k2d = np.empty(nd, dtype=np.complex128)
    k3d = np.empty(nd, dtype=np.complex128)
    k4d = np.empty(nd, dtype=np.complex128)
    half = 0.5 * dt
    for o in range(n_out):
        for s in range(stride):
            t = (o * stride + s) * dt
            _rhs(t, rows, cols, vals, e_up, e_dn, yu, yd, k1u, k1d)
            _rhs(t + half, rows, cols, vals, e_up, e_dn, yu + half * k1u, yd + half * k1d, k2u, k2d)
            _rhs(t + half, rows, cols, vals, e_up, e_dn, yu + half * k2u, yd + half * k2d, k3u, k3d)
            _rhs(t + dt, rows, cols, vals, e_up, e_dn, yu + dt * k3u, yd + dt * k3d, k4u, k4d)
            yu = yu + (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            yd = yd + (dt / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        out_up[o + 1] = yu
        out_dn[o + 1] = yd
    return out_up, out_dn


def _active_block(table: FTable, up0: np.ndarray, dn0: np.ndarray) -> tuple:
    """Indices of upper/lower configurations reachable from the initial support."""
    vals = table.values  # [lower, upper]
    nd, nu = vals.shape
    r, c = np.nonzero(vals)
    adj = coo_matrix((np.ones(len(r)), (c, nu + r)), shape=(nu + nd, nu + nd))
    _, labels = connected_components(adj, directed=False)
    seeds = np.concatenate([np.nonzero(up0)[0], nu + np.nonzero(dn0)[0]])
    keep = np.isin(labels, np.unique(labels[seeds]))
    return np.nonzero(keep[:nu])[0], np.nonzero(keep[nu:])[0]


def evolve_sector(n: int, params: ModelParams, initial: SectorState, plan: EvolutionPlan, table: FTable | None = None) -> SectorTrajectory:
    """Integrate one sector with fixed-step RK4.

    Raises
    ------
    IntegrationError
        If the norm drifts by more than ``plan.norm_tol``.
    PreconditionError
        If the supplied f-table does not belong to this sector.
    """
    N = params.N
    nu, nd = sector_dims(N, n)
    up0 = np.asarray(initial.upper, dtype=complex).reshape(nu)
    dn0 = np.asarray(initial.lower, dtype=complex).reshape(nd)
    norm0 = math.sqrt(float(np.sum(np.abs(up0) ** 2) + np.sum(np.abs(dn0) ** 2)))
    if abs(norm0 - 1.0) > 1e-10:
        raise InvalidParameterError(f"initial sector state not normalized (norm {norm0})")
    dt, stride, n_out = plan.resolve(params)
    g = params.g_scale or 1.0
    gt = np.arange(n_out + 1) * (dt * stride)

    coupled = nu > 0 and nd > 0
    if coupled:
        if table is None:
            table = get_f_table(N, n, params.g)
        if table.N != N or table.m != n:
            raise PreconditionError(f"f-table (N={table.N}, m={table.m}) does not match sector {n}")
        up_idx, dn_idx = _active_block(table, up0, dn0)
        coupled = len(up_idx) > 0 and len(dn_idx) > 0
    if not coupled:
        up_idx = np.nonzero(up0)[0]
        dn_idx = np.nonzero(dn0)[0]
        U = np.repeat(up0[up_idx][None, :], n_out + 1, axis=0)
        D = np.repeat(dn0[dn_idx][None, :], n_out + 1, axis=0)
        return SectorTrajectory(n, gt, up_idx, dn_idx, U, D, nu, nd)

    sub = table.values[np.ix_(dn_idx, up_idx)]
    rows, cols = np.nonzero(sub)
    vals = np.ascontiguousarray(sub[rows, cols])
    e_up, e_dn = sector_energies(N, n, params.J, params.detuning)
    U, D = _rk4_kernel(
        rows.astype(np.int64), cols.astype(np.int64), vals,
        np.ascontiguousarray(e_up[up_idx]), np.ascontiguousarray(e_dn[dn_idx]),
        np.ascontiguousarray(up0[up_idx]), np.ascontiguousarray(dn0[dn_idx]),
        dt / g, stride, n_out,
    )
    norms = np.sqrt(np.sum(np.abs(U) ** 2, axis=1) + np.sum(np.abs(D) ** 2, axis=1))
    drift = float(np.max(np.abs(norms - norm0)))
    if not drift <= plan.norm_tol:
        raise IntegrationError(f"sector {n}: norm drift {drift:.3e} exceeds {plan.norm_tol:.1e}", drift=drift)
    return SectorTrajectory(n, gt, up_idx, dn_idx, U, D, nu, nd, drift)


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


@dataclass
class CoherentRun:
    params: ModelParams
    coherent: CoherentSpec
    sectors: list
    gt: np.ndarray

    @property
    def max_drift(self) -> float:
        return max(s.drift for s in self.sectors)


def evolve_coherent(params: ModelParams, coherent: CoherentSpec, plan: EvolutionPlan, threads: int = 1, order=None) -> CoherentRun:
    """Evolve every Dicke sector n = 0..N of a spin-coherent bath, qubit up.

    ``order`` permutes the sector evaluation order (results do not depend on it).
    """
    N = params.N
    if N > MAX_COHERENT_N:
        raise SizeError(f"finite-J coherent runs need N <= {MAX_COHERENT_N}; use the J = 0 closed form")
    if coherent.N != N:
        raise InvalidParameterError("coherent state built for a different N")
    if abs(np.sum(np.abs(coherent.Cn) ** 2) - 1) > 1e-12:
        raise InvalidParameterError("coherent coefficients not normalized")

    def run(n):
        nu, nd = sector_dims(N, n)
        init = SectorState(n, dicke_initial_amplitudes(N, n), np.zeros(nd, dtype=complex))
        return evolve_sector(n, params, init, plan)

    ns = list(range(N + 1)) if order is None else list(order)
    if sorted(ns) != list(range(N + 1)):
        raise InvalidParameterError("order must be a permutation of 0..N")
    results = dict(zip(ns, _map(run, ns, threads)))
    sectors = [results[n] for n in range(N + 1)]
    return CoherentRun(params, coherent, sectors, sectors[0].gt)


@dataclass
class GroundRun:
    """Both channels of a qubit prepared on top of the filled Fermi sea.

    ``down_channel`` is sector m: lower block A (qubit down, m+1 fermions),
    upper block C (qubit up, m fermions). ``up_channel`` is sector m+1:
    upper block B (qubit up, m+1 fermions), lower block D (qubit down, m+2).
    """

    params: ModelParams
    ground: GroundStateSpec
    a_up: complex
    a_down: complex
    down_channel: SectorTrajectory
    up_channel: SectorTrajectory
    gt: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.gt is None:
            self.gt = self.up_channel.gt

    @property
    def max_drift(self) -> float:
        return max(self.down_channel.drift, self.up_channel.drift)


def evolve_ground(params: ModelParams, ground: GroundStateSpec, a_up: complex = 1 / math.sqrt(2), a_down: complex = 1 / math.sqrt(2), plan: EvolutionPlan | None = None, threads: int = 1) -> GroundRun:
    """Evolve ``(a_down |down> + a_up |up>) (x) |ground>``.

    Both channels are always integrated: the W-factors, and hence r(t), need
    the A and B amplitudes even when one of the qubit amplitudes vanishes.
    """
    if plan is None:
        raise InvalidParameterError("an EvolutionPlan is required")
    if abs(abs(a_up) ** 2 + abs(a_down) ** 2 - 1) > 1e-12:
        raise InvalidParameterError("qubit amplitudes must satisfy |a_up|^2 + |a_down|^2 = 1")
    N = params.N
    if ground.N != N:
        raise InvalidParameterError("ground state built for a different N")
    m = ground.m
    r = rank_indices(ground.indices, N)

    def run(which):
        if which == "down":
            nu, nd = sector_dims(N, m)
            lower = np.zeros(nd, dtype=complex)
            lower[r] = 1.0
            return evolve_sector(m, params, SectorState(m, np.zeros(nu, dtype=complex), lower), plan)
        nu, nd = sector_dims(N, m + 1)
        upper = np.zeros(nu, dtype=complex)
        upper[r] = 1.0
        return evolve_sector(m + 1, params, SectorState(m + 1, upper, np.zeros(nd, dtype=complex)), plan)

    down, up = _map(run, ["down", "up"], threads)
    return GroundRun(params, ground, complex(a_up), complex(a_down), down, up)
