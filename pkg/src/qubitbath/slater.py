"""Plane-wave Slater determinants, fermion configurations and f-tables.

A configuration of ``n`` fermions on a grid is a strictly increasing tuple of
grid indices; configurations are ordered lexicographically and ranked by the
combinatorial number system.

The f-function couples an (m+1)-fermion configuration ``ks`` on one grid to an
m-fermion configuration ``ps`` on the other::

    f~(ks; ps) = sum_{j_1<..<j_{m+1}} S(ks; j) sum_l g_{j_l} S*(ps; j without j_l)

which is the matrix element ``<ps| sum_j g_j sigma^-_j |ks>`` of the bath
lowering operator between momentum eigenstates. Tables are built from the
compound ("all minors") matrices of the single-particle plane-wave matrix,
computed level by level with a Laplace expansion along the first row, so every
minor of size n is assembled from the memoized minors of size n-1.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError, ResourceError
from .spinbath import MomentumGrid, grid_for_count, momentum_grid

FORMAT_VERSION = 1
ZERO_THRESHOLD = 1e-13
DEFAULT_MEMORY_CAP = 2 * 1024**3
CACHE_ENV = "QUBITBATH_CACHE"


# ---------------------------------------------------------------- configurations


@dataclass(frozen=True)
class FermionConfig:
    grid: MomentumGrid
    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidParameterError(f"config indices must be strictly increasing: {idx}")
        if idx and (idx[0] < 0 or idx[-1] >= len(self.grid)):
            raise InvalidParameterError(f"config indices out of range: {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_numerators(cls, grid: MomentumGrid, numerators: Sequence[int]) -> "FermionConfig":
        return cls(grid, tuple(sorted(grid.index_of(q) for q in numerators)))

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def numerators(self) -> tuple:
        return tuple(self.grid.numerators[i] for i in self.indices)

    @property
    def ks(self) -> np.ndarray:
        return self.grid.ks[list(self.indices)] if self.indices else np.zeros(0)

    @property
    def rank(self) -> int:
        return rank(self)

    @property
    def momentum(self) -> int:
        """Total momentum numerator modulo 2N (units of pi/N)."""
        return sum(self.numerators) % (2 * self.grid.N)


def rank_indices(indices: Sequence[int], N: int) -> int:
    """Lexicographic rank of an increasing index tuple among all C(N, n) tuples."""
    n = len(indices)
    r = 0
    prev = -1
    for i, c in enumerate(indices):
        for v in range(prev + 1, c):
            r += math.comb(N - 1 - v, n - 1 - i)
        prev = c
    return r


def unrank_indices(index: int, N: int, n: int) -> tuple:
    total = math.comb(N, n)
    if not 0 <= index < total:
        raise InvalidParameterError(f"index {index} out of range [0, {total})")
    out = []
    v = 0
    for i in range(n):
        while True:
            block = math.comb(N - 1 - v, n - 1 - i)
            if index < block:
                break
            index -= block
            v += 1
        out.append(v)
        v += 1
    return tuple(out)


def rank(config: FermionConfig) -> int:
    return rank_indices(config.indices, len(config.grid))


def unrank(grid: MomentumGrid, n: int, index: int) -> FermionConfig:
    return FermionConfig(grid, unrank_indices(index, len(grid), n))


def enumerate_configs(grid: MomentumGrid, n: int) -> list:
    N = len(grid)
    if not 0 <= n <= N:
        raise InvalidParameterError(f"n must lie in [0, {N}], got {n}")
    return [FermionConfig(grid, c) for c in itertools.combinations(range(N), n)]


@lru_cache(maxsize=None)
def combos(N: int, n: int) -> np.ndarray:
    """All increasing n-tuples of range(N) in lexicographic order, shape (C(N,n), n)."""
    if n < 0 or n > N:
        return np.zeros((0, max(n, 0)), dtype=np.int64)
    arr = np.array(list(itertools.combinations(range(N), n)), dtype=np.int64)
    return arr.reshape(math.comb(N, n), n)


@lru_cache(maxsize=None)
def _rank_weights(N: int, n: int) -> np.ndarray:
    # weight[i, v] = number of tuples skipped by choosing value > v at slot i
    w = np.zeros((n, N + 1), dtype=np.int64)
    for i in range(n):
        acc = 0
        for v in range(N + 1):
            w[i, v] = acc
            if v < N:
                acc += math.comb(N - 1 - v, n - 1 - i) if N - 1 - v >= n - 1 - i else 0
    return w


def rank_array(tuples: np.ndarray, N: int) -> np.ndarray:
    """Vectorized :func:`rank_indices` over rows of ``tuples``."""
    tuples = np.asarray(tuples, dtype=np.int64)
    count, n = tuples.shape
    if n == 0:
        return np.zeros(count, dtype=np.int64)
    w = _rank_weights(N, n)
    r = np.zeros(count, dtype=np.int64)
    prev = np.full(count, -1, dtype=np.int64)
    for i in range(n):
        c = tuples[:, i]
        r += w[i, c] - w[i, prev + 1]
        prev = c
    return r


@lru_cache(maxsize=None)
def deletion_ranks(N: int, n: int) -> np.ndarray:
    """``out[r, b]`` = rank of config r (size n) with its b-th entry removed."""
    c = combos(N, n)
    out = np.empty((len(c), n), dtype=np.int64)
    for b in range(n):
        out[:, b] = rank_array(np.delete(c, b, axis=1), N)
    return out


# ---------------------------------------------------------------- Slater determinants


def slater(ks: Sequence[float], js: Sequence[int], N: int) -> complex:
    """``N^{-m/2} det[exp(i k_a j_b)]`` for wavenumbers ``ks`` and sites ``js`` (1-based)."""
    ks = np.asarray(ks, dtype=float)
    js = np.asarray(js, dtype=float)
    if ks.shape != js.shape or ks.ndim != 1:
        raise InvalidParameterError("ks and js must be 1-d tuples of equal length")
    m = len(ks)
    if m == 0:
        return 1.0 + 0j
    mat = np.exp(1j * np.outer(ks, js))
    return complex(np.linalg.det(mat) / N ** (m / 2))


def cofactor_det(mat: np.ndarray) -> complex:
    """Determinant by cofactor expansion along the first row (reference only)."""
    n = mat.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n == 1:
        return complex(mat[0, 0])
    total = 0j
    for b in range(n):
        minor = np.delete(mat[1:], b, axis=1)
        total += (-1) ** b * mat[0, b] * cofactor_det(minor)
    return total


def plane_waves(grid: MomentumGrid) -> np.ndarray:
    """``u[j, k] = exp(i k (j+1)) / sqrt(N)`` for sites j = 0..N-1."""
    N = grid.N
    sites = np.arange(1, N + 1, dtype=float)
    return np.exp(1j * np.outer(sites, grid.ks)) / math.sqrt(N)


class CompoundTables:
    """Memoized Slater minors ``S(ks; js)`` for all configurations on one grid.

    ``level(n)[J, K]`` is the Slater determinant of momentum configuration K
    (rank on the grid) evaluated at site subset J (rank among C(N, n)); it is
    the n-th compound matrix of :func:`plane_waves`. Level n is obtained from
    level n-1 by Laplace expansion along the smallest wavenumber.
    """

    def __init__(self, grid: MomentumGrid):
        self.grid = grid
        self.N = grid.N
        self._u = plane_waves(grid)
        self._levels = {0: np.ones((1, 1), dtype=complex)}

    def level(self, n: int) -> np.ndarray:
        if n < 0 or n > self.N:
            raise InvalidParameterError(f"level {n} outside [0, {self.N}]")
        if n not in self._levels:
            prev = self.level(n - 1)
            N = self.N
            sites = combos(N, n)
            modes = combos(N, n)
            head = modes[:, 0]
            tail = rank_array(modes[:, 1:], N)
            dels = deletion_ranks(N, n)
            out = np.zeros((len(sites), len(modes)), dtype=complex)
            for b in range(n):
                sign = -1.0 if b % 2 else 1.0
                phase = self._u[np.ix_(sites[:, b], head)]
                out += sign * phase * prev[np.ix_(dels[:, b], tail)]
            self._levels[n] = out
        return self._levels[n]


@lru_cache(maxsize=8)
def compound_tables(N: int, parity: str) -> CompoundTables:
    return CompoundTables(momentum_grid(N, parity))


def tables_for_count(N: int, n: int) -> CompoundTables:
    return compound_tables(N, grid_for_count(N, n).parity)


# ---------------------------------------------------------------- f-functions


def _as_couplings(gs, N: int) -> np.ndarray:
    if gs is None or isinstance(gs, str):
        return np.ones(N)
    gs = np.asarray(gs, dtype=float)
    if gs.ndim == 0:
        return np.full(N, float(gs))
    if gs.shape != (N,):
        raise InvalidParameterError(f"coupling profile must have length {N}")
    return gs


def f_function(ks: FermionConfig | Sequence[float], ps: FermionConfig | Sequence[float], gs=None, *, N: int | None = None) -> complex:
    """Direct-sum f~ over all site subsets (slow reference path).

    ``ks`` has m+1 entries and ``ps`` m entries; both may be given as
    :class:`FermionConfig` (grid checked) or as raw wavenumber sequences
    together with ``N``. Unordered raw inputs are allowed: the value inherits
    the antisymmetry of the determinants.
    """
    if isinstance(ks, FermionConfig) and isinstance(ps, FermionConfig):
        if ks.grid.parity == ps.grid.parity:
            raise InvalidParameterError("ks and ps must live on different parity grids")
    for c in (ks, ps):
        if isinstance(c, FermionConfig):
            if N is not None and N != c.grid.N:
                raise InvalidParameterError("configuration built for a different N")
            N = c.grid.N
    if N is None:
        raise InvalidParameterError("N is required for raw wavenumber input")
    kv = ks.ks if isinstance(ks, FermionConfig) else np.asarray(ks, dtype=float)
    pv = ps.ks if isinstance(ps, FermionConfig) else np.asarray(ps, dtype=float)
    m = len(pv)
    if len(kv) != m + 1:
        raise InvalidParameterError("ks must have exactly one more entry than ps")
    g = _as_couplings(gs, N)
    total = 0j
    for js in itertools.combinations(range(1, N + 1), m + 1):
        sk = slater(kv, js, N)
        inner = 0j
        for l in range(m + 1):
            rest = js[:l] + js[l + 1:]
            inner += g[js[l] - 1] * np.conj(slater(pv, rest, N))
        total += sk * inner
    return complex(total)


def coupling_hash(gs, N: int) -> str:
    g = _as_couplings(gs, N)
    if np.all(g == g[0]):
        return "uniform"
    return hashlib.sha256(np.ascontiguousarray(g, dtype=np.float64).tobytes()).hexdigest()[:16]


@dataclass
class FTable:
    """All f~ values between (m+1)-configs (rows) and m-configs (columns).

    ``values[r, c]`` = f~(unrank(upper grid, m+1, r); unrank(lower grid, m, c)).
    Entries below ``ZERO_THRESHOLD * max|values|`` are stored as exact zeros.
    """

    N: int
    m: int
    values: np.ndarray
    built_for: str
    couplings: np.ndarray = field(repr=False)

    @property
    def row_grid(self) -> MomentumGrid:
        return grid_for_count(self.N, self.m + 1)

    @property
    def col_grid(self) -> MomentumGrid:
        return grid_for_count(self.N, self.m)

    @property
    def zero_fraction(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.mean(self.values == 0))

    def lookup(self, ks: Sequence[int], ps: Sequence[int]) -> complex:
        """Value at grid-index tuples in any order; permutations flip the sign."""
        sk, ks_sorted = _sort_with_sign(ks)
        sp, ps_sorted = _sort_with_sign(ps)
        if sk == 0 or sp == 0:
            return 0j
        r = rank_indices(ks_sorted, self.N)
        c = rank_indices(ps_sorted, self.N)
        return sk * sp * complex(self.values[r, c])

    def selection_rule(self) -> dict:
        """Measure how well total momentum predicts the zero pattern.

        Returns counts of nonzero entries whose momenta agree modulo 2 pi
        (``conserving``) or not (``violating``), and of zero entries on
        momentum-conserving pairs (``zero_conserving``).
        """
        N = self.N
        rows = combos(N, self.m + 1)
        cols = combos(N, self.m)
        rq = np.asarray(self.row_grid.numerators)[rows].sum(axis=1) if self.m + 1 else np.zeros(len(rows), int)
        cq = np.asarray(self.col_grid.numerators)[cols].sum(axis=1) if self.m else np.zeros(len(cols), int)
        same = ((rq[:, None] - cq[None, :]) % (2 * N)) == 0
        nz = self.values != 0
        return {
            "conserving": int(np.sum(nz & same)),
            "violating": int(np.sum(nz & ~same)),
            "zero_conserving": int(np.sum(~nz & same)),
            "zero_fraction": self.zero_fraction,
        }

    def content_hash(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()


def _sort_with_sign(seq: Sequence[int]) -> tuple:
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0, tuple(sorted(seq))
    sign = 1
    arr = seq[:]
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sign = -sign
    return sign, tuple(arr)


def f_table_bytes(N: int, m: int) -> int:
    """Rough peak memory of a table build: two compound levels and the result."""
    a = math.comb(N, m + 1)
    b = math.comb(N, m)
    return 16 * (a * a + b * b + 2 * a * b)


def _cache_path(N: int, m: int, key: str) -> Path | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    return Path(root) / f"ftable_v{FORMAT_VERSION}_N{N}_m{m}_{key}.npz"


def build_f_table(N: int, m: int, gs=None, *, memory_cap: int = DEFAULT_MEMORY_CAP, use_cache: bool = True) -> FTable:
    """Complete f~ table between (m+1)- and m-fermion configurations.

    With the ``QUBITBATH_CACHE`` environment variable set, tables are read from
    and written to ``.npz`` files in that directory.
    """
    if not 0 <= m < N:
        raise InvalidParameterError(f"need 0 <= m < N, got m={m}, N={N}")
    est = f_table_bytes(N, m)
    if est > memory_cap:
        raise ResourceError(
            f"f-table N={N}, m={m} needs about {est / 2**20:.0f} MiB (cap {memory_cap / 2**20:.0f} MiB)",
            estimate_bytes=est,
        )
    g = _as_couplings(gs, N)
    key = coupling_hash(g, N)
    if key == "uniform" and g[0] != 1.0:
        key = f"uniform{g[0]!r}"
    path = _cache_path(N, m, key) if use_cache else None
    if path is not None and path.exists():
        with np.load(path) as data:
            return FTable(N, m, data["values"], key, g)

    upper = tables_for_count(N, m + 1).level(m + 1)  # [J', K]
    lower = tables_for_count(N, m).level(m)  # [J, P]
    dels = deletion_ranks(N, m + 1)
    sites = combos(N, m + 1)
    # inner[J', P] = sum_l g_{j_l} S*(P; J' without j_l), fixed summation order in l
    inner = np.zeros((upper.shape[0], lower.shape[1]), dtype=complex)
    lower_c = lower.conj()
    for l in range(m + 1):
        inner += g[sites[:, l]][:, None] * lower_c[dels[:, l]]
    values = upper.T @ inner
    scale = np.max(np.abs(values)) if values.size else 0.0
    if scale > 0:
        values[np.abs(values) < ZERO_THRESHOLD * scale] = 0.0
    table = FTable(N, m, values, key, g)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, values=values)
        os.replace(tmp, path)
    return table


@lru_cache(maxsize=64)
def _cached_table(N: int, m: int, gkey: tuple) -> FTable:
    return build_f_table(N, m, np.asarray(gkey))


def get_f_table(N: int, m: int, gs=None) -> FTable:
    """Memoized :func:`build_f_table` (tables are shared read-only)."""
    g = tuple(float(x) for x in _as_couplings(gs, N))
    return _cached_table(N, m, g)


def dicke_initial_amplitudes(N: int, n: int) -> np.ndarray:
    """Momentum amplitudes of the Dicke state with n up spins.

    Configurations live on the grid selected by the parity of n and are
    indexed by rank.
    """
    if not 0 <= n <= N:
        raise InvalidParameterError(f"n must lie in [0, {N}]")
    lvl = tables_for_count(N, n).level(n)
    amp = lvl.conj().sum(axis=0) / math.sqrt(math.comb(N, n))
    scale = np.max(np.abs(amp))
    amp[np.abs(amp) < ZERO_THRESHOLD * scale] = 0.0
    return amp
