"""Model parameters, momentum grids and ground-state structure of the periodic XX bath.

Wavenumbers are kept as integer numerators ``q`` of ``k = q*pi/N`` so grid
membership and momentum sums are exact; floats only appear inside trig calls.

Grids
-----
Even fermion number uses the antiperiodic grid (odd numerators)::

    K+ = {-pi + pi/N, ..., -pi/N, pi/N, ..., pi - pi/N}

odd fermion number uses the periodic grid (even numerators)::

    K- = {-pi, -pi + 2pi/N, ..., 0, ..., pi - 2pi/N}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DegenerateGroundStateError, InvalidParameterError

EVEN = "even"
ODD = "odd"


def _check_size(N) -> int:
    if isinstance(N, bool) or int(N) != N:
        raise InvalidParameterError(f"N must be an integer, got {N!r}")
    N = int(N)
    if N < 2 or N % 2:
        raise InvalidParameterError(f"N must be a positive even integer >= 2, got {N}")
    return N


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the qubit + periodic XX bath Hamiltonian.

    Energies are in units of the qubit-bath coupling scale. ``g`` may be a
    scalar (uniform coupling) or a length-N sequence of per-site couplings.
    """

    N: int
    J: float = 0.0
    h: float = 0.0
    omega: float = 0.0
    g: tuple = field(default=1.0)

    def __post_init__(self):
        N = _check_size(self.N)
        object.__setattr__(self, "N", N)
        g = self.g
        if np.ndim(g) == 0:
            g = (float(g),) * N
        g = tuple(float(x) for x in g)
        if len(g) != N:
            raise InvalidParameterError(f"g must have length N={N}, got {len(g)}")
        object.__setattr__(self, "g", g)
        for name in ("J", "h", "omega"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidParameterError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if not all(math.isfinite(x) for x in g):
            raise InvalidParameterError("couplings g_j must be finite")

    @property
    def detuning(self) -> float:
        return self.h + self.omega

    @property
    def uniform(self) -> bool:
        return all(x == self.g[0] for x in self.g)

    @property
    def g_scale(self) -> float:
        """Largest |g_j|; the unit in which times are usually quoted."""
        return max(abs(x) for x in self.g)

    def replace(self, **kw) -> "ModelParams":
        d = dict(N=self.N, J=self.J, h=self.h, omega=self.omega, g=self.g)
        d.update(kw)
        return ModelParams(**d)


@dataclass(frozen=True)
class MomentumGrid:
    N: int
    parity: str
    numerators: tuple

    @property
    def ks(self) -> np.ndarray:
        return np.pi * np.asarray(self.numerators, dtype=float) / self.N

    def __len__(self):
        return len(self.numerators)

    def index_of(self, numerator: int) -> int:
        try:
            return self.numerators.index(numerator)
        except ValueError:
            raise InvalidParameterError(
                f"k = {numerator}pi/{self.N} is not on the {self.parity} grid"
            ) from None


@lru_cache(maxsize=None)
def momentum_grid(N: int, parity: str) -> MomentumGrid:
    """K+ (``parity='even'``) or K- (``parity='odd'``) for an N-site ring."""
    N = _check_size(N)
    if parity in ("+", EVEN, 0):
        nums = tuple(range(-N + 1, N, 2))
        parity = EVEN
    elif parity in ("-", ODD, 1):
        nums = tuple(range(-N, N - 1, 2))
        parity = ODD
    else:
        raise InvalidParameterError(f"unknown parity {parity!r}")
    return MomentumGrid(N, parity, nums)


def grid_for_count(N: int, n: int) -> MomentumGrid:
    """Grid carrying ``n``-fermion states (even n -> K+, odd n -> K-)."""
    return momentum_grid(N, EVEN if n % 2 == 0 else ODD)


def dispersion(k, J: float, h: float):
    """Single-particle energy ``J cos k - h``."""
    return J * np.cos(k) - h


def critical_fields(N: int) -> list:
    """Level-crossing fields ``(m, h_m)`` of the J=-1 ring, m = N/2 .. N-1.

    ``h_{N-1}`` is returned as exactly 1.
    """
    N = _check_size(N)
    out = []
    denom = math.cos(0.5 * math.pi / N)
    for m in range(N // 2, N):
        if m == N - 1:
            hm = 1.0
        else:
            hm = -math.cos((m + 0.5) * math.pi / N) / denom
        out.append((m, hm))
    return out


@dataclass(frozen=True)
class GroundStateSpec:
    """Filled Fermi sea of the bath: ``m + 1`` fermions on one grid.

    ``branch`` is ``'o'`` (c-fermions, K+) when m is odd and ``'e'``
    (d-fermions, K-) when m is even. ``numerators`` lists the occupied
    wavenumbers as multiples of pi/N. ``energy`` is in the units of the
    J, h that produced it.
    """

    N: int
    m: int
    branch: str
    numerators: tuple
    energy: float

    @property
    def grid(self) -> MomentumGrid:
        return grid_for_count(self.N, self.m + 1)

    @property
    def indices(self) -> tuple:
        g = self.grid
        return tuple(g.index_of(q) for q in self.numerators)

    @property
    def ks(self) -> np.ndarray:
        return np.pi * np.asarray(self.numerators, dtype=float) / self.N


def _central_filling(N: int, m: int) -> tuple:
    return tuple(range(-m, m + 1, 2))


def ground_state(N: int, h: float, tol: float = 1e-12) -> GroundStateSpec:
    """Ground state of the J = -1 ring at field ``h >= 0``.

    Raises
    ------
    DegenerateGroundStateError
        If ``h`` sits within ``tol`` of an interior level crossing.
    """
    N = _check_size(N)
    h = float(h)
    if not (h >= 0.0) or not math.isfinite(h):
        raise InvalidParameterError(f"ground_state needs finite h >= 0, got {h}")
    crit = critical_fields(N)
    for m, hm in crit[:-1]:
        if abs(h - hm) <= tol:
            raise DegenerateGroundStateError(
                f"h = {h} is at the level crossing h_{m} = {hm} for N = {N}"
            )
    if h >= 1.0 - tol:  # h_{N-1} = 1 is folded into the polarized branch
        m = N - 1
    else:
        m = N // 2 - 1
        for mm, hm in crit:
            if h >= hm:
                m = mm
    nums = _central_filling(N, m)
    branch = "o" if m % 2 else "e"
    if m == N - 1:
        energy = -h * N
    elif m % 2 == 0:
        energy = -(h + 1.0) - 2.0 * sum(
            math.cos(2.0 * math.pi * l / N) + h for l in range(1, m // 2 + 1)
        )
    else:
        energy = -2.0 * sum(
            math.cos((2 * l - 1) * math.pi / N) + h for l in range(1, (m + 1) // 2 + 1)
        )
    return GroundStateSpec(N, m, branch, nums, energy)


def bath_ground_state(N: int, J: float, h: float, tol: float = 1e-10) -> GroundStateSpec:
    """Ground state of the bath for arbitrary (J, h) by filling each grid.

    For every fermion number the lowest single-particle levels of the matching
    grid are filled; the best filling overall wins. Ties at the Fermi level or
    between fillings raise :class:`DegenerateGroundStateError`. ``m`` may be -1
    (empty bath).
    """
    N = _check_size(N)
    scale = max(abs(J), abs(h), 1.0)
    best = []
    for n in range(N + 1):
        grid = grid_for_count(N, n)
        eps = dispersion(grid.ks, J, h)
        order = np.argsort(eps, kind="stable")
        sorted_eps = eps[order]
        energy = float(np.sum(sorted_eps[:n]))
        ambiguous = 0 < n < N and sorted_eps[n] - sorted_eps[n - 1] <= tol * scale
        best.append((energy, n, ambiguous, tuple(sorted(order[:n]))))
    best.sort(key=lambda x: x[0])
    energy, n, ambiguous, idx = best[0]
    if best[1][0] - energy <= tol * scale:
        raise DegenerateGroundStateError(
            f"fillings {n} and {best[1][1]} are degenerate at J={J}, h={h}"
        )
    if ambiguous:
        raise DegenerateGroundStateError(
            f"degenerate Fermi level for {n} fermions at J={J}, h={h}"
        )
    grid = grid_for_count(N, n)
    nums = tuple(grid.numerators[i] for i in idx)
    m = n - 1
    return GroundStateSpec(N, m, "o" if m % 2 else "e", nums, energy)


@dataclass(frozen=True)
class CoherentSpec:
    N: int
    z: complex
    Cn: np.ndarray

    @property
    def theta_phi(self) -> tuple:
        r = abs(self.z)
        theta = 2.0 * math.atan2(1.0, r)
        phi = -math.atan2(self.z.imag, self.z.real) if r > 0 else 0.0
        return theta, phi


def z_from_angles(theta: float, phi: float) -> complex:
    """``z = cot(theta/2) exp(-i phi)``."""
    return complex(math.cos(theta / 2) / math.sin(theta / 2) * np.exp(-1j * phi))


def coherent_coefficients(N: int, z: complex | None = None, *, theta=None, phi=0.0) -> CoherentSpec:
    """Dicke-basis amplitudes ``C_n = z^n sqrt(binom(N, n)) / (1+|z|^2)^(N/2)``.

    Either ``z`` or the Bloch angles ``theta`` (and optionally ``phi``) are given.
    Powers are accumulated in log space so large N stays finite.
    """
    N = _check_size(N)
    if z is None:
        if theta is None:
            raise InvalidParameterError("give either z or theta")
        z = z_from_angles(theta, phi)
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidParameterError(f"z must be finite, got {z}")
    n = np.arange(N + 1)
    r = abs(z)
    Cn = np.zeros(N + 1, dtype=complex)
    if r == 0.0:
        Cn[0] = 1.0
    else:
        logbinom = np.array([math.lgamma(N + 1) - math.lgamma(k + 1) - math.lgamma(N - k + 1) for k in n])
        logmod = n * math.log(r) + 0.5 * logbinom - 0.5 * N * math.log1p(r * r)
        Cn = np.exp(logmod) * np.exp(1j * n * np.angle(z))
    return CoherentSpec(N, z, Cn)


def fermi_energies(numerators: Sequence[int], N: int, J: float, h: float) -> float:
    return float(np.sum(dispersion(np.pi * np.asarray(numerators, float) / N, J, h)))
