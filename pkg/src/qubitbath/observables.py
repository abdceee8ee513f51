"""Reduced qubit quantities, two-qubit states, concurrence and scalar metrics.

W-factor naming uses ``1`` for the qubit up state and ``0`` for down, so
``w1100`` is the weight transferred from rho_{down,down}(0) to
rho_{up,up}(t) and ``w1010`` is the decoherence factor r(t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import CoherentRun, GroundRun
from .errors import InvalidParameterError, PreconditionError

BASIS = ("11", "10", "01", "00")  # |11>, |1 0bar>, |0bar 1>, |0bar 0bar>


@dataclass
class Trajectory:
    gt: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    purity: np.ndarray

    def columns(self) -> dict:
        return {"gt": self.gt, "sx": self.sx, "sy": self.sy, "sz": self.sz, "purity": self.purity}


def _overlap(lower, upper) -> np.ndarray:
    """``sum_k conj(lower_k) upper_k`` over the shared configurations."""
    common, il, iu = np.intersect1d(lower.lower_idx, upper.upper_idx, return_indices=True)
    if len(common) == 0:
        return np.zeros(len(upper.gt), dtype=complex)
    return np.sum(np.conj(lower.lower[:, il]) * upper.upper[:, iu], axis=1)


def bloch_and_purity(run: CoherentRun, omega: float | None = None) -> Trajectory:
    """Bloch vector and purity of the qubit for a spin-coherent bath."""
    params = run.params
    N = params.N
    if len(run.sectors) != N + 1 or [s.n for s in run.sectors] != list(range(N + 1)):
        raise PreconditionError("bloch_and_purity needs every sector n = 0..N")
    omega = params.omega if omega is None else omega
    Cn = run.coherent.Cn
    w = np.abs(Cn) ** 2
    sz = np.zeros(len(run.gt))
    for n, s in enumerate(run.sectors):
        sz += w[n] * (s.upper_weight() - s.lower_weight())
    Z = np.zeros(len(run.gt), dtype=complex)
    for n in range(1, N + 1):
        Z += np.conj(Cn[n - 1]) * Cn[n] * _overlap(run.sectors[n - 1], run.sectors[n])
    t = run.gt / (params.g_scale or 1.0)
    rot = np.exp(-1j * omega * t) * Z
    sx = 2 * rot.real
    sy = -2 * rot.imag
    purity = 0.5 * (1 + sx**2 + sy**2 + sz**2)
    return Trajectory(run.gt, sx, sy, sz, purity)


@dataclass
class WFactors:
    gt: np.ndarray
    w1111: np.ndarray
    w0000: np.ndarray
    w1100: np.ndarray
    w0011: np.ndarray
    w1010: np.ndarray

    @property
    def w0101(self) -> np.ndarray:
        return np.conj(self.w1010)

    @property
    def r(self) -> np.ndarray:
        return self.w1010

    def tensor(self) -> np.ndarray:
        """``W[t, a, b, c, d]`` with index 0 = up, 1 = down."""
        T = len(self.gt)
        W = np.zeros((T, 2, 2, 2, 2), dtype=complex)
        W[:, 0, 0, 0, 0] = self.w1111
        W[:, 0, 0, 1, 1] = self.w1100
        W[:, 1, 1, 0, 0] = self.w0011
        W[:, 1, 1, 1, 1] = self.w0000
        W[:, 0, 1, 0, 1] = self.w1010
        W[:, 1, 0, 1, 0] = self.w0101
        return W


def w_factors(run: GroundRun) -> WFactors:
    dn, up = run.down_channel, run.up_channel
    A_B = _overlap(dn, up)  # sum conj(A) B
    t = run.gt / (run.params.g_scale or 1.0)
    return WFactors(
        gt=run.gt,
        w1111=up.upper_weight(),
        w0000=dn.lower_weight(),
        w1100=dn.upper_weight(),
        w0011=up.lower_weight(),
        w1010=np.exp(-1j * run.params.omega * t) * A_B,
    )


def decoherence_factor(W: WFactors) -> np.ndarray:
    return W.w1010


def qubit_rho(W: WFactors, a_up: complex, a_down: complex) -> np.ndarray:
    """Single-qubit density matrices (up, down basis) for a pure initial qubit."""
    rho0 = np.array([[abs(a_up) ** 2, a_up * np.conj(a_down)], [a_down * np.conj(a_up), abs(a_down) ** 2]])
    return np.einsum("tabcd,cd->tab", W.tensor(), rho0)


def _check_bell(alpha, beta):
    if abs(np.imag(alpha)) > 1e-15:
        raise InvalidParameterError("alpha must be real")
    alpha = float(np.real(alpha))
    if abs(alpha**2 + abs(beta) ** 2 - 1) > 1e-12:
        raise InvalidParameterError("alpha^2 + |beta|^2 must equal 1")
    return alpha, complex(beta)


def two_qubit_rho(W: WFactors, alpha: float, beta: complex) -> np.ndarray:
    """X-shaped two-qubit state from ``alpha|0bar 1> + beta|1 0bar>`` and identical baths.

    Basis order is ``|11>, |1 0bar>, |0bar 1>, |0bar 0bar>``.
    """
    alpha, beta = _check_bell(alpha, beta)
    b2 = abs(beta) ** 2
    T = len(W.gt)
    rho = np.zeros((T, 4, 4), dtype=complex)
    rho[:, 0, 0] = W.w1100 * W.w1111
    rho[:, 1, 1] = alpha**2 * W.w1100 * W.w0011 + b2 * W.w1111 * W.w0000
    rho[:, 2, 2] = alpha**2 * W.w0000 * W.w1111 + b2 * W.w0011 * W.w1100
    rho[:, 3, 3] = W.w0000 * W.w0011
    rho[:, 1, 2] = alpha * beta * W.w1010 * W.w0101
    rho[:, 2, 1] = np.conj(rho[:, 1, 2])
    return rho


def two_qubit_rho_contracted(W1: WFactors, W2: WFactors, rho0: np.ndarray) -> np.ndarray:
    """General two-copy map ``rho_{aa',bb'} = sum W1_{abcd} W2_{a'b'c'd'} rho_{cc',dd'}``."""
    r0 = np.asarray(rho0).reshape(2, 2, 2, 2)  # [c, c', d, d']
    out = np.einsum("tabcd,tefgh,cgdh->taebf", W1.tensor(), W2.tensor(), r0)
    return out.reshape(len(W1.gt), 4, 4)


def bell_state(alpha: float, beta: complex) -> np.ndarray:
    alpha, beta = _check_bell(alpha, beta)
    psi = np.zeros(4, dtype=complex)
    psi[2] = alpha  # |0bar 1>
    psi[1] = beta  # |1 0bar>
    return np.outer(psi, psi.conj())


def concurrence(W: WFactors, alpha: float, beta: complex, clamp: bool = True) -> np.ndarray:
    """Closed-form concurrence of the X state; ``clamp=False`` returns the raw expression."""
    alpha, beta = _check_bell(alpha, beta)
    rho = two_qubit_rho(W, alpha, beta)
    r2 = np.abs(W.w1010) ** 2
    raw = 2 * abs(alpha * beta) * r2 - 2 * np.sqrt(np.clip((rho[:, 0, 0] * rho[:, 3, 3]).real, 0, None))
    return np.maximum(raw, 0.0) if clamp else raw


_SYSY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def wootters_concurrence(rho: np.ndarray) -> np.ndarray:
    """General concurrence from the eigenvalues of ``rho (sy sy) rho* (sy sy)``."""
    rho = np.asarray(rho)
    single = rho.ndim == 2
    if single:
        rho = rho[None]
    out = np.empty(len(rho))
    for i, r in enumerate(rho):
        tilde = _SYSY @ r.conj() @ _SYSY
        ev = np.linalg.eigvals(r @ tilde)
        lam = np.sort(np.sqrt(np.clip(ev.real, 0, None)))[::-1]
        out[i] = max(0.0, lam[0] - lam[1] - lam[2] - lam[3])
    return out[0] if single else out


# ---------------------------------------------------------------- metrics


@dataclass
class MetricReport:
    alpha: float | None = None
    r2_max: float | None = None
    t_r2_max: float | None = None
    t_first_min: float | None = None
    r2_first_min: float | None = None
    t_esd: float | None = None


def fit_gaussian_rate(gt: np.ndarray, r2: np.ndarray, window: float = 0.02) -> float:
    """Least-squares slope of ``-ln|r|^2`` against ``(gt)^2`` through the origin."""
    sel = (gt >= 0) & (gt <= window * (1 + 1e-12))
    if np.count_nonzero(sel) < 20:
        raise InvalidParameterError(f"need >= 20 samples in the fit window, got {np.count_nonzero(sel)}")
    x = gt[sel] ** 2
    y = -np.log(r2[sel])
    return float(np.dot(x, y) / np.dot(x, x))


def _refine(gt, y, i) -> tuple:
    """Vertex of the parabola through samples i-1, i, i+1."""
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = y0 - 2 * y1 + y2
    h = gt[i + 1] - gt[i]
    if den == 0:
        return gt[i], y1
    off = 0.5 * (y0 - y2) / den
    off = min(max(off, -1.0), 1.0)
    return gt[i] + off * h, y1 - 0.25 * (y0 - y2) * off


def _first_extremum(gt, y, kind: str):
    z = np.asarray(y) if kind == "max" else -np.asarray(y)
    # collapse runs of equal samples; a plateau counts at its first sample
    starts = np.concatenate([[0], np.nonzero(np.diff(z) != 0)[0] + 1])
    vals = z[starts]
    for k in range(1, len(starts) - 1):
        if vals[k] > vals[k - 1] and vals[k] > vals[k + 1]:
            i = starts[k]
            length = starts[k + 1] - i
            t, v = _refine(gt, z, i) if length == 1 else (gt[i], z[i])
            return t, (v if kind == "max" else -v)
    return None


def first_max(gt, y):
    """First interior local maximum ``(gt, value)`` or None; plateaus resolve to their start."""
    return _first_extremum(gt, y, "max")


def first_min(gt, y):
    return _first_extremum(gt, y, "min")


def esd_time(gt, raw) -> float | None:
    """First zero of the unclamped concurrence expression, linearly interpolated."""
    raw = np.asarray(raw)
    idx = np.nonzero(raw <= 0)[0]
    if len(idx) == 0:
        return None
    i = idx[0]
    if i == 0:
        return float(gt[0])
    y0, y1 = raw[i - 1], raw[i]
    return float(gt[i - 1] + (gt[i] - gt[i - 1]) * y0 / (y0 - y1))


def metrics(gt, r2=None, c_raw=None, fit_window: float = 0.02) -> MetricReport:
    rep = MetricReport()
    if r2 is not None:
        gt = np.asarray(gt)
        r2 = np.asarray(r2)
        if np.count_nonzero(gt <= fit_window * (1 + 1e-12)) >= 20:
            rep.alpha = fit_gaussian_rate(gt, r2, fit_window)
        mx = first_max(gt, r2)
        if mx is not None:
            rep.t_r2_max, rep.r2_max = float(mx[0]), float(min(max(mx[1], 0.0), 1.0))
        mn = first_min(gt, r2)
        if mn is not None:
            rep.t_first_min, rep.r2_first_min = float(mn[0]), float(mn[1])
    if c_raw is not None:
        rep.t_esd = esd_time(gt, c_raw)
    return rep
