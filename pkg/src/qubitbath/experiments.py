"""Experiment configuration, orchestration and CSV output.

A configuration is an INI file (see ``docs/config.md``); the stock presets in
``qubitbath/presets`` are ordinary configuration files. Energies are quoted in
units of the qubit-bath coupling g and times as gt.
"""

from __future__ import annotations

import configparser
import io
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import oracle
from .dynamics import MAX_COHERENT_N, EvolutionPlan, evolve_coherent, evolve_ground
from .errors import InvalidParameterError, QubitBathError
from .observables import (
    bloch_and_purity,
    concurrence,
    metrics,
    qubit_rho,
    two_qubit_rho,
    w_factors,
)
from .spinbath import ModelParams, bath_ground_state, coherent_coefficients, ground_state, z_from_angles

KINDS = ("rabi", "decoherence", "concurrence", "alpha_sweep", "rmax_sweep", "firstmin_sweep", "esd_sweep")
SWEEP_KINDS = KINDS[3:]
GROUND_KINDS = KINDS[1:]
FMT = "%.17e"

SUMMARY_FIELDS = {
    "alpha_sweep": ("alpha_fit", "alpha_pert"),
    "rmax_sweep": ("r2_max", "t_r2_max"),
    "firstmin_sweep": ("t_first_min", "r2_first_min"),
    "esd_sweep": ("t_esd", "t_first_min"),
}
ALL_METRICS = ("alpha_fit", "alpha_pert", "r2_max", "t_r2_max", "t_first_min", "r2_first_min", "t_esd")


class ConfigError(QubitBathError, ValueError):
    """Invalid or incomplete configuration; the message names the field."""


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    N: int
    J: float = 0.0
    h: float = 0.0
    omega: float = 0.0
    g: tuple | float = 1.0
    z: complex | None = None
    a1: complex = 1 / math.sqrt(2)
    abar1: complex = 1 / math.sqrt(2)
    alpha: float = 1 / math.sqrt(2)
    beta: complex = 1 / math.sqrt(2)
    gt_max: float = 10.0
    dt: float | None = None
    stride: int | None = None
    output_dt: float | None = None
    J_over_h: tuple = ()
    h_over_g: tuple = ()
    fit_window: float = 0.02
    output: str | None = None
    verify: bool = False
    verify_tol: float = 1e-8
    threads: int = 1

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.N, self.J, self.h, self.omega, self.g)

    @property
    def plan(self) -> EvolutionPlan:
        return EvolutionPlan(self.gt_max, self.dt, self.stride, self.output_dt)

    @property
    def is_sweep(self) -> bool:
        return bool(self.J_over_h or self.h_over_g)

    def points(self) -> list:
        """Sweep points ``(h_over_g, J_over_h, ModelParams)`` ordered as listed."""
        base = self.params
        gs = base.g_scale or 1.0
        hgs = self.h_over_g or (base.h / gs,)
        out = []
        for hg in hgs:
            h = hg * gs
            if self.J_over_h:
                for jh in self.J_over_h:
                    out.append((hg, jh, base.replace(h=h, J=jh * h)))
            else:
                jh = base.J / h if h else float("nan")
                out.append((hg, jh, base.replace(h=h)))
        return out


# ---------------------------------------------------------------- parsing


_LINSPACE = re.compile(r"^\s*linspace\(([^)]*)\)\s*$")


def _num(section, key, raw, kind=float):
    try:
        if kind is complex:
            return complex(raw.replace(" ", "").replace("i", "j"))
        if kind is int:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        v = kind(raw)
        if isinstance(v, float) and not math.isfinite(v):
            raise ValueError
        return v
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kind.__name__}") from None


def _list(section, key, raw) -> tuple:
    m = _LINSPACE.match(raw)
    if m:
        parts = [p.strip() for p in m.group(1).split(",")]
        if len(parts) != 3:
            raise ConfigError(f"[{section}] {key}: linspace takes (start, stop, count)")
        a, b = (_num(section, key, p) for p in parts[:2])
        n = _num(section, key, parts[2], int)
        if n < 1:
            raise ConfigError(f"[{section}] {key}: linspace count must be >= 1")
        return tuple(float(x) for x in np.linspace(a, b, n))
    items = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
    if not items:
        raise ConfigError(f"[{section}] {key}: empty list")
    return tuple(_num(section, key, p) for p in items)


_SCHEMA = {
    "experiment": {"kind": str, "name": str},
    "model": {"N": int, "J": float, "h": float, "omega": float, "g": "list"},
    "initial": {"state": str, "z": complex, "theta": float, "phi": float, "a1": complex, "abar1": complex, "alpha": float, "beta": complex},
    "integrate": {"gt_max": float, "dt": float, "stride": int, "output_dt": float, "threads": int},
    "sweep": {"J_over_h": "list", "h_over_g": "list", "fit_window": float},
    "output": {"path": str},
    "verify": {"enabled": bool, "tolerance": float},
}


def _read(text: str, source: str) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp[sec].items():
            kind = _SCHEMA[sec].get(key)
            if kind is None:
                raise ConfigError(f"[{sec}] {key}: unknown key")
            raw = raw.strip()
            if raw == "":
                continue
            if kind == "list":
                val = _list(sec, key, raw)
            elif kind is bool:
                low = raw.lower()
                if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                    raise ConfigError(f"[{sec}] {key}: expected a boolean, got {raw!r}")
                val = low in ("true", "yes", "1", "on")
            elif kind is str:
                val = raw
            else:
                val = _num(sec, key, raw, kind)
            values[(sec, key)] = val
    return values


def parse_config(text: str, name: str = "config", source: str = "<config>") -> ExperimentConfig:
    v = _read(text, source)

    def need(sec, key):
        if (sec, key) not in v:
            raise ConfigError(f"[{sec}] {key}: required field missing")
        return v[(sec, key)]

    kind = need("experiment", "kind")
    if kind not in KINDS:
        raise ConfigError(f"[experiment] kind: must be one of {', '.join(KINDS)}, got {kind!r}")
    cfg = ExperimentConfig(name=v.get(("experiment", "name"), name), kind=kind, N=need("model", "N"))
    for key in ("J", "h", "omega"):
        if ("model", key) in v:
            setattr(cfg, key, v[("model", key)])
    if ("model", "g") in v:
        g = v[("model", "g")]
        cfg.g = g[0] if len(g) == 1 else g
    try:
        cfg.params
    except InvalidParameterError as exc:
        raise ConfigError(f"[model] {exc}") from None

    state = v.get(("initial", "state"), "coherent" if kind == "rabi" else "ground_state")
    if kind == "rabi":
        if state != "coherent":
            raise ConfigError("[initial] state: rabi runs need state = coherent")
        if ("initial", "z") in v:
            cfg.z = v[("initial", "z")]
        elif ("initial", "theta") in v:
            cfg.z = z_from_angles(v[("initial", "theta")], v.get(("initial", "phi"), 0.0))
        else:
            raise ConfigError("[initial] z: required field missing (or give theta, phi)")
        if cfg.J != 0 and cfg.N > MAX_COHERENT_N:
            raise ConfigError(f"[model] N: finite-J coherent runs need N <= {MAX_COHERENT_N}")
    else:
        if state != "ground_state":
            raise ConfigError(f"[initial] state: {kind} runs need state = ground_state")
    for key in ("a1", "abar1", "beta"):
        if ("initial", key) in v:
            setattr(cfg, key, v[("initial", key)])
    if ("initial", "alpha") in v:
        cfg.alpha = v[("initial", "alpha")]
    if abs(abs(cfg.a1) ** 2 + abs(cfg.abar1) ** 2 - 1) > 1e-12:
        raise ConfigError("[initial] a1, abar1: |a1|^2 + |abar1|^2 must equal 1")
    if abs(cfg.alpha**2 + abs(cfg.beta) ** 2 - 1) > 1e-12:
        raise ConfigError("[initial] alpha, beta: alpha^2 + |beta|^2 must equal 1")

    cfg.gt_max = need("integrate", "gt_max")
    for key in ("dt", "stride", "output_dt", "threads"):
        if ("integrate", key) in v:
            setattr(cfg, key, v[("integrate", key)])
    if not cfg.gt_max > 0:
        raise ConfigError("[integrate] gt_max: must be > 0")
    try:
        cfg.plan
    except InvalidParameterError as exc:
        raise ConfigError(f"[integrate] {exc}") from None

    cfg.J_over_h = v.get(("sweep", "J_over_h"), ())
    cfg.h_over_g = v.get(("sweep", "h_over_g"), ())
    cfg.fit_window = v.get(("sweep", "fit_window"), cfg.fit_window)
    if kind == "rabi" and cfg.is_sweep:
        raise ConfigError("[sweep] not supported for rabi runs")
    if kind in SWEEP_KINDS and not cfg.is_sweep:
        raise ConfigError("[sweep] J_over_h: required field missing for sweep experiments")
    if cfg.J_over_h and any(hg == 0 for hg in (cfg.h_over_g or (cfg.h,))):
        raise ConfigError("[sweep] J_over_h: needs a nonzero field h")
    cfg.output = v.get(("output", "path"))
    cfg.verify = v.get(("verify", "enabled"), False)
    cfg.verify_tol = v.get(("verify", "tolerance"), cfg.verify_tol)
    return cfg


def preset_names() -> list:
    root = resources.files("qubitbath") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_text(name: str) -> str:
    path = resources.files("qubitbath") / "presets" / f"{name}.ini"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text()


def load_config(target: str) -> ExperimentConfig:
    """``target`` is a preset name or a path to a configuration file."""
    p = Path(target)
    if p.is_file():
        return parse_config(p.read_text(), name=p.stem, source=str(p))
    return parse_config(preset_text(target), name=target, source=f"preset {target}")


# ---------------------------------------------------------------- output


def write_csv(path: Path, columns: dict) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    buf = io.StringIO()
    np.savetxt(buf, data, fmt=FMT, delimiter=",", header=",".join(names), comments="")
    path.write_text(buf.getvalue())


def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FMT % float(x)


def write_rows(path: Path, header: list, rows: list) -> None:
    lines = [",".join(header)] + [",".join(_fmt(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def point_name(hg: float, jh: float) -> str:
    return f"hg{hg:g}_Jh{jh:+g}.csv"


# ---------------------------------------------------------------- runs


@dataclass
class PointResult:
    h_over_g: float
    J_over_h: float
    params: ModelParams
    m: int | None
    columns: dict
    metrics: dict
    checks: dict
    verify: dict | None = None


def _times(cfg: ExperimentConfig, params: ModelParams) -> np.ndarray:
    dt, stride, n_out = cfg.plan.resolve(params)
    return np.arange(n_out + 1) * (dt * stride)


def run_rabi(cfg: ExperimentConfig, params: ModelParams, threads: int = 1) -> PointResult:
    g = params.g_scale or 1.0
    checks = {}
    if params.J == 0 and params.uniform:
        gt = _times(cfg, params)
        res = oracle.analytic_j0(params.N, cfg.z, params.g[0], params.h, params.omega, gt / g)
        cols = {"gt": gt, "sx": res["sx"], "sy": res["sy"], "sz": res["sz"], "purity": res["purity"]}
        route = "analytic"
    else:
        run = evolve_coherent(params, coherent_coefficients(params.N, cfg.z), cfg.plan, threads=threads)
        tr = bloch_and_purity(run)
        cols = tr.columns()
        checks["norm_drift"] = run.max_drift
        route = "engine"
    bloch = np.sqrt(cols["sx"] ** 2 + cols["sy"] ** 2 + cols["sz"] ** 2)
    checks["bloch_norm_excess"] = float(max(0.0, bloch.max() - 1))
    checks["purity_below_half"] = float(max(0.0, 0.5 - cols["purity"].min()))
    res = PointResult(float("nan"), float("nan"), params, None, cols, {"route": route}, checks)
    if cfg.verify and params.N <= oracle.MAX_DENSE_N:
        res.verify = _verify_rabi(cfg, params, cols)
    return res


def _verify_rabi(cfg, params, cols) -> dict:
    gt = cols["gt"]
    psi0 = oracle.product_state(1.0, 0.0, oracle.bath_coherent_state(params.N, cfg.z))
    states = oracle.exact_propagate(params, psi0, gt / (params.g_scale or 1.0))
    rho = oracle.reduced_qubit(states)
    sx, sy, sz, purity = oracle.bloch_from_rho(rho)
    ref = {"sx": sx, "sy": sy, "sz": sz, "purity": purity}
    dev = {k: float(np.max(np.abs(cols[k] - ref[k]))) for k in ref}
    M = oracle.magnetization(params.N)
    mt = np.einsum("ti,i,ti->t", states.conj(), M, states).real
    dev["magnetization"] = float(np.max(np.abs(mt - mt[0])))
    return dev


def initial_bath(params: ModelParams):
    """Ground state of the bath; the J < 0, h >= 0 case uses the closed form in h/|J|."""
    if params.J < 0 and params.h >= 0:
        return ground_state(params.N, params.h / -params.J)
    return bath_ground_state(params.N, params.J, params.h)


def run_ground(cfg: ExperimentConfig, hg: float, jh: float, params: ModelParams, threads: int = 1) -> PointResult:
    gs = initial_bath(params)
    run = evolve_ground(params, gs, cfg.a1, cfg.abar1, cfg.plan, threads=threads)
    W = w_factors(run)
    r = W.r
    r2 = np.abs(r) ** 2
    c_raw = concurrence(W, cfg.alpha, cfg.beta, clamp=False)
    c = np.maximum(c_raw, 0.0)
    rep = metrics(W.gt, r2, c_raw, fit_window=cfg.fit_window)
    try:
        a_pert = oracle.perturbative_alpha(params.N, gs) if params.uniform else None
    except QubitBathError:
        a_pert = None
    met = {
        "alpha_fit": rep.alpha,
        "alpha_pert": a_pert,
        "r2_max": rep.r2_max,
        "t_r2_max": rep.t_r2_max,
        "t_first_min": rep.t_first_min,
        "r2_first_min": rep.r2_first_min,
        "t_esd": rep.t_esd,
    }
    if cfg.kind == "decoherence":
        cols = {"gt": W.gt, "re_r": r.real, "im_r": r.imag, "abs_r2": r2}
    elif cfg.kind == "concurrence":
        cols = {"gt": W.gt, "concurrence": c, "abs_r2": r2}
    else:
        cols = {"gt": W.gt, "re_r": r.real, "im_r": r.imag, "abs_r2": r2, "concurrence": c}
    rho2 = two_qubit_rho(W, cfg.alpha, cfg.beta)
    ev = np.linalg.eigvalsh(rho2)
    checks = {
        "norm_drift": run.max_drift,
        "r2_excess": float(max(0.0, r2.max() - 1)),
        "concurrence_over_r2": float(max(0.0, np.max(c - r2))),
        "trace_up": float(np.max(np.abs(W.w1111 + W.w0011 - 1))),
        "trace_down": float(np.max(np.abs(W.w0000 + W.w1100 - 1))),
        "rho2_trace": float(np.max(np.abs(np.trace(rho2, axis1=1, axis2=2) - 1))),
        "rho2_negativity": float(max(0.0, -ev.min())),
    }
    res = PointResult(hg, jh, params, gs.m, cols, met, checks)
    if cfg.verify and params.N <= oracle.MAX_DENSE_N:
        res.verify = _verify_ground(cfg, params, W)
    return res


def _verify_ground(cfg, params, W) -> dict:
    _, bath = oracle.bath_ground_vector(params.N, params.J, params.h)
    psi0 = oracle.product_state(cfg.a1, cfg.abar1, bath)
    states = oracle.exact_propagate(params, psi0, W.gt / (params.g_scale or 1.0))
    ref = oracle.reduced_qubit(states)
    rho = qubit_rho(W, cfg.a1, cfg.abar1)
    dev = {"rho": float(np.max(np.abs(rho - ref)))}
    # r itself from a balanced superposition, independent of (a1, abar1)
    s = 1 / math.sqrt(2)
    states = oracle.exact_propagate(params, oracle.product_state(s, s, bath), W.gt / (params.g_scale or 1.0))
    r_ref = oracle.reduced_qubit(states)[:, 0, 1] / 0.5
    dev["r"] = float(np.max(np.abs(W.r - r_ref)))
    M = oracle.magnetization(params.N)
    mt = np.einsum("ti,i,ti->t", states.conj(), M, states).real
    dev["magnetization"] = float(np.max(np.abs(mt - mt[0])))
    return dev


CHECK_TOL = {
    "norm_drift": 1e-8,
    "bloch_norm_excess": 1e-10,
    "purity_below_half": 1e-10,
    "r2_excess": 1e-10,
    "concurrence_over_r2": 1e-12,
    "trace_up": 1e-10,
    "trace_down": 1e-10,
    "rho2_trace": 1e-10,
    "rho2_negativity": 1e-10,
}


@dataclass
class RunOutcome:
    config: ExperimentConfig
    points: list
    files: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def execute(cfg: ExperimentConfig, out_dir: Path | None = None, threads: int | None = None) -> RunOutcome:
    """Run an experiment, write its CSV files and collect check failures.

    Sweep points run in a thread pool; files and summary rows are written in
    the listed sweep order, so the output does not depend on ``threads``.
    """
    threads = max(1, threads if threads is not None else cfg.threads)
    if cfg.kind == "rabi":
        points = [run_rabi(cfg, cfg.params, threads)]
    else:
        todo = cfg.points() if cfg.is_sweep else [(cfg.h / (cfg.params.g_scale or 1.0), cfg.J / cfg.h if cfg.h else float("nan"), cfg.params)]
        if threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                points = list(pool.map(lambda p: run_ground(cfg, *p), todo))
        else:
            points = [run_ground(cfg, *p, threads=threads) for p in todo]

    failures = []
    for p in points:
        tag = "" if cfg.kind == "rabi" else f" (h/g={p.h_over_g:g}, J/h={p.J_over_h:+g})"
        for key, val in p.checks.items():
            if val > CHECK_TOL[key]:
                failures.append(f"invariant {key} = {val:.3e} exceeds {CHECK_TOL[key]:.0e}{tag}")
        if p.verify:
            for key, val in p.verify.items():
                tol = 1e-12 if key == "magnetization" else cfg.verify_tol
                if val > tol:
                    failures.append(f"oracle deviation {key} = {val:.3e} exceeds {tol:.0e}{tag}")

    files = []
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if cfg.is_sweep:
            for p in points:
                path = out_dir / point_name(p.h_over_g, p.J_over_h)
                write_csv(path, p.columns)
                files.append(path)
            fields = SUMMARY_FIELDS.get(cfg.kind, ALL_METRICS)
            header = ["h_over_g", "J_over_h", "J", "h", "m"] + list(fields)
            rows = [[p.h_over_g, p.J_over_h, p.params.J, p.params.h, p.m] + [p.metrics[f] for f in fields] for p in points]
            path = out_dir / "summary.csv"
            write_rows(path, header, rows)
            files.append(path)
        else:
            path = out_dir / "trajectory.csv"
            write_csv(path, points[0].columns)
            files.append(path)
            if cfg.kind != "rabi":
                fields = ALL_METRICS
                path = out_dir / "metrics.csv"
                p = points[0]
                write_rows(path, ["h_over_g", "J_over_h", "J", "h", "m"] + list(fields), [[p.h_over_g, p.J_over_h, p.params.J, p.params.h, p.m] + [p.metrics[f] for f in fields]])
                files.append(path)
        if cfg.verify:
            path = out_dir / "verify.txt"
            path.write_text(verify_report(cfg, points, failures))
            files.append(path)
    return RunOutcome(cfg, points, files, failures)


def verify_report(cfg: ExperimentConfig, points: list, failures: list) -> str:
    lines = [f"experiment {cfg.name} ({cfg.kind}), N = {cfg.N}"]
    if cfg.N > oracle.MAX_DENSE_N:
        lines.append(f"oracle comparison skipped: dense oracle needs N <= {oracle.MAX_DENSE_N}")
    for p in points:
        tag = "" if cfg.kind == "rabi" else f"h/g={p.h_over_g:g} J/h={p.J_over_h:+g}: "
        inv = " ".join(f"{k}={v:.3e}" for k, v in p.checks.items())
        lines.append(f"{tag}invariants {inv}")
        if p.verify:
            dev = " ".join(f"{k}={v:.3e}" for k, v in p.verify.items())
            lines.append(f"{tag}max oracle deviation {dev}")
    lines.append("status: " + ("FAIL" if failures else "ok"))
    lines += failures
    return "\n".join(lines) + "\n"


def override(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Apply command-line overrides (``None`` values are ignored)."""
    kw = {k: v for k, v in kw.items() if v is not None}
    cfg = replace(cfg, **kw)
    try:
        cfg.plan
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
