"""Online-prediction experiments: configuration, predictors, metrics and output files."""
from __future__ import annotations

import copy
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .compilers import characteristic_polynomial, min_phase_polynomial, ar_theta, wavefilter_compile
from .hankel import compute_filter_bank
from .lds import (
    LinearDynamicalSystem,
    NoiseSchedule,
    block_impulse_inputs,
    diagonalize,
    gaussian_inputs,
    make_noise_schedule,
    random_rotation_lds,
    random_stable_lds,
    simulate,
)
from .learner import LearnerConfig, init_state, learner_step, regret_accounting
from .pseudo_lds import Dims, FeatureMap, SeriesHistory, predict, default_lag_offset

DEFAULTS = {
    "seed": 0,
    "T": 2000,
    "system": {"generator": "rotation", "d": 10, "n": 10, "m": 2, "radius": 1.0},
    "inputs": {"kind": "gaussian", "block_len": 10, "gap": 40},
    "noise": {"pattern": "none", "budget": 0.0, "u": None},
    "predictors": [
        {"name": "algorithm1", "type": "algorithm1"},
        {"name": "ar_online", "type": "ar_online"},
        {"name": "previous_output", "type": "previous_output"},
    ],
    "metrics": {"median_window": 51, "exclude_warmup": False, "comparator": None, "final_fraction": 0.25},
}

PREDICTOR_DEFAULTS = {
    "algorithm1": {
        "mode": "ridge_practical", "k": 25, "W": 100, "tau": 10, "lag_offset": None, "beta_mode": "matrix",
        "eta": None, "radius": None, "horizon": None, "inner_iters": 50, "inner_tol": 1e-10,
        "inner_solver": "preconditioned", "probe_points": 16, "stats_cap": 4000,
        "step_size": 0.5, "step_schedule": "normalized", "ridge_lambda": 0.0, "bank_horizon": None,
    },
    "ar_online": {"tau": 10, "step_size": 0.5, "step_schedule": "normalized", "ridge_lambda": 0.0},
    "previous_output": {},
    "compiled": {"mode": "ar", "k": 25, "W": 100, "bank_horizon": None},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in (over or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_config(doc: dict) -> dict:
    """Fill defaults and validate; the result is what the summary echoes. Idempotent."""
    cfg = _merge(DEFAULTS, {k: v for k, v in doc.items() if k != "predictors"})
    preds = doc.get("predictors", DEFAULTS["predictors"])
    if not isinstance(cfg["T"], int) or cfg["T"] < 1:
        raise ConfigError(f"T must be a positive integer, got {cfg['T']!r}")
    resolved, names = [], set()
    for i, p in enumerate(preds):
        kind = p.get("type")
        if kind not in PREDICTOR_DEFAULTS:
            raise ConfigError(f"unknown predictor type {kind!r}")
        full = _merge(PREDICTOR_DEFAULTS[kind], p)
        full.setdefault("name", f"{kind}_{i}")
        if full["name"] in names:
            raise ConfigError(f"duplicate predictor name {full['name']!r}")
        names.add(full["name"])
        resolved.append(full)
    cfg["predictors"] = resolved
    comp = cfg["metrics"].get("comparator")
    if comp is not None and comp not in names:
        raise ConfigError(f"comparator {comp!r} is not a declared predictor")
    w = cfg["metrics"]["median_window"]
    if not isinstance(w, int) or w < 1 or w % 2 == 0:
        raise ConfigError("median_window must be an odd positive integer")
    return cfg


def load_config(path) -> dict:
    with open(path) as fh:
        return resolve_config(json.load(fh))


# ---------------------------------------------------------------- world

def build_system(cfg: dict) -> LinearDynamicalSystem:
    spec = cfg["system"]
    seed = spec.get("seed", cfg["seed"])
    gen = spec.get("generator", "rotation")
    if gen == "rotation":
        return random_rotation_lds(spec["d"], spec["n"], spec["m"], seed=seed, radius=spec.get("radius", 1.0))
    if gen == "stable":
        return random_stable_lds(spec["d"], spec["n"], spec["m"], seed=seed,
                                 max_radius=spec.get("max_radius", 0.95))
    if gen == "explicit":
        return LinearDynamicalSystem.from_dict(spec)
    raise ConfigError(f"unknown system generator {gen!r}")


def build_inputs(cfg: dict, n: int) -> np.ndarray:
    spec = cfg["inputs"]
    seed = spec.get("seed", cfg["seed"])
    if spec["kind"] == "gaussian":
        return gaussian_inputs(cfg["T"], n, seed=seed)
    if spec["kind"] == "block_impulse":
        gap = spec.get("gap", 40)
        gap = math.inf if gap in (None, "inf") else gap
        return block_impulse_inputs(cfg["T"], n, block_len=spec.get("block_len", 10), gap=gap, seed=seed)
    if spec["kind"] == "zeros":
        return np.zeros((cfg["T"], n))
    raise ConfigError(f"unknown input kind {spec['kind']!r}")


def build_noise(cfg: dict, system: LinearDynamicalSystem) -> NoiseSchedule:
    spec = cfg["noise"]
    if spec.get("pattern", "none") == "none" or not spec.get("budget"):
        return NoiseSchedule.zeros(cfg["T"], system.d, system.m)
    return make_noise_schedule(cfg["T"], system.d, system.m, float(spec["budget"]), spec["pattern"],
                               u=spec.get("u"), seed=spec.get("seed", cfg["seed"]))


def simulate_world(cfg: dict):
    system = build_system(cfg)
    x = build_inputs(cfg, system.n)
    noise = build_noise(cfg, system)
    y, _ = simulate(system, x, noise)
    return system, x, y, noise


# ---------------------------------------------------------------- predictors

class Predictor:
    """Online contract: ``predict`` sees ``x_1..x_t`` and ``y_1..y_{t-1}``; then ``update`` gets ``y_t``."""

    name = "predictor"

    def predict(self, history: SeriesHistory) -> np.ndarray:
        raise NotImplementedError

    def update(self, y_t) -> None:
        pass


class PreviousOutput(Predictor):
    def __init__(self, name: str, m: int):
        self.name, self.m = name, m

    def predict(self, history):
        return history.y(history.t - 1)


class Algorithm1(Predictor):
    def __init__(self, name: str, spec: dict, n: int, m: int, T: int):
        self.name = name
        bank = compute_filter_bank(spec.get("bank_horizon") or T, spec["k"])
        L = spec["lag_offset"]
        self.fmap = FeatureMap(bank, spec["W"], spec["tau"], L)
        self.dims = Dims(spec["W"], spec["k"], n, m, spec["tau"])
        self.config = LearnerConfig(
            mode=spec["mode"], eta=spec["eta"], radius=spec["radius"], horizon=spec["horizon"] or T,
            inner_iters=spec["inner_iters"], inner_tol=spec["inner_tol"], inner_solver=spec["inner_solver"],
            probe_points=spec["probe_points"], stats_cap=spec["stats_cap"], step_size=spec["step_size"],
            step_schedule=spec["step_schedule"], ridge_lambda=spec["ridge_lambda"], seed=spec.get("seed", 0),
        )
        self.state = init_state(self.dims, spec["beta_mode"], self.config)
        self._fv = None
        self.diagnostics = []

    def predict(self, history):
        self._fv = self.fmap.features(history)
        return predict(self.state.theta, self._fv)

    def update(self, y_t):
        learner_step(self.state, self._fv, y_t, self.config)
        if self.state.last:
            self.diagnostics.append(self.state.last)


class OnlineAR(Predictor):
    """``y_hat_t = sum_u beta_u y_{t-u} + sum_j P_j x_{t-j}`` with matrix ``beta``, fitted by ridge gradient steps.

    ``tau = 0`` keeps only ``P_0`` (plain linear regression on ``x_t``).
    """

    def __init__(self, name: str, spec: dict, n: int, m: int):
        self.name = name
        self.tau = int(spec["tau"])
        self.n_in = max(self.tau, 1)
        self.m = m
        self.weights = np.zeros((m, self.tau * m + self.n_in * n))
        self.config = LearnerConfig(mode="ridge_practical", step_size=spec["step_size"],
                                    step_schedule=spec["step_schedule"], ridge_lambda=spec["ridge_lambda"])
        self.t = 0
        self._z = None

    @property
    def beta(self) -> np.ndarray:
        return self.weights[:, : self.tau * self.m].reshape(self.m, self.tau, self.m).transpose(1, 0, 2)

    def predict(self, history):
        self._z = np.concatenate([history.output_lags(self.tau).ravel(), history.input_lags(self.n_in).ravel()])
        return self.weights @ self._z

    def update(self, y_t):
        z = self._z
        r2 = 2.0 * (self.weights @ z - y_t)
        self.t += 1
        cfg = self.config
        if cfg.step_schedule == "constant":
            s = cfg.step_size
        elif cfg.step_schedule == "inverse_sqrt":
            s = cfg.step_size / math.sqrt(self.t)
        else:
            s = cfg.step_size / (2.0 * (cfg.norm_eps + float(z @ z)))
        with np.errstate(over="ignore", invalid="ignore"):
            g = np.outer(r2, z) + 2.0 * cfg.ridge_lambda * self.weights
            self.weights = self.weights - s * g
        if not np.all(np.isfinite(self.weights)):
            raise FloatingPointError("online AR diverged")


class Compiled(Predictor):
    """Fixed parameters compiled from the true system."""

    def __init__(self, name: str, spec: dict, system: LinearDynamicalSystem, T: int):
        self.name = name
        if spec["mode"] == "ar":
            p = characteristic_polynomial(system.A)
            self.theta = ar_theta(system, p)
            self.fmap = FeatureMap(compute_filter_bank(1, 1), 1, p.tau)
            self.report = {"mode": "ar", "tau": p.tau}
        elif spec["mode"] == "wavefilter":
            p = min_phase_polynomial(diagonalize(system.A).phases)
            bank = compute_filter_bank(spec.get("bank_horizon") or T, spec["k"])
            comp = wavefilter_compile(system, p, bank, spec["W"])
            self.theta = comp.theta
            self.fmap = FeatureMap(bank, spec["W"], p.tau, comp.lag_offset)
            self.report = comp.report
        else:
            raise ConfigError(f"unknown compile mode {spec['mode']!r}")

    def predict(self, history):
        return predict(self.theta, self.fmap.features(history))


def build_predictors(cfg: dict, system: LinearDynamicalSystem) -> list[Predictor]:
    out = []
    T, n, m = cfg["T"], system.n, system.m
    for spec in cfg["predictors"]:
        kind = spec["type"]
        if kind == "algorithm1":
            out.append(Algorithm1(spec["name"], spec, n, m, T))
        elif kind == "ar_online":
            out.append(OnlineAR(spec["name"], spec, n, m))
        elif kind == "previous_output":
            out.append(PreviousOutput(spec["name"], m))
        else:
            out.append(Compiled(spec["name"], spec, system, T))
    return out


# ---------------------------------------------------------------- trace

@dataclass
class ExperimentTrace:
    x: np.ndarray
    y: np.ndarray
    predictions: dict = field(default_factory=dict)
    losses: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.x.shape[0]

    def check_consistency(self, tol: float = 1e-12) -> bool:
        for name, yhat in self.predictions.items():
            if yhat.shape != self.y.shape or self.losses[name].shape != (self.T,):
                return False
            recomputed = np.sum((yhat - self.y) ** 2, axis=1)
            if np.max(np.abs(recomputed - self.losses[name]), initial=0.0) > tol * max(1.0, np.max(recomputed, initial=0)):
                return False
        return True


def median_filter(series, window: int) -> np.ndarray:
    """Centered running median with edge replication."""
    if not isinstance(window, (int, np.integer)) or window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd positive integer, got {window!r}")
    s = np.asarray(series, dtype=np.float64)
    if window == 1 or s.size == 0:
        return s.copy()
    half = window // 2
    padded = np.pad(s, half, mode="edge")
    return np.median(np.lib.stride_tricks.sliding_window_view(padded, window), axis=1)


def run_experiment(cfg: dict, on_partial=None) -> ExperimentTrace:
    """Run the online protocol for every configured predictor on one simulated trace.

    ``on_partial(trace)`` is called with the steps completed so far if a
    predictor raises, before the error propagates.
    """
    cfg = resolve_config(cfg)
    started = time.perf_counter()
    system, x, y, noise = simulate_world(cfg)
    T, n, m = cfg["T"], system.n, system.m
    predictors = build_predictors(cfg, system)
    preds = {p.name: np.zeros((T, m)) for p in predictors}
    history = SeriesHistory(n, m, capacity=T)
    t = 0
    try:
        for t in range(T):
            history.push_input(x[t])
            for p in predictors:
                yhat = np.asarray(p.predict(history), dtype=np.float64)
                if yhat.shape != (m,) or not np.all(np.isfinite(yhat)):
                    raise FloatingPointError(f"predictor {p.name} produced an invalid prediction at t={t + 1}")
                preds[p.name][t] = yhat
            for p in predictors:
                p.update(y[t])
            history.observe(y[t])
    except Exception:
        if on_partial is not None:
            part = ExperimentTrace(x=x[:t], y=y[:t], predictions={k: v[:t] for k, v in preds.items()})
            part.losses = {k: np.sum((v - part.y) ** 2, axis=1) for k, v in part.predictions.items()}
            on_partial(part)
        raise
    trace = ExperimentTrace(x=x, y=y, predictions=preds)
    trace.losses = {k: np.sum((v - y) ** 2, axis=1) for k, v in preds.items()}
    trace.summary = summarize(trace, cfg, predictors, noise)
    trace.summary["wall_clock_s"] = time.perf_counter() - started
    return trace


def summarize(trace: ExperimentTrace, cfg: dict, predictors=(), noise: NoiseSchedule | None = None) -> dict:
    met = cfg["metrics"]
    start = 0
    if met.get("exclude_warmup"):
        start = max((p.get("tau", 0) for p in cfg["predictors"]), default=0)
    tail = max(1, int(round(trace.T * met.get("final_fraction", 0.25))))
    out = {"config": cfg, "T": trace.T, "predictors": {}}
    for name, loss in trace.losses.items():
        smooth = median_filter(loss, met["median_window"])
        out["predictors"][name] = {
            "total_loss": float(np.sum(loss[start:])),
            "mean_loss": float(np.mean(loss[start:])) if trace.T > start else 0.0,
            "final_smoothed_mse": float(np.mean(smooth[-tail:])),
        }
    comp = met.get("comparator")
    if comp is not None:
        ys = trace.predictions[comp]
        for name, yhat in trace.predictions.items():
            out["predictors"][name]["regret"] = regret_accounting(yhat[start:], trace.y[start:], ys[start:])
    for p in predictors:
        if isinstance(p, Algorithm1) and p.diagnostics:
            d = p.diagnostics
            out["predictors"][p.name]["learner"] = {
                "flags": list(p.state.flags),
                "nonconverged_steps": int(sum(1 for r in d if r.get("converged") is False)),
                "final": d[-1],
            }
        if isinstance(p, Compiled):
            out["predictors"][p.name]["compile_report"] = p.report
    if noise is not None:
        out["noise"] = noise.metadata()
    return out


# ---------------------------------------------------------------- outputs

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trace_columns(trace: ExperimentTrace) -> tuple[list[str], np.ndarray]:
    n, m = trace.x.shape[1], trace.y.shape[1]
    names = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"y_{j + 1}" for j in range(m)]
    cols = [np.arange(1, trace.T + 1, dtype=np.float64)[:, None], trace.x, trace.y]
    for name, yhat in trace.predictions.items():
        names += [f"yhat_{name}_{j + 1}" for j in range(m)] + [f"loss_{name}"]
        cols += [yhat, trace.losses[name][:, None]]
    return names, np.hstack(cols) if trace.T else np.zeros((0, len(names)))


def write_csv(path, names, data):
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(str(int(row[0])) + "," + ",".join(_fmt(v) for v in row[1:]) + "\n")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    return names, np.array(rows).reshape(-1, len(names))


def trace_from_csv(path) -> ExperimentTrace:
    names, data = read_csv(path)
    col = {n: i for i, n in enumerate(names)}
    xs = [n for n in names if n.startswith("x_")]
    ys = [n for n in names if n.startswith("y_")]
    trace = ExperimentTrace(x=data[:, [col[n] for n in xs]], y=data[:, [col[n] for n in ys]])
    for n in names:
        if n.startswith("loss_"):
            pname = n[len("loss_"):]
            trace.predictions[pname] = data[:, [col[f"yhat_{pname}_{j + 1}"] for j in range(len(ys))]]
            trace.losses[pname] = data[:, col[n]]
    return trace


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def render_svg(trace: ExperimentTrace, window: int = 51, width: int = 900, panel_h: int = 220) -> str:
    """Three stacked panels: first input channel, outputs, log10 of smoothed loss per predictor."""
    series = []
    if trace.x.shape[1]:
        series.append(("inputs", "x_1", trace.x[:, 0]))
    for j in range(trace.y.shape[1]):
        series.append(("outputs", f"y_{j + 1}", trace.y[:, j]))
    for name, loss in trace.losses.items():
        sm = median_filter(loss, window) if loss.size else loss
        series.append(("loss", f"loss:{name}", np.log10(np.maximum(sm, 1e-300))))
    panels = ["inputs", "outputs", "loss"]
    pad = 40
    height = len(panels) * (panel_h + pad) + pad
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">', '<rect width="100%" height="100%" fill="white"/>']
    T = max(trace.T, 1)
    for pi, panel in enumerate(panels):
        top = pad + pi * (panel_h + pad)
        label = "log10 smoothed loss" if panel == "loss" else panel
        parts.append(f'<text x="{pad}" y="{top - 8}" font-size="13" font-family="sans-serif">{label}</text>')
        parts.append(f'<rect x="{pad}" y="{top}" width="{width - 2 * pad}" height="{panel_h}" fill="none" '
                     'stroke="#999"/>')
        mine = [s for s in series if s[0] == panel]
        vals = np.concatenate([s[2] for s in mine]) if mine and trace.T else np.zeros(1)
        vals = vals[np.isfinite(vals)] if vals.size else np.zeros(1)
        lo, hi = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 1.0)
        if hi == lo:
            hi = lo + 1.0
        for si, (_, name, v) in enumerate(mine):
            xs = pad + (width - 2 * pad) * (np.arange(v.size) / max(T - 1, 1))
            ys_ = top + panel_h * (1.0 - (np.nan_to_num(v, nan=lo) - lo) / (hi - lo))
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys_))
            color = _PALETTE[si % len(_PALETTE)]
            parts.append(f'<polyline data-series="{name}" fill="none" stroke="{color}" stroke-width="1" '
                         f'points="{pts}"/>')
            parts.append(f'<text x="{width - pad - 150}" y="{top + 16 + 14 * si}" font-size="11" '
                         f'font-family="sans-serif" fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def emit_outputs(trace: ExperimentTrace, cfg: dict, out_dir) -> dict:
    """Write ``trace.csv``, ``summary.json`` and ``plot.svg``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names, data = trace_columns(trace)
    paths = {"csv": out / "trace.csv", "summary": out / "summary.json", "svg": out / "plot.svg"}
    write_csv(paths["csv"], names, data)
    summary = trace.summary or summarize(trace, cfg)
    paths["summary"].write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    paths["svg"].write_text(render_svg(trace, cfg["metrics"]["median_window"]))
    return {k: str(v) for k, v in paths.items()}


def write_simulation(cfg: dict, out_dir) -> dict:
    """Trace CSV (``t, x.., y..``) plus a JSON sidecar with system, seed and noise metadata."""
    cfg = resolve_config(cfg)
    system, x, y, noise = simulate_world(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = ExperimentTrace(x=x, y=y)
    names, data = trace_columns(trace)
    write_csv(out / "trace.csv", names, data)
    side = {"system": system.to_dict(), "seed": cfg["seed"], "T": cfg["T"], "inputs": cfg["inputs"],
            "noise": noise.metadata()}
    (out / "trace.json").write_text(json.dumps(_jsonable(side), indent=2) + "\n")
    return {"csv": str(out / "trace.csv"), "sidecar": str(out / "trace.json")}


def run_and_emit(cfg: dict, out_dir) -> dict:
    cfg = resolve_config(cfg)
    out = Path(out_dir)

    def flush(partial):
        out.mkdir(parents=True, exist_ok=True)
        names, data = trace_columns(partial)
        write_csv(out / "trace.partial.csv", names, data)

    trace = run_experiment(cfg, on_partial=flush)
    paths = emit_outputs(trace, cfg, out)
    return {"paths": paths, "summary": trace.summary}


def _sweep_one(args):
    path, out_root = args
    cfg = load_config(path)
    res = run_and_emit(cfg, Path(out_root) / Path(path).stem)
    return str(path), {k: v["final_smoothed_mse"] for k, v in res["summary"]["predictors"].items()}


def sweep_threads() -> int:
    env = os.environ.get("WAVECAST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"WAVECAST_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def run_sweep(config_dir, out_root) -> dict:
    """Run every ``*.json`` config in ``config_dir``; each gets its own output subdirectory."""
    paths = sorted(Path(config_dir).glob("*.json"))
    if not paths:
        raise ConfigError(f"no *.json configs in {config_dir}")
    jobs = [(str(p), str(out_root)) for p in paths]
    workers = min(sweep_threads(), len(jobs))
    if workers <= 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    return dict(results)


def regret_from_csv(trace_path, comparator_path, predictor: str | None = None,
                    comparator_predictor: str | None = None) -> dict:
    a = trace_from_csv(trace_path)
    b = trace_from_csv(comparator_path)
    if a.y.shape != b.y.shape:
        raise ValueError(f"length mismatch: {a.y.shape} vs {b.y.shape}")
    if not np.array_equal(a.y, b.y):
        raise ValueError("the two traces have different true outputs")
    pa = predictor or next(iter(a.predictions), None)
    pb = comparator_predictor or next(iter(b.predictions), None)
    if pa is None or pb is None:
        raise ValueError("both traces need at least one predictor column")
    value = regret_accounting(a.predictions[pa], a.y, b.predictions[pb])
    return {"predictor": pa, "comparator": pb, "regret": value,
            "loss": float(np.sum(a.losses[pa])), "comparator_loss": float(np.sum(b.losses[pb]))}
