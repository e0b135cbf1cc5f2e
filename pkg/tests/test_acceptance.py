"""Acceptance suite: one check per criterion, each printing a single PASS/FAIL line.

Run under pytest, or directly with ``python3 tests/test_acceptance.py``.
Criteria 3-8 return the CSV text they produced so criterion 9 can re-run
them and compare byte for byte.
"""
import os
import sys
import tempfile
import time

import numpy as np
import pytest
import scipy.linalg

sys.path.insert(0, os.path.dirname(__file__))

from test_pseudo_lds import fd_gradient_check  # noqa: E402

from wavecast.compilers import min_phase_polynomial, wavefilter_compile  # noqa: E402
from wavecast.hankel import build_hankel, compute_filter_bank  # noqa: E402
from wavecast.harness import run_experiment, trace_columns, write_csv  # noqa: E402
from wavecast.lds import diagonalize, random_rotation_lds, random_stable_lds  # noqa: E402
from wavecast.pseudo_lds import FeatureMap, PseudoLDS, SeriesHistory, predict  # noqa: E402

# frozen at the first verified build (measured 0.34322 for the damped d=4 system below)
WAVEFILTER_ERROR_BOUND = 0.35


def _csv_text(names, rows) -> str:
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "out.csv")
        write_csv(path, names, np.asarray(rows, dtype=np.float64).reshape(-1, len(names)))
        with open(path) as fh:
            return fh.read()


def _trace_text(trace) -> str:
    return _csv_text(*trace_columns(trace))


REPORT_LINES: list = []


def _report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    REPORT_LINES.append(line)
    print(line, flush=True)
    return line


# ---------------------------------------------------------------- 1

def criterion_1():
    t0 = time.perf_counter()
    ok, worst_res, worst_val, worst_vec = True, 0.0, 0.0, 0.0
    for T in (1, 2, 25, 100):
        Z = build_hankel(T).entries
        i = np.arange(1, T + 1, dtype=np.float64)
        s = i[:, None] + i[None, :]
        ok &= bool(np.array_equal(Z, 2.0 / (s ** 3 - s)))
        k = min(T, 8) if T <= 50 else 10
        bank = compute_filter_bank.__wrapped__(T, k)
        for h in range(k):
            worst_res = max(worst_res, float(np.linalg.norm(Z @ bank.filters[h] - bank.eigenvalues[h] * bank.filters[h])))
        if T <= 50:
            w, V = scipy.linalg.eigh(Z)
            w, V = w[::-1][:k], V[:, ::-1][:, :k]
            worst_val = max(worst_val, float(np.max(np.abs(bank.eigenvalues - w))))
            for h in range(k):
                worst_vec = max(worst_vec, min(float(np.max(np.abs(bank.filters[h] - sg * V[:, h]))) for sg in (1, -1)))
    dt = time.perf_counter() - t0
    ok = ok and worst_res <= 1e-8 and worst_val <= 1e-9 and worst_vec <= 1e-9 and dt <= 5.0
    return ok, (f"entries exact; max residual {worst_res:.2e}; oracle eigenvalue gap {worst_val:.2e}, "
                f"eigenvector gap {worst_vec:.2e}; {dt:.2f}s")


# ---------------------------------------------------------------- 2

def criterion_2():
    t0 = time.perf_counter()
    worst = max(fd_gradient_check(seed, mode) for seed in range(60) for mode in ("scalar", "matrix"))
    dt = time.perf_counter() - t0
    return worst <= 1e-5 and dt <= 10.0, f"120 instances, worst relative error {worst:.2e}; {dt:.2f}s"


# ---------------------------------------------------------------- 3

def criterion_3():
    t0 = time.perf_counter()
    worst, texts = 0.0, []
    for s in range(20):
        d = 2 + s % 5
        system = random_stable_lds(d, 2, 2, seed=100 + s)
        cfg = {"seed": s, "T": 500, "system": {"generator": "explicit", **system.to_dict()},
               "inputs": {"kind": "gaussian", "seed": 200 + s},
               "predictors": [{"name": "compiled_ar", "type": "compiled", "mode": "ar"}]}
        tr = run_experiment(cfg)
        scale = float(np.max(np.linalg.norm(tr.y, axis=1)))
        resid = float(np.max(np.linalg.norm(tr.predictions["compiled_ar"] - tr.y, axis=1)))
        worst = max(worst, resid / scale)
        texts.append(_trace_text(tr))
    dt = time.perf_counter() - t0
    return worst <= 1e-6 and dt <= 10.0, f"20 systems d<=6, worst residual / max|y| = {worst:.2e}; {dt:.2f}s", texts


# ---------------------------------------------------------------- 4

def criterion_4():
    t0 = time.perf_counter()
    system = random_rotation_lds(4, 2, 2, seed=1, radius=0.9)
    p = min_phase_polynomial(diagonalize(system.A).phases)
    rows = []

    def err(k, W):
        e = wavefilter_compile(system, p, compute_filter_bank(200, k), W).report["max_error"]
        rows.append([len(rows), k, W, e])
        return e

    ks = [err(k, 128) for k in (5, 10, 20, 40)]
    Ws = [err(20, W) for W in (8, 32, 128)]
    dt = time.perf_counter() - t0
    mono = lambda v: all(b <= 1.1 * a for a, b in zip(v, v[1:]))  # noqa: E731
    ok = mono(ks) and mono(Ws) and ks[-1] < WAVEFILTER_ERROR_BOUND and dt <= 60.0
    detail = (f"k sweep {[round(v, 4) for v in ks]}, W sweep {[round(v, 4) for v in Ws]}, "
              f"error at (k=40, W=128) {ks[-1]:.4f} < {WAVEFILTER_ERROR_BOUND}; {dt:.2f}s")
    return ok, detail, [_csv_text(["row", "k", "W", "max_error"], rows)]


# ---------------------------------------------------------------- 5

def criterion_5():
    rng = np.random.default_rng(5)
    ok, worst, rows = True, 0.0, []
    bank = compute_filter_bank(64, 2)
    for case in range(50):
        tau, u = int(rng.integers(1, 11)), int(rng.integers(1, 31))
        m = int(rng.integers(1, 4))
        theta = PseudoLDS(np.zeros((3, 2, m, 1)), np.zeros((3, 2, m, 1)), rng.normal(size=tau), np.zeros((tau, m, 1)))
        fmap = FeatureMap(bank, 3, tau)
        xi = rng.normal(size=m)
        hist = SeriesHistory(1, m)
        for t in range(1, u + tau + 6):
            hist.push_input([0.0])
            yhat = predict(theta, fmap.features(hist))
            if u < t <= u + tau:
                gap = abs(np.linalg.norm(yhat) - abs(theta.beta[t - u - 1]) * np.linalg.norm(xi))
                worst = max(worst, gap)
            else:
                ok &= bool(np.all(yhat == 0.0))
            rows.append([case, tau, u, t, float(np.linalg.norm(yhat))])
            hist.observe(xi if t == u else np.zeros(m))
    ok = ok and worst <= 1e-12
    return ok, f"50 (tau, u) cases, zero region exact, worst magnitude gap {worst:.1e}", \
        [_csv_text(["case", "tau", "u", "t", "norm_yhat"], rows)]


# ---------------------------------------------------------------- 6

def _ftrl_predictor(**over):
    return {"name": "algorithm1", "type": "algorithm1", "mode": "ftrl_theory", "W": 8, "k": 5, "tau": 4,
            "beta_mode": "scalar", **over}


def criterion_6():
    t0 = time.perf_counter()
    cfg = {"seed": 0, "T": 2000, "system": {"generator": "rotation", "d": 4, "n": 2, "m": 2, "seed": 0},
           "inputs": {"kind": "gaussian", "seed": 1},
           "predictors": [_ftrl_predictor(),
                          {"name": "compiled", "type": "compiled", "mode": "wavefilter", "W": 8, "k": 5}],
           "metrics": {"comparator": "compiled"}}
    tr = run_experiment(cfg)
    c = np.cumsum(tr.losses["algorithm1"])
    regret = c - np.cumsum(tr.losses["compiled"])
    growth = [c[2 * T - 1] / c[T - 1] for T in (250, 500, 1000)]
    ratio = [regret[T - 1] / np.sqrt(T) for T in (250, 500, 1000, 2000)]
    dt = time.perf_counter() - t0
    ok = (all(g < 2 for g in growth) and all(np.isfinite(ratio))
          and all(b <= a for a, b in zip(ratio, ratio[1:])) and dt <= 300.0)
    detail = (f"loss(2T)/loss(T) {[round(float(g), 6) for g in growth]}, regret/sqrt(T) "
              f"{[round(float(r), 3) for r in ratio]}; {dt:.1f}s")
    return ok, detail, [_trace_text(tr)]


# ---------------------------------------------------------------- 7

def criterion_7():
    t0 = time.perf_counter()
    budgets = np.array([0.0, 1.0, 4.0, 16.0])
    totals, texts = [], []
    for L in budgets:
        cfg = {"seed": 0, "T": 500, "system": {"generator": "rotation", "d": 4, "n": 2, "m": 2, "seed": 0},
               "inputs": {"kind": "gaussian", "seed": 1},
               "noise": {"pattern": "spread", "budget": float(L), "seed": 2},
               "predictors": [_ftrl_predictor()]}
        tr = run_experiment(cfg)
        totals.append(float(np.sum(tr.losses["algorithm1"])))
        texts.append(_trace_text(tr))
    excess = np.array(totals) - totals[0]
    A = np.vstack([budgets, np.ones_like(budgets)]).T
    coef = np.linalg.lstsq(A, excess, rcond=None)[0]
    r2 = 1.0 - np.sum((excess - A @ coef) ** 2) / np.sum((excess - excess.mean()) ** 2)
    dt = time.perf_counter() - t0
    ok = r2 >= 0.8 and coef[0] > 0 and dt <= 300.0
    return ok, f"excess loss {[round(float(e), 2) for e in excess]}, slope {coef[0]:.2f}, R^2 {r2:.4f}; {dt:.1f}s", texts


# ---------------------------------------------------------------- 8

def criterion_8():
    t0 = time.perf_counter()
    ok, parts, texts = True, [], []
    for kind in ("gaussian", "block_impulse"):
        cfg = {"seed": 0, "T": 2000, "system": {"generator": "rotation", "d": 10, "n": 10, "m": 2, "seed": 0},
               "inputs": {"kind": kind, "seed": 1},
               "predictors": [{"name": "algorithm1", "type": "algorithm1", "W": 16, "k": 8, "tau": 10},
                              {"name": "ar_online", "type": "ar_online", "tau": 10},
                              {"name": "previous_output", "type": "previous_output"}],
               "metrics": {"median_window": 51, "final_fraction": 0.25}}
        tr = run_experiment(cfg)
        s = {k: v["final_smoothed_mse"] for k, v in tr.summary["predictors"].items()}
        ok &= s["algorithm1"] < s["ar_online"] and s["algorithm1"] < s["previous_output"]
        parts.append(f"{kind}: alg1 {s['algorithm1']:.2f} / ar {s['ar_online']:.2f} / prev {s['previous_output']:.1f}")
        texts.append(_trace_text(tr))
    dt = time.perf_counter() - t0
    return ok and dt <= 600.0, "; ".join(parts) + f"; {dt:.1f}s", texts


RERUNNABLE = {3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8}
_FIRST_RUN: dict = {}


def criterion_9():
    mismatched = []
    for n, fn in RERUNNABLE.items():
        first = _FIRST_RUN.get(n)
        if first is None:
            first = fn()[2]
        again = fn()[2]
        if again != first:
            mismatched.append(n)
    ok = not mismatched
    return ok, "criteria 3-8 CSV outputs bit-identical on re-run" if ok else f"CSV mismatch in {mismatched}"


# ---------------------------------------------------------------- pytest entry points

def _check(n, result):
    ok, detail = result[0], result[1]
    if n in RERUNNABLE:
        _FIRST_RUN[n] = result[2]
    _report(n, ok, detail)
    assert ok, detail


def test_criterion_1_hankel():
    _check(1, criterion_1())


def test_criterion_2_gradient():
    _check(2, criterion_2())


def test_criterion_3_ar_compile():
    _check(3, criterion_3())


def test_criterion_4_wavefilter_compile():
    _check(4, criterion_4())


def test_criterion_5_perturbation_locality():
    _check(5, criterion_5())


@pytest.mark.slow
def test_criterion_6_regret_growth():
    _check(6, criterion_6())


@pytest.mark.slow
def test_criterion_7_noise_scaling():
    _check(7, criterion_7())


@pytest.mark.slow
def test_criterion_8_ordinal():
    _check(8, criterion_8())


@pytest.mark.slow
def test_criterion_9_determinism():
    _check(9, criterion_9())


if __name__ == "__main__":
    failed = 0
    for n, fn in enumerate((criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                            criterion_6, criterion_7, criterion_8, criterion_9), start=1):
        res = fn()
        if n in RERUNNABLE:
            _FIRST_RUN[n] = res[2]
        _report(n, res[0], res[1])
        failed += not res[0]
    sys.exit(1 if failed else 0)
