"""Command-line entry point: ``wavecast <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .compilers import characteristic_polynomial, min_phase_polynomial, ar_theta, wavefilter_compile
from .hankel import compute_filter_bank
from .lds import LinearDynamicalSystem, diagonalize


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _write_json(path, doc):
    text = json.dumps(harness._jsonable(doc), indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def cmd_filters(args):
    bank = compute_filter_bank(args.horizon, args.count)
    doc = json.loads(bank.to_json())
    _write_json(args.out, doc)
    return {"out": args.out, "T": bank.T, "k": bank.k, "floored": bank.n_floored}


def cmd_simulate(args):
    cfg = harness.load_config(args.config)
    return harness.write_simulation(cfg, args.out)


def cmd_compile(args):
    with open(args.system) as fh:
        doc = json.load(fh)
    system = LinearDynamicalSystem.from_dict(doc.get("system", doc))
    if args.mode == "ar":
        p = characteristic_polynomial(system.A)
        theta = ar_theta(system, p, W=args.W, k=args.k)
        report = {"mode": "ar", "tau": p.tau, "p_coeffs": list(p.coeffs)}
    else:
        p = min_phase_polynomial(diagonalize(system.A).phases)
        bank = compute_filter_bank(args.horizon, args.k)
        comp = wavefilter_compile(system, p, bank, args.W, validation_seed=args.seed)
        theta, report = comp.theta, dict(comp.report, mode="wavefilter")
    _write_json(args.out, {"theta": theta.to_dict(), "report": report})
    return {"out": args.out, "report": report}


def cmd_run(args):
    cfg = harness.load_config(args.config)
    out = args.out or cfg.get("output_dir") or str(Path(args.config).with_suffix(""))
    res = harness.run_and_emit(cfg, out)
    return {"paths": res["paths"], "predictors": res["summary"]["predictors"]}


def cmd_sweep(args):
    return harness.run_sweep(args.configs, args.out)


def cmd_regret(args):
    return harness.regret_from_csv(args.trace, args.comparator, args.predictor, args.comparator_predictor)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="wavecast", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("filters", help="compute a wave-filter bank")
    p.add_argument("--horizon", "-T", type=int, required=True)
    p.add_argument("--count", "-k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filters)

    p = sub.add_parser("simulate", help="simulate the system of a config and write its trace")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compile", help="compile a known system into pseudo-LDS parameters")
    p.add_argument("--system", required=True)
    p.add_argument("--mode", choices=("ar", "wavefilter"), default="ar")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--W", type=int, default=32)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run", help="run one online experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every config in a directory")
    p.add_argument("--configs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("regret", help="regret of one trace against a comparator trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--comparator", required=True)
    p.add_argument("--predictor")
    p.add_argument("--comparator-predictor")
    p.set_defaults(func=cmd_regret)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        result = args.func(args)
    except SystemExit:
        raise
    except BaseException as exc:  # noqa: BLE001 - every failure becomes structured stderr
        if isinstance(exc, KeyboardInterrupt):
            raise
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1 if not isinstance(exc, CliError) else 2
    sys.stdout.write(json.dumps(harness._jsonable(result), indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
