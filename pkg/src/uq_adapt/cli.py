"""Command-line entry point: ``uq-adapt {run, resume, report, oracle}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .driver import resume, run_adaptive, uq_report
from .evaluator import EvaluatorError
from .oracle import analytic_left_share, benchmark_mc
from .param_space import ConfigError, parse_config
from .rundir import RunDirectory, RunDirectoryError, csv_text

EXIT_OK, EXIT_ERROR, EXIT_EXHAUSTED = 0, 1, 2


def _load_config(path):
    return parse_config(Path(path).read_text())


def _progress(rec, conv):
    modes = " ".join(f"{k}={v:.2f}" for k, v in rec.tracked.items() if k.startswith("mode"))
    msg = f"level {rec.level:3d}  ns={rec.ns:4d}  k={rec.k_retained}  {modes}"
    if conv is not None and conv.variances:
        worst = max(conv.variances.items(), key=lambda kv: kv[1] if not kv[0].startswith("mode") else -1)
        msg += f"  max Var_S={worst[1]:.2e} ({worst[0]})"
    print(msg, flush=True)


def _finish(state, report) -> int:
    print(f"status: {state.status} after {state.level} levels, ns={state.ns}, "
          f"expensive evaluations this session: {state.n_evaluations}")
    _print_report(report)
    return EXIT_OK if state.status == "converged" else EXIT_EXHAUSTED


def _f(v) -> str:
    return "    n/a" if v is None else f"{v:7.4f}"


def _print_report(report):
    print("mode shares: " + ", ".join(f"mode{c}={s:.2f}%" for c, s in enumerate(report.mode_shares)))
    print(f"QoI mean={report.qoi_mean:.6g} variance={report.qoi_variance:.6g} std={report.qoi_std:.6g}")
    for tab in report.sobol:
        nd = len(tab["first"])
        print(f"component {tab['component']} Sobol indices (clipped to [0, 1])")
        print("  input   first   total")
        for i in range(nd):
            print(f"  h{i + 1:<5d} {_f(tab['first'][i])} {_f(tab['total'][i])}")
        top = sorted(((k, v) for k, v in tab["second"].items() if v is not None), key=lambda kv: -kv[1])[:3]
        print("  largest second order: " + ", ".join(f"S{k.replace(',', '_')}={v:.4f}" for k, v in top))


def _write_report_files(out: Path, report):
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    rows = []
    for tab in report.sobol:
        c = str(tab["component"])
        rows += [[c, "first", str(i + 1), "", v] for i, v in enumerate(tab["first"])]
        rows += [[c, "total", str(i + 1), "", v] for i, v in enumerate(tab["total"])]
        rows += [[c, "second", *k.split(","), v] for k, v in tab["second"].items()]
    (out / "report_sobol.csv").write_text(csv_text(["component", "kind", "i", "j", "value"], rows))
    if report.reconstructions:
        d = len(report.reconstructions[0]["x"])
        (out / "report_fields.csv").write_text(csv_text(
            ["row", "qoi", *[f"x{j + 1}" for j in range(d)]],
            [[str(r), rec["qoi"], *rec["x"]] for r, rec in enumerate(report.reconstructions)]))


def _print_variograms(state):
    for m, km in enumerate(state.fit.bank.models, start=1):
        v = km.variogram
        print(f"component {m} spherical variogram: nugget={v.nugget:.4g} psill={v.psill:.4g} range={v.range:.4g}")
        if km.bins is not None:
            print("    lag      empirical   fitted    pairs")
            for lag, g, n in zip(km.bins.lags, km.bins.semivariance, km.bins.counts):
                print(f"  {lag:8.4f}  {g:10.4g}  {float(v(lag)):10.4g}  {int(n):6d}")


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    store = RunDirectory(args.out)
    state = resume(args.out, cfg) if store.exists() else None
    state, report = run_adaptive(cfg, args.out, state=state, progress=_progress)
    return _finish(state, report)


def cmd_resume(args) -> int:
    cfg = _load_config(args.config) if args.config else None
    state = resume(args.out, cfg)
    state, report = run_adaptive(cfg or state.config, args.out, state=state, progress=_progress)
    return _finish(state, report)


def cmd_report(args) -> int:
    state = resume(args.out)
    at = None
    if args.at:
        at = np.loadtxt(args.at, delimiter="," if args.at.endswith(".csv") else None, ndmin=2)
    report = uq_report(state, at=at)
    _write_report_files(Path(args.out), report)
    print(f"status: {state.status} after {state.level} levels, ns={state.ns}")
    _print_report(report)
    _print_variograms(state)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load_config(args.config)
    if cfg.nd != 6:
        raise ConfigError("the benchmark oracle needs a 6-dimensional input space")
    summary = benchmark_mc(cfg.space, args.n, args.seed)
    doc = summary.to_dict()
    doc["analytic_left_share"] = analytic_left_share()
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uq-adapt", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full adaptive run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue an interrupted run")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="optional config; must keep ncon and the input space")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("report", help="emit the UQ report of a run directory")
    p.add_argument("--out", required=True)
    p.add_argument("--at", help="file with input vectors (one per line) to reconstruct")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("oracle", help="brute-force Monte Carlo on the built-in benchmark")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, RunDirectoryError, EvaluatorError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
