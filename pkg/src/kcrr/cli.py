"""Command-line entry point.

Subcommands:

    synth   run a synthetic benchmark plan
    real    run a real-data benchmark plan
    theory  run quadrature verification checks
    rate    run the empirical convergence-rate probe

Common flags: --plan, --out, --seed, --threads, --verbose.  Benchmark
subcommands write mae.csv, rsse.csv, tables.md and runlog.jsonl into the
output directory; theory and rate write theory.csv and runlog.jsonl.

Precedence for seed and output directory: command-line flag, then plan
file value, then the defaults (seed 42, directory ./out).  Exit codes:
0 success, 1 configuration or input error, 2 numerical failure.

Determinism: for a fixed plan and seed the CSV and markdown outputs are
byte-identical across runs and across --threads values.  The run log
contains wall-clock timings and is the only output that varies.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .data import NoiseFamily
from .evaluation import BenchmarkReport, load_plan, metric_csv_rows, run_benchmark
from .seeding import STREAM_THEORY, derive_rng
from .solver import SolverError
from .theory import (
    QUAD_DEFAULT,
    check_bayes,
    check_calibration,
    check_clipping_monotone,
    check_lipschitz,
    check_log_moment,
    check_variance_bound,
    format_reports,
    make_noise_model,
    rate_probe,
    rate_report,
    theory_csv_rows,
)

DEFAULT_SEED = 42
THEORY_CHECKS = ("calibration", "variance", "clipping", "bayes", "lipschitz", "logmoment")


class _UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; config errors must be exit 1
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="kcrr", description="Robust kernel regression benchmark and verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output directory (default: plan value or ./out)")
        p.add_argument("--seed", type=int, default=None, help=f"master seed (default: plan value or {DEFAULT_SEED})")
        p.add_argument("--threads", type=int, default=1, help="worker threads (default 1; results identical at any count)")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")

    for name, blurb in (("synth", "synthetic benchmark"), ("real", "real-data benchmark")):
        p = sub.add_parser(name, description=f"Run a {blurb} plan.")
        p.add_argument("--plan", required=True, help="path to a TOML benchmark plan")
        common(p)

    p = sub.add_parser("theory", description="Run quadrature verification checks.")
    p.add_argument("--checks", default=",".join(THEORY_CHECKS),
                   help=f"comma-separated subset of {','.join(THEORY_CHECKS)}")
    p.add_argument("--noise", default="gaussian,cauchy,pareto",
                   help="comma-separated noise families")
    p.add_argument("--scale", type=float, default=1.0, help="noise scale s (default 1)")
    p.add_argument("--bound", type=float, default=1.0, help="clipping bound M (default 1)")
    p.add_argument("--sigma", type=float, default=None,
                   help="loss scale; default: searched operative threshold (calibration, variance) or 1 (others)")
    p.add_argument("--profiles", type=int, default=100, help="random profiles per check (default 100)")
    p.add_argument("--cells", type=int, default=64, help="cells per profile (default 64)")
    common(p)

    p = sub.add_parser("rate", description="Run the convergence-rate probe.")
    p.add_argument("--n-list", default="100,200,400,800,1600,3200",
                   help="comma-separated training sizes (non-decreasing, >= 3 values)")
    p.add_argument("--reps", type=int, default=5, help="repetitions per size (default 5)")
    p.add_argument("--lambda0", type=float, default=1e-3, help="constant solver regularizer")
    p.add_argument("--gamma0", type=float, default=1.0, help="kernel length scale prefactor")
    common(p)
    return parser


def _write_csv(path: Path, rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def _fmt(mean: float, stderr: float) -> str:
    if not np.isfinite(mean):
        return "failed"
    return f"{mean:.4f} ± {stderr:.4f}"


def render_tables(report: BenchmarkReport) -> str:
    """One markdown table per metric; best mean per row bolded, ties all bold."""
    if not report.cells:
        raise ValueError("cannot render an empty report")
    ests = list(report.estimators)
    keys: list[tuple[str, str]] = []
    for c in report.cells:
        if (c.dataset, c.noise) not in keys:
            keys.append((c.dataset, c.noise))
    by_key = {(c.dataset, c.noise, c.estimator): c for c in report.cells}
    show_noise = any(noise != "-" for _, noise in keys)
    lines: list[str] = []
    for metric, title in (("mae", "Test MAE"), ("rsse", "Test RSSE")):
        lines.append(f"## {title}")
        lines.append("")
        head = ["dataset"] + (["noise"] if show_noise else []) + ests
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "|".join([" --- "] * len(head)) + "|")
        for ds, noise in keys:
            cells = [by_key.get((ds, noise, e)) for e in ests]
            means = [getattr(c, f"{metric}_mean") if c is not None else float("nan") for c in cells]
            finite = [m for m in means if np.isfinite(m)]
            best = min(finite) if finite else float("nan")
            row = [ds] + ([noise] if show_noise else [])
            for c, m in zip(cells, means):
                if c is None:
                    row.append("")
                    continue
                text = _fmt(m, getattr(c, f"{metric}_stderr"))
                row.append(f"**{text}**" if np.isfinite(m) and m == best else text)
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    return "\n".join(lines)


class _RunLog:
    def __init__(self, path: Path, verbose: bool):
        self._fh = open(path, "w", encoding="utf-8")
        self._verbose = verbose

    def write(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, default=str)
        self._fh.write(line + "\n")
        if self._verbose:
            print(line, file=sys.stderr)

    def close(self) -> None:
        self._fh.close()


def _resolve_out_seed(args, plan=None) -> tuple[Path, int]:
    out = args.out
    if out is None:
        out = getattr(plan, "out", None) if plan is not None else None
    out = Path(out) if out is not None else Path("out")
    seed = args.seed
    if seed is None:
        seed = getattr(plan, "seed", None) if plan is not None else None
    if seed is None:
        seed = DEFAULT_SEED
    out.mkdir(parents=True, exist_ok=True)
    return out, int(seed)


def _config_record(args, extra: dict) -> dict:
    record = {
        "phase": "config",
        "version": f"kcrr {__version__}",
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "command": args.command,
        "threads": args.threads,
    }
    record.update(extra)
    return record


def _run_benchmark_cmd(args) -> int:
    plan_path = Path(args.plan)
    if not plan_path.exists():
        raise FileNotFoundError(f"plan file not found: {plan_path}")
    plan = load_plan(plan_path)
    expected = "synthetic" if args.command == "synth" else "real"
    if plan.kind != expected:
        raise ValueError(f"{plan_path}: plan kind is '{plan.kind}' but the {args.command} subcommand expects '{expected}'")
    out, seed = _resolve_out_seed(args, plan)
    log = _RunLog(out / "runlog.jsonl", args.verbose)
    try:
        log.write(_config_record(args, {"plan": str(plan_path), "seed": seed, "out": str(out),
                                        "kind": plan.kind, "reps": plan.reps,
                                        "estimators": [e.value for e in plan.estimators]}))
        t0 = time.monotonic()
        report = run_benchmark(plan, seed, n_threads=max(1, args.threads), progress=log.write)
        _write_csv(out / "mae.csv", metric_csv_rows(report, "mae"))
        _write_csv(out / "rsse.csv", metric_csv_rows(report, "rsse"))
        (out / "tables.md").write_text(render_tables(report), encoding="utf-8")
        log.write({"phase": "done", "wall_s": time.monotonic() - t0,
                   "outputs": ["mae.csv", "rsse.csv", "tables.md"]})
    finally:
        log.close()
    failed = [c for c in report.cells if any(c.errors)]
    if failed and args.verbose:
        print(f"{len(failed)} cell(s) had failed repetitions; see runlog", file=sys.stderr)
    return 0


def _run_theory_cmd(args) -> int:
    names = [c.strip() for c in args.checks.split(",") if c.strip()]
    bad = [c for c in names if c not in THEORY_CHECKS]
    if bad:
        raise ValueError(f"unknown checks {bad}; available: {', '.join(THEORY_CHECKS)}")
    families = [NoiseFamily(f.strip()) for f in args.noise.split(",") if f.strip()]
    if not names or not families:
        raise ValueError("need at least one check and one noise family")
    out, seed = _resolve_out_seed(args)
    log = _RunLog(out / "runlog.jsonl", args.verbose)
    reports = []
    try:
        log.write(_config_record(args, {"seed": seed, "out": str(out), "checks": names,
                                        "noise": [f.value for f in families],
                                        "scale": args.scale, "bound": args.bound,
                                        "sigma": args.sigma}))
        for c_idx, name in enumerate(names):
            if name == "lipschitz":
                t0 = time.monotonic()
                rep = check_lipschitz(sigma=args.sigma or 1.0,
                                      rng=derive_rng(seed, STREAM_THEORY, c_idx, 0))
                reports.append(rep)
                log.write({"phase": "check", "check": name, "noise": "-",
                           "passed": rep.passed, "wall_s": time.monotonic() - t0})
                continue
            for f_idx, family in enumerate(families):
                model = make_noise_model(family, args.scale)
                rng = derive_rng(seed, STREAM_THEORY, c_idx, f_idx)
                t0 = time.monotonic()
                if name == "calibration":
                    rep = check_calibration(model, M=args.bound, sigma=args.sigma,
                                            n_profiles=args.profiles, n_cells=args.cells,
                                            rng=rng, settings=QUAD_DEFAULT)
                elif name == "variance":
                    rep = check_variance_bound(model, M=args.bound, sigma=args.sigma,
                                               n_profiles=args.profiles, n_cells=args.cells,
                                               rng=rng, settings=QUAD_DEFAULT)
                elif name == "clipping":
                    rep = check_clipping_monotone(model, M=args.bound, sigma=args.sigma or 1.0,
                                                  n_profiles=args.profiles, n_cells=args.cells,
                                                  rng=rng, settings=QUAD_DEFAULT)
                elif name == "bayes":
                    rep = check_bayes(model, sigma=args.sigma or 1.0, settings=QUAD_DEFAULT)
                else:
                    rep = check_log_moment(model, settings=QUAD_DEFAULT)
                reports.append(rep)
                log.write({"phase": "check", "check": name, "noise": family.value,
                           "passed": rep.passed, "measured": rep.measured,
                           "wall_s": time.monotonic() - t0})
        _write_csv(out / "theory.csv", theory_csv_rows(reports))
        log.write({"phase": "done", "outputs": ["theory.csv"]})
    finally:
        log.close()
    print(format_reports(reports), end="")
    return 0


def _run_rate_cmd(args) -> int:
    try:
        n_list = [int(v) for v in args.n_list.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"--n-list must be comma-separated integers, got {args.n_list!r}") from None
    out, seed = _resolve_out_seed(args)
    log = _RunLog(out / "runlog.jsonl", args.verbose)
    try:
        log.write(_config_record(args, {"seed": seed, "out": str(out), "n_list": n_list,
                                        "reps": args.reps, "lambda0": args.lambda0,
                                        "gamma0": args.gamma0}))
        t0 = time.monotonic()
        result = rate_probe(n_list, args.reps, seed, lambda0=args.lambda0, gamma0=args.gamma0)
        rep = rate_report(result)
        _write_csv(out / "theory.csv", theory_csv_rows([rep]))
        log.write({"phase": "rate", "slope": result.slope, "stderr": result.slope_stderr,
                   "mean_errors": dict(zip(map(str, result.n_values), result.mean_errors)),
                   "wall_s": time.monotonic() - t0})
        log.write({"phase": "done", "outputs": ["theory.csv"]})
    finally:
        log.close()
    print(format_reports([rep]), end="")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        if args.command in ("synth", "real"):
            return _run_benchmark_cmd(args)
        if args.command == "theory":
            return _run_theory_cmd(args)
        return _run_rate_cmd(args)
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(f"diagnostics: {exc.diagnostics}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
