"""Command line entry point: ``saacontrol {nominal,reference,study,report,bounds}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, build_problem, load_config
from .study import (
    bounds_table,
    rates_from_summary,
    read_records,
    run_nominal,
    run_reference,
    run_study,
    summarize,
    write_bounds,
    write_report,
    write_summary,
)

log = logging.getLogger("saacontrol")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config with [problem] [regularizer] [discretization] [solver] [study]")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=int, help="worker threads (0 = all cores)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="saacontrol", description="SAA ensemble optimal control experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("nominal", parents=[common], help="solve the nominal (mean-parameter) problem")
    sub.add_parser("reference", parents=[common], help="solve and cache the Sobol' reference problem")
    sub.add_parser("study", parents=[common], help="run SAA replications and fit convergence rates")
    rp = sub.add_parser("report", parents=[common], help="re-fit rates from an existing records CSV")
    rp.add_argument("records", type=Path)
    sub.add_parser("bounds", parents=[common], help="emit theoretical rate-bound curves")
    return p


def _config(args):
    cfg = load_config(args.config, args.overrides)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=str(args.out))
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads if args.threads > 0 else (os.cpu_count() or 1))
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out)

    if args.command == "nominal":
        report = run_nominal(cfg)
        write_report(report, out, "nominal")
        _print_report("nominal", report)
        return 0 if report.converged else 1

    if args.command == "reference":
        ref = run_reference(cfg, out / "reference")
        _print_report("reference", ref.report)
        return 0 if ref.report.converged else 1

    if args.command == "study":
        def progress(rec):
            log.info("N=%d rep=%d status=%s err=%.3e crit=%.3e", rec.N, rec.rep, rec.status, rec.value_err, rec.crit_ref)

        res = run_study(cfg, out=out, progress=progress)
        _print_rates(res["summary"], res["rates"])
        print(f"v_ref = {res['v_ref']!r}")
        return 0 if all(row["complete"] for row in res["summary"]) else 1

    if args.command == "report":
        records = read_records(args.records)
        summary = summarize(records)
        rates = rates_from_summary(summary)
        out.mkdir(parents=True, exist_ok=True)
        write_summary(summary, out / "summary.csv")
        (out / "rates_refit.json").write_text(json.dumps(rates, indent=1))
        _print_rates(summary, rates)
        return 0

    if args.command == "bounds":
        rows = bounds_table(cfg, build_problem(cfg))
        out.mkdir(parents=True, exist_ok=True)
        write_bounds(rows, out / "bounds.csv")
        for row in rows:
            print(f"N={row['N']:>6d}  value_bound={row['value_rate_bound']:.6e}  crit_bound={row['crit_rate_bound']:.6e}")
        return 0
    return 2


def _print_report(name, report):
    settings = report.provenance.get("settings", {})
    print(f"{name}: value={report.value!r} criticality={report.criticality:.3e} "
          f"iterations={report.iterations} converged={report.converged} alpha={settings.get('alpha')}")


def _print_rates(summary, rates):
    print(f"{'N':>6} {'mean|v-v_ref|':>14} {'se':>10} {'mean chi_ref':>14} {'se':>10} {'ok':>4}")
    for row in summary:
        print(f"{row['N']:>6d} {row['mean_value_err']:>14.5e} {row['se_value_err']:>10.3e} "
              f"{row['mean_crit']:>14.5e} {row['se_crit']:>10.3e} {row['n_ok']:>4d}")
    print(f"value rate slope: {rates['value']['slope']:.4f}")
    print(f"criticality rate slope: {rates['criticality']['slope']:.4f}")


if __name__ == "__main__":
    sys.exit(main())
