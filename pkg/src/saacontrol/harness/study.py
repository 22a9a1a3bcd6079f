"""Nominal, reference and SAA replication experiments with least-squares rate fits."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dynamics import Control
from ..ensemble import EnsembleProblem, reference_criticality
from ..sampling import SampleSet, derive_seed, nominal_set, sample_iid, sample_sobol
from ..solver import SolveReport, solve
from ..theory import TheoryConstants, value_rate_bound
from .config import StudyConfig, build_problem

__all__ = [
    "StudyRecord",
    "Reference",
    "run_nominal",
    "run_reference",
    "run_study",
    "fit_rate",
    "summarize",
    "rates_from_summary",
    "write_records",
    "read_records",
    "write_summary",
    "bounds_table",
    "RECORD_COLUMNS",
    "SUMMARY_COLUMNS",
    "BOUNDS_COLUMNS",
]

log = logging.getLogger(__name__)

RECORD_COLUMNS = ("N", "rep", "seed", "v_hat", "value_err", "crit_ref", "iters", "status")
TIMING_COLUMNS = ("N", "rep", "wall_ms")
SUMMARY_COLUMNS = ("N", "mean_value_err", "se_value_err", "mean_crit", "se_crit", "n_ok")
BOUNDS_COLUMNS = ("N", "value_rate_bound", "crit_rate_bound")


@dataclass(frozen=True)
class StudyRecord:
    N: int
    rep: int
    seed: int
    v_hat: float
    value_err: float
    crit_ref: float
    iters: int
    status: str
    wall_ms: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(eq=False)
class Reference:
    report: SolveReport
    samples: SampleSet

    @property
    def value(self) -> float:
        return self.report.value


def reference_seed(seed: int) -> int:
    return derive_seed(seed, 0)


def _zero(built) -> Control:
    return Control.zeros(built.grid)


def solve_samples(cfg: StudyConfig, samples: SampleSet, threads: int | None = None) -> SolveReport:
    built = build_problem(cfg)
    ep = EnsembleProblem(built.problem, built.spec, samples, cfg.threads if threads is None else threads)
    report = solve(ep, _zero(built), cfg.solver)
    report.provenance = {**samples.provenance, "problem": cfg.problem, "settings": built.settings}
    return report


def run_nominal(cfg: StudyConfig) -> SolveReport:
    """Solve the deterministic problem with every parameter at its mean."""
    built = build_problem(cfg)
    return solve_samples(cfg, nominal_set(built.box))


def _report_json(report: SolveReport) -> dict:
    return {
        "value": report.value,
        "criticality": report.criticality,
        "iterations": report.iterations,
        "converged": report.converged,
        "backtracks": report.backtracks,
        "step_min": report.step_min,
        "step_max": report.step_max,
        "provenance": report.provenance,
        "t_final": report.u_star.grid.t_final,
        "u_star": report.u_star.values.tolist(),
    }


def _report_from_json(d: dict, grid) -> SolveReport:
    return SolveReport(
        u_star=Control(grid, np.array(d["u_star"], dtype=float)),
        value=d["value"],
        criticality=d["criticality"],
        iterations=d["iterations"],
        converged=d["converged"],
        step_min=d["step_min"],
        step_max=d["step_max"],
        step_last=d["step_max"],
        backtracks=d["backtracks"],
        provenance=d["provenance"],
    )


def write_report(report: SolveReport, out: Path, stem: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.json").write_text(json.dumps(_report_json(report), indent=1))
    write_control_csv(report.u_star, out / f"{stem}_control.csv")


def write_control_csv(u: Control, path: Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_start", "t_end", *[f"u{j + 1}" for j in range(u.grid.m)]])
        for k, row in enumerate(u.values):
            w.writerow([repr(k * u.grid.dt), repr((k + 1) * u.grid.dt), *[repr(float(v)) for v in row]])


def run_reference(cfg: StudyConfig, cache_dir=None) -> Reference:
    """Solve the Sobol' reference problem, reusing a cached solution when the config matches."""
    built = build_problem(cfg)
    cache = Path(cache_dir) if cache_dir is not None else None
    key = cfg.problem_key()
    if cache is not None:
        path = cache / "reference.json"
        if path.exists():
            d = json.loads(path.read_text())
            if d.get("key") == key:
                samples = sample_sobol(built.box, cfg.n_ref, reference_seed(cfg.seed))
                log.info("using cached reference solution from %s", path)
                return Reference(_report_from_json(d["report"], built.grid), samples)
    samples = sample_sobol(built.box, cfg.n_ref, reference_seed(cfg.seed))
    report = solve_samples(cfg, samples)
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
        (cache / "reference.json").write_text(json.dumps({"key": key, "report": _report_json(report)}, indent=1))
        write_control_csv(report.u_star, cache / "reference_control.csv")
        samples.to_csv(cache / "reference_samples.csv")
    return Reference(report, samples)


def _one_replication(cfg: StudyConfig, built, ref: Reference, N: int, rep: int) -> StudyRecord:
    seed = derive_seed(cfg.seed, N, rep)
    t0 = time.perf_counter()
    try:
        samples = sample_iid(built.box, N, seed)
        ep = EnsembleProblem(built.problem, built.spec, samples, 1)
        report = solve(ep, _zero(built), cfg.solver)
        crit = reference_criticality(built.problem, built.spec, ref.samples, report.u_star)
        status = "ok" if report.converged else "nonconverged"
        rec = StudyRecord(N, rep, seed, report.value, abs(report.value - ref.value), crit, report.iterations, status)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        log.warning("replication N=%d rep=%d failed: %s", N, rep, exc)
        rec = StudyRecord(N, rep, seed, math.nan, math.nan, math.nan, 0, "failed")
    wall = 1e3 * (time.perf_counter() - t0)
    return StudyRecord(**{**rec.__dict__, "wall_ms": wall})


def run_study(cfg: StudyConfig, ref: Reference | None = None, out=None, progress=None) -> dict:
    """Run all ``(N, replication)`` solves and write records, summary, bounds and a plot.

    Returns a dict with ``records``, ``summary``, ``rates`` and the reference value.
    Replications run on ``cfg.threads`` worker threads; results are sorted by
    ``(N, rep)`` before anything is written, so the output does not depend on
    scheduling.
    """
    built = build_problem(cfg)
    out = Path(out if out is not None else cfg.out)
    if ref is None:
        ref = run_reference(cfg, out / "reference")
    tasks = [(N, r) for N in cfg.n_grid for r in range(cfg.replications)]

    def work(task):
        rec = _one_replication(cfg, built, ref, *task)
        if progress is not None:
            progress(rec)
        return rec

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            records = list(pool.map(work, tasks))
    else:
        records = [work(t) for t in tasks]
    records.sort(key=lambda r: (r.N, r.rep))

    summary = summarize(records)
    rates = rates_from_summary(summary)
    out.mkdir(parents=True, exist_ok=True)
    write_records(records, out / "records.csv")
    write_timings(records, out / "timings.csv")
    write_summary(summary, out / "summary.csv")
    write_bounds(bounds_table(cfg, built), out / "bounds.csv")
    meta = {
        "problem": cfg.problem,
        "settings": built.settings,
        "v_ref": ref.value,
        "reference_criticality": ref.report.criticality,
        "reference_provenance": ref.report.provenance,
        "replication_sampling": "iid uniform (plain Monte Carlo)",
        "rates": rates,
        "config": cfg.to_dict(),
    }
    (out / "rates.json").write_text(json.dumps(meta, indent=1, default=str))
    from .svgplot import rate_plot

    (out / "rates.svg").write_text(rate_plot(summary, rates, title=f"{cfg.problem}: SAA convergence"))
    return {"records": records, "summary": summary, "rates": rates, "v_ref": ref.value}


def summarize(records) -> list[dict]:
    """Per-N means and standard errors over successful replications."""
    by_n: dict[int, list[StudyRecord]] = {}
    for r in records:
        by_n.setdefault(r.N, []).append(r)
    rows = []
    for N in sorted(by_n):
        ok = [r for r in by_n[N] if r.ok]
        row = {"N": N, "n_ok": len(ok), "complete": len(ok) == len(by_n[N])}
        for col, name in (("value_err", "value_err"), ("crit_ref", "crit")):
            vals = np.array([getattr(r, col) for r in ok], dtype=float)
            if len(vals) == 0:
                mean = se = math.nan
            else:
                mean = float(np.mean(vals))
                se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
            row[f"mean_{name}"] = mean
            row[f"se_{name}"] = se
        rows.append(row)
    return rows


def fit_rate(points) -> tuple[float, float]:
    """Ordinary least squares fit of ``log(mean) = intercept + slope * log(N)``."""
    pts = [(float(n), float(v)) for n, v in points]
    for i, (n, v) in enumerate(pts):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"row {i} (N={n:g}) has nonpositive or non-finite mean {v!r}")
        if not n > 0:
            raise ValueError(f"row {i} has nonpositive N {n!r}")
    if len({n for n, _ in pts}) < 2:
        raise ValueError("need at least two distinct N to fit a rate")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    return slope, float(ym - slope * xm)


def rates_from_summary(summary) -> dict:
    out = {}
    for col, name in (("mean_value_err", "value"), ("mean_crit", "criticality")):
        pts = [(row["N"], row[col]) for row in summary if row["n_ok"] > 0]
        try:
            slope, intercept = fit_rate(pts)
        except ValueError as exc:
            log.warning("cannot fit %s rate: %s", name, exc)
            slope = intercept = math.nan
        out[name] = {"slope": slope, "intercept": intercept}
    return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path: Path, columns, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def write_records(records, path) -> None:
    _write_rows(path, RECORD_COLUMNS, [r.__dict__ for r in records])


def write_timings(records, path) -> None:
    _write_rows(path, TIMING_COLUMNS, [r.__dict__ for r in records])


def read_records(path) -> list[StudyRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"records file lacks columns {sorted(missing)}")
        return [
            StudyRecord(
                N=int(row["N"]),
                rep=int(row["rep"]),
                seed=int(row["seed"]),
                v_hat=float(row["v_hat"]),
                value_err=float(row["value_err"]),
                crit_ref=float(row["crit_ref"]),
                iters=int(row["iters"]),
                status=row["status"],
            )
            for row in reader
        ]


def write_summary(summary, path) -> None:
    _write_rows(path, SUMMARY_COLUMNS, summary)


def bounds_table(cfg: StudyConfig, built=None, tc: TheoryConstants | None = None, n_values=None) -> list[dict]:
    """Rate-bound curves over the N grid (constants default to 1 unless ``tc`` is given)."""
    built = built or build_problem(cfg)
    if tc is None:
        tc = TheoryConstants(r_psi=max(1.0, built.spec.r_psi), m=built.problem.m, alpha=built.spec.alpha)
    ns = np.asarray(n_values if n_values is not None else cfg.n_grid, dtype=float)
    vb = value_rate_bound(ns, tc.alpha, tc, kind="value")
    cb = value_rate_bound(ns, tc.alpha, tc, kind="criticality")
    return [
        {"N": int(n), "value_rate_bound": float(v), "crit_rate_bound": float(c)}
        for n, v, c in zip(ns, np.atleast_1d(vb), np.atleast_1d(cb))
    ]


def write_bounds(rows, path) -> None:
    _write_rows(path, BOUNDS_COLUMNS, rows)
