import csv
import json
import math

import numpy as np
import pytest

from saacontrol.dynamics import Control
from saacontrol.ensemble import reference_criticality
from saacontrol.harness.cli import main
from saacontrol.harness.config import ConfigError, StudyConfig, apply_overrides, build_problem, load_config
from saacontrol.harness.study import (
    RECORD_COLUMNS,
    StudyRecord,
    fit_rate,
    rates_from_summary,
    read_records,
    run_nominal,
    run_reference,
    run_study,
    solve_samples,
    summarize,
    write_records,
)
from saacontrol.harness.svgplot import rate_plot
from saacontrol.sampling import SampleSet, nominal_point

SMALL = StudyConfig(q=10, n_grid=(4, 8, 16), replications=3, n_ref=64, seed=7)


def small_ini(tmp_path, extra=""):
    path = tmp_path / "small.ini"
    path.write_text(
        "[problem]\nname = oscillator\n\n[discretization]\nq = 10\n\n"
        "[study]\nn_grid = 4, 8, 16\nreplications = 3\nn_ref = 64\nseed = 7\n" + extra
    )
    return path


def synthetic_records(c=0.7, d=2.5, ns=(4, 8, 16, 32, 64), reps=3):
    return [StudyRecord(N, r, 0, 1.0, c / math.sqrt(N), d / math.sqrt(N), 1, "ok") for N in ns for r in range(reps)]


class TestConfig:
    def test_defaults(self):
        cfg = StudyConfig()
        assert cfg.n_grid == (4, 8, 16, 32, 64, 128, 256)
        assert cfg.replications == 50 and cfg.n_ref == 4096
        assert cfg.solver.tol == 1e-8

    def test_load_file(self, tmp_path):
        cfg = load_config(small_ini(tmp_path, "\n[solver]\ntol = 1e-7\nacceleration = yes\n"))
        assert cfg.q == 10 and cfg.n_grid == (4, 8, 16) and cfg.seed == 7
        assert cfg.solver.tol == 1e-7 and cfg.solver.acceleration is True

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match="colour"):
            load_config(small_ini(tmp_path, "colour = red\n"))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="plotting"):
            load_config(small_ini(tmp_path, "\n[plotting]\ndpi = 3\n"))

    def test_overrides(self):
        cfg = apply_overrides(StudyConfig(), ["regularizer.alpha=0.5", "study.n_grid=2,4", "solver.step_mode=fixed"])
        assert cfg.alpha == 0.5 and cfg.n_grid == (2, 4) and cfg.solver.step_mode == "fixed"
        with pytest.raises(ConfigError):
            apply_overrides(StudyConfig(), ["alpha=0.5"])
        with pytest.raises(ConfigError):
            apply_overrides(StudyConfig(), ["solver.tol=abc"])

    @pytest.mark.parametrize(
        "kw",
        [dict(n_grid=(8, 4)), dict(replications=1), dict(n_ref=256), dict(problem="pendulum"), dict(seed=-1)],
    )
    def test_invariants(self, kw):
        with pytest.raises(ConfigError):
            StudyConfig(**kw)

    def test_build_overrides(self):
        built = build_problem(StudyConfig(problem="vaccination", alpha=3.0, sigma=0.1, hi=0.5))
        assert built.spec.alpha == 3.0
        np.testing.assert_allclose(built.box.upper[0], 0.22)
        np.testing.assert_array_equal(built.spec.hi, [0.5])
        assert built.settings["alpha"] == 3.0

    def test_sigma_rejected_for_oscillator(self):
        with pytest.raises(ConfigError):
            build_problem(StudyConfig(sigma=0.1))

    def test_problem_key_ignores_study_size(self):
        assert StudyConfig().problem_key() == StudyConfig(replications=5, threads=3).problem_key()
        assert StudyConfig().problem_key() != StudyConfig(alpha=2.0).problem_key()


class TestFitRate:
    def test_exact(self):
        slope, _ = fit_rate([(1, 1.0), (4, 0.5), (16, 0.25)])
        assert slope == pytest.approx(-0.5, abs=1e-15)

    def test_single_n(self):
        with pytest.raises(ValueError):
            fit_rate([(4, 1.0), (4, 2.0)])

    def test_nonpositive_names_row(self):
        with pytest.raises(ValueError, match="row 1"):
            fit_rate([(4, 1.0), (8, 0.0), (16, 0.5)])

    def test_noisy_power_law(self):
        rng = np.random.default_rng(0)
        ns = np.array([4, 8, 16, 32, 64, 128, 256])
        for truth in (-0.5, -0.3, -1.1):
            means = 3.0 * ns**truth * (1 + rng.uniform(-1e-9, 1e-9, ns.size))
            assert fit_rate(zip(ns, means))[0] == pytest.approx(truth, abs=1e-6)


class TestSummary:
    def test_synthetic_injection_slope(self):
        rates = rates_from_summary(summarize(synthetic_records()))
        assert rates["value"]["slope"] == pytest.approx(-0.5, abs=1e-12)
        assert rates["criticality"]["slope"] == pytest.approx(-0.5, abs=1e-12)

    def test_means_recomputed(self):
        rng = np.random.default_rng(1)
        recs = [StudyRecord(N, r, 0, 0.0, rng.uniform(), rng.uniform(), 1, "ok") for N in (4, 8) for r in range(5)]
        for row in summarize(recs):
            vals = [r.value_err for r in recs if r.N == row["N"]]
            crits = [r.crit_ref for r in recs if r.N == row["N"]]
            assert row["mean_value_err"] == pytest.approx(sum(vals) / len(vals), rel=1e-15)
            assert row["mean_crit"] == pytest.approx(sum(crits) / len(crits), rel=1e-15)
            assert row["se_value_err"] == pytest.approx(np.std(vals, ddof=1) / math.sqrt(5), rel=1e-12)

    def test_failed_rows_marked_incomplete(self):
        recs = synthetic_records(ns=(4, 8), reps=3)
        recs[0] = StudyRecord(4, 0, 0, math.nan, math.nan, math.nan, 0, "failed")
        rows = summarize(recs)
        assert rows[0]["n_ok"] == 2 and not rows[0]["complete"]
        assert rows[1]["complete"]

    def test_records_roundtrip(self, tmp_path):
        recs = synthetic_records()
        write_records(recs, tmp_path / "r.csv")
        back = read_records(tmp_path / "r.csv")
        assert back == recs
        with open(tmp_path / "r.csv") as fh:
            assert tuple(next(csv.reader(fh))) == RECORD_COLUMNS

    def test_svg(self):
        summary = summarize(synthetic_records())
        svg = rate_plot(summary, rates_from_summary(summary), title="t")
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


class TestRuns:
    def test_nominal_oscillator(self):
        rep = run_nominal(SMALL)
        assert rep.converged and rep.criticality <= SMALL.solver.tol
        assert rep.provenance["generator"] == "nominal"

    def test_nominal_equals_single_point_set(self):
        built = build_problem(SMALL)
        a = run_nominal(SMALL)
        b = solve_samples(SMALL, SampleSet(nominal_point(built.box)[None], "nominal", 0))
        assert a.value == b.value and np.array_equal(a.u_star.values, b.u_star.values)

    def test_nominal_vaccination_positive(self):
        rep = run_nominal(StudyConfig(problem="vaccination"))
        assert rep.converged and rep.value > 0

    def test_reference(self, tmp_path):
        ref = run_reference(SMALL)
        again = run_reference(SMALL)
        assert ref.value == again.value
        assert np.array_equal(ref.report.u_star.values, again.report.u_star.values)
        built = build_problem(SMALL)
        assert reference_criticality(built.problem, built.spec, ref.samples, ref.report.u_star) <= SMALL.solver.tol
        assert ref.value != run_nominal(SMALL).value

    def test_reference_cache(self, tmp_path):
        ref = run_reference(SMALL, tmp_path)
        assert (tmp_path / "reference.json").exists() and (tmp_path / "reference_samples.csv").exists()
        cached = run_reference(SMALL, tmp_path)
        assert cached.value == ref.value
        assert np.array_equal(cached.report.u_star.values, ref.report.u_star.values)

    def test_study_outputs(self, tmp_path):
        res = run_study(SMALL, out=tmp_path)
        for name in ("records.csv", "timings.csv", "summary.csv", "bounds.csv", "rates.json", "rates.svg"):
            assert (tmp_path / name).exists()
        recs = read_records(tmp_path / "records.csv")
        assert [(r.N, r.rep) for r in recs] == [(N, r) for N in (4, 8, 16) for r in range(3)]
        assert all(r.value_err >= 0 and r.crit_ref >= 0 and r.ok for r in recs)
        assert len({r.seed for r in recs}) == len(recs)
        meta = json.loads((tmp_path / "rates.json").read_text())
        assert meta["v_ref"] == res["v_ref"]
        assert meta["settings"]["alpha"] == 1.0


class TestCli:
    def test_nominal(self, tmp_path, capsys):
        assert main(["nominal", "--config", str(small_ini(tmp_path)), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "nominal.json").exists()
        assert (tmp_path / "o" / "nominal_control.csv").exists()
        assert "alpha=1.0" in capsys.readouterr().out

    def test_reference(self, tmp_path):
        assert main(["reference", "--config", str(small_ini(tmp_path)), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "reference" / "reference.json").exists()

    def test_bounds(self, tmp_path):
        assert main(["bounds", "--out", str(tmp_path), "--set", "study.n_grid=4,16"]) == 0
        with open(tmp_path / "bounds.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["N"]) for r in rows] == [4, 16]
        assert float(rows[1]["value_rate_bound"]) == pytest.approx(float(rows[0]["value_rate_bound"]) / 2, rel=1e-14)

    def test_report(self, tmp_path, capsys):
        write_records(synthetic_records(), tmp_path / "records.csv")
        assert main(["report", str(tmp_path / "records.csv"), "--out", str(tmp_path / "refit")]) == 0
        assert "value rate slope: -0.5000" in capsys.readouterr().out
        assert (tmp_path / "refit" / "summary.csv").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        assert main(["nominal", "--set", "solver.colour=red"]) == 2
        assert "colour" in capsys.readouterr().err

    def test_study_seed_flag(self, tmp_path):
        cfg = small_ini(tmp_path)
        assert main(["study", "--config", str(cfg), "--seed", "11", "--out", str(tmp_path / "o")]) == 0
        recs = read_records(tmp_path / "o" / "records.csv")
        assert len(recs) == 9


@pytest.mark.slow
def test_vaccination_reduced_study_trend(tmp_path):
    # a reduced grid keeps this affordable; only the direction of the trend is asserted
    cfg = StudyConfig(problem="vaccination", n_grid=(4, 16, 64), replications=6, n_ref=512, seed=3)
    res = run_study(cfg, out=tmp_path)
    rows = res["summary"]
    assert all(r["complete"] for r in rows)
    assert rows[-1]["mean_value_err"] < rows[0]["mean_value_err"]
    assert rows[-1]["mean_crit"] < rows[0]["mean_crit"]
