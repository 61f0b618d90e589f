import csv
import math
import os

import numpy as np
import pytest

import coxgp as cg
from coxgp.cli import main, read_events_csv, write_events_csv


def run(args):
    return main([str(a) for a in args])


def test_simulate_deterministic_and_in_domain(tmp_path):
    out = tmp_path / "events.csv"
    args = ["simulate", "--intensity", "toy2", "--n-observations", 3, "--seed", 5, "--out", out]
    assert run(args) == 0
    first = out.read_bytes()
    assert run(args) == 0
    assert out.read_bytes() == first

    pattern = read_events_csv(str(out))
    assert pattern.n_observations == 3
    events = pattern.events_concatenated()
    assert np.all((events >= 0.0) & (events <= 5.0))


def test_simulate_zero_table_intensity_header_only(tmp_path):
    table = tmp_path / "table.csv"
    table.write_text("x,value\n0,0\n1,0\n")
    out = tmp_path / "events.csv"
    code = run(
        ["simulate", "--intensity", "table", "--table-path", table, "--n-observations", 2, "--seed", 0, "--out", out]
    )
    assert code == 0
    assert out.read_text().strip() == "obs,x1"


def test_events_round_trip(tmp_path):
    # an empty observation between non-empty ones survives as an index gap
    rng = np.random.default_rng(0)
    pattern = cg.PointPattern((rng.uniform(0, 1, (4, 2)), np.empty((0, 2)), rng.uniform(0, 1, (2, 2))))
    path = tmp_path / "ev.csv"
    write_events_csv(pattern, str(path))
    back = read_events_csv(str(path))
    assert back.n_observations == 3
    assert np.array_equal(back.observations[0], pattern.observations[0])  # 17 digits round-trip
    assert back.observations[1].shape == (0, 2)
    assert np.array_equal(back.observations[2], pattern.observations[2])


def _write_config(path, **kv):
    with open(path, "w") as fh:
        for k, v in kv.items():
            fh.write(f"{k} = {v}\n")


def test_fit_pipeline_and_determinism(tmp_path):
    events = tmp_path / "events.csv"
    assert run(["simulate", "--intensity", "toy2", "--n-observations", 5, "--seed", 1, "--out", events]) == 0

    cfg = tmp_path / "fit.cfg"
    _write_config(
        cfg,
        domain="0:5",
        m=12,
        constraints="nonnegative",
        variance=9.0,
        lengthscales=0.6,
        eta=1e-2,
        samples=120,
        burnin=40,
        orthant_mc=32,
        seed=3,
        eval_grid=50,
        chain_out="true",
    )
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    for out in (out1, out2):
        assert run(["fit", "--config", cfg, "--events", events, "--out-dir", out]) == 0
    assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()
    assert (out1 / "chain.csv").read_bytes() == (out2 / "chain.csv").read_bytes()

    with open(out1 / "summary.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x1", "mean", "q05", "q50", "q95"]
    assert len(rows) == 51
    q05, q50, q95 = (np.array([float(r[i]) for r in rows[1:]]) for i in (2, 3, 4))
    assert np.all(q05 <= q50) and np.all(q50 <= q95)

    chain = np.loadtxt(out1 / "chain.csv", delimiter=",", skiprows=1)
    assert chain.shape == (120, 12)
    assert chain.min() >= -1e-9


def test_fit_then_evaluate_round_trip(tmp_path):
    events = tmp_path / "events.csv"
    assert run(["simulate", "--intensity", "toy3", "--n-observations", 40, "--seed", 2, "--out", events]) == 0
    out = tmp_path / "fit"
    code = run(
        ["fit", "--events", events, "--domain", "0:100", "--m", 25, "--constraints", "nonnegative",
         "--variance", 4.0, "--lengthscales", 12.0, "--eta", 1e-3, "--samples", 400, "--burnin", 150,
         "--orthant-mc", 32, "--seed", 0, "--eval-grid", 200, "--out-dir", out]
    )
    assert code == 0
    metrics = tmp_path / "metrics.csv"
    code = run(["evaluate", "--intensity", "toy3", "--summary", out / "summary.csv", "--out", metrics,
                "--out-dir", tmp_path])
    assert code == 0
    with open(metrics, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert float(rows[0]["q2"]) > 0.5
    assert 0.0 <= float(rows[0]["acceptance_rate"]) <= 1.0


def test_evaluate_perfect_and_baseline_summaries(tmp_path):
    xs = np.linspace(0, 5, 60)
    truth = cg.toy_intensity(2, xs)
    perfect = tmp_path / "perfect.csv"
    with open(perfect, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "mean", "q05", "q50", "q95"])
        for x, t in zip(xs, truth):
            w.writerow(["%.17g" % x, "%.17g" % t, "", "", ""])
    out = tmp_path / "m1.csv"
    assert run(["evaluate", "--intensity", "toy2", "--summary", perfect, "--out", out, "--out-dir", tmp_path]) == 0
    with open(out, newline="") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["q2"]) == pytest.approx(1.0)

    flat = tmp_path / "flat.csv"
    with open(flat, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "mean", "q05", "q50", "q95"])
        for x in xs:
            w.writerow(["%.17g" % x, "%.17g" % truth.mean(), "", "", ""])
    out2 = tmp_path / "m2.csv"
    assert run(["evaluate", "--intensity", "toy2", "--summary", flat, "--out", out2, "--out-dir", tmp_path]) == 0
    with open(out2, newline="") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["q2"]) == pytest.approx(0.0, abs=1e-12)


def test_evaluate_replicate_directory_aggregates(tmp_path):
    xs = np.linspace(0, 5, 30)
    truth = cg.toy_intensity(2, xs)
    for i, wobble in enumerate((0.0, 0.5)):
        rep = tmp_path / "reps" / f"rep{i:02d}"
        os.makedirs(rep)
        with open(rep / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "mean", "q05", "q50", "q95"])
            for x, t in zip(xs, truth):
                w.writerow(["%.17g" % x, "%.17g" % (t + wobble), "", "", ""])
    out = tmp_path / "agg.csv"
    assert run(["evaluate", "--intensity", "toy2", "--summary-dir", tmp_path / "reps", "--out", out,
                "--out-dir", tmp_path]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[-2][0] == "aggregate_mean"
    assert rows[-1][0] == "aggregate_std"
    q2s = [float(r[1]) for r in rows[1:3]]
    assert float(rows[-2][1]) == pytest.approx(np.mean(q2s), rel=1e-12)


def test_exit_code_config_error(tmp_path):
    # missing events file key
    assert run(["fit", "--domain", "0:1", "--m", 5, "--variance", 1.0, "--lengthscales", 0.3]) == 2
    # unknown config key
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("wibble = 3\n")
    assert run(["simulate", "--config", cfg, "--intensity", "toy2"]) == 2


def test_exit_code_malformed_events(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("obs,x1\n1,not_a_number\n")
    code = run(["fit", "--events", bad, "--domain", "0:5", "--m", 5,
                "--variance", 1.0, "--lengthscales", 0.3])
    assert code == 2


def test_exit_code_infeasible_constraints(tmp_path):
    events = tmp_path / "events.csv"
    assert run(["simulate", "--intensity", "toy2", "--n-observations", 1, "--seed", 0, "--out", events]) == 0
    code = run(["fit", "--events", events, "--domain", "0:5", "--m", 6,
                "--constraints", "nonincreasing,nondecreasing",
                "--variance", 1.0, "--lengthscales", 0.5, "--samples", 10, "--burnin", 0,
                "--out-dir", tmp_path / "x"])
    assert code == 4


def test_exit_code_numerical_failure(tmp_path):
    # dominating bound violated during thinning
    code = run(["simulate", "--intensity", "toy2", "--lambda-max", 0.5, "--n-observations", 1,
                "--seed", 0, "--out", tmp_path / "e.csv"])
    assert code == 3


def test_events_parse_error_reports_line():
    from coxgp.errors import EventsParseError

    err = EventsParseError("bad float", line_number=17)
    assert "line 17" in str(err)


def test_fit_empty_events_matches_tilted_prior(tmp_path):
    # with no events the posterior is the tilted prior N(-Gamma c, Gamma) on C+
    events = tmp_path / "empty.csv"
    events.write_text("obs,x1\n")
    out = tmp_path / "fit"
    code = run(
        ["fit", "--events", events, "--domain", "0:1", "--m", 10, "--constraints", "nonnegative",
         "--variance", 1.0, "--lengthscales", 0.3, "--eta", 0.5, "--samples", 5000, "--burnin", 1500,
         "--orthant-mc", 64, "--seed", 4, "--eval-grid", 10, "--out-dir", out]
    )
    assert code == 0
    pts, means = __import__("coxgp.cli", fromlist=["read_summary_csv"]).read_summary_csv(str(out / "summary.csv"))

    grid = cg.make_grid((0, 1), 10)
    system = cg.build_constraint_system([cg.ConstraintSpec.nonnegative()], grid)
    gamma = cg.covariance_matrix(grid, cg.KernelParams(1.0, (0.3,)))
    weights = cg.integration_weights(grid)
    problem = cg.TmvnProblem(-gamma @ weights, gamma, system)
    direct = cg.sample_tmvn_hmc(problem, system.feasible_point, 20_000, 9, initial_skip=10)
    oracle = cg.basis_matrix(pts, grid).dot(direct.T).mean(axis=1)
    assert np.max(np.abs(means - oracle)) < 0.08  # ~4 joint MC standard errors


def test_fit_replicates_fan_out_and_aggregate(tmp_path):
    events = tmp_path / "events.csv"
    assert run(["simulate", "--intensity", "toy2", "--n-observations", 4, "--seed", 6, "--out", events]) == 0
    out = tmp_path / "reps"
    code = run(
        ["fit", "--events", events, "--domain", "0:5", "--m", 10, "--variance", 9.0,
         "--lengthscales", 0.6, "--eta", 1e-2, "--samples", 80, "--burnin", 30, "--orthant-mc", 16,
         "--seed", 0, "--eval-grid", 40, "--replicates", 2, "--out-dir", out]
    )
    assert code == 0
    assert (out / "rep00" / "summary.csv").exists()
    assert (out / "rep01" / "summary.csv").exists()
    metrics = tmp_path / "m.csv"
    assert run(["evaluate", "--intensity", "toy2", "--summary-dir", out, "--out", metrics,
                "--out-dir", tmp_path]) == 0
    with open(metrics, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[-2][0] == "aggregate_mean" and len(rows) == 5  # header + 2 reps + 2 aggregates


def test_fit_two_dimensional_events(tmp_path):
    rng = np.random.default_rng(1)
    pattern = cg.PointPattern(tuple(rng.uniform(0, 1, (60, 2)) for _ in range(3)))
    events = tmp_path / "ev2d.csv"
    write_events_csv(pattern, str(events))
    out = tmp_path / "fit2d"
    code = run(
        ["fit", "--events", events, "--domain", "0:1,0:1", "--m", "6,6", "--constraints", "nonnegative",
         "--variance", 100.0, "--lengthscales", "0.4,0.4", "--eta", 1e-2, "--samples", 300,
         "--burnin", 100, "--orthant-mc", 32, "--seed", 2, "--eval-grid", 8, "--out-dir", out]
    )
    assert code == 0
    with open(out / "summary.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["x1", "x2", "mean"]
    assert len(rows) == 65  # 8x8 evaluation grid
    means = np.array([float(r[2]) for r in rows[1:]])
    # homogeneous rate 60: the posterior mean should sit near it
    assert abs(means.mean() - 60.0) < 12.0


def test_fit_auto_knot_rule(tmp_path):
    events = tmp_path / "events.csv"
    assert run(["simulate", "--intensity", "toy2", "--n-observations", 2, "--seed", 0, "--out", events]) == 0
    out = tmp_path / "auto"
    assert run(["fit", "--events", events, "--domain", "0:5", "--m", "auto",
                "--variance", 9.0, "--lengthscales", 2.5, "--eta", 1e-2, "--samples", 40,
                "--burnin", 10, "--orthant-mc", 16, "--seed", 1, "--eval-grid", 20,
                "--chain-out", "--out-dir", out]) == 0
    # 10 * range / lengthscale = 10 * 5 / 2.5 = 20 knots
    chain = np.loadtxt(out / "chain.csv", delimiter=",", skiprows=1)
    assert chain.shape[1] == 20
