import csv
import io

import numpy as np
import pytest

from gpestab.spectral import classify
from gpestab.stationary import exact_sn_state
from gpestab.sweep import SWEEP_FIELDS, SweepPlan, evaluate_point, records_to_csv, run_sweep


def k_plan(**kw):
    ks = tuple(np.linspace(0.1, 0.9, 9))
    return SweepPlan(axes=(("k", ks),), fixed={"V0": -1.0, "g1": 1.0}, n_points=64, **kw)


def test_k_trend():
    recs = run_sweep(k_plan())
    assert [r["status"] for r in recs] == ["ok"] * 9
    for r in recs:
        assert r["mu_minus_mu_s"] == pytest.approx(r["k"] ** 2 / 2, abs=1e-10)
        assert r["classification"] == "Stable"
    gaps = [r["mu_minus_mu_s"] for r in recs]
    assert np.all(np.diff(gaps) > 0)


def test_single_point_equals_direct_classify():
    plan = SweepPlan(axes=(("k", (0.5,)),), fixed={"V0": -2.0}, n_points=64)
    (rec,) = run_sweep(plan)
    s = exact_sn_state(-2.0, 0.5, 1.0, n_points=64)
    v = classify(s).as_record()
    for key in ("alpha_g", "beta_g", "mu_s", "lambda_growth", "classification", "route"):
        assert rec[key] == v[key]


def test_two_axis_spot_checks():
    plan = SweepPlan(axes=(("V0", (-1.0, -2.0, -3.0)), ("k", (0.3, 0.6, 0.9))), n_points=64)
    recs = run_sweep(plan)
    assert len(recs) == 9
    for rec in recs[::2]:
        single, _ = evaluate_point({"V0": rec["V0"], "k": rec["k"]}, plan)
        assert single["mu"] == rec["mu"]
        assert single["alpha_g"] == rec["alpha_g"]


def test_fixed_mu_warm_start_row():
    plan = SweepPlan(axes=(("mu", (1.5, 2.0, 2.5, 3.0)),), fixed={"V0": -1.0, "k": 0.5}, n_points=64,
                     backend="fd")
    recs = run_sweep(plan)
    assert all(r["status"] == "ok" for r in recs)
    assert all(r["residual"] < 1e-9 for r in recs)
    assert np.all(np.diff([r["N"] for r in recs]) > 0)


def test_fixed_N_axis():
    plan = SweepPlan(axes=(("N", (1.0, 10.0)),), fixed={"V0": -1.0, "k": 0.5}, n_points=48, backend="fd")
    recs = run_sweep(plan)
    assert all(r["status"] == "ok" for r in recs)
    assert recs[0]["mu"] < recs[1]["mu"]


def test_failures_are_recorded_not_dropped():
    plan = SweepPlan(axes=(("V0", (-1.0, -0.01, -0.25)),), fixed={"k": 0.5}, n_points=32)
    with pytest.warns(UserWarning):
        recs = run_sweep(plan)
    assert [r["status"] for r in recs] == ["ok", "invalid", "trivial"]
    assert "V0" in recs[1]["message"] or "k^2" in recs[1]["message"]


def test_csv_deterministic_and_complete():
    a = records_to_csv(run_sweep(k_plan()), "header")
    b = records_to_csv(run_sweep(k_plan()), "header")
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "# header"
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert tuple(rows[0]) == SWEEP_FIELDS
    assert len(rows) == 9


def test_parallel_matches_serial():
    plan = SweepPlan(axes=(("V0", (-1.0, -2.0)), ("k", (0.3, 0.6))), n_points=48)
    par = SweepPlan(axes=plan.axes, n_points=48, workers=2)
    assert records_to_csv(run_sweep(plan)) == records_to_csv(run_sweep(par))


@pytest.mark.parametrize("kwargs", [
    dict(axes=()),
    dict(axes=(("k", (0.1,)), ("V0", (-1.0,)), ("g1", (1.0,)), ("mu", (1.0,)))),
    dict(axes=(("q", (0.1,)),), fixed={"V0": -1.0}),
    dict(axes=(("k", (0.1,)), ("k", (0.2,))), fixed={"V0": -1.0}),
    dict(axes=(("k", (0.1,)),), fixed={"V0": -1.0, "k": 0.2}),
    dict(axes=(("k", ()),), fixed={"V0": -1.0}),
    dict(axes=(("k", (0.1,)),), fixed={"V0": -1.0, "mu": 1.0, "N": 1.0}),
    dict(axes=(("k", (0.1,)),)),
    dict(axes=(("k", tuple(np.linspace(0.1, 0.9, 20))),), fixed={"V0": -1.0}, max_points=10),
])
def test_plan_validation(kwargs):
    with pytest.raises(ValueError):
        SweepPlan(**kwargs)


def test_period_count_does_not_change_per_cell_results():
    one = run_sweep(SweepPlan(axes=(("k", (0.7,)),), fixed={"V0": -1.0}, n_points=32))[0]
    two = run_sweep(SweepPlan(axes=(("k", (0.7,)),), fixed={"V0": -1.0}, n_points=64, n_periods=2))[0]
    assert two["status"] == "ok"
    assert two["mu"] == one["mu"]
    assert two["N"] == pytest.approx(one["N"], rel=1e-12)
    assert two["mu_s"] == pytest.approx(one["mu_s"], abs=1e-12)
