"""Monte Carlo driver tests: determinism, aggregation, sweeps, tables."""

import csv
import io

import numpy as np
import pytest

from allopca import (
    CostLimitError,
    DegreesOfFreedomError,
    ExperimentPlan,
    FixedWeight,
    LargePLargeN,
    McResult,
    ModelSpec,
    OracleWeight,
    PluginRule,
    RegimeSpec,
    Traditional,
    WeakIdentifiability,
    consistency_sweep,
    emit_table,
    estimate_runtime_seconds,
    random_gamma,
    run_experiment,
    table1_plan,
    table2_plan,
    table3_plan,
)
from allopca.harness import DEFAULT_ROWS, default_label

BASIC_ROWS = (
    ("total(w=0.5)", FixedWeight(0.5)),
    ("residual(w=1)", FixedWeight(1.0)),
    ("regression(w=0)", FixedWeight(0.0)),
    ("plugin", PluginRule()),
    ("oracle", OracleWeight()),
)


def tiny_plan(reps=5, ns=(10, 12), rows=BASIC_ROWS, seed=0):
    return table1_plan(ns, replications=reps, seed=seed, rows=rows)


# --------------------------------------------------------------------------
# plan and result validation
# --------------------------------------------------------------------------


def test_default_rows_layout():
    labels = [label for label, _ in DEFAULT_ROWS]
    assert len(DEFAULT_ROWS) == 11
    assert labels[:3] == ["total(w=0.5)", "residual(w=1)", "regression(w=0)"]
    assert "plugin" in labels and "oracle" in labels
    assert len(set(labels)) == 11


def test_default_label():
    assert default_label(FixedWeight(0.3)) == "w=0.3"
    assert default_label(PluginRule()) == "plugin"
    assert default_label(OracleWeight()) == "oracle"


def test_plan_validation():
    spec = table1_plan((10,), 5, 0).points[0]
    with pytest.raises(ValueError):
        ExperimentPlan(points=(), point_labels=(), estimators=(FixedWeight(0.5),),
                       replications=5, master_seed=0)
    with pytest.raises(ValueError, match="unique"):
        ExperimentPlan(points=(spec,), point_labels=("n=10",),
                       estimators=(FixedWeight(0.3), FixedWeight(0.3)),
                       replications=5, master_seed=0)
    with pytest.raises(ValueError):
        ExperimentPlan(points=(spec,), point_labels=("n=10",),
                       estimators=(FixedWeight(0.3),), replications=0,
                       master_seed=0)
    with pytest.raises(ValueError):
        ExperimentPlan(points=(spec, spec), point_labels=("a", "a"),
                       estimators=(FixedWeight(0.3),), replications=1,
                       master_seed=0)
    # explicit labels allow duplicate specs
    plan = ExperimentPlan(points=(spec,), point_labels=("n=10",),
                          estimators=(FixedWeight(0.3), FixedWeight(0.3)),
                          estimator_labels=("first", "second"),
                          replications=2, master_seed=0)
    assert plan.estimator_labels == ("first", "second")


def test_mc_result_validation():
    ok = dict(point_labels=("a",), estimator_labels=("e1",),
              se_mse=np.zeros((1, 1)), avg_weight=np.full((1, 1), 0.5),
              weight_rows=(), metadata={})
    McResult(mean_mse=np.full((1, 1), 0.1), **ok)
    with pytest.raises(ValueError):
        McResult(mean_mse=np.full((1, 1), 2.5), **ok)
    with pytest.raises(ValueError):
        McResult(mean_mse=np.full((1, 2), 0.1), **ok)
    with pytest.raises(ValueError):
        McResult(mean_mse=np.full((1, 1), 0.1),
                 point_labels=("a",), estimator_labels=("e1",),
                 se_mse=np.full((1, 1), -0.5),
                 avg_weight=np.full((1, 1), 0.5), weight_rows=(), metadata={})


# --------------------------------------------------------------------------
# run_experiment
# --------------------------------------------------------------------------


def test_run_experiment_shapes_and_ranges():
    res = run_experiment(tiny_plan(reps=8))
    assert res.mean_mse.shape == (5, 2)
    assert np.all(res.mean_mse >= 0) and np.all(res.mean_mse <= 2)
    assert np.all(res.se_mse >= 0)
    assert np.all(res.avg_weight >= 0) and np.all(res.avg_weight <= 1)
    assert res.weight_rows == (3, 4)  # plugin and oracle
    for key in ("replications", "master_seed", "workers", "wall_seconds", "digests"):
        assert key in res.metadata
    assert set(res.metadata["digests"]) == {"n=10", "n=12"}


def test_run_experiment_single_replication_has_zero_se():
    res = run_experiment(tiny_plan(reps=1))
    assert np.all(res.se_mse == 0.0)


def test_run_experiment_deterministic():
    a = run_experiment(tiny_plan(reps=6))
    b = run_experiment(tiny_plan(reps=6))
    assert a.mean_mse.tobytes() == b.mean_mse.tobytes()
    assert a.se_mse.tobytes() == b.se_mse.tobytes()
    assert a.avg_weight.tobytes() == b.avg_weight.tobytes()
    assert a.metadata["digests"] == b.metadata["digests"]


def test_run_experiment_worker_count_invariance():
    serial = run_experiment(tiny_plan(reps=16), workers=1)
    threaded = run_experiment(tiny_plan(reps=16), workers=3)
    assert serial.mean_mse.tobytes() == threaded.mean_mse.tobytes()
    assert serial.se_mse.tobytes() == threaded.se_mse.tobytes()
    assert serial.metadata["digests"] == threaded.metadata["digests"]


def test_common_random_numbers_duplicate_weight_rows():
    rows = (("first", FixedWeight(0.4)), ("second", FixedWeight(0.4)),
            ("other", FixedWeight(0.1)))
    res = run_experiment(tiny_plan(reps=10, rows=rows))
    assert res.mean_mse[0].tobytes() == res.mean_mse[1].tobytes()
    assert res.mean_mse[0].tobytes() != res.mean_mse[2].tobytes()


def test_plugin_degrees_of_freedom_checked_before_running():
    spec = ModelSpec(p=3, q=5, n=7, mu=np.zeros(3), alpha=np.ones(5),
                     lambdas=np.array([2.0, 1.0, 1.0]),
                     gamma_basis=random_gamma(3, 0), master_seed=0)
    plan = ExperimentPlan(points=(spec,), point_labels=("n=7",),
                          estimators=(FixedWeight(0.5), PluginRule()),
                          replications=3, master_seed=0)
    with pytest.raises(DegreesOfFreedomError, match="n=7"):
        run_experiment(plan)
    # the same point is fine without the plug-in row
    fixed_only = ExperimentPlan(points=(spec,), point_labels=("n=7",),
                                estimators=(FixedWeight(0.5),),
                                replications=3, master_seed=0)
    res = run_experiment(fixed_only)
    assert res.mean_mse.shape == (1, 1)


def test_cost_guard():
    plan = tiny_plan(reps=1000)
    assert estimate_runtime_seconds(plan) > 0
    limited = table1_plan((10, 12), 1000, 0, rows=BASIC_ROWS,
                          cost_limit_seconds=1e-9)
    with pytest.raises(CostLimitError, match="exceeds"):
        run_experiment(limited)


def test_degenerate_model_is_uninformative():
    # flat spectrum and no signal: every weight performs equally poorly
    spec = ModelSpec(p=10, q=5, n=20, mu=np.zeros(10), alpha=np.zeros(5),
                     lambdas=np.ones(10), gamma_basis=random_gamma(10, 1),
                     master_seed=0)
    rows = (("total(w=0.5)", FixedWeight(0.5)), ("residual(w=1)", FixedWeight(1.0)),
            ("regression(w=0)", FixedWeight(0.0)), ("w=0.3", FixedWeight(0.3)),
            ("plugin", PluginRule()))
    plan = ExperimentPlan(points=(spec,), point_labels=("n=20",),
                          estimators=tuple(r for _, r in rows),
                          estimator_labels=tuple(lab for lab, _ in rows),
                          replications=200, master_seed=0)
    res = run_experiment(plan)
    means = res.mean_mse[:, 0]
    assert np.all(means >= 1.0)
    assert means.max() - means.min() <= 0.25
    assert np.all(res.mean_mse <= 2.0)


def test_oracle_weight_never_loses_badly():
    res = run_experiment(table1_plan((500,), 500, 0, rows=BASIC_ROWS))
    labels = list(res.estimator_labels)
    oracle = res.mean_mse[labels.index("oracle"), 0]
    total = res.mean_mse[labels.index("total(w=0.5)"), 0]
    reg = res.mean_mse[labels.index("regression(w=0)"), 0]
    assert oracle <= 1.05 * total
    assert oracle <= 1.05 * reg


def test_standard_errors_shrink_like_root_replications():
    rows = BASIC_ROWS[:4]
    small = run_experiment(table1_plan((20, 50), 400, 0, rows=rows))
    large = run_experiment(table1_plan((20, 50), 800, 0, rows=rows))
    ratios = (large.se_mse / small.se_mse).ravel()
    assert 0.6 <= np.median(ratios) <= 0.82


# --------------------------------------------------------------------------
# consistency sweeps
# --------------------------------------------------------------------------


def test_sweep_requires_three_grid_points():
    with pytest.raises(ValueError, match="3 grid points"):
        consistency_sweep(RegimeSpec(Traditional(), (20, 50)), 5, 0)


def test_sweep_traditional_regime():
    sweep = consistency_sweep(RegimeSpec(Traditional(), (20, 60, 180)),
                              replications=200, seed=0, rows=BASIC_ROWS)
    assert sweep.verdicts["total(w=0.5)"] == "decreasing-to-zero"
    assert sweep.verdicts["regression(w=0)"] == "decreasing-to-zero"
    assert sweep.verdicts["plugin"] == "decreasing-to-zero"


def test_sweep_weak_identifiability_eta_one():
    regime = RegimeSpec(WeakIdentifiability(1.0), (20, 60, 180))
    sweep = consistency_sweep(regime, replications=200, seed=0, rows=BASIC_ROWS)
    assert sweep.verdicts["residual(w=1)"] == "non-vanishing"
    assert sweep.verdicts["regression(w=0)"] == "decreasing-to-zero"
    means = sweep.result.mean_mse[1]  # residual row
    assert np.all(means > 1.0)


def test_sweep_weak_identifiability_eta_third():
    regime = RegimeSpec(WeakIdentifiability(1.0 / 3.0), (20, 60, 180))
    rows = (("w=0.2", FixedWeight(0.2)), ("residual(w=1)", FixedWeight(1.0)))
    sweep = consistency_sweep(regime, replications=200, seed=0, rows=rows)
    assert sweep.verdicts["w=0.2"] == "decreasing-to-zero"


def test_sweep_strong_spike_regression_row_stalls():
    regime = RegimeSpec(LargePLargeN(0.8, 0.8, 0.4), (50, 100, 200))
    rows = BASIC_ROWS[:3]
    sweep = consistency_sweep(regime, replications=200, seed=0, rows=rows)
    reg_means = sweep.result.mean_mse[2]
    assert sweep.verdicts["regression(w=0)"] != "decreasing-to-zero"
    assert reg_means[-1] >= reg_means[0]
    # the residual estimator keeps improving as p grows in this regime
    res_means = sweep.result.mean_mse[1]
    assert np.all(np.diff(res_means) < 0)


# --------------------------------------------------------------------------
# emit_table
# --------------------------------------------------------------------------


def manual_result():
    return McResult(
        point_labels=("n=20", "n=500"),
        estimator_labels=("alpha", "beta"),
        mean_mse=np.array([[0.123456, 0.2], [0.5, 0.987654321]]),
        se_mse=np.zeros((2, 2)),
        avg_weight=np.array([[0.5, 0.5], [0.137, 0.137]]),
        weight_rows=(1,),
        metadata={},
    )


def test_emit_table_csv_layout_and_rounding():
    text = emit_table(manual_result(), "csv")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["estimator", "n=20", "n=500"]
    assert rows[1] == ["alpha", "0.12346", "0.20000"]
    assert rows[2] == ["beta", "0.50000", "0.98765"]
    assert rows[3] == ["beta avg weight", "(0.13700)", "(0.13700)"]


def test_emit_table_csv_round_trip():
    res = run_experiment(tiny_plan(reps=5))
    rows = list(csv.reader(io.StringIO(emit_table(res, "csv"))))
    body = [r for r in rows[1:] if not r[0].endswith("avg weight")]
    parsed = np.array([[float(c) for c in r[1:]] for r in body])
    assert np.allclose(parsed, np.round(res.mean_mse, 5), atol=1e-12)


def test_emit_table_markdown_layout():
    text = emit_table(manual_result(), "markdown")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    assert lines[0].startswith("|") and "estimator" in lines[0]
    data_lines = [ln for ln in lines[1:] if not set(ln) <= {"|", "-", " ", ":"}]
    assert len(data_lines) == 3  # two estimators + one weight row


def test_emit_table_default_rows_shape():
    res = run_experiment(table1_plan((10,), 3, 0))
    rows = list(csv.reader(io.StringIO(emit_table(res, "csv"))))
    assert len(rows) == 1 + 11 + 2  # header, estimators, weight rows
    with pytest.raises(ValueError):
        emit_table(res, "latex")
