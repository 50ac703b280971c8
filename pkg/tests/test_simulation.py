import json
import math
from fractions import Fraction

import numpy as np
import pytest

from selinf import simulation
from selinf.errors import FailureBudgetError, NumericalError, ValidationError
from selinf.pipeline import MODEL, SIGN
from selinf.simulation import (
    ExperimentConfig,
    make_design,
    run_coverage,
    run_pivot_uniformity,
    run_width_comparison,
)


def small(**kw):
    base = dict(n=10, p=5, k=2, amplitude=1.0, lambda_rule=2.0, replications=60, seed=4)
    base.update(kw)
    return ExperimentConfig.sparse(**{k: base.pop(k) for k in ("n", "p", "k", "amplitude")}, **base)


def test_config_validation():
    with pytest.raises(ValidationError):
        small(replications=0)
    with pytest.raises(ValidationError):
        ExperimentConfig(n=5, p=3, true_beta=(1.0, 0.0))
    with pytest.raises(ValidationError):
        small(lambda_rule="cv")
    with pytest.raises(ValidationError):
        small(lambda_rule=-1.0)
    with pytest.raises(ValidationError):
        small(sigma=math.inf)
    with pytest.raises(ValidationError):
        small(mode="both")


def test_config_dict_round_trip():
    c = ExperimentConfig.from_dict({"n": 8, "p": 4, "k": 1, "amplitude": 2.0, "seed": 3})
    assert c.true_beta == (2.0, 0.0, 0.0, 0.0)
    assert ExperimentConfig.from_dict(c.to_dict()) == c
    json.dumps(c.to_dict())


def test_reports_identical_across_thread_counts():
    cfg = small(replications=40)
    a = run_coverage(cfg, threads=1)
    b = run_coverage(cfg, threads=4)
    assert a.to_json() == b.to_json()
    assert a.rows_csv() == b.rows_csv()


def test_design_depends_only_on_seed():
    np.testing.assert_array_equal(make_design(small()), make_design(small(replications=5)))
    assert not np.array_equal(make_design(small()), make_design(small(seed=5)))


def test_fcr_identity_is_exact_on_counts():
    # lambda large enough that some replications select nothing
    rep = run_coverage(small(k=0, amplitude=0.0, lambda_rule=2.5, replications=150))
    o = rep.overall
    sel = o["selection_probability"]
    assert 0 < sel < 1
    assert o["_fcr_exact"] == o["_pfcr_exact"] * Fraction(round(sel * o["replications"]), o["replications"])
    assert rep.fcr < rep.pfcr
    for v in (o["coverage"], o["fcr"], o["pfcr"], sel, o["null_model_frequency"]):
        assert 0.0 <= v <= 1.0


def test_rows_score_the_realized_target():
    cfg = small(replications=20)
    rep = run_coverage(cfg)
    X = make_design(cfg)
    mu = X @ np.array(cfg.true_beta)
    by_rep = {}
    for row in rep.rows:
        by_rep.setdefault(row["replication"], []).append(row)
    for rows in by_rep.values():
        M = [r["variable"] for r in rows]
        target = np.linalg.pinv(X[:, M]) @ mu
        np.testing.assert_allclose([r["truth"] for r in rows], target, atol=1e-12)
        for r in rows:
            assert r["covered"] == (r["lower"] <= r["truth"] <= r["upper"])


def test_by_model_size_partitions_the_rows():
    rep = run_coverage(small(replications=80))
    assert sum(v["intervals"] for v in rep.by_model_size.values()) == rep.overall["intervals"]
    assert sum(v["replications"] for v in rep.by_model_size.values()) == rep.overall["replications"]


def test_pivot_report_and_power_check():
    ks = run_pivot_uniformity(small(replications=300))
    assert ks["one_per_replication"]["count"] == 300
    assert ks["pooled"]["count"] >= 300
    assert set(ks["per_variable"]) <= {str(j) for j in range(5)}
    assert ks["one_per_replication"]["p_value"] > 0.01
    assert ks["shifted_one_per_replication"]["p_value"] < 0.01


def test_failure_budget(monkeypatch):
    real = simulation.infer
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] % 10 == 0:
            raise NumericalError("injected")
        return real(*args, **kwargs)

    monkeypatch.setattr(simulation, "infer", flaky)
    with pytest.raises(FailureBudgetError) as info:
        run_coverage(small(replications=50))
    report = info.value.report
    assert report is not None and not report.valid
    assert report.failures == 5
    assert report.to_dict()["valid"] is False


def test_failures_below_budget_are_counted(monkeypatch):
    real = simulation.infer
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 3:
            raise NumericalError("injected")
        return real(*args, **kwargs)

    monkeypatch.setattr(simulation, "infer", flaky)
    rep = run_coverage(small(replications=120))
    assert rep.failures == 1 and rep.valid
    assert rep.overall["replications"] == 119


def test_width_comparison_small_design():
    cmp = run_width_comparison(small(replications=500, seed=5), modes=(SIGN, MODEL))
    for mode in (SIGN, MODEL):
        s = cmp.summary[mode]
        assert s["median_width_ratio_far_from_boundary"] <= 1.5
        assert abs(s["coverage"] - 0.9) <= 3 * math.sqrt(0.09 / s["intervals"])
    assert cmp.summary["split"]["coverage"] >= 0.9 - 0.02
    assert cmp.rows_csv().splitlines()[0].startswith("replication,variable")


def test_naive_intervals_undercover_under_weak_signal():
    cfg = ExperimentConfig.sparse(25, 50, 5, 0.5, lambda_rule=8.0, replications=500, seed=2014)
    cmp = run_width_comparison(cfg, modes=(SIGN,))
    s = cmp.summary[SIGN]
    assert s["naive_coverage"] < 1 - 0.1 - 0.03
    assert abs(s["coverage"] - 0.9) <= 3 * math.sqrt(0.09 / s["intervals"])
