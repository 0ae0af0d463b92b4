import math

import numpy as np
import pytest

from pd2.asymptotics import ScalingPlan
from pd2.experiments import (
    ExperimentConfig,
    clt_hm_check,
    consistency_suite,
    hm_mdp_point,
    jackknife_variance_se,
    mdp_p1_scan,
    mdp_v1_scan,
    small_param_scan,
)
from pd2.special import RngStream
from pd2.tables import to_columnar

SEED = 20261018
ROOT = RngStream(SEED).substream("test_experiments")
MDP3 = ScalingPlan("MDP3", 0.5)


def test_mdp_v1_examples():
    t = mdp_v1_scan(0.3, MDP3, 1.0, [1e6])
    assert -1.05 <= t.column("scaled")[0] <= -0.95
    t = mdp_v1_scan(0.3, MDP3, -0.5, [1e6])
    assert -0.01 <= t.column("scaled")[0] <= 0
    assert t.column("theory")[0] == 0
    t = mdp_v1_scan(0.3, MDP3, 2.0, [1e6, 1e3, 1e5, 1e4])
    scaled = t.column("scaled")
    assert t.column("driver") == sorted(t.column("driver"))
    assert np.all(np.diff(np.abs(np.array(scaled) + 2.0)) < 0)
    assert abs(scaled[-1] + 2.0) <= 0.1
    assert all(f == "" for f in t.column("flag"))


def test_mdp_v1_deterministic_and_validated():
    a = to_columnar(mdp_v1_scan(0.3, MDP3, 1.0, [1e3, 1e4]))
    b = to_columnar(mdp_v1_scan(0.3, MDP3, 1.0, [1e3, 1e4]))
    assert a == b
    with pytest.raises(ValueError):
        mdp_v1_scan(0.3, ScalingPlan("MDP3", 1.2), 1.0, [1e3])
    with pytest.raises(ValueError):
        mdp_v1_scan(0.3, MDP3, 1.0, [2.0])


def test_mdp_p1_small():
    t = mdp_p1_scan(0.5, MDP3, 0.25, [200.0], 5000, ROOT.substream("p1"))
    row = t.records()[0]
    assert row["hits"] >= 50 and row["scaled"] <= 0
    # at finite theta P_1 and V_1 tails should be close on the scaled log level
    assert abs(row["scaled"] - row["v1_scaled"]) <= 0.1
    low = mdp_p1_scan(0.5, MDP3, -0.5, [200.0], 2000, ROOT.substream("p1low")).records()[0]
    assert math.exp(low["log_prob"]) >= 0.5 and -0.05 <= low["scaled"] <= 0
    rare = mdp_p1_scan(0.5, MDP3, 6.0, [200.0], 200, ROOT.substream("p1rare")).records()[0]
    assert rare["flag"] == "insufficient" and rare["log_prob"] is None


def test_jackknife_matches_brute_force():
    w = np.random.default_rng(3).normal(size=60)
    loo = np.array([np.delete(w, i).var(ddof=1) for i in range(w.size)])
    brute = math.sqrt((w.size - 1) / w.size * np.sum((loo - loo.mean()) ** 2))
    assert jackknife_variance_se(w) == pytest.approx(brute, rel=1e-10)


def test_clt_small_run():
    r = clt_hm_check(0.5, 2, 200.0, 300, ROOT.substream("clt"), hm_tol=1e-6)
    assert r.sample_variance >= 0 and r.target_variance == pytest.approx(4.0)
    assert abs(r.sample_mean) <= 4 * r.se_mean
    with pytest.raises(ValueError):
        clt_hm_check(0.5, 2, 10.0, 300, ROOT)


def test_hm_mdp_point_diagnostic():
    plan = ScalingPlan("MDP4", 0.25, 0.1)
    below = hm_mdp_point(0.5, 2, plan, -1e-9, 400.0, 2000, ROOT.substream("hm0"), hm_tol=1e-6, strict=False)
    assert below["flag"] == "diagnostic;inadmissible" and -0.05 <= below["scaled"] <= 0
    assert below["theory"] == 0.0
    ok = hm_mdp_point(0.5, 2, ScalingPlan("MDP4", 0.45, 0.2), 0.5, 400.0, 2000, ROOT.substream("hm1"), hm_tol=1e-6)
    assert ok["flag"] == "diagnostic" and ok["scaled"] <= 0
    assert ok["theory"] == pytest.approx(0.5**2 / 8)
    with pytest.raises(ValueError):
        hm_mdp_point(0.5, 2, ScalingPlan("MDP4", 0.25, 0.1), 1.0, 400.0, 2000, ROOT)


def test_small_param_scan_anchor_and_columns():
    t = small_param_scan([0.2, 0.1], 1, 1000, ROOT.substream("small"))
    assert t.column("driver") == [0.1, 0.2]
    assert t.column("scaled") == [0.0, 0.0]
    assert {"p_near_one", "two_atom_prob", "two_atom_target"} <= set(t.columns)
    with pytest.raises(ValueError):
        small_param_scan([1.2], 2, 1000, ROOT)


def test_consistency_suite_small():
    rep = consistency_suite(0.4, 2.0, 3000, ROOT.substream("suite"))
    names = [e.name for e in rep.entries]
    assert names[0].startswith("ks:") and "weight-mean:1/C" in names and "corr:T-vs-H2" in names
    assert len(names) == 9
    assert rep.table().columns[0] == "check"


def test_experiment_config():
    with pytest.raises(ValueError):
        ExperimentConfig("x", {}, 1, replicas=50)
    with pytest.raises(ValueError):
        ExperimentConfig("x", {}, 1, grids={"theta": []})
    a = ExperimentConfig("x", {"alpha": 0.5}, 1, 100)
    assert a.digest() != ExperimentConfig("x", {"alpha": 0.6}, 1, 100).digest()
    assert a.header()["seed"] == 1
