"""Acceptance checks, one test per criterion, each printing a PASS/FAIL line.

All stochastic runs derive from one master seed so a rerun reproduces every
number printed here.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from pd2.analytics import cdf_v1, estimate_g, log_u, marginal_density_p1
from pd2.asymptotics import (
    ScalingPlan,
    contracted_rate_numeric,
    lambda_gradient,
    lambda_pair,
    lambda_star,
    rate_I,
    rate_J1,
    rate_S,
    rate_S1,
    rate_Sn,
    validate_scaling,
)
from pd2.experiments import clt_hm_check, mdp_v1_scan, sampler_estimates, small_param_scan
from pd2.sampler import (Params, gem_statistics, importance_statistics, sticks_for_homozygosity,
                         subordinator_statistics, weighted_estimate)
from pd2.special import RngStream
from pd2.tables import Table, to_columnar

SEED = 20261018
ROOT = RngStream(SEED)
INF = math.inf


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line straight to the terminal, then assert."""

    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {number}: {detail}"

    return emit


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


# --- 1: exact MDP convergence ---------------------------------------------


def test_c01_exact_mdp(verdict):
    plan = ScalingPlan("MDP3", 0.5)
    with Clock() as clock:
        rows = [mdp_v1_scan(0.3, plan, x, [1e6]).records()[0] for x in (1.0, 2.0)]
    worst = 0.0
    for row in rows:
        x = row["threshold"]
        worst = max(worst, abs(row["scaled"] + x) / x)
        # same probability through the deep-tail algebra log(theta/alpha) + log u
        alt = math.log(1e6 / 0.3) + log_u(0.3, row["s"])
        assert row["log_prob"] == pytest.approx(alt, rel=1e-6)
    ok = worst <= 0.05 and clock.seconds < 1.0
    verdict(1, ok, f"scaled={[round(r['scaled'], 4) for r in rows]} rel_err={worst:.3g} "
                   f"time={clock.seconds:.2f}s")


# --- 2: CDF structure -----------------------------------------------------


def test_c02_cdf_structure(verdict):
    rng = np.random.default_rng(SEED)
    points = zip(rng.uniform(0.05, 0.95, 50), np.exp(rng.uniform(math.log(0.1), math.log(50), 50)),
                 np.exp(rng.uniform(math.log(0.01), math.log(50), 50)))
    with Clock() as clock:
        worst = 0.0
        for alpha, theta, s in points:
            one = cdf_v1(Params(alpha, theta), s)
            two = cdf_v1(Params(alpha, 2 * theta), s)
            worst = max(worst, abs(two - one * one) / max(one * one, 1e-300))
        s_grid = np.geomspace(0.01, 50, 20)
        t_grid = np.geomspace(0.1, 100, 20)
        g = np.array([[cdf_v1(Params(0.4, t), s) for s in s_grid] for t in t_grid])
    monotone = bool(np.all(np.diff(g, axis=1) >= 0) and np.all(np.diff(g, axis=0) <= 0))
    ok = worst <= 1e-10 and monotone and clock.seconds < 1.0
    verdict(2, ok, f"doubling rel_err={worst:.2g} monotone={monotone} time={clock.seconds:.2f}s")


# --- 3: subordinator representation ---------------------------------------


def subordinator_run(workers):
    sub = subordinator_statistics(Params(0.4, 2.0), 10_000, ROOT.substream("acc3"), jump_floor=1e-6,
                                  workers=workers)
    ks = stats.kstest(sub["mass"], stats.gamma(2.0).cdf)
    r = float(np.corrcoef(sub["mass"], sub["h2"])[0, 1])
    table = Table(["ks_p", "ks_d", "corr"], [(float(ks.pvalue), float(ks.statistic), r)], {"seed": SEED})
    return sub, table


def test_c03_subordinator(verdict):
    with Clock() as clock:
        _, table = subordinator_run(1)
    ks_p, _, r = table.rows[0]
    se = 1 / math.sqrt(10_000)
    ok = ks_p > 0.01 and abs(r) < 3 * se and clock.seconds < 30
    verdict(3, ok, f"KS p={ks_p:.3g} corr={r:.4f} (3SE={3 * se:.3g}) time={clock.seconds:.1f}s")


# --- 4: change of measure -------------------------------------------------


def test_c04_change_of_measure(verdict):
    p = Params(0.5, 1.0)
    n = 100_000
    stream = ROOT.substream("acc4")
    with Clock() as clock:
        imp = importance_statistics(p, n, stream.substream("importance"), stop_eps=1e-6)
        sticks = sticks_for_homozygosity(p.alpha, p.theta, 2, 1e-6)
        gem = gem_statistics(p, n, stream.substream("gem"), min_sticks=sticks)
    w = np.exp(imp["log_weight"])
    w_se = w.std(ddof=1) / math.sqrt(n)
    h_imp, se_imp = weighted_estimate(imp["h2"], imp["log_weight"], p.alpha, p.theta, "self")
    h_gem, se_gem = gem["h2"].mean(), gem["h2"].std(ddof=1) / math.sqrt(n)
    ok_w = abs(w.mean() - 2.0) <= 3 * w_se
    ok_h = abs(h_imp - h_gem) <= 3 * math.hypot(se_imp, se_gem)
    ok = ok_w and ok_h and clock.seconds < 60
    verdict(4, ok, f"mean weight={w.mean():.4f}+-{w_se:.3g} H2 {h_imp:.5f}+-{se_imp:.2g} vs "
                   f"{h_gem:.5f}+-{se_gem:.2g} time={clock.seconds:.1f}s")


# --- 5: three-sampler agreement -------------------------------------------


def test_c05_three_samplers(verdict):
    failures = []
    with Clock() as clock:
        for i, (alpha, theta) in enumerate([(0.3, 1.0), (0.5, 2.0), (0.7, 0.5)]):
            est = sampler_estimates(Params(alpha, theta), 100_000, ROOT.substream("acc5", i))
            names = list(est)
            for f in ("h2", "p1"):
                for a in range(3):
                    for b in range(a + 1, 3):
                        (m1, s1), (m2, s2) = est[names[a]][f], est[names[b]][f]
                        if abs(m1 - m2) > 3 * math.hypot(s1, s2):
                            failures.append(f"({alpha},{theta}) {f} {names[a]}/{names[b]}")
    ok = not failures and clock.seconds < 300
    verdict(5, ok, f"disagreements={failures or 'none'} time={clock.seconds:.0f}s")


# --- 6: homozygosity CLT --------------------------------------------------


def test_c06_clt(verdict):
    with Clock() as clock:
        r = clt_hm_check(0.5, 2, 200.0, 4000, ROOT.substream("acc6"))
    ok = (3.0 <= r.sample_variance <= 5.0 and abs(r.sample_mean) <= 3 * r.se_mean
          and r.target_variance == pytest.approx(4.0, rel=1e-12) and clock.seconds < 120)
    verdict(6, ok, f"var={r.sample_variance:.3f} mean={r.sample_mean:.4f}+-{r.se_mean:.3g} "
                   f"time={clock.seconds:.0f}s")


# --- 7: contraction identity ----------------------------------------------


def test_c07_contraction(verdict):
    rng = np.random.default_rng(SEED)
    with Clock() as clock:
        gap = max(abs(c.numeric - c.closed_form)
                  for alpha, m in ((0.3, 2), (0.5, 2), (0.5, 3))
                  for c in (contracted_rate_numeric(float(z), alpha, m) for z in np.linspace(-2, 2, 21)))
        dual = 0.0
        for (alpha, m), (s, t) in zip([(0.3, 2), (0.5, 2), (0.5, 3)] * 17, rng.uniform(-2, 2, size=(50, 2))):
            gx, gy = lambda_gradient(s, t, alpha, m)
            rhs = s * gx + t * gy - lambda_pair(s, t, alpha, m)
            dual = max(dual, abs(lambda_star(gx, gy, alpha, m) - rhs))
    ok = gap <= 1e-6 and dual <= 1e-8 and clock.seconds < 1.0
    verdict(7, ok, f"line-min gap={gap:.2g} duality gap={dual:.2g} time={clock.seconds:.2f}s")


# --- 8: small-parameter staircase -----------------------------------------


@pytest.fixture(scope="module")
def staircase():
    with Clock() as clock:
        table = small_param_scan([0.2, 0.1, 0.05], 2, 10_000_000, ROOT.substream("acc8"))
    return table, clock.seconds


def test_c08_staircase_rate(verdict, staircase):
    table, seconds = staircase
    scaled = table.column("scaled")  # driver ascending: 0.05, 0.1, 0.2
    decreasing = scaled[2] > scaled[1] > scaled[0]
    ok = decreasing and -2.8 <= scaled[0] <= -1.2 and seconds < 600
    verdict(8, ok, f"b log P(P1<1/2) at a=0.2,0.1,0.05: {[round(v, 3) for v in scaled[::-1]]} "
                   f"time={seconds:.0f}s")


def test_c08_mass_near_one(verdict, staircase):
    table, _ = staircase
    near = table.records()[0]["p_near_one"]
    verdict(8, near >= 0.9, f"P(P1>0.99) at a=0.05 = {near:.4f} (needs >= 0.9)")


# --- 9: density normalization ---------------------------------------------


def test_c09_density(verdict):
    p = Params(0.3, 2.0)
    stream = ROOT.substream("acc9")
    with Clock() as clock:
        g = estimate_g(0.3, 2.3, 200_000, stream.substream("g"))
        n = 20_000
        h = marginal_density_p1(p, (np.arange(n) + 0.5) / n, g)
        total = h.sum() / n
        p1 = np.sort(gem_statistics(p, 1_000_000, stream.substream("p1"), ms=(), top=1)["top"][:, 0])
        edges = np.arange(n + 1) / n
        model = np.concatenate([[0.0], np.cumsum(h) / n])
        empirical = np.searchsorted(p1, edges, side="right") / p1.size
        distance = float(np.abs(model - empirical).max())
    ok = abs(total - 1) <= 0.01 and distance <= 0.01 and clock.seconds < 300
    verdict(9, ok, f"integral={total:.5f} sup CDF distance={distance:.2g} time={clock.seconds:.0f}s")


# --- 10: rate-function unit suite -----------------------------------------


def test_c10_rates(verdict):
    with Clock() as clock:
        examples = [
            rate_J1(0) == 0, rate_J1(2) == 2, rate_J1(-1) == INF,
            rate_I([3, 2, 1]) == 6, rate_I([1, 2]) == INF,
            rate_S1(1.0) == 0, rate_S1(0.6) == 1, rate_S1(1 / 3) == 2, rate_S1(0.5) == 1,
            rate_S([1.0]) == 0, rate_S([0.5, 0.5]) == 1, rate_S([0.5, 0.3, 0.2]) == 2,
            rate_Sn([1.0, 0.0, 0.0]) == 0, rate_Sn([0.5, 0.5, 0.0]) == 1, rate_Sn([0.4, 0.3]) == 2,
            validate_scaling(ScalingPlan("MDP3", 0.5)).passed,
            not validate_scaling(ScalingPlan("MDP3", 1.0)).passed,
            validate_scaling(ScalingPlan("MDP4", 0.4, 0.1), 2).passed,
            not validate_scaling(ScalingPlan("MDP4", 0.3, 0.1), 2).passed,
        ]
        rng = np.random.default_rng(SEED)
        mismatches = 0
        for _ in range(1000):
            parts = rng.integers(1, 1000, size=rng.integers(1, 13))
            v = np.concatenate([np.sort(parts / parts.sum())[::-1], [0.0, 0.0]])
            mismatches += rate_S(v) != rate_Sn(v)
    ok = all(examples) and mismatches == 0 and clock.seconds < 1.0
    verdict(10, ok, f"examples {sum(examples)}/{len(examples)} S vs Sn mismatches={mismatches} "
                    f"time={clock.seconds:.2f}s")


# --- 11: reproducibility across worker counts -----------------------------


def test_c11_worker_count(verdict):
    (sub1, t1), (sub2, t2) = subordinator_run(1), subordinator_run(2)
    same_sub = all(np.asarray(sub1[k]).tobytes() == np.asarray(sub2[k]).tobytes() for k in sub1)
    same_table = to_columnar(t1) == to_columnar(t2)
    runs = [clt_hm_check(0.5, 2, 200.0, 4000, ROOT.substream("acc6"), workers=w) for w in (1, 3)]
    same_clt = runs[0] == runs[1]
    ok = same_sub and same_table and same_clt
    verdict(11, ok, f"criterion 3 rerun identical={same_sub and same_table} "
                    f"criterion 6 rerun identical={same_clt}")
