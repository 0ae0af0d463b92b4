"""
Scans against the limit theorems
================================

Monte Carlo versions of the deviation results, at sizes that finish in a
minute or two. The CLI runs the same scans at full size.
"""

# %%
from pd2.asymptotics import ScalingPlan
from pd2.experiments import clt_hm_check, consistency_suite, mdp_p1_scan, small_param_scan
from pd2.special import RngStream

root = RngStream(20261018)

# %%
# homozygosity CLT: variance of W should be near sigma^2 = 4
r = clt_hm_check(0.5, 2, 200.0, 1000, root.substream("clt"), hm_tol=1e-6)
print(r.sample_mean, r.se_mean, r.sample_variance, r.target_variance)

# %%
# P_1 tail at finite theta next to the exact V_1 value
t = mdp_p1_scan(0.5, ScalingPlan("MDP3", 0.5), 0.25, [200.0], 5000, root.substream("p1"))
print(t.records())

# %%
# small alpha = theta = a: b log P(P_1 < 1/2) drifts down toward -2, slowly
t = small_param_scan([0.2, 0.1, 0.05], 2, 200_000, root.substream("small"))
for row in t.records():
    print(row["driver"], round(row["scaled"], 3), row["p_near_one"])

# %%
rep = consistency_suite(0.4, 2.0, 5000, root.substream("suite"))
for e in rep.entries:
    print(e.name, e.passed, round(e.value, 5))
