"""
The largest jump of the subordinator, exactly
=============================================

The distribution of V_1 has a closed form built on an upper incomplete
gamma integral. It gives exact tail probabilities far beyond Monte Carlo
reach, so we use it to watch the moderate-deviation limit emerge.
"""

# %%
import numpy as np

from pd2.analytics import cdf_v1, log_sf_v1
from pd2.asymptotics import ScalingPlan
from pd2.experiments import mdp_v1_scan
from pd2.sampler import Params

# %%
# doubling theta squares the CDF
p, q = Params(0.4, 1.5), Params(0.4, 3.0)
for s in (0.1, 1.0, 5.0):
    print(s, cdf_v1(q, s), cdf_v1(p, s) ** 2)

# %%
# deep tail: the log survival stays finite where the probability underflows
print(log_sf_v1(Params(0.3, 1e6), 1010.0))

# %%
# (a/theta) log P(a (V_1 - beta)/theta >= x) approaches -x, here with a = sqrt(theta)
plan = ScalingPlan("MDP3", 0.5)
for x in (1.0, 2.0):
    t = mdp_v1_scan(0.3, plan, x, np.geomspace(1e3, 1e6, 4))
    print(x, np.round(t.column("scaled"), 4))
