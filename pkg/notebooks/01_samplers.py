"""
Three ways to sample PD(alpha, theta)
=====================================

Stick breaking, a normalised subordinator and a reweighted PD(alpha, 0)
ensemble should all describe the same law. We draw from each and compare
the mean homozygosity H_2 and the mean largest atom P_1.
"""

# %%
import numpy as np

from pd2.experiments import sampler_estimates
from pd2.sampler import Params, gem_sample, log_C, rank_descending
from pd2.special import RngStream

root = RngStream(20261018)

# %%
# One stick-breaking draw, ranked, with its untracked tail mass
s = rank_descending(gem_sample(Params(0.5, 2.0), root.substream("one"), tail_eps=1e-4))
print("top atoms", np.round(s.weights[:5], 4), "tail", s.tail)

# %%
# 20k draws from each sampler at the same parameters
est = sampler_estimates(Params(0.5, 2.0), 20_000, root.substream("three"))
for name, e in est.items():
    (h, hs), (p, ps) = e["h2"], e["p1"]
    print(f"{name:>12}  E[H2]={h:.4f}+-{hs:.4f}  E[P1]={p:.4f}+-{ps:.4f}")

# %%
# the mean importance weight estimates Gamma(theta/alpha + 1) / Gamma(theta + 1)
w = np.exp(est["importance"]["raw"]["log_weight"])
print("mean weight", w.mean(), "target", np.exp(-log_C(0.5, 2.0)))
