"""
Density of the largest atoms
============================

The joint density of (P_1, ..., P_n) needs the distribution function g of
the largest atom at shifted parameters. We estimate g by sampling, then
compare the n = 1 density with a histogram of direct draws.
"""

# %%
import numpy as np

from pd2.analytics import estimate_g, joint_density, marginal_density_p1
from pd2.sampler import Params, gem_statistics
from pd2.special import RngStream

root = RngStream(7)
p = Params(0.3, 2.0)

# %%
g1 = estimate_g(p.alpha, p.theta + p.alpha, 100_000, root.substream("g1"))
print("DKW half-width", g1.dkw_bound())
x = (np.arange(5000) + 0.5) / 5000
h = marginal_density_p1(p, x, g1)
print("integral of h", h.mean())

# %%
p1 = gem_statistics(p, 200_000, root.substream("p1"), ms=(), top=1)["top"][:, 0]
hist, edges = np.histogram(p1, bins=10, range=(0, 1), density=True)
mids = 0.5 * (edges[1:] + edges[:-1])
print(np.round(np.c_[mids, hist, marginal_density_p1(p, mids, g1)], 3))

# %%
# two coordinates need g at theta + 2 alpha
g2 = estimate_g(p.alpha, p.theta + 2 * p.alpha, 100_000, root.substream("g2"))
print(joint_density(p, [0.5, 0.2], g2))
