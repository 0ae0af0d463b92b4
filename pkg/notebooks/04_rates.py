"""
Rate functions
==============

Large theta: linear rates for the ranked atoms and a quadratic rate for
the homozygosity, which we recover by contracting the two-dimensional
Legendre transform. Small alpha and theta: a staircase in P_1.
"""

# %%
import numpy as np

from pd2.asymptotics import (contracted_rate, contracted_rate_numeric, rate_I, rate_J1, rate_S, rate_S1,
                             rate_Sn, sigma2)

print(rate_J1(2.0), rate_I([3, 2, 1]), rate_I([1, 2]))

# %%
# sigma^2 for m = 2 and the contraction checked numerically
print("sigma2(0.5, 2) =", sigma2(0.5, 2))
for z in (-1.0, 0.5, 2.0):
    c = contracted_rate_numeric(z, 0.5, 2)
    print(z, c.numeric, contracted_rate(z, 0.5, 2))

# %%
# the staircase: k on [1/(k+1), 1/k)
p = np.array([1.0, 0.9, 0.5, 0.49, 1 / 3, 0.2, 0.05])
print([rate_S1(v) for v in p])
print(rate_S([0.5, 0.3, 0.2]), rate_Sn([0.4, 0.3]))
