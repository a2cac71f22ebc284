"""
Tail averages of a discrete loss law
====================================

CVaR at level alpha is the mean of the worst (1 - alpha) share of outcomes.
It can also be written as the best expectation under a reweighting whose
density never exceeds 1 / (1 - alpha). Both routes are computed below.
"""
import numpy as np

from wrongway import DiscreteDistribution, cvar, cvar_by_tilting, var

# five outcomes with uneven probabilities
d = DiscreteDistribution([0.0, 1.0, 4.0, 10.0, 25.0], [0.5, 0.2, 0.15, 0.1, 0.05])

for alpha in (0.5, 0.9, 0.95, 0.99):
    value, weights = cvar_by_tilting(d, alpha)
    print(f"alpha={alpha:<5} VaR={var(d, alpha):6.2f}  CVaR={cvar(d, alpha):7.3f}  tilted mean={value:7.3f}")

# the tilt only loads the largest outcomes, each up to its cap p / (1 - alpha)
_, g = cvar_by_tilting(d, 0.9)
print("weights at alpha=0.9:", np.round(g, 3), " caps:", np.round(d.probs / 0.1, 3))

# an empirical sample behaves the same way
sample = np.random.default_rng(1).standard_t(3, 200_000)
print("t(3) sample, CVaR_0.99 =", round(cvar(DiscreteDistribution.empirical(sample), 0.99), 3))
