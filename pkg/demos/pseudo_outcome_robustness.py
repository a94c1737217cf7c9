"""
Pseudo-outcomes with a wrong imputation model
=============================================

An augmented pseudo-outcome stays unbiased for the future reward when the
randomization probabilities are known, whatever the imputation model.  The
imputation only changes the variance.  This script checks both facts on a
two-stage trial with a closed-form target.
"""
import numpy as np
from scipy.stats import norm

from amol import TrialData, pseudo_outcomes

x, c, n = 0.7, 0.3, 200_000
rng = np.random.default_rng(2)

# R1 = x A1 + e1 and R2 = (R1 - c) A2 + e2 with fair coins
A = rng.choice([-1, 1], size=(n, 2))
R = np.empty((n, 2))
R[:, 0] = x * A[:, 0] + rng.standard_normal(n)
R[:, 1] = (R[:, 0] - c) * A[:, 1] + rng.standard_normal(n)
data = TrialData((np.full((n, 1), x), np.zeros((n, 0))), A, R, np.full((n, 2), 0.5))
rules = np.column_stack([np.ones(n, dtype=int), np.where(R[:, 0] >= c, 1, -1)])

# always treat at stage 1, then treat when R1 >= c: x + E|N(x - c, 1)|
mu = x - c
target = x + np.sqrt(2 / np.pi) * np.exp(-mu ** 2 / 2) + mu * (1 - 2 * norm.cdf(-mu))

imputations = {
    "zero": np.zeros((n, 2)),
    "wrong": np.column_stack([np.full(n, -3.0), 5 * np.sin(3 * R[:, 0]) + 2]),
    "exact": np.column_stack([np.full(n, target), np.abs(R[:, 0] - c)]),
}
print(f"target {target:.4f}")
for variant in ("simple", "efficient"):
    for name, g in imputations.items():
        q = pseudo_outcomes(data, 1, rules, g, variant).value
        se = q.std() / np.sqrt(n)
        print(f"{variant:9s} {name:5s}  mean {q.mean():.4f} +- {se:.4f}  variance {q.var():7.3f}")
