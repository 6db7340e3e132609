"""Rank-based regression that shrugs off outliers.

The pairwise indicator I(Y1 <= Y2) extends the rank-sum test to a
regression: its conditional mean is modelled as Phi(-beta'(x1 - x2)), so
beta keeps the interpretation of an ordinary linear-model slope while the
fit only ever sees ranks.  We contaminate a linear model with gross
outliers and compare the rank fit against ordinary least squares.
"""

import numpy as np

from pairgee import (FrmModel, Kernel, PairCovariate, SubjectRecord,
                     WorkingVariance, build_pairs, make_rng, solve_ugee)

rng = make_rng(202)
n, beta_true = 150, 1.0

x = rng.normal(size=n)
y = beta_true * x + rng.normal(0.0, np.sqrt(0.5), size=n)
# corrupt 7% of the outcomes with wild values
bad = rng.random(n) < 0.07
y[bad] += rng.choice([-25.0, 25.0], size=bad.sum())
print(f"{bad.sum()} of {n} outcomes corrupted with +-25 shifts")

subjects = [SubjectRecord(i, y=[y[i]], x=[x[i]]) for i in range(n)]
data = build_pairs(subjects, Kernel.mww(), PairCovariate("difference"))

model = FrmModel(link="probitc", intercept=False,
                 working_variance=WorkingVariance("bernoulli"))
res = solve_ugee(model, data)

ols = float(np.cov(x, y)[0, 1] / np.var(x))
print(f"\ntrue slope              : {beta_true:+.3f}")
print(f"ordinary least squares  : {ols:+.3f}   (dragged by outliers)")
print(f"rank regression         : {res.beta[0]:+.3f}   "
      f"(se {res.se[0]:.3f}, z = {res.beta[0] / res.se[0]:.1f})")
print("\nranks bound each observation's influence: the slope attenuates a")
print("little because some comparisons flip, but the signal stays strong,")
print("while the squared-error fit chases the corrupted values themselves.")
