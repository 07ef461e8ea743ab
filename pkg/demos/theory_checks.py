"""
Numerical checks of the distributional quantities
=================================================

Evaluates the time-integrated second moment and its curvature envelope,
watches the empirical second-moment statistic concentrate as the number
of paths grows, and fits the error-decay exponent of the penalized
estimator against the sample size.
"""

import numpy as np

from sparse_ou import DriftMatrix, InitialLaw
from sparse_ou.experiments import ExperimentPlan
from sparse_ou.theory import (
    check_concentration,
    compute_c_infty,
    kappa_envelope,
    kl_between,
    minimax_family,
    rate_sweep,
)

# Scalar reference point: drift -1, horizon 1, deterministic start.
scalar = compute_c_infty(DriftMatrix(1, np.array([[-1.0]])))
closed_form = (1.0 + np.exp(-2.0)) / 4.0
print("scalar moment integral %.8f, closed form %.8f" % (scalar.c_infty[0, 0], closed_form))

drift = DriftMatrix(3, np.array([
    [-1.0, 0.3, 0.0],
    [0.0, -0.7, 0.2],
    [0.1, 0.0, -1.1],
]))
quantities = compute_c_infty(drift)
low, high = kappa_envelope(quantities)
print("curvature range [%.4f, %.4f] inside envelope [%.4f, %.4f]"
      % (quantities.kappa_min, quantities.kappa_max, low, high))

# More paths, tighter concentration around the population moment.
print()
print("n_paths  mean deviation  sandwich frequency")
for point in check_concentration(drift, InitialLaw(), [250, 1000, 4000], 10, seed=5):
    print("%7d  %14.5f  %18.2f"
          % (point.n_paths, point.mean_deviation, point.sandwich_frequency))

# Error against sample size on a log-log scale; the fitted slope should
# sit near -1/2.
print()
report = rate_sweep("N", ExperimentPlan(dims=(8,)), [100, 200, 400, 800], 3)
for n, err in report.points:
    print("N=%4d  error %.4f" % (n, err))
print("fitted exponent %.3f (expected %.1f)" % (report.fitted_exponent, report.expected_exponent))

# Path-law divergence between two members of the antisymmetric family.
members = minimax_family(4, 28, 0.1, 2, seed=1)
print()
print("divergence over 100 paths between two family members: %.4f"
      % kl_between(members[0], members[1], 100))
