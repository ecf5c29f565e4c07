r"""
Survival across the phase diagram
=================================

.. meta::
    :property="og:description": Estimate survival probabilities of the one-dimensional contact process with a density-dependent birth rate over a grid of birth rates and payoff coefficients.

The birth rate :math:`\Phi = \lambda e^{a k / 2d}` is increasing in both :math:`\lambda`
and :math:`a`, so one would expect survival to be monotone in both parameters. For
:math:`a \ge 0` this follows from a thinning coupling: every process on a grid can be
driven by one family of arrows, and a process with smaller parameters never occupies a
site the larger one leaves empty. :func:`~densitycp.experiments.phase_scan` uses exactly
that coupling when it estimates survival on a grid.

Survival on a finite torus is always a censored quantity: a run counts as alive when it
is still alive at the horizon, or when it has reached a given distance from its seed.
"""
import matplotlib.pyplot as plt
import numpy as np

from densitycp import experiments, meanfield
from densitycp.lattice import TorusGeometry

geo = TorusGeometry((200,))
lambda_grid = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
a_grid = [-2.0, -1.0, 0.0, 1.0, 2.0]

scan = experiments.phase_scan(lambda_grid, a_grid, 1, geo, horizon=20.0, replicates=40, seed=7)
print("coupled scan:", scan.coupled)

##############################################################################
# Every column of the resulting table is one payoff coefficient. For :math:`a \ge 0` the
# estimates are nondecreasing in :math:`\lambda` down a column and in :math:`a` along a
# row, replicate by replicate. Cells with :math:`a < 0` are only compared with cells at
# :math:`a \ge 0`: a crowded site of the smaller process may then reproduce faster than
# the same site in the larger one.

table = np.zeros((len(lambda_grid), len(a_grid)))
for i, j, lam, a, estimate, low, high, n in scan.rows():
    table[i, j] = estimate

plt.imshow(table, origin="lower", aspect="auto", cmap="viridis",
           extent=[a_grid[0] - 0.5, a_grid[-1] + 0.5, lambda_grid[0] - 0.5, lambda_grid[-1] + 0.5])
plt.colorbar(label="survival estimate")
plt.xlabel("a")
plt.ylabel(r"$\lambda$")
plt.show()

##############################################################################
# Bracketing the critical birth rate
# ----------------------------------
#
# :func:`~densitycp.experiments.estimate_lambda_c` bisects on :math:`\lambda` for the point
# where single-seed survival crosses a small threshold. At :math:`a \neq 0` it also reports
# the interval between :math:`\lambda_c(0)` and :math:`\lambda_c(0)\, e^{-a(1 - 1/2d)}`,
# which the critical value must lie in.

at_zero = experiments.estimate_lambda_c(0.0, 1, geo, 20.0, 40, seed=7, threshold=0.05, width=0.25)
print("lambda_c(0) in [{:.3f}, {:.3f}]".format(at_zero.lo, at_zero.hi))
at_minus = experiments.estimate_lambda_c(
    -1.0, 1, geo, 20.0, 40, seed=7, threshold=0.05, width=0.25, lambda_c0=at_zero.midpoint
)
print("lambda_c(-1) in [{:.3f}, {:.3f}], sandwich {}".format(at_minus.lo, at_minus.hi, at_minus.sandwich))

##############################################################################
# Comparison with the mean field
# ------------------------------
#
# The mean-field equation has no interior stable root for :math:`\lambda < 1` unless
# :math:`a > a_c(\lambda)`. The lattice process needs a larger birth rate: nearest
# neighbour correlations make births onto occupied sites common.

curve = meanfield.critical_curve(np.linspace(0.05, 0.95, 19))
lams, acs = zip(*curve)
plt.plot(acs, lams, label="mean-field fold")
plt.axhline(at_zero.midpoint, color="grey", linestyle="--", label=r"lattice $\lambda_c(0)$")
plt.xlabel("a")
plt.ylabel(r"$\lambda$")
plt.legend()
plt.show()
