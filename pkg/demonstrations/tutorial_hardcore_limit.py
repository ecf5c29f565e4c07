r"""
The hard-core limit
===================

.. meta::
    :property="og:description": In the limit of an infinitely negative payoff only isolated players reproduce, and the process started from one seed always dies out.

Letting :math:`a \to -\infty` leaves a birth rate of :math:`\lambda` for sites without
occupied neighbours and zero for all others. Started from a single seed on the line the
process alternates between two states: one isolated player, which gives birth at rate
:math:`\lambda` or dies at rate 1, and an adjacent pair, which cannot reproduce and loses
one of its members at rate 2.

Each visit to the isolated state ends in a birth with probability
:math:`\lambda / (1 + \lambda)`, so the number of births :math:`N` is geometric,

.. math:: P[N \ge n] = \left(\frac{\lambda}{1 + \lambda}\right)^n,

and the process dies out almost surely however large :math:`\lambda` is.
"""
import matplotlib.pyplot as plt
import numpy as np

from densitycp import experiments

result = experiments.hardcore_stats(2.0, 4000, seed=11)
print("chi-square p = {:.3f} over {} bins".format(result.chi2_pvalue, result.chi2_bins))

##############################################################################
# The empirical tail of :math:`N` next to the geometric law:

n, empirical, geometric = map(np.array, zip(*result.tail))
plt.semilogy(n, empirical, "o", label="simulated")
plt.semilogy(n, geometric, "-", label=r"$(\lambda / (1 + \lambda))^n$")
plt.xlabel("n")
plt.ylabel(r"$P[N \geq n]$")
plt.legend()
plt.show()

##############################################################################
# Extinction time
# ---------------
#
# The extinction time is a sum of exponential holding times: one rate
# :math:`1 + \lambda` stay per isolated phase and one rate 2 stay per pair. Sampling that
# sum directly gives a reference distribution, and a Chernoff argument gives an
# exponentially decaying bound on its tail.

t, simulated, direct, chernoff = map(np.array, zip(*result.time_tail))
plt.semilogy(t, simulated, label="simulated")
plt.semilogy(t, direct, "--", label="direct sample")
plt.semilogy(t, np.minimum(chernoff, 1.0), ":", label="Chernoff bound")
plt.xlabel("t")
plt.ylabel(r"$P[T \geq t]$")
plt.legend()
plt.show()
print("two-sample KS p = {:.3f}, fitted log-tail slope {:.3f}".format(result.ks_pvalue, result.tail_slope))

##############################################################################
# Finally, a birth can land on a site that was occupied before, but never creates more
# than one new site, so the set of sites ever occupied has at most :math:`N + 1` elements:

print("largest excess of ever-occupied sites over N + 1:", result.max_excess)
