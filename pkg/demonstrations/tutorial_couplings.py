r"""
Couplings and comparison
========================

.. meta::
    :property="og:description": Drive several contact processes with density-dependent birth rates from one graphical representation and check their ordering event by event.

Most comparison results for interacting particle systems come from a coupling: several
processes are built on one probability space so that an ordering between them holds for
every realisation. :mod:`densitycp.coupling` implements the constructions used for the
contact process with birth rate :math:`\lambda e^{a k / 2d}` and checks the resulting
inclusions after every event.

The sandwich
------------

For :math:`a < 0` a process :math:`\xi` with payoff :math:`a` sits between two ordinary
contact processes: :math:`\eta` with birth rate :math:`\lambda`, and :math:`\zeta` with
the smallest rate :math:`\xi` can ever have, :math:`\lambda e^{a(1 - 1/2d)}`.
A birth arrow carries a mark and a type :math:`i`, the number of
occupied neighbours its tail may have for the birth to go through.
"""
import matplotlib.pyplot as plt

from densitycp import coupling
from densitycp.exceptions import ParameterOrderError
from densitycp.lattice import Params, TorusGeometry

geo = TorusGeometry((200,))
report = coupling.evolve_sandwich(2.5, -1.5, geo, range(geo.n_sites), 30.0, seed=5, trace_points=121)
print("orderings:", report.orderings, "violations:", report.violations)

for label in report.labels:
    times, populations = zip(*report.traces[label])
    plt.plot(times, populations, label=label)
plt.xlabel("time")
plt.ylabel("population")
plt.legend()
plt.show()

##############################################################################
# Pairs on one graphical representation
# -------------------------------------
#
# Two processes with :math:`\lambda_1 \le \lambda_2` and :math:`\max(a_1, 0) \le a_2` can
# be driven by the same arrows with a single thinning mark. The smaller process then never
# occupies a site the larger one leaves empty.

pair = coupling.evolve_coupled_pair(
    Params(2.0, -1.0), Params(2.5, 0.5), geo.box(-10, 10), geo.box(-10, 10), geo, 30.0, seed=5
)
print("final populations:", pair.final_populations, "violations:", pair.violations)

##############################################################################
# Without this condition the thinning coupling breaks down, and
# :func:`~densitycp.coupling.evolve_coupled_pair` refuses to run:

try:
    coupling.evolve_coupled_pair(Params(2.0, 1.0), Params(2.0, -1.0), [100], [100], geo, 1.0, seed=5)
except ParameterOrderError as exc:
    print(exc.qualified())

##############################################################################
# Perturbing the hard-core limit
# ------------------------------
#
# With typed arrows the process at a very negative :math:`a` and its hard-core limit
# :math:`a = -\infty` use the same type 0 arrows. They can only separate at an arrow of
# type :math:`i \ge 1`, whose total rate is :math:`\lambda e^{a/2d}` per site. The chance
# that no such arrow appears on the torus before the horizon is a lower bound on the
# probability that the two processes agree.

for a in (-4.0, -8.0, -16.0):
    agreement = coupling.evolve_perturbation(2.0, a, geo, geo.box(-5, 5), 10.0, seed=5)
    print("a = {:5.1f}: agree at end {}, typed arrows {}, bound {:.4f}".format(
        a, agreement.agree_at_end, agreement.nonzero_type_arrows, agreement.agreement_bound))

##############################################################################
# Non-interacting copies
# ----------------------
#
# In the hard-core limit each seed can be followed by its own independent copy, and the
# copies may stack on one site. Driving the interacting process and the copies from the
# same arrows is a natural attempt to dominate the first by the sum of the others, but it
# is not pathwise: a birth that is blocked for the interacting process can go through for
# a copy, and later a copy's neighbour blocks a birth the interacting process makes. The
# report counts such events instead of assuming they cannot happen.

stack = coupling.evolve_vs_noninteracting([99, 100], 3.0, geo, 20.0, seed=5)
print("violations: {}, typed violations: {}, largest stack: {}".format(
    stack.violations, stack.typed_violations, stack.max_multiplicity))
