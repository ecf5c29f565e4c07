r"""
Bistability in the mean-field equation
======================================

.. meta::
    :property="og:description": Locate the fold at which the mean-field density equation of the contact process with a density-dependent birth rate becomes bistable.

Consider the contact process on :math:`\mathbb{Z}^d` in which an occupied site with a
fraction :math:`f` of occupied neighbours gives birth at rate :math:`\lambda e^{a f}`
and dies at rate 1. When :math:`a = 0` this is the ordinary contact process with birth
rate :math:`\lambda`. A positive payoff coefficient :math:`a` rewards crowding, a
negative one punishes it.

Replacing every neighbourhood by its average gives a single equation for the density
:math:`u(t)` of occupied sites,

.. math:: \frac{du}{dt} = \phi(u) = u\left(\lambda e^{a u} (1 - u) - 1\right).

Below :math:`\lambda = 1` the empty state is stable. Whether anything else is stable
depends on :math:`a`: past the critical payoff

.. math:: a_c(\lambda) = 1 + x_\lambda, \qquad \lambda e^{x_\lambda} = 1 + x_\lambda,

two interior roots :math:`u_- < u_+` appear, and densities above :math:`u_-` are carried
to :math:`u_+` while smaller ones die out.

We start by importing NumPy, Matplotlib and the mean-field module.
"""
import matplotlib.pyplot as plt
import numpy as np

from densitycp import meanfield

##############################################################################
# The right-hand side
# -------------------
#
# Fix :math:`\lambda = 1/2` and compute the fold. At :math:`a = a_c` the curve
# :math:`\phi` touches zero at :math:`u_0 = x_\lambda / (1 + x_\lambda)`.

lam = 0.5
point = meanfield.bistability_point(lam)
print("a_c = {:.4f}, tangency at u0 = {:.4f}".format(point.a_c, point.u0))

u = np.linspace(0.0, 1.0, 400)
for a in (0.0, point.a_c - 0.5, point.a_c, point.a_c + 0.5):
    plt.plot(u, meanfield.phi(lam, a, u), label="a = {:.2f}".format(a))
plt.axhline(0.0, color="black", linewidth=0.8)
plt.xlabel("density u")
plt.ylabel(r"$\phi(u)$")
plt.legend()
plt.show()

##############################################################################
# Fixed points and their stability
# --------------------------------
#
# :func:`~densitycp.meanfield.fixed_points` scans :math:`(0, 1]` for sign changes and
# tangencies of :math:`\phi` and classifies each root by the sign of :math:`\phi'`.

for a in (point.a_c - 1e-3, point.a_c + 1.0):
    report = meanfield.fixed_points(lam, a)
    print("a = {:.4f}: {}".format(a, report.regime.value))
    for p in report.fixed_points:
        print("    u = {:.6f} ({})".format(p.u, p.stability.value))

##############################################################################
# Both basins can be seen by integrating the equation from just below and just above
# :math:`u_-`.

a = point.a_c + 1.0
report = meanfield.fixed_points(lam, a)
for u0 in (report.u_minus - 0.02, report.u_minus + 0.02, 0.9):
    path = meanfield.integrate(lam, a, u0, 40.0, 0.01)
    plt.plot(path.times, path.values, label="u(0) = {:.3f}".format(u0))
plt.axhline(report.u_minus, color="grey", linestyle="--", linewidth=0.8)
plt.xlabel("time")
plt.ylabel("density")
plt.legend()
plt.show()

##############################################################################
# The critical curve
# ------------------
#
# As :math:`\lambda \to 0` the fold moves out like :math:`\ln(1/\lambda)`, and at
# :math:`\lambda = 1` it reaches :math:`a_c = 1`. Above that value of :math:`\lambda`
# the interior root is stable for every :math:`a \ge 0`.

curve = meanfield.critical_curve(np.linspace(0.02, 0.98, 49))
lams, acs = zip(*curve)
plt.plot(lams, acs)
plt.xlabel(r"$\lambda$")
plt.ylabel(r"$a_c(\lambda)$")
plt.show()

##############################################################################
# The same curve is produced from the command line with
#
# .. code-block:: bash
#
#     python -m densitycp meanfield --curve ac --lambda-grid 0.02:0.98:0.02
