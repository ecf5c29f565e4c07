"""Exact simulation and analysis of the contact process with density-dependent birth rate.

The birth rate of an occupied site is ``lambda * h(a * f1)`` where ``f1`` is the fraction of
occupied neighbours; ``a > 0`` models cooperation and ``a < 0`` competition. The package is
organised as

* :mod:`densitycp.lattice`: parameters, torus geometry and cached configurations;
* :mod:`densitycp.engine`: the event-driven continuous-time Markov chain;
* :mod:`densitycp.coupling`: processes built on one shared graphical representation;
* :mod:`densitycp.meanfield`: the mean-field ODE and its bistability boundary;
* :mod:`densitycp.experiments` and :mod:`densitycp.bounds`: estimators and closed forms;
* :mod:`densitycp.cli`: the ``python -m densitycp`` command line.
"""

__version__ = "0.3.0"
