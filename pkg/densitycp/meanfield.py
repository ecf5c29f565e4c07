r"""Mean-field dynamics of the density-dependent contact process.

On the complete graph the density of occupied sites follows

.. math:: u' = \phi(u) = \lambda e^{a u} u (1 - u) - u.

The origin is always a fixed point, stable for :math:`\lambda < 1` and unstable for
:math:`\lambda > 1` whatever the value of :math:`a`. For :math:`\lambda < 1` two interior
fixed points :math:`u_- < u_+` appear once the payoff exceeds

.. math:: a_c(\lambda) = 1 + x_\lambda, \qquad \lambda e^{x_\lambda} = 1 + x_\lambda,

where the graph of :math:`\phi` touches zero at :math:`u_0 = 1 - e^{-x_\lambda} / \lambda`.
There is no closed form for the interior roots, so they are isolated on a dense grid and
refined by bisection.
"""
import enum
import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import optimize

from densitycp.exceptions import DomainError, ParameterError

logger = logging.getLogger(__name__)

GRID_POINTS = 10 ** 4
XTOL = 1e-12
MERGE_TOL = 1e-6
TANGENCY_TOL = 1e-9
FLAT_SLOPE = 1e-9


class Stability(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    DEGENERATE = "Degenerate"


class Regime(enum.Enum):
    GLOBAL_EXTINCTION = "GlobalExtinction"
    BISTABLE = "Bistable"
    INTERIOR_STABLE = "InteriorStable"


FixedPoint = namedtuple("FixedPoint", ["u", "stability"])


@dataclass
class MeanFieldReport:
    lam: float
    a: float
    fixed_points: List[FixedPoint] = field(default_factory=list)
    regime: Regime = Regime.GLOBAL_EXTINCTION

    @property
    def interior(self):
        return [p for p in self.fixed_points if p.u > 0]

    @property
    def u_minus(self):
        """float: the unstable interior root of a bistable system, else ``nan``"""
        if self.regime is Regime.BISTABLE:
            return self.interior[0].u
        return math.nan

    @property
    def u_plus(self):
        """float: the largest stable interior root, else ``nan``"""
        stable = [p.u for p in self.interior if p.stability is Stability.STABLE]
        return stable[-1] if stable else math.nan


@dataclass(frozen=True)
class BistabilityPoint:
    lam: float
    x_lambda: float
    u0: float
    a_c: float


def phi(lam, a, u):
    """Right-hand side of the mean-field ODE; accepts arrays for ``u``."""
    return lam * np.exp(a * u) * u * (1 - u) - u


def dphi(lam, a, u):
    """Closed-form derivative of :func:`phi` with respect to ``u``."""
    return lam * np.exp(a * u) * (a * u * (1 - u) + 1 - 2 * u) - 1


def _stability(slope):
    if abs(slope) < FLAT_SLOPE:
        return Stability.DEGENERATE
    return Stability.STABLE if slope < 0 else Stability.UNSTABLE


def _origin_stability(lam):
    if lam > 1:
        return Stability.UNSTABLE
    if lam < 1:
        return Stability.STABLE
    return Stability.DEGENERATE


def _interior_roots(lam, a, grid_points):
    f = lambda u: float(phi(lam, a, u))
    slope = lambda u: float(dphi(lam, a, u))
    grid = np.linspace(0.0, 1.0, grid_points + 1)[1:]
    values = phi(lam, a, grid)
    roots = []
    for i in range(len(grid) - 1):
        left, right = values[i], values[i + 1]
        if left == 0.0:
            roots.append((float(grid[i]), False))
        elif left * right < 0:
            roots.append((optimize.bisect(f, grid[i], grid[i + 1], xtol=XTOL), False))
    # tangency: |phi| has a local minimum on the grid without a sign change around it
    magnitude = np.abs(values)
    for i in range(1, len(grid) - 1):
        same_sign = values[i - 1] * values[i] > 0 and values[i] * values[i + 1] > 0
        if same_sign and magnitude[i] <= magnitude[i - 1] and magnitude[i] <= magnitude[i + 1]:
            lo, hi = grid[i - 1], grid[i + 1]
            if slope(lo) * slope(hi) < 0:
                u = optimize.bisect(slope, lo, hi, xtol=XTOL)
                if abs(f(u)) < TANGENCY_TOL:
                    roots.append((u, True))
    roots.sort()
    merged = []
    for u, degenerate in roots:
        if merged and u - merged[-1][0] < MERGE_TOL:
            previous, _ = merged.pop()
            merged.append((0.5 * (previous + u), True))
        else:
            merged.append((u, degenerate))
    return merged


def fixed_points(lam, a, grid_points=GRID_POINTS):
    """Locate and classify the fixed points of :func:`phi` on ``[0, 1)``.

    Args:
        lam (float): birth rate, positive
        a (float): payoff coefficient
        grid_points (int): resolution of the sign-change scan

    Returns:
        MeanFieldReport

    Raises:
        ParameterError: if ``lam <= 0``
    """
    if not lam > 0:
        raise ParameterError("lambda must be positive, got {}".format(lam), module="meanfield")
    points = [FixedPoint(0.0, _origin_stability(lam))]
    for u, degenerate in _interior_roots(lam, a, grid_points):
        stability = Stability.DEGENERATE if degenerate else _stability(float(dphi(lam, a, u)))
        points.append(FixedPoint(u, stability))
    interior = points[1:]
    distinct = [p for p in interior if p.stability is not Stability.DEGENERATE]
    if lam > 1:
        regime = Regime.INTERIOR_STABLE
    elif lam < 1:
        regime = Regime.BISTABLE if len(distinct) >= 2 else Regime.GLOBAL_EXTINCTION
    else:
        stable = any(p.stability is Stability.STABLE for p in interior)
        regime = Regime.INTERIOR_STABLE if stable else Regime.GLOBAL_EXTINCTION
    return MeanFieldReport(lam, a, points, regime)


def x_lambda(lam):
    """Unique positive solution of ``lam * exp(x) = 1 + x`` for ``0 < lam < 1``.

    ``lam = 1`` returns the limit ``0``.

    Raises:
        DomainError: outside ``(0, 1]``
    """
    if not 0 < lam <= 1:
        raise DomainError("x_lambda is defined for 0 < lambda <= 1, got {}".format(lam), module="meanfield")
    if lam == 1:
        return 0.0
    f = lambda x: lam * math.exp(x) - 1.0 - x
    upper = 1.0
    while f(upper) <= 0:
        upper *= 2.0
    return optimize.bisect(f, 0.0, upper, xtol=XTOL)


def a_critical(lam):
    """Payoff above which the mean-field system with ``lam < 1`` is bistable."""
    return 1.0 + x_lambda(lam)


def bistability_point(lam):
    """The tangency point of the bistability boundary at ``lam``."""
    x = x_lambda(lam)
    return BistabilityPoint(lam, x, 1.0 - math.exp(-x) / lam, 1.0 + x)


Trajectory = namedtuple("Trajectory", ["times", "values", "terminal"])


def integrate(lam, a, u0, t_end, step):
    """Classical fourth-order Runge-Kutta with a fixed step, clamped to ``[0, 1]``.

    The step is shrunk slightly when needed so that an integer number of steps ends exactly
    at ``t_end``.

    Args:
        lam (float): birth rate
        a (float): payoff coefficient
        u0 (float): initial density in ``[0, 1]``
        t_end (float): final time
        step (float): step size, positive

    Returns:
        Trajectory: ``times`` and ``values`` arrays and the ``terminal`` value

    Raises:
        ParameterError: for a nonpositive step or an initial density outside ``[0, 1]``
    """
    if not step > 0:
        raise ParameterError("step must be positive, got {}".format(step), module="meanfield")
    if not 0.0 <= u0 <= 1.0:
        raise ParameterError("u0 must lie in [0, 1], got {}".format(u0), module="meanfield")
    if t_end < 0:
        raise ParameterError("t_end must be nonnegative, got {}".format(t_end), module="meanfield")
    n = int(math.ceil(t_end / step - 1e-9)) if t_end > 0 else 0
    h = t_end / n if n else 0.0
    values = np.empty(n + 1)
    values[0] = u = float(u0)
    f = lambda v: lam * math.exp(a * v) * v * (1 - v) - v
    for i in range(n):
        k1 = f(u)
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        u = min(1.0, max(0.0, u + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6))
        values[i + 1] = u
    times = np.linspace(0.0, t_end, n + 1)
    return Trajectory(times, values, float(values[-1]))


def survival_phase_threshold(lam, ubar):
    """Payoff below which ``phi(ubar) < 0``: ``ln(1 / lam) / ubar`` for ``ubar < 1/2``."""
    _check_ubar(ubar)
    return math.log(1.0 / lam) / ubar


def bistable_phase_threshold(lam, ubar):
    """Payoff above which ``phi(ubar) > 0``: ``ln(2 / lam) / ubar`` for ``ubar < 1/2``."""
    _check_ubar(ubar)
    return math.log(2.0 / lam) / ubar


def _check_ubar(ubar):
    if not 0 < ubar < 0.5:
        raise DomainError("ubar must lie in (0, 1/2), got {}".format(ubar), module="meanfield")


def regime_table(lambda_grid, a_grid, grid_points=GRID_POINTS):
    """Classify every ``(lam, a)`` cell.

    Returns:
        list[tuple]: rows ``(lam, a, regime, u_minus, u_plus)``
    """
    rows = []
    for lam in lambda_grid:
        for a in a_grid:
            report = fixed_points(lam, a, grid_points)
            rows.append((lam, a, report.regime.value, report.u_minus, report.u_plus))
    logger.info("classified %d mean-field cells", len(rows))
    return rows


def critical_curve(lambda_grid):
    """Rows ``(lam, a_c(lam))`` of the bistability boundary."""
    return [(lam, a_critical(lam)) for lam in lambda_grid]
