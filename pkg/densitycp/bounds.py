r"""Closed-form quantities of the block constructions.

Survival direction, on the floor-rate process started from :math:`\Lambda_- = \{0,1\}^d`:

* ``tau``: the time window :math:`\tau = -\ln(1 - \epsilon/2) / 4^d` in which the box
  :math:`\Lambda_+ = \{-1, 0, 1, 2\}^d` sees no death mark with probability
  :math:`1 - \epsilon/2`;
* ``invasion_stage_bound``: probability that one of the :math:`d` invasion stages completes
  within :math:`\tau / d`, :math:`(1 - \exp(-\lambda \tau e^{a/2d} / 2d^2))^{4^d}`;
* ``doubling_pipeline_bound``: the resulting lower bound on the doubling probability.

Extinction direction, on the space-time block :math:`[-2L, 2L]^d \times [0, 2L]`:

* ``poisson_agreement_probability``: probability that no arrow of type :math:`i \ge 1` hits the
  block, with Poisson parameter :math:`2L (4L+1)^d \cdot 2 \lambda e^{a/2d}`;
* ``periphery_tail_bound`` and ``chernoff_extinction_bound`` for the hard-core limit.
"""
import math
from collections import namedtuple

from densitycp.exceptions import DomainError


def _check_epsilon(epsilon):
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1), got {}".format(epsilon), module="experiments")


def _check_dim(d):
    if int(d) != d or d < 1:
        raise DomainError("d must be a positive integer, got {}".format(d), module="experiments")


def tau(epsilon, d):
    """Length of the no-death window for tolerance ``epsilon`` in dimension ``d``."""
    _check_epsilon(epsilon)
    _check_dim(d)
    return -math.log1p(-epsilon / 2.0) / 4 ** d


def no_death_probability(tau_, d):
    """Probability of no death mark in :math:`\\Lambda_+ \\times [0, \\tau]`."""
    return math.exp(-(4 ** d) * tau_)


def invasion_stage_bound(lam, a, tau_, d):
    """Lower bound on one invasion stage completing within ``tau / d``."""
    _check_dim(d)
    rate = lam * tau_ * math.exp(a / (2 * d)) / (2 * d * d)
    return (-math.expm1(-rate)) ** (4 ** d)


def doubling_pipeline_bound(stage, epsilon, d):
    """``1 - d (1 - stage) - epsilon / 2``; vacuous (negative) when the stages are weak."""
    _check_epsilon(epsilon)
    return 1.0 - d * (1.0 - stage) - epsilon / 2.0


def stage_threshold(lam, epsilon, d, tau_=None):
    """Smallest payoff for which :func:`invasion_stage_bound` reaches ``1 - epsilon / 2d``.

    This is where the stage bound starts to pay off for the given tolerance. It is a property
    of the bound, not a critical value of the process.
    """
    _check_epsilon(epsilon)
    if tau_ is None:
        tau_ = tau(epsilon, d)
    if lam <= 0:
        raise DomainError("lambda must be positive, got {}".format(lam), module="experiments")
    q = -math.expm1(math.log1p(-epsilon / (2 * d)) / 4 ** d)
    needed = -math.log(q) * 2 * d * d / (lam * tau_)
    return 2 * d * math.log(needed)


def block_volume(L, d):
    """Number of space-time units in :math:`[-2L, 2L]^d \\times [0, 2L]`: ``2L (4L+1)^d``."""
    return 2 * L * (4 * L + 1) ** d


def poisson_agreement_parameter(lam, a, L, d):
    """Mean number of type ``i >= 1`` arrows aimed at one block."""
    if a == -math.inf:
        return 0.0
    return block_volume(L, d) * 2.0 * lam * math.exp(a / (2 * d))


def poisson_agreement_probability(lam, a, L, d):
    """Probability that the finite-``a`` and hard-core processes agree on the block."""
    return math.exp(-poisson_agreement_parameter(lam, a, L, d))


def periphery_size(L, d):
    """Area of the lateral facets of the block, ``2d (4L+1)^(d-1) 2L``."""
    return 2 * d * (4 * L + 1) ** (d - 1) * 2 * L


def periphery_tail_bound(lam, L, d):
    """Bound on at least ``2 e mu`` births onto the periphery, ``mu = lam |periphery|``.

    Uses the Chernoff tail of a Poisson variable at twice ``e`` times its mean,
    ``P[X >= 2 e mu] <= exp(-mu - 2 e mu ln 2)``, doubled.
    """
    mu = lam * periphery_size(L, d)
    return min(1.0, 2.0 * math.exp(-mu - 2.0 * math.e * mu * math.log(2.0)))


def chernoff_extinction_bound(lam, t, r=None, theta=0.5):
    """Tail bound on the extinction time of the hard-core limit from one seed.

    ``m exp(-theta t) / (1 - theta)^(2m + 1) + (1 + 1/lam)^(-m)`` with ``m = floor(t r)``.
    With ``theta = 1/2`` the bound decays for ``r < 1 / (4 ln 2)``; the default takes half that.
    """
    if not 0 < theta < 1:
        raise DomainError("theta must lie in (0, 1), got {}".format(theta), module="experiments")
    if r is None:
        r = 1.0 / (8.0 * math.log(2.0))
    m = int(math.floor(t * r))
    gamma_part = m * math.exp(-theta * t - (2 * m + 1) * math.log1p(-theta))
    geometric_part = math.exp(-m * math.log1p(1.0 / lam)) if lam > 0 else 0.0
    return min(1.0, gamma_part + geometric_part)


def geometric_tail(lam, n):
    """Exact ``P[N >= n]`` of the hard-core generation count, ``(lam / (1 + lam))^n``."""
    return (lam / (1.0 + lam)) ** n


BoundRecord = namedtuple(
    "BoundRecord",
    [
        "epsilon", "d", "lam", "a", "L", "tau", "no_death", "stage", "pipeline",
        "stage_threshold", "agreement_parameter", "agreement", "periphery_tail",
    ],
)


def bounds(epsilon, d, lam, a, L, tau_=None):
    """Evaluate every closed form for one parameter set.

    Args:
        epsilon (float): tolerance in ``(0, 1)``
        d (int): dimension
        lam (float): birth rate
        a (float): payoff coefficient for the invasion bound and the agreement bound
        L (int): block scale
        tau_ (float): window length, derived from ``epsilon`` when omitted

    Returns:
        BoundRecord

    Raises:
        DomainError: if ``epsilon`` is outside ``(0, 1)``
    """
    _check_epsilon(epsilon)
    if tau_ is None:
        tau_ = tau(epsilon, d)
    finite = math.isfinite(a)
    stage = invasion_stage_bound(lam, a, tau_, d) if finite else 0.0
    return BoundRecord(
        epsilon=epsilon,
        d=d,
        lam=lam,
        a=a,
        L=L,
        tau=tau_,
        no_death=no_death_probability(tau_, d),
        stage=stage,
        pipeline=doubling_pipeline_bound(stage, epsilon, d),
        stage_threshold=stage_threshold(lam, epsilon, d, tau_) if lam > 0 else math.inf,
        agreement_parameter=poisson_agreement_parameter(lam, a, L, d),
        agreement=poisson_agreement_probability(lam, a, L, d),
        periphery_tail=periphery_tail_bound(lam, L, d),
    )
