"""Monte Carlo estimators.

Every estimator takes an experiment ``seed`` and a number of ``replicates``; replicate ``r``
always uses the stream derived from ``(seed, r)``, so results are identical for any number of
workers. Running the same estimator with the same seed at different parameters reuses the
same streams (seed-shared common random numbers). Where the thinning coupling applies,
:func:`compare_survival` and :func:`phase_scan` go further and drive all parameter sets from
one graphical representation per replicate, which makes admissible comparisons pathwise.

Survival on a finite torus is always censored at a horizon: a replicate survives when it is
still alive at the horizon, or when it escaped to the requested radius before.
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from densitycp import bounds
from densitycp.coupling import survival_indicators_coupled
from densitycp.engine import SimState, StopRule, run, step
from densitycp.exceptions import BracketError, DomainError, ParameterError
from densitycp.lattice import Params, TorusGeometry
from densitycp.replicates import map_replicates, replicate_generator

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95
DEFAULT_SIDE = {1: 400, 2: 128}
DEFAULT_HORIZON = 2000.0


class Init(enum.Enum):
    SINGLE_SEED = "single"
    FULL_TORUS = "full"
    BOX = "box"


def initial_sites(init, geo):
    """Sites occupied at time zero: the center, every site, or the box ``center + {0,1}^d``."""
    init = Init(init)
    if init is Init.SINGLE_SEED:
        return [geo.index(geo.center())]
    if init is Init.FULL_TORUS:
        return list(range(geo.n_sites))
    return geo.box(0, 1)


def default_geometry(d, side=None):
    return TorusGeometry.cube(side or DEFAULT_SIDE.get(d, 32), d)


@dataclass
class Estimate:
    """Monte Carlo point estimate with a Wilson score interval."""

    value: float
    ci_low: float
    ci_high: float
    replicates: int
    seed: int
    method: str = "wilson"
    successes: Optional[int] = None

    @classmethod
    def from_counts(cls, successes, replicates, seed, method="wilson"):
        low, high = wilson_interval(successes, replicates)
        return cls(successes / replicates, low, high, replicates, seed, method, successes)

    @property
    def half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)


def wilson_interval(successes, trials, confidence=CONFIDENCE):
    """Wilson score interval for a binomial proportion.

    Returns:
        tuple[float, float]
    """
    if trials < 1:
        raise ParameterError("replicates must be positive, got {}".format(trials), module="experiments")
    interval = stats.binomtest(int(successes), int(trials)).proportion_ci(
        confidence_level=confidence, method="wilson"
    )
    return float(interval.low), float(interval.high)


def _check_replicates(replicates):
    if replicates < 1:
        raise ParameterError("replicates must be positive, got {}".format(replicates), module="experiments")


def _survival_replicate(seed, replicate_id, params, geo, sites, horizon, escape_radius):
    state = SimState.create(params, geo, sites, seed, replicate_id, skip_null_births=True)
    outcome = run(state, StopRule(horizon=horizon, escape_radius=escape_radius))
    return outcome.survived


def estimate_survival(params, geo, init, horizon, replicates, seed, escape_radius=None,
                      workers=1, progress=False):
    """Fraction of replicates alive at ``horizon``.

    Args:
        params (Params): model parameters
        geo (TorusGeometry): torus
        init (Init or str): ``single``, ``full`` or ``box``
        horizon (float): censoring time
        replicates (int): number of independent runs
        seed (int): experiment seed
        escape_radius (int): count a run as surviving once it reaches this distance from the
            center; only meaningful from a single seed or a box
        workers (int): replicate workers

    Returns:
        Estimate
    """
    _check_replicates(replicates)
    sites = initial_sites(init, geo)
    logger.info(
        "survival: lambda=%r a=%r init=%s horizon=%r replicates=%d",
        params.lam, params.a, Init(init).value, horizon, replicates,
    )
    alive = map_replicates(
        _survival_replicate, replicates, seed, workers=workers, progress=progress,
        params=params, geo=geo, sites=sites, horizon=horizon, escape_radius=escape_radius,
    )
    estimate = Estimate.from_counts(sum(alive), replicates, seed)
    logger.info("survival estimate %.4f [%.4f, %.4f]", estimate.value, estimate.ci_low, estimate.ci_high)
    return estimate


def admissible(first, second):
    """Whether the thinning coupling keeps the process at ``first`` inside the one at ``second``."""
    return first.lam <= second.lam and max(first.a, 0.0) <= second.a


@dataclass
class SurvivalComparison:
    """Per-replicate survival indicators for several parameter sets on common randomness."""

    params: List[Params]
    estimates: List[Estimate]
    indicators: np.ndarray
    counterexamples: Dict[Tuple[int, int], int] = field(default_factory=dict)


def _coupled_replicate(seed, replicate_id, params_list, geo, sites, horizon):
    return survival_indicators_coupled(params_list, geo, sites, horizon, seed, replicate_id)


def compare_survival(params_list, geo, init, horizon, replicates, seed, workers=1, progress=False):
    """Survival of several parameter sets driven by one graphical representation.

    For every admissible ordered pair ``(i, j)`` the result counts the replicates in which
    process ``i`` survived while process ``j`` died out; the coupling makes that count zero.

    Returns:
        SurvivalComparison
    """
    _check_replicates(replicates)
    sites = initial_sites(init, geo)
    logger.info("coupled survival of %d parameter sets, %d replicates", len(params_list), replicates)
    rows = map_replicates(
        _coupled_replicate, replicates, seed, workers=workers, progress=progress,
        params_list=list(params_list), geo=geo, sites=sites, horizon=horizon,
    )
    indicators = np.array(rows, dtype=bool).reshape(replicates, len(params_list))
    estimates = [
        Estimate.from_counts(int(indicators[:, k].sum()), replicates, seed, method="wilson/coupled")
        for k in range(len(params_list))
    ]
    counterexamples = {}
    for i, first in enumerate(params_list):
        for j, second in enumerate(params_list):
            if i != j and admissible(first, second):
                counterexamples[(i, j)] = int(np.sum(indicators[:, i] & ~indicators[:, j]))
    broken = {pair: count for pair, count in counterexamples.items() if count}
    if broken:
        logger.warning("coupled survival ordering broken for pairs %s", broken)
    return SurvivalComparison(list(params_list), estimates, indicators, counterexamples)


@dataclass
class CriticalBracket:
    """Bracket ``[lo, hi]`` around the crossing of the survival threshold.

    The survival estimate at ``lo`` is at most ``threshold`` and the one at ``hi`` exceeds
    it; both are horizon-censored estimates on a finite torus. ``sandwich`` is the interval
    between ``lambda_c0`` and ``lambda_c0 * exp(-a (1 - 1/2d))`` computed from the measured
    critical value at ``a = 0``.
    """

    a: float
    lo: float
    hi: float
    threshold: float
    replicates: int
    horizon: float
    evaluations: Dict[float, float] = field(default_factory=dict)
    lambda_c0: Optional[float] = None
    sandwich: Optional[Tuple[float, float]] = None

    @property
    def note(self):
        return (
            "survival estimate crossing {} with {} replicates at horizon {}; an empirical "
            "bracket on a finite torus".format(self.threshold, self.replicates, self.horizon)
        )

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)


def sandwich_interval(lambda_c0, a, d):
    """Interval between ``lambda_c0`` and ``lambda_c0 * exp(-a (1 - 1/2d))``."""
    other = lambda_c0 * math.exp(-a * (1.0 - 1.0 / (2 * d)))
    return min(lambda_c0, other), max(lambda_c0, other)


def estimate_lambda_c(a, d, geo, horizon, replicates, seed, threshold=0.02, lo=0.25, hi=8.0,
                      width=0.05, lambda_c0=None, retries=3, workers=1, progress=False):
    """Bisect on ``lambda`` for the crossing of the single-seed survival threshold.

    When the starting interval does not bracket the crossing it is widened (``lo`` halved,
    ``hi`` doubled) up to ``retries`` times.

    Args:
        a (float): payoff coefficient
        d (int): dimension
        geo (TorusGeometry): torus
        horizon (float): censoring time
        replicates (int): replicates per evaluation
        seed (int): experiment seed, shared by all evaluations
        threshold (float): survival level in ``(0, 1)``
        lambda_c0 (float): critical value at ``a = 0`` for the sandwich; measured with the
            same settings when omitted and ``a != 0``

    Returns:
        CriticalBracket

    Raises:
        BracketError: if widening does not produce a bracket
    """
    if not 0 < threshold < 1:
        raise DomainError("threshold must lie in (0, 1), got {}".format(threshold), module="experiments")
    evaluations = {}

    def survival(lam):
        if lam not in evaluations:
            estimate = estimate_survival(
                Params(lam, a, d), geo, Init.SINGLE_SEED, horizon, replicates, seed,
                workers=workers, progress=progress,
            )
            evaluations[lam] = estimate.value
        return evaluations[lam]

    for attempt in range(retries + 1):
        low_ok = survival(lo) <= threshold
        high_ok = survival(hi) > threshold
        if low_ok and high_ok:
            break
        if attempt == retries:
            raise BracketError(
                "no bracket for a={} after {} widenings: survival({})={}, survival({})={}".format(
                    a, retries, lo, evaluations[lo], hi, evaluations[hi]
                )
            )
        if not low_ok:
            lo /= 2.0
        if not high_ok:
            hi *= 2.0
        logger.info("widening lambda bracket to [%r, %r]", lo, hi)

    while hi - lo >= width:
        mid = 0.5 * (lo + hi)
        if survival(mid) > threshold:
            hi = mid
        else:
            lo = mid
    bracket = CriticalBracket(a, lo, hi, threshold, replicates, horizon, evaluations)
    if a == 0:
        lambda_c0 = bracket.midpoint
    elif lambda_c0 is None:
        lambda_c0 = estimate_lambda_c(
            0.0, d, geo, horizon, replicates, seed, threshold, width=width, workers=workers,
            progress=progress,
        ).midpoint
    bracket.lambda_c0 = lambda_c0
    bracket.sandwich = sandwich_interval(lambda_c0, a, d)
    logger.info("lambda_c(%r) in [%r, %r]", a, lo, hi)
    return bracket


@dataclass
class PhaseScan:
    lambda_grid: List[float]
    a_grid: List[float]
    cells: List[Tuple[int, int, float, float, Estimate]]
    coupled: bool

    def rows(self):
        """Rows ``(i, j, lambda, a, estimate, ci_low, ci_high, replicates)``."""
        return [
            (i, j, lam, a, e.value, e.ci_low, e.ci_high, e.replicates)
            for i, j, lam, a, e in self.cells
        ]


def phase_scan(lambda_grid, a_grid, d, geo, horizon, replicates, seed, init=Init.SINGLE_SEED,
               coupled=True, max_dominating_rate=1e3, workers=1, progress=False):
    """Survival estimate on every ``(lambda, a)`` cell of a grid.

    With ``coupled`` all cells of a replicate share one graphical representation, provided
    the dominating rate stays below ``max_dominating_rate``; otherwise every cell is
    estimated on its own with shared seeds.

    Returns:
        PhaseScan
    """
    if not len(lambda_grid) or not len(a_grid):
        raise ParameterError("phase scan grids must be nonempty", module="experiments")
    _check_replicates(replicates)
    params = [(i, j, Params(lam, a, d)) for i, lam in enumerate(lambda_grid) for j, a in enumerate(a_grid)]
    dominating = max(p.max_rate() for _, _, p in params)
    if coupled and dominating > max_dominating_rate:
        logger.warning(
            "dominating rate %.3g exceeds %.3g; estimating cells independently", dominating, max_dominating_rate
        )
        coupled = False
    cells = []
    if coupled:
        comparison = compare_survival(
            [p for _, _, p in params], geo, init, horizon, replicates, seed, workers=workers, progress=progress
        )
        for (i, j, p), estimate in zip(params, comparison.estimates):
            cells.append((i, j, p.lam, p.a, estimate))
    else:
        for i, j, p in params:
            estimate = estimate_survival(p, geo, init, horizon, replicates, seed, workers=workers, progress=progress)
            cells.append((i, j, p.lam, p.a, estimate))
    return PhaseScan(list(lambda_grid), list(a_grid), cells, coupled)


@dataclass
class HardcoreStats:
    """Statistics of the hard-core limit from a single seed.

    ``tail`` rows are ``(n, empirical P[N >= n], (lam / (1 + lam))^n)``. ``time_tail`` rows are
    ``(t, empirical P[T >= t], direct-sampling P[T >= t], Chernoff bound)``, where the direct
    sample draws ``T`` as ``S_0 + sum_{i <= N} (T_i + S_i)`` with ``T_i`` exponential of rate 2
    and ``S_i`` exponential of rate ``1 + lam``.
    """

    lam: float
    replicates: int
    seed: int
    generations: np.ndarray
    extinction_times: np.ndarray
    ever_occupied: np.ndarray
    max_population: int
    tail: List[Tuple[int, float, float]]
    chi2_statistic: float
    chi2_pvalue: float
    chi2_bins: int
    ks_pvalue: float
    max_excess: int
    time_tail: List[Tuple[float, float, float, float]]
    tail_slope: float


def _hardcore_replicate(seed, replicate_id, params, geo, site):
    state = SimState.create(params, geo, [site], seed, replicate_id)
    outcome = run(state, StopRule())
    return state.births, outcome.extinction_time, outcome.ever_occupied_count, outcome.max_population


def _merged_bins(counts, probabilities, replicates, minimum=5.0):
    """Observed and expected counts on ``{0}, ..., {K-1}, [K, inf)`` with expectations >= minimum."""
    expected = replicates * np.asarray(probabilities)
    k = len(expected)
    while k > 1 and (expected[k - 1] < minimum or replicates * (1.0 - probabilities[:k].sum()) < minimum):
        k -= 1
    observed = np.append(counts[:k], counts[k:].sum())
    expected_tail = replicates - expected[:k].sum()
    return observed, np.append(expected[:k], expected_tail)


def hardcore_stats(lam, replicates, seed, side=64, time_points=41, workers=1, progress=False):
    """Generation count, extinction time and ever-occupied set of the hard-core limit.

    Args:
        lam (float): birth rate
        replicates (int): number of runs from one seed on a ring of ``side`` sites
        seed (int): experiment seed; the direct sampler uses the auxiliary stream ``(1, 0)``

    Returns:
        HardcoreStats
    """
    _check_replicates(replicates)
    params = Params.hardcore(lam, 1)
    geo = TorusGeometry((side,))
    logger.info("hard-core statistics: lambda=%r replicates=%d", lam, replicates)
    rows = map_replicates(
        _hardcore_replicate, replicates, seed, workers=workers, progress=progress,
        params=params, geo=geo, site=geo.index(geo.center()),
    )
    generations = np.array([r[0] for r in rows], dtype=int)
    times = np.array([r[1] for r in rows], dtype=float)
    ever = np.array([r[2] for r in rows], dtype=int)
    max_population = int(max(r[3] for r in rows))

    ratio = lam / (1.0 + lam)
    n_max = int(generations.max())
    tail = [
        (n, float(np.mean(generations >= n)), bounds.geometric_tail(lam, n)) for n in range(n_max + 2)
    ]
    counts = np.bincount(generations, minlength=n_max + 1).astype(float)
    probabilities = (1.0 - ratio) * ratio ** np.arange(n_max + 1)
    observed, expected = _merged_bins(counts, probabilities, replicates)
    if len(observed) > 1:
        chi2 = stats.chisquare(observed, expected)
        chi2_statistic, chi2_pvalue = float(chi2.statistic), float(chi2.pvalue)
    else:
        chi2_statistic, chi2_pvalue = 0.0, 1.0

    generator = replicate_generator(seed, 0, stream=1)
    direct_n = generator.geometric(1.0 / (1.0 + lam), size=replicates) - 1
    direct = (
        generator.exponential(1.0 / (1.0 + lam), size=replicates)
        + generator.gamma(direct_n, 0.5)
        + generator.gamma(direct_n, 1.0 / (1.0 + lam))
    )
    ks_pvalue = float(stats.ks_2samp(times, direct).pvalue)

    grid = np.linspace(0.0, float(np.quantile(times, 0.999)), time_points)
    empirical = np.array([np.mean(times >= t) for t in grid])
    envelope = np.array([np.mean(direct >= t) for t in grid])
    chernoff = [bounds.chernoff_extinction_bound(lam, t) for t in grid]
    time_tail = list(zip(grid.tolist(), empirical.tolist(), envelope.tolist(), chernoff))

    usable = empirical >= 10.0 / replicates
    half = grid[usable] >= 0.5 * grid[usable].max() if usable.any() else usable
    if usable.sum() >= 2 and half.sum() >= 2:
        slope = float(np.polyfit(grid[usable][half], np.log(empirical[usable][half]), 1)[0])
    else:
        slope = math.nan

    result = HardcoreStats(
        lam=lam,
        replicates=replicates,
        seed=seed,
        generations=generations,
        extinction_times=times,
        ever_occupied=ever,
        max_population=max_population,
        tail=tail,
        chi2_statistic=chi2_statistic,
        chi2_pvalue=chi2_pvalue,
        chi2_bins=len(observed),
        ks_pvalue=ks_pvalue,
        max_excess=int(np.max(ever - generations - 1)),
        time_tail=time_tail,
        tail_slope=slope,
    )
    logger.info("chi-square p=%.4f, KS p=%.4f, log-tail slope %.4f", chi2_pvalue, ks_pvalue, slope)
    return result


@dataclass
class BlockSpec:
    """Boxes of the two block constructions.

    ``lambda_minus`` and ``lambda_plus`` are the offsets ``{0,1}^d`` and ``{-1,0,1,2}^d``
    of the doubling event; the space-time blocks of the empty-block event are
    ``[-2L, 2L]^d x [0, 2L]`` and ``[-L, L]^d x [L, 2L]``.
    """

    d: int
    epsilon: float
    tau: float
    L: int = 1
    lambda_minus: Tuple[int, int] = (0, 1)
    lambda_plus: Tuple[int, int] = (-1, 2)

    @classmethod
    def from_epsilon(cls, epsilon, d, L=1):
        return cls(d, epsilon, bounds.tau(epsilon, d), L)


@dataclass
class DoublingResult:
    lam: float
    a: float
    spec: BlockSpec
    estimate: Estimate
    stage_bound: float
    pipeline_bound: float
    stage_threshold: float


def _doubling_replicate(seed, replicate_id, params, geo, start, window, tau_):
    state = SimState.create(params, geo, start, seed, replicate_id, skip_null_births=True, birth_window=window)
    run(state, StopRule(horizon=tau_, stop_on_extinction=True))
    return state.population == len(window) and state.time >= tau_


def doubling_probability(lam, a, epsilon, d, replicates, seed, workers=1, progress=False):
    """Probability that the floor-rate process fills the box ``{-1,0,1,2}^d`` by ``tau``.

    The process starts from ``{0,1}^d`` with births outside ``{-1,0,1,2}^d`` suppressed and
    runs for ``tau = -ln(1 - epsilon/2) / 4^d``.

    Raises:
        DomainError: for ``a < 0``
    """
    if a < 0:
        raise DomainError("the doubling construction needs a >= 0, got {}".format(a), module="experiments")
    _check_replicates(replicates)
    spec = BlockSpec.from_epsilon(epsilon, d)
    geo = TorusGeometry.cube(6, d)
    params = Params.floor_rate(lam, a, d)
    start = geo.box(*spec.lambda_minus)
    window = geo.box(*spec.lambda_plus)
    logger.info("doubling: lambda=%r a=%r epsilon=%r tau=%r", lam, a, epsilon, spec.tau)
    hits = map_replicates(
        _doubling_replicate, replicates, seed, workers=workers, progress=progress,
        params=params, geo=geo, start=start, window=window, tau_=spec.tau,
    )
    stage = bounds.invasion_stage_bound(lam, a, spec.tau, d)
    return DoublingResult(
        lam=lam,
        a=a,
        spec=spec,
        estimate=Estimate.from_counts(sum(hits), replicates, seed),
        stage_bound=stage,
        pipeline_bound=bounds.doubling_pipeline_bound(stage, epsilon, d),
        stage_threshold=bounds.stage_threshold(lam, epsilon, d, spec.tau) if lam > 0 else math.inf,
    )


@dataclass
class EmptyBlockResult:
    lam: float
    a: float
    L: int
    estimate: Estimate
    agreement_parameter: float
    agreement_probability: float


def _empty_block_replicate(seed, replicate_id, params, geo, inner, L):
    state = SimState.create(params, geo, range(geo.n_sites), seed, replicate_id, skip_null_births=True)
    occupancy = state.config.occupancy
    while state.population and step(state, until=float(L)) is not None:
        pass
    if any(occupancy[x] for x in inner):
        return False
    while state.population:
        event = step(state, until=float(2 * L))
        if event is None:
            break
        if event.kind == "birth" and event.target in inner:
            return False
    return True


def empty_block_probability(lam, a, L, d, replicates, seed, side=None, workers=1, progress=False):
    """Probability that ``[-L, L]^d`` stays empty during ``[L, 2L]`` from a full torus.

    The torus has side ``8L`` unless given; the inner box is centred on the torus center.

    Raises:
        ParameterError: for ``L < 1``
        DomainError: for ``a >= 0``
    """
    if int(L) != L or L < 1:
        raise ParameterError("L must be a positive integer, got {}".format(L), module="experiments")
    if a >= 0:
        raise DomainError("the empty-block event concerns a < 0, got {}".format(a), module="experiments")
    _check_replicates(replicates)
    L = int(L)
    geo = TorusGeometry.cube(side or 8 * L, d)
    params = Params(lam, a, d)
    inner = frozenset(geo.box(-L, L))
    logger.info("empty block: lambda=%r a=%r L=%d d=%d", lam, a, L, d)
    hits = map_replicates(
        _empty_block_replicate, replicates, seed, workers=workers, progress=progress,
        params=params, geo=geo, inner=inner, L=L,
    )
    return EmptyBlockResult(
        lam=lam,
        a=a,
        L=L,
        estimate=Estimate.from_counts(sum(hits), replicates, seed),
        agreement_parameter=bounds.poisson_agreement_parameter(lam, a, L, d),
        agreement_probability=bounds.poisson_agreement_probability(lam, a, L, d),
    )
