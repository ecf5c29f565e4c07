import math

import numpy as np
import pytest

from densitycp import bounds
from densitycp.exceptions import BracketError, DomainError, ParameterError
from densitycp.experiments import (
    Estimate,
    Init,
    admissible,
    compare_survival,
    default_geometry,
    doubling_probability,
    empty_block_probability,
    estimate_lambda_c,
    estimate_survival,
    hardcore_stats,
    initial_sites,
    phase_scan,
    sandwich_interval,
    wilson_interval,
)
from densitycp.lattice import Params, TorusGeometry


@pytest.fixture
def small_ring():
    return TorusGeometry((30,))


class TestEstimates:
    def test_wilson_interval(self):
        low, high = wilson_interval(0, 10)
        assert low == pytest.approx(0.0, abs=1e-12)
        assert 0.2 < high < 0.35
        low, high = wilson_interval(5, 10)
        assert low == pytest.approx(1.0 - high)

    def test_estimate_from_counts(self):
        estimate = Estimate.from_counts(3, 10, seed=1)
        assert estimate.value == 0.3
        assert estimate.ci_low < 0.3 < estimate.ci_high
        assert estimate.successes == 3
        assert estimate.half_width == pytest.approx(0.5 * (estimate.ci_high - estimate.ci_low))

    def test_no_trials(self):
        with pytest.raises(ParameterError):
            wilson_interval(0, 0)


def test_initial_sites():
    geo = TorusGeometry((10,))
    assert initial_sites("single", geo) == [5]
    assert initial_sites(Init.FULL_TORUS, geo) == list(range(10))
    assert initial_sites("box", geo) == [5, 6]
    assert default_geometry(2).shape == (128, 128)
    assert default_geometry(1, 50).n_sites == 50


def test_admissible():
    assert admissible(Params(1.0, -2.0), Params(1.0, 0.0))
    assert admissible(Params(1.0, 0.5), Params(2.0, 1.0))
    assert not admissible(Params(1.0, 1.0), Params(2.0, 0.5))
    assert not admissible(Params(2.0, 0.0), Params(1.0, 0.0))


def test_survival_is_independent_of_workers(small_ring):
    params = Params(2.0, 0.5)
    kwargs = dict(init="single", horizon=3.0, replicates=70, seed=12)
    serial = estimate_survival(params, small_ring, **kwargs)
    parallel = estimate_survival(params, small_ring, workers=2, **kwargs)
    assert serial == parallel


def test_survival_is_monotone_in_the_horizon(small_ring):
    params = Params(3.0, 0.0)
    short = estimate_survival(params, small_ring, "single", 1.0, 50, seed=4)
    long = estimate_survival(params, small_ring, "single", 4.0, 50, seed=4)
    escaped = estimate_survival(params, small_ring, "single", 4.0, 50, seed=4, escape_radius=3)
    assert long.successes <= short.successes
    assert escaped.successes >= long.successes


def test_compare_survival_has_no_counterexamples(small_ring):
    params = [Params(1.5, -1.0), Params(1.5, 0.0), Params(3.0, 0.0), Params(3.0, 1.0)]
    comparison = compare_survival(params, small_ring, "single", 4.0, 40, seed=8)
    assert comparison.indicators.shape == (40, 4)
    assert (0, 3) in comparison.counterexamples
    assert set(comparison.counterexamples.values()) == {0}
    values = [e.value for e in comparison.estimates]
    assert values == sorted(values)


def test_lambda_c_bracket(small_ring):
    bracket = estimate_lambda_c(0.0, 1, small_ring, 5.0, 40, seed=2, threshold=0.2, width=1.0)
    assert bracket.hi - bracket.lo < 1.0
    assert bracket.evaluations[bracket.lo] <= 0.2 < bracket.evaluations[bracket.hi]
    assert bracket.lambda_c0 == bracket.midpoint
    assert bracket.sandwich == (bracket.midpoint, bracket.midpoint)
    assert "empirical" in bracket.note


def test_lambda_c_without_crossing(small_ring):
    with pytest.raises(BracketError):
        estimate_lambda_c(0.0, 1, small_ring, 50.0, 30, seed=2, lo=0.25, hi=0.5, retries=0)


def test_lambda_c_threshold_domain(small_ring):
    with pytest.raises(DomainError):
        estimate_lambda_c(0.0, 1, small_ring, 5.0, 10, seed=2, threshold=1.0)


def test_sandwich_interval():
    low, high = sandwich_interval(2.0, -1.0, 1)
    assert low == 2.0
    assert high == pytest.approx(2.0 * math.exp(0.5))
    assert sandwich_interval(2.0, 1.0, 2) == (pytest.approx(2.0 * math.exp(-0.75)), 2.0)


class TestPhaseScan:
    def test_coupled(self, small_ring):
        scan = phase_scan([0.5, 3.0], [-1.0, 0.0, 1.0], 1, small_ring, 4.0, 20, seed=6)
        assert scan.coupled
        rows = scan.rows()
        assert len(rows) == 6
        assert rows[0][:4] == (0, 0, 0.5, -1.0)
        by_cell = {(i, j): value for i, j, _, _, value, _, _, _ in rows}
        # only cells with a >= 0 are ordered by the thinning coupling
        for i in range(2):
            assert by_cell[(i, 1)] <= by_cell[(i, 2)]
        for j in (1, 2):
            assert by_cell[(0, j)] <= by_cell[(1, j)]
        assert by_cell[(0, 0)] <= by_cell[(1, 1)]

    def test_falls_back_above_the_dominating_rate(self, small_ring):
        scan = phase_scan([0.5, 3.0], [0.0], 1, small_ring, 2.0, 10, seed=6, max_dominating_rate=1.0)
        assert not scan.coupled
        assert [row[:4] for row in scan.rows()] == [(0, 0, 0.5, 0.0), (1, 0, 3.0, 0.0)]

    def test_empty_grid(self, small_ring):
        with pytest.raises(ParameterError):
            phase_scan([], [0.0], 1, small_ring, 1.0, 10, seed=1)


def test_hardcore_stats():
    result = hardcore_stats(1.0, 400, seed=3)
    assert result.tail[0] == (0, 1.0, 1.0)
    assert result.tail[1][2] == pytest.approx(0.5)
    assert result.max_excess <= 0
    assert result.chi2_bins >= 2
    assert result.chi2_pvalue > 1e-4
    assert result.ks_pvalue > 1e-4
    assert len(result.time_tail) == 41
    assert result.time_tail[0][1] == 1.0
    assert not result.tail_slope > 0
    assert np.all(result.extinction_times > 0)


class TestBlocks:
    def test_doubling_needs_nonnegative_payoff(self):
        with pytest.raises(DomainError):
            doubling_probability(0.1, -1.0, 0.1, 1, 10, seed=1)

    def test_doubling_at_large_payoff(self):
        result = doubling_probability(0.1, 80.0, 0.1, 1, 100, seed=1)
        assert result.spec.tau == bounds.tau(0.1, 1)
        assert result.stage_bound == pytest.approx(1.0)
        assert result.pipeline_bound == pytest.approx(0.95)
        assert result.estimate.value >= 0.85

    def test_empty_block_domain(self):
        with pytest.raises(ParameterError):
            empty_block_probability(1.0, -1.0, 0, 1, 10, seed=1)
        with pytest.raises(DomainError):
            empty_block_probability(1.0, 0.0, 1, 1, 10, seed=1)

    def test_empty_block_estimate(self):
        result = empty_block_probability(0.5, -2.0, 1, 1, 30, seed=5)
        assert 0.0 <= result.estimate.value <= 1.0
        assert result.estimate.replicates == 30
        assert result.agreement_parameter == bounds.poisson_agreement_parameter(0.5, -2.0, 1, 1)


@pytest.mark.slow
def test_survival_separates_sub_and_supercritical():
    geo = TorusGeometry((200,))
    low = estimate_survival(Params(1.0), geo, "single", 200.0, 200, seed=31)
    high = estimate_survival(Params(8.0), geo, "single", 200.0, 200, seed=31, escape_radius=50)
    assert low.ci_high < 0.05
    assert high.ci_low > 0.5


@pytest.mark.slow
def test_hardcore_generation_law_at_scale():
    result = hardcore_stats(2.0, 10 ** 4, seed=37)
    assert result.chi2_pvalue > 0.01
    assert result.ks_pvalue > 0.01
    assert result.max_excess <= 0


class TestDegenerateRates:
    def test_no_births_never_survive(self, small_ring):
        for init in ("single", "full"):
            estimate = estimate_survival(Params(0.0), small_ring, init, math.inf, 20, seed=3)
            assert estimate.value == 0.0
            assert estimate.successes == 0

    def test_hardcore_single_seed_dies_out(self, small_ring):
        estimate = estimate_survival(Params.hardcore(2.0), small_ring, "single", math.inf, 50, seed=3)
        assert estimate.value == 0.0

    def test_hardcore_population_stays_below_three(self):
        result = hardcore_stats(1.0, 400, seed=3)
        assert result.max_population == 2
        assert np.all(result.ever_occupied >= 1)


class TestBlockMonotonicity:
    def test_hardcore_empty_block_is_likely(self):
        result = empty_block_probability(1.0, -math.inf, 10, 1, 60, seed=5)
        assert result.estimate.value >= 0.75
        assert result.agreement_parameter == 0.0
        assert result.agreement_probability == 1.0

    def test_empty_block_does_not_grow_with_the_payoff(self):
        results = [empty_block_probability(1.0, a, 10, 1, 40, seed=5) for a in (-math.inf, -4.0, -1.0)]
        values = [r.estimate for r in results]
        for weaker, stronger in zip(values, values[1:]):
            assert stronger.value <= weaker.ci_high

    def test_doubling_grows_with_the_payoff(self):
        results = [doubling_probability(0.1, a, 0.1, 1, 200, seed=9) for a in (10.0, 20.0, 40.0, 80.0)]
        estimates = [r.estimate for r in results]
        for lower, higher in zip(estimates, estimates[1:]):
            assert lower.value <= higher.ci_high
        assert estimates[0].value < estimates[-1].value


@pytest.mark.slow
def test_reduces_to_the_contact_process():
    geo = TorusGeometry((400,))
    below = estimate_survival(Params(3.05, 0.0), geo, "single", 2000.0, 400, seed=41)
    above = estimate_survival(Params(3.45, 0.0), geo, "single", 2000.0, 400, seed=41, escape_radius=150)
    assert below.value < 0.02
    assert above.value > 0.2


@pytest.mark.slow
def test_large_payoff_invades_at_low_birth_rate():
    results = [doubling_probability(0.1, a, 0.1, 1, 2000, seed=43) for a in (10.0, 20.0, 40.0, 80.0)]
    estimates = [r.estimate for r in results]
    for lower, higher in zip(estimates, estimates[1:]):
        assert lower.value <= higher.ci_high
    assert estimates[-1].value > 0.95
    assert estimates[-1].half_width <= 0.03
    survival = estimate_survival(Params(0.1, 80.0), TorusGeometry((100,)), "full", 500.0, 50, seed=43)
    assert survival.value > 0.5


@pytest.mark.slow
def test_strong_competition_dies_out():
    geo = TorusGeometry((200,))
    grid = (-5.0, -10.0, -20.0, -40.0)
    survival = [estimate_survival(Params(5.0, a), geo, "full", 500.0, 100, seed=47) for a in grid]
    for milder, harsher in zip(survival, survival[1:]):
        assert harsher.value <= milder.ci_high
    assert 1.0 - survival[-1].value >= 0.95
    finite = empty_block_probability(5.0, -40.0, 10, 1, 200, seed=47)
    limit = empty_block_probability(5.0, -math.inf, 10, 1, 200, seed=47)
    assert finite.agreement_probability == pytest.approx(1.0, abs=1e-4)
    assert abs(finite.estimate.value - limit.estimate.value) <= finite.estimate.half_width + limit.estimate.half_width
