import math

import pytest
import sympy as sp

from densitycp import bounds
from densitycp.exceptions import DomainError

eps, lam, a, t, L = sp.symbols("epsilon lambda a t L", positive=True)


def _oracle(expr, **values):
    subs = {sp.Symbol(k if k != "lam" else "lambda", positive=True): v for k, v in values.items()}
    return float(sp.N(expr.subs(subs), 30))


@pytest.mark.parametrize("epsilon, d", [(0.1, 1), (0.01, 2), (0.5, 3)])
def test_tau_against_symbolic(epsilon, d):
    expr = -sp.log(1 - eps / 2) / 4 ** d
    assert bounds.tau(epsilon, d) == pytest.approx(_oracle(expr, epsilon=sp.Rational(str(epsilon))), rel=1e-12)
    assert bounds.no_death_probability(bounds.tau(epsilon, d), d) == pytest.approx(1 - epsilon / 2, rel=1e-12)


def test_tau_value():
    assert bounds.tau(0.1, 1) == pytest.approx(0.0128233, rel=1e-5)


@pytest.mark.parametrize("d, lam_, a_", [(1, 1.0, 10.0), (2, 0.5, 30.0), (1, 2.0, -1.0)])
def test_invasion_stage_against_symbolic(d, lam_, a_):
    tau_ = bounds.tau(0.1, d)
    expr = (1 - sp.exp(-lam * t * sp.exp(a / (2 * d)) / (2 * d ** 2))) ** (4 ** d)
    value = float(sp.N(expr.subs({lam: sp.Rational(lam_), t: sp.Rational(tau_), a: sp.Rational(a_)}), 30))
    assert bounds.invasion_stage_bound(lam_, a_, tau_, d) == pytest.approx(value, rel=1e-12)


def test_invasion_stage_grows_with_payoff():
    tau_ = bounds.tau(0.1, 1)
    values = [bounds.invasion_stage_bound(1.0, a_, tau_, 1) for a_ in (0.0, 5.0, 10.0, 20.0, 60.0)]
    assert values == sorted(values)
    assert values[-1] == pytest.approx(1.0)


def test_stage_threshold_meets_its_target():
    threshold = bounds.stage_threshold(1.0, 0.1, 1)
    assert threshold == pytest.approx(13.05, abs=0.01)
    tau_ = bounds.tau(0.1, 1)
    assert bounds.invasion_stage_bound(1.0, threshold, tau_, 1) == pytest.approx(0.95, rel=1e-9)
    assert bounds.doubling_pipeline_bound(0.95, 0.1, 1) == pytest.approx(0.9)


def test_pipeline_is_vacuous_for_weak_stages():
    assert bounds.doubling_pipeline_bound(0.2, 0.1, 2) < 0


@pytest.mark.parametrize("L_, d", [(1, 1), (3, 2), (5, 1)])
def test_block_quantities_against_symbolic(L_, d):
    volume = 2 * L * (4 * L + 1) ** d
    assert bounds.block_volume(L_, d) == int(volume.subs(L, L_))
    parameter = volume * 2 * lam * sp.exp(a / (2 * d))
    value = float(sp.N(parameter.subs({L: L_, lam: sp.Rational(3, 2), a: -20}), 30))
    assert bounds.poisson_agreement_parameter(1.5, -20.0, L_, d) == pytest.approx(value, rel=1e-12)
    assert bounds.poisson_agreement_probability(1.5, -20.0, L_, d) == pytest.approx(math.exp(-value), rel=1e-12)


def test_agreement_in_the_hardcore_limit():
    assert bounds.poisson_agreement_parameter(2.0, -math.inf, 4, 2) == 0.0
    assert bounds.poisson_agreement_probability(2.0, -math.inf, 4, 2) == 1.0


def test_periphery_tail():
    assert bounds.periphery_size(2, 1) == 8
    assert bounds.periphery_size(1, 2) == 2 * 2 * 5 * 2
    mu = 0.5 * 8
    expected = 2 * math.exp(-mu - 2 * math.e * mu * math.log(2))
    assert bounds.periphery_tail_bound(0.5, 2, 1) == pytest.approx(expected, rel=1e-12)
    assert bounds.periphery_tail_bound(0.0, 2, 1) == 1.0
    assert bounds.periphery_tail_bound(1.0, 4, 1) < bounds.periphery_tail_bound(1.0, 2, 1)


def test_chernoff_extinction_bound_decays():
    values = [bounds.chernoff_extinction_bound(1.0, t_) for t_ in (50.0, 200.0, 800.0)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert values == sorted(values, reverse=True)
    assert values[-1] < 1e-3
    with pytest.raises(DomainError):
        bounds.chernoff_extinction_bound(1.0, 10.0, theta=1.0)


def test_geometric_tail():
    assert bounds.geometric_tail(1.0, 0) == 1.0
    assert bounds.geometric_tail(1.0, 3) == pytest.approx(0.125)
    assert bounds.geometric_tail(3.0, 2) == pytest.approx(9 / 16)


@pytest.mark.parametrize("call", [lambda: bounds.tau(0.0, 1), lambda: bounds.tau(1.0, 1), lambda: bounds.tau(0.1, 0)])
def test_domain_errors(call):
    with pytest.raises(DomainError):
        call()


def test_stage_threshold_needs_positive_lambda():
    with pytest.raises(DomainError):
        bounds.stage_threshold(0.0, 0.1, 1)


def test_bound_record():
    record = bounds.bounds(0.1, 1, 1.0, 14.0, 2)
    assert record.tau == bounds.tau(0.1, 1)
    assert record.stage > 0.95
    assert record.pipeline > 0.89
    assert record.stage_threshold == pytest.approx(bounds.stage_threshold(1.0, 0.1, 1))
    assert record.agreement == math.exp(-record.agreement_parameter)
    limit = bounds.bounds(0.1, 1, 1.0, -math.inf, 2)
    assert limit.stage == 0.0
    assert limit.agreement == 1.0
