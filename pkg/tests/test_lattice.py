import math
from fractions import Fraction

import numpy as np
import pytest

from densitycp.exceptions import CoordinateError, DomainError, ParameterError, StateError, TopologyError
from densitycp.lattice import (
    Boundary,
    Configuration,
    HKind,
    Params,
    TorusGeometry,
    Variant,
    apply_birth,
    apply_death,
    birth_rate,
    dump_occupancy,
    fill_rate,
    load_occupancy,
    neighbor_fraction,
    rate_query,
)


class TestParams:
    def test_variant_is_inferred(self):
        assert Params(1.0, 0.5).variant is Variant.STANDARD
        assert Params(1.0, -math.inf).variant is Variant.HARD_CORE
        assert Params.hardcore(1.0, 2).variant is Variant.HARD_CORE
        assert Params.floor_rate(1.0, 3.0).variant is Variant.FLOOR_RATE

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"lam": -1.0},
            {"lam": float("nan")},
            {"lam": 1.0, "a": math.inf},
            {"lam": 1.0, "dim": 0},
            {"lam": 1.0, "a": 0.0, "variant": Variant.HARD_CORE},
            {"lam": 1.0, "a": -math.inf, "variant": Variant.STANDARD},
            {"lam": 1.0, "h": math.exp},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            Params(**kwargs)

    def test_custom_h_needs_unit_value_at_zero(self):
        with pytest.raises(ParameterError):
            Params(1.0, 1.0, h_kind=HKind.CUSTOM, h=lambda x: 2.0 + x)
        p = Params(1.0, 2.0, h_kind=HKind.CUSTOM, h=lambda x: 1.0 + x)
        assert p.rate(1) == pytest.approx(2.0)

    def test_custom_h_must_not_decrease(self):
        with pytest.raises(DomainError, match="non-decreasing"):
            Params(1.0, 1.0, h_kind=HKind.CUSTOM, h=lambda x: math.exp(-x))
        with pytest.raises(DomainError, match="non-decreasing"):
            Params(1.0, 3.0, h_kind=HKind.CUSTOM, h=lambda x: math.cos(x))

    def test_custom_h_must_give_nonnegative_rates(self):
        with pytest.raises(DomainError, match="nonnegative"):
            Params(1.0, -4.0, h_kind=HKind.CUSTOM, h=lambda x: 1.0 + x)
        assert Params(1.0, -1.0, h_kind=HKind.CUSTOM, h=lambda x: 1.0 + x).rate(2) == 0.0

    def test_rate_tables(self):
        assert Params(2.0, 0.0).rate_table() == (2.0, 2.0, 2.0)
        assert Params(1.0, 2.0).rate(1) == pytest.approx(math.e)
        floor = Params.floor_rate(1.5, 4.0)
        assert floor.rate(0) == 0.0
        assert floor.rate(1) == floor.rate(2) == pytest.approx(1.5 * math.exp(2.0))
        hard = Params.hardcore(3.0, 2)
        assert hard.rate_table() == (3.0, 0.0, 0.0, 0.0, 0.0)
        assert hard.max_rate() == 3.0

    def test_evolve_reinfers_variant(self):
        p = Params(1.0, 0.0).evolve(a=-math.inf)
        assert p.variant is Variant.HARD_CORE
        assert p.evolve(a=1.0).variant is Variant.STANDARD


class TestGeometry:
    def test_periodic_neighbors(self, ring):
        assert ring.neighbors[0] == (9, 1)
        assert ring.neighbors[9] == (8, 0)
        assert ring.degree == 2

    def test_frozen_neighbors(self):
        geo = TorusGeometry((4,), Boundary.EMPTY_FROZEN)
        assert geo.neighbors[0] == (-1, 1)
        assert geo.neighbors[3] == (2, -1)

    def test_two_dimensional_slots(self, square):
        x = square.index((2, 3))
        assert square.neighbors[x] == (
            square.index((1, 3)),
            square.index((3, 3)),
            square.index((2, 2)),
            square.index((2, 4)),
        )

    def test_index_coord(self, square):
        assert square.index((1, 2)) == 8
        assert square.coord(8) == (1, 2)
        assert square.resolve((1, 2)) == square.resolve(8) == 8
        with pytest.raises(CoordinateError):
            square.index((6, 0))
        with pytest.raises(CoordinateError):
            square.coord(36)
        with pytest.raises(CoordinateError):
            square.resolve(-1)

    def test_side_lengths_checked(self):
        with pytest.raises(ParameterError):
            TorusGeometry((1,))
        assert TorusGeometry((1,), Boundary.EMPTY_FROZEN).n_sites == 1

    def test_box(self, ring, square):
        assert ring.box(0, 1) == [5, 6]
        assert ring.box(-1, 2) == [4, 5, 6, 7]
        assert len(square.box(-1, 2)) == 16
        assert ring.box(0, 2, origin=(9,)) == [0, 1, 9]

    def test_distances_wrap(self, ring):
        distances = ring.distances_from(0)
        assert distances[9] == 1
        assert distances[5] == 5
        assert ring.distance(2, 8) == 4


class TestRates:
    def test_neighbor_fraction(self, ring):
        config = Configuration(Params(1.0), ring, [4])
        assert neighbor_fraction(config, ring, 5) == Fraction(1, 2)
        assert neighbor_fraction(config, ring, 4) == 0

    def test_birth_and_fill_rate(self, ring):
        params = Params(2.0, 1.0)
        config = Configuration(params, ring, [4, 5])
        assert birth_rate(params, config, 4) == pytest.approx(2.0 * math.exp(0.5))
        assert fill_rate(params, config, 3) == pytest.approx(math.exp(0.5))
        assert fill_rate(params, config, 8) == 0.0

    def test_fill_rate_reduces_to_contact_process(self, ring):
        params = Params(2.0, 0.0)
        config = Configuration(params, ring, [2, 4])
        assert fill_rate(params, config, 3) == 2.0 * 2 / 2

    def test_wrong_state_rejected(self, ring, basic_params):
        config = Configuration(basic_params, ring, [4])
        with pytest.raises(StateError):
            birth_rate(basic_params, config, 3)
        with pytest.raises(StateError):
            fill_rate(basic_params, config, 4)

    def test_rate_query(self, ring):
        params = Params(2.0, 1.0)
        config = Configuration(params, ring, [4, 5])
        occupied = rate_query(params, config, 4)
        assert occupied.site == (4,)
        assert occupied.f1 == Fraction(1, 2)
        assert occupied.psi == 0.0
        empty = rate_query(params, config, (6,))
        assert empty.phi == 0.0
        assert empty.psi == pytest.approx(math.exp(0.5))

    def test_hardcore_isolated_only(self, ring):
        params = Params.hardcore(1.0)
        config = Configuration(params, ring, [2, 5, 6])
        assert birth_rate(params, config, 2) == 1.0
        assert birth_rate(params, config, 5) == 0.0


class TestTransitions:
    def test_birth_changes_and_coalescence(self, ring, basic_params):
        config = Configuration(basic_params, ring, [4, 6])
        changed = apply_birth(config, ring, 4, 5)
        assert changed == {4, 5, 6}
        assert config.occupied_count == 3
        assert apply_birth(config, ring, 4, 5) == set()
        assert config.occupied_count == 3

    def test_birth_errors(self, ring, basic_params):
        config = Configuration(basic_params, ring, [4])
        with pytest.raises(TopologyError):
            apply_birth(config, ring, 4, 6)
        with pytest.raises(StateError):
            apply_birth(config, ring, 3, 2)

    def test_death(self, ring, basic_params):
        config = Configuration(basic_params, ring, [4, 5])
        assert apply_death(config, ring, 4) == {4, 5}
        assert not config.is_occupied(4)
        with pytest.raises(StateError):
            apply_death(config, ring, 4)

    def test_coherence_after_random_updates(self, square):
        params = Params(1.5, -0.7, 2)
        config = Configuration(params, square, square.box(-1, 1))
        rng = np.random.default_rng(3)
        for _ in range(2000):
            x = int(rng.integers(square.n_sites))
            if config.occupancy[x]:
                config.vacate(x)
            else:
                config.occupy(x)
        assert config.check_coherence() == []
        assert config.total_rate == pytest.approx(
            sum(1.0 + params.rate(config.counts[x]) for x in config.occupied_sites())
        )

    def test_coherence_detects_corruption(self, ring, basic_params):
        config = Configuration(basic_params, ring, [1, 2])
        config.counts[1] = 0
        assert 1 in config.check_coherence()
        config.rebuild()
        assert config.check_coherence() == []

    def test_reduced_weight_counts_open_slots(self, ring, basic_params):
        literal = Configuration(basic_params, ring, [4, 5])
        reduced = Configuration(basic_params, ring, [4, 5], skip_null_births=True)
        assert literal.weight(4) == 3.0
        assert reduced.weight(4) == 2.0
        assert reduced.open_slots(4) == [0]
        assert reduced.check_coherence() == []

    def test_birth_window(self, ring, basic_params):
        config = Configuration(basic_params, ring, [4], skip_null_births=True, birth_window=[4, 5])
        assert not config.can_receive(3)
        assert config.can_receive(5)
        assert config.weight(4) == 1.0 + 2.0 / 2

    def test_dimension_mismatch(self, square):
        with pytest.raises(ParameterError):
            Configuration(Params(1.0, 0.0, 1), square)


def test_dump_and_load_occupancy(square):
    config = Configuration(Params(1.0, 0.0, 2), square, [(0, 1), (5, 5)])
    text = dump_occupancy(config, time=0.1 + 0.2)
    assert text.splitlines()[0] == "# torus=6x6 t=0.30000000000000004"
    assert text.splitlines()[1:] == ["0,1", "5,5"]
    loaded = load_occupancy(text)
    assert loaded.side_lengths == (6, 6)
    assert loaded.time == 0.1 + 0.2
    assert loaded.sites == [(0, 1), (5, 5)]
    with pytest.raises(ValueError):
        load_occupancy("0,1\n")
