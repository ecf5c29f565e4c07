import math

import numpy as np
import pytest
from PIL import Image
from scipy import stats

from densitycp.engine import (
    CombinedRecorder,
    SimState,
    SnapshotRecorder,
    StopReason,
    StopRule,
    TrajectoryRecorder,
    run,
    snapshot,
    step,
    write_raster,
)
from densitycp.exceptions import AbsorbingStateError, ParameterError, UnsupportedError
from densitycp.experiments import wilson_interval
from densitycp.lattice import Boundary, Params, TorusGeometry, load_occupancy


def _conserved(outcome):
    return outcome.event_count == outcome.births + outcome.deaths + outcome.coalescences + outcome.suppressed


def test_step_on_empty_configuration(ring, basic_params):
    state = SimState.create(basic_params, ring, [], seed=1)
    with pytest.raises(AbsorbingStateError):
        step(state)


def test_zero_birth_rate_dies_out(ring):
    state = SimState.create(Params(0.0), ring, [5], seed=4)
    outcome = run(state, StopRule(horizon=100.0))
    assert outcome.reason is StopReason.EXTINCT
    assert outcome.extinction_time == outcome.final_time
    assert outcome.deaths == 1
    assert not outcome.survived


def test_extinct_run_carried_to_horizon(ring):
    state = SimState.create(Params(0.0), ring, [5], seed=4)
    outcome = run(state, StopRule(horizon=50.0, stop_on_extinction=False))
    assert outcome.reason is StopReason.HORIZON
    assert outcome.final_time == 50.0
    assert outcome.final_population == 0
    assert outcome.extinction_time < 50.0


def test_stop_rule_validation():
    with pytest.raises(ParameterError):
        StopRule(stop_on_extinction=False)
    with pytest.raises(ParameterError):
        StopRule(horizon=-1.0)
    with pytest.raises(ParameterError):
        StopRule(horizon=1.0, population_cap=0)
    with pytest.raises(ParameterError):
        StopRule(horizon=1.0, escape_radius=0)


def test_same_seed_same_trajectory(square):
    params = Params(2.5, -1.0, 2)
    outcomes = [
        run(SimState.create(params, square, square.box(0, 1), seed=11, replicate_id=3), StopRule(horizon=20.0))
        for _ in range(2)
    ]
    assert outcomes[0] == outcomes[1]
    first = SimState.create(params, square, square.box(0, 1), seed=11, replicate_id=3)
    second = SimState.create(params, square, square.box(0, 1), seed=11, replicate_id=4)
    step(first)
    step(second)
    assert first.time != second.time


def test_recorders_do_not_perturb_the_run():
    geo = TorusGeometry((40,))
    params = Params(3.0, 0.5)
    plain = run(SimState.create(params, geo, geo.box(-3, 3), seed=5), StopRule(horizon=30.0))
    recorder = CombinedRecorder(TrajectoryRecorder.every(0.5, 30.0), SnapshotRecorder([1.0, 7.5, 29.0]))
    recorded = run(SimState.create(params, geo, geo.box(-3, 3), seed=5), StopRule(horizon=30.0), recorder)
    assert plain == recorded


def test_trajectory_grid_is_complete():
    geo = TorusGeometry((20,))
    recorder = TrajectoryRecorder.every(1.0, 5.0)
    state = SimState.create(Params(0.5), geo, [10], seed=2)
    outcome = run(state, StopRule(horizon=5.0), recorder)
    assert [row[0] for row in recorder.rows] == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    assert recorder.rows[0][1] == 1
    if outcome.reason is StopReason.EXTINCT:
        assert recorder.rows[-1][1] == 0


def test_counters_are_conserved():
    geo = TorusGeometry((30,))
    outcome = run(SimState.create(Params(4.0, 1.0), geo, [15], seed=9), StopRule(horizon=20.0))
    assert _conserved(outcome)


def test_reduced_mode_samples_no_null_births():
    geo = TorusGeometry((30,))
    state = SimState.create(Params(4.0, 1.0), geo, geo.box(-5, 5), seed=9, skip_null_births=True)
    outcome = run(state, StopRule(horizon=20.0))
    assert outcome.coalescences == 0
    assert _conserved(outcome)
    assert state.config.check_coherence() == []


def test_birth_window_suppresses_outside():
    geo = TorusGeometry((20,))
    window = geo.box(-1, 2)
    state = SimState.create(Params(10.0), geo, geo.box(0, 1), seed=3, birth_window=window)
    outcome = run(state, StopRule(horizon=2.0))
    assert set(state.config.occupied_sites()) <= set(window)
    assert outcome.suppressed > 0
    assert _conserved(outcome)


def test_frozen_boundary_loses_births():
    geo = TorusGeometry((3,), Boundary.EMPTY_FROZEN)
    state = SimState.create(Params(20.0), geo, [0, 1, 2], seed=8)
    outcome = run(state, StopRule(horizon=1.0))
    assert outcome.suppressed > 0
    assert _conserved(outcome)


def test_population_cap():
    geo = TorusGeometry((200,))
    reasons = []
    for r in range(10):
        state = SimState.create(Params(50.0), geo, [100], seed=1, replicate_id=r)
        outcome = run(state, StopRule(horizon=100.0, population_cap=5))
        reasons.append(outcome.reason)
        if outcome.reason is StopReason.CAPPED:
            assert outcome.final_population == 5
    assert StopReason.CAPPED in reasons


def test_escape_radius():
    geo = TorusGeometry((200,))
    for r in range(10):
        state = SimState.create(Params(50.0), geo, [100], seed=1, replicate_id=r)
        outcome = run(state, StopRule(horizon=100.0, escape_radius=3))
        if outcome.reason is StopReason.ESCAPED:
            occupied = state.config.occupied_sites()
            assert max(geo.distance(100, x) for x in occupied) >= 3
            break
    else:
        pytest.fail("no replicate escaped")


def test_holding_time_is_exponential():
    lam = 1.5
    geo = TorusGeometry((10,))
    params = Params.hardcore(lam)
    times = []
    for r in range(4000):
        state = SimState.create(params, geo, [5], seed=21, replicate_id=r)
        step(state)
        times.append(state.time)
    assert stats.kstest(times, "expon", args=(0.0, 1.0 / (1.0 + lam))).pvalue > 1e-3


@pytest.mark.slow
def test_holding_time_is_exponential_at_scale():
    lam = 1.0
    geo = TorusGeometry((2,))
    params = Params.hardcore(lam)
    times = []
    for r in range(10 ** 5):
        state = SimState.create(params, geo, [0], seed=22, replicate_id=r)
        step(state)
        times.append(state.time)
    assert stats.kstest(times, "expon", args=(0.0, 1.0 / (1.0 + lam))).pvalue > 0.01


def test_cache_stays_coherent_over_many_events(square):
    state = SimState.create(Params(3.0, -0.5, 2), square, square.box(-2, 2), seed=6)
    for _ in range(3000):
        if state.population == 0:
            break
        step(state)
    assert state.config.check_coherence() == []


@pytest.mark.slow
def test_cache_fuzz_with_rebuilds():
    geo = TorusGeometry((16, 16))
    state = SimState.create(Params(4.0, 1.5, 2), geo, range(geo.n_sites), seed=7)
    state.config.REBUILD_INTERVAL = 4096
    for i in range(10 ** 6):
        if state.population == 0:
            break
        step(state)
        if i % 100000 == 0:
            assert state.config.check_coherence() == []
    assert state.config.check_coherence() == []


def test_snapshot_one_dimension(ring, basic_params):
    state = SimState.create(basic_params, ring, [2, 3], seed=1)
    shot = snapshot(state)
    assert shot.raster is None
    assert load_occupancy(shot.dump).sites == [(2,), (3,)]
    with pytest.raises(UnsupportedError):
        snapshot(state, raster=True)


def test_snapshot_raster(square, tmp_path):
    params = Params(1.0, 0.0, 2)
    state = SimState.create(params, square, [(0, 1), (4, 2)], seed=1)
    shot = snapshot(state)
    assert shot.raster.shape == (6, 6)
    assert shot.raster.dtype == np.uint8
    assert shot.raster[0, 1] == 0 and shot.raster[4, 2] == 0
    assert int((shot.raster == 255).sum()) == 34
    path = tmp_path / "snap.pgm"
    write_raster(shot.raster, path)
    assert path.read_bytes().startswith(b"P5")
    with Image.open(path) as image:
        assert np.array_equal(np.asarray(image), shot.raster)


def test_snapshot_recorder_times(square):
    params = Params(2.0, 0.0, 2)
    recorder = SnapshotRecorder([0.0, 1.0, 2.0])
    run(SimState.create(params, square, square.box(-1, 1), seed=2), StopRule(horizon=2.0), recorder)
    assert [s.time for s in recorder.snapshots] == [0.0, 1.0, 2.0]
    assert all(s.raster is not None for s in recorder.snapshots)


def test_outcome_serialises(ring, basic_params):
    outcome = run(SimState.create(basic_params, ring, [1], seed=1), StopRule(horizon=1.0))
    record = outcome.to_dict()
    assert record["reason"] in {"Extinct", "Horizon"}
    assert math.isfinite(record["final_time"])


def test_initial_state_already_capped():
    geo = TorusGeometry((50,))
    state = SimState.create(Params(2.0), geo, geo.box(-5, 5), seed=1)
    outcome = run(state, StopRule(horizon=10.0, population_cap=3))
    assert outcome.reason is StopReason.CAPPED
    assert outcome.event_count == 0
    assert outcome.final_time == 0.0


def test_initial_state_already_escaped():
    geo = TorusGeometry((200,))
    state = SimState.create(Params(2.0), geo, [0], seed=1)
    outcome = run(state, StopRule(horizon=10.0, escape_radius=3))
    assert outcome.reason is StopReason.ESCAPED
    assert outcome.event_count == 0


class TestTrajectoryGrid:
    def test_default_spacing(self):
        assert TrajectoryRecorder.every(None, 50.0).times == pytest.approx([0.5 * i for i in range(101)])

    def test_zero_horizon(self):
        assert TrajectoryRecorder.every(None, 0.0).times == [0.0]
        assert TrajectoryRecorder.every(2.0, 0.0).times == [0.0]

    def test_unbounded_horizon(self):
        for horizon in (None, math.inf):
            assert len(TrajectoryRecorder.every(None, horizon).times) == 101
        assert TrajectoryRecorder.every(0.25, math.inf).times[:3] == [0.0, 0.25, 0.5]

    @pytest.mark.parametrize("interval", [0.0, -1.0, math.inf])
    def test_bad_spacing(self, interval):
        with pytest.raises(ParameterError):
            TrajectoryRecorder.every(interval, 10.0)

    def test_zero_horizon_run(self, ring):
        state = SimState.create(Params(1.0), ring, [5], seed=1)
        recorder = TrajectoryRecorder.every(None, 0.0)
        outcome = run(state, StopRule(horizon=0.0), recorder)
        assert outcome.reason is StopReason.HORIZON
        assert outcome.event_count == 0
        assert recorder.rows == [(0.0, 1, 0, 0)]


def test_isolated_site_dies_before_giving_birth():
    lam = 1.5
    geo = TorusGeometry((10,))
    n = 2000
    deaths = 0
    for r in range(n):
        state = SimState.create(Params(lam, 2.0), geo, [5], seed=23, replicate_id=r)
        deaths += step(state).kind == "death"
    low, high = wilson_interval(deaths, n, confidence=0.999)
    assert low <= 1.0 / (1.0 + lam) <= high
