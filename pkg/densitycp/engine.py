"""Event-driven simulation of the continuous-time Markov chain.

The engine implements the direct method: the waiting time to the next event is exponential
with the total rate of the configuration, the site is drawn proportionally to its weight in
the configuration's sum tree, and the event at that site is a death with probability
``1 / weight`` and a birth otherwise. There is no time discretisation.

The time of the next event is drawn once and kept until that event happens. Stopping at a
horizon or pausing for a recorder therefore never consumes extra randomness, and a run with
a recorder follows exactly the trajectory of the same run without one.
"""
import enum
import logging
import math
from collections import namedtuple
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from PIL import Image

from densitycp.exceptions import AbsorbingStateError, ParameterError, UnsupportedError
from densitycp.lattice import Configuration, dump_occupancy
from densitycp.replicates import UniformStream

logger = logging.getLogger(__name__)

# trajectory grid size when the horizon gives no scale
DEFAULT_GRID_POINTS = 101

Event = namedtuple("Event", ["kind", "site", "target", "time", "changed"])
Event.__doc__ = """One realised event.

``kind`` is ``"death"``, ``"birth"``, ``"coalescence"`` (a birth onto an occupied site) or
``"suppressed"`` (a birth aimed outside the birth window or past a frozen boundary).
``changed`` is the set of sites whose cached rate was refreshed.
"""


class StopReason(enum.Enum):
    EXTINCT = "Extinct"
    HORIZON = "Horizon"
    ESCAPED = "Escaped"
    CAPPED = "Capped"


@dataclass(frozen=True)
class StopRule:
    """When :func:`run` returns.

    Args:
        horizon (float): stop at this time
        stop_on_extinction (bool): return as soon as the configuration is empty; otherwise
            an extinct run is carried to the horizon
        population_cap (int): stop once this many sites are occupied, the initial
            configuration included
        escape_radius (int): stop once an occupied site lies at L-infinity distance at least
            this far from the origin of the run; checked at the start and after every birth
    """

    horizon: Optional[float] = None
    stop_on_extinction: bool = True
    population_cap: Optional[int] = None
    escape_radius: Optional[int] = None

    def __post_init__(self):
        if (
            self.horizon is None
            and not self.stop_on_extinction
            and self.population_cap is None
            and self.escape_radius is None
        ):
            raise ParameterError("a stop rule needs at least one condition", module="ctmc-engine")
        if self.horizon is not None and self.horizon < 0:
            raise ParameterError("horizon must be nonnegative", module="ctmc-engine")
        if self.population_cap is not None and self.population_cap < 1:
            raise ParameterError("population cap must be positive", module="ctmc-engine")
        if self.escape_radius is not None and self.escape_radius < 1:
            raise ParameterError("escape radius must be positive", module="ctmc-engine")


@dataclass
class RunOutcome:
    reason: StopReason
    final_time: float
    extinction_time: Optional[float]
    max_population: int
    ever_occupied_count: int
    final_population: int
    event_count: int
    births: int
    deaths: int
    coalescences: int
    suppressed: int

    @property
    def survived(self):
        """bool: the run did not die out before it stopped"""
        return self.reason is not StopReason.EXTINCT and self.final_population > 0

    def to_dict(self):
        record = asdict(self)
        record["reason"] = self.reason.value
        return record


class SimState:
    """Mutable state of one simulated trajectory.

    Args:
        config (Configuration): initial configuration, owned by the state from now on
        stream (UniformStream): source of randomness
        origin (int or tuple): reference site for the escape radius, the torus center by
            default
        time (float): initial time
    """

    def __init__(self, config, stream, origin=None, time=0.0):
        self.config = config
        self.params = config.params
        self.geo = config.geo
        self.stream = stream
        self.origin = self.geo.resolve(origin if origin is not None else self.geo.center())
        self.time = float(time)
        self.event_count = 0
        self.births = 0
        self.deaths = 0
        self.coalescences = 0
        self.suppressed = 0
        self.ever = bytearray(config.occupancy)
        self.ever_occupied_count = config.occupied_count
        self.max_population = config.occupied_count
        self.extinction_time = self.time if config.occupied_count == 0 else None
        self._next_time = None

    @classmethod
    def create(cls, params, geo, occupied, seed, replicate_id=0, skip_null_births=False,
               birth_window=None, origin=None):
        """Build a configuration and the stream of replicate ``replicate_id``."""
        config = Configuration(
            params, geo, occupied, skip_null_births=skip_null_births, birth_window=birth_window
        )
        return cls(config, UniformStream.for_replicate(seed, replicate_id), origin=origin)

    @property
    def population(self):
        return self.config.occupied_count


def step(state, until=None):
    """Realise the next event.

    Args:
        state (SimState): state to advance
        until (float): if the next event falls after this time, advance the clock to
            ``until`` instead and return ``None``

    Returns:
        Event or None

    Raises:
        AbsorbingStateError: if the total rate is zero
    """
    config = state.config
    total = config.total_rate
    if total <= 0.0:
        raise AbsorbingStateError("total rate is zero: no event can happen")
    stream = state.stream
    if state._next_time is None:
        state._next_time = state.time + stream.exponential(total)
    if until is not None and state._next_time > until:
        state.time = max(state.time, until)
        return None
    state.time = state._next_time
    state._next_time = None
    state.event_count += 1

    index = config.index
    while True:
        x = index.find_prefixsum_idx(stream.uniform() * total)
        if config.occupancy[x]:
            break
    weight = index[x]
    if stream.uniform() * weight < 1.0:
        state.deaths += 1
        changed = config.vacate(x)
        if config.occupied_count == 0:
            state.extinction_time = state.time
        return Event("death", x, None, state.time, changed)

    neighbors = state.geo.neighbors[x]
    if config.skip_null_births:
        slots = config.open_slots(x)
        y = neighbors[slots[stream.below(len(slots))]]
    else:
        y = neighbors[stream.below(state.geo.degree)]
        if y >= 0 and config.occupancy[y]:
            state.coalescences += 1
            return Event("coalescence", x, y, state.time, set())
        if not config.can_receive(y):
            state.suppressed += 1
            return Event("suppressed", x, y, state.time, set())
    state.births += 1
    changed = config.occupy(y)
    if not state.ever[y]:
        state.ever[y] = 1
        state.ever_occupied_count += 1
    if config.occupied_count > state.max_population:
        state.max_population = config.occupied_count
    return Event("birth", x, y, state.time, changed)


def run(state, stop, recorder=None):
    """Step until the stop rule fires.

    Args:
        state (SimState): state to advance
        stop (StopRule): stopping conditions
        recorder: object with ``next_time()``, ``record(state)`` and ``finish(state, horizon)``,
            such as :class:`TrajectoryRecorder` or :class:`SnapshotRecorder`

    Returns:
        RunOutcome
    """
    horizon = stop.horizon
    distances = None
    if stop.escape_radius is not None:
        distances = state.geo.distances_from(state.origin).tolist()

    reason = None
    if stop.population_cap is not None and state.population >= stop.population_cap:
        reason = StopReason.CAPPED
    elif distances is not None and any(
        occupied and far >= stop.escape_radius for occupied, far in zip(state.config.occupancy, distances)
    ):
        reason = StopReason.ESCAPED

    while reason is None:
        if state.population == 0:
            if stop.stop_on_extinction or horizon is None:
                reason = StopReason.EXTINCT
            else:
                state.time = max(state.time, horizon)
                reason = StopReason.HORIZON
            break
        until = horizon
        if recorder is not None:
            pending = recorder.next_time()
            if pending is not None and (until is None or pending < until):
                until = pending
        event = step(state, until=until)
        if event is None:
            if recorder is not None:
                pending = recorder.next_time()
                if pending is not None and pending <= state.time:
                    recorder.record(state)
            if horizon is not None and state.time >= horizon:
                reason = StopReason.HORIZON
                break
            continue
        if event.kind != "birth":
            continue
        if stop.population_cap is not None and state.population >= stop.population_cap:
            reason = StopReason.CAPPED
            break
        if distances is not None and distances[event.target] >= stop.escape_radius:
            reason = StopReason.ESCAPED
            break

    if recorder is not None and reason in (StopReason.EXTINCT, StopReason.HORIZON):
        recorder.finish(state, horizon)
    outcome = RunOutcome(
        reason=reason,
        final_time=state.time,
        extinction_time=state.extinction_time,
        max_population=state.max_population,
        ever_occupied_count=state.ever_occupied_count,
        final_population=state.population,
        event_count=state.event_count,
        births=state.births,
        deaths=state.deaths,
        coalescences=state.coalescences,
        suppressed=state.suppressed,
    )
    logger.debug("run stopped: %s at t=%r after %d events", reason.value, state.time, state.event_count)
    return outcome


Snapshot = namedtuple("Snapshot", ["time", "dump", "raster"])


def snapshot(state, raster=None):
    """Occupancy dump of the current state, plus a graymap for two-dimensional tori.

    Args:
        state (SimState): state to capture
        raster (bool): request the image; by default it is produced exactly when ``d = 2``

    Returns:
        Snapshot: ``raster`` is a ``uint8`` array with occupied sites at 0 (black) and empty
        sites at 255, rows indexed by the first coordinate

    Raises:
        UnsupportedError: if a raster is requested for ``d != 2``
    """
    return _capture(state, state.time, raster)


def _capture(state, time, raster):
    geo = state.geo
    if raster is None:
        raster = geo.dim == 2
    if raster and geo.dim != 2:
        raise UnsupportedError("raster output needs d=2, got d={}".format(geo.dim), module="ctmc-engine")
    image = None
    if raster:
        occupied = np.frombuffer(bytes(state.config.occupancy), dtype=np.uint8).reshape(geo.shape)
        image = np.where(occupied == 1, 0, 255).astype(np.uint8)
    return Snapshot(time, dump_occupancy(state.config, time), image)


def write_raster(image, path):
    """Save a snapshot raster as a binary portable graymap (``P5``, one byte per site)."""
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).save(str(path), format="PPM")


class _GridRecorder:
    def __init__(self, times):
        self.times = sorted(float(t) for t in times)
        self._pos = 0

    def next_time(self):
        if self._pos < len(self.times):
            return self.times[self._pos]
        return None

    def record(self, state):
        while self._pos < len(self.times) and self.times[self._pos] <= state.time:
            self.capture(self.times[self._pos], state)
            self._pos += 1

    def finish(self, state, horizon):
        # the state is frozen from here on: extinct, or sitting at the horizon
        limit = horizon if horizon is not None else state.time
        while self._pos < len(self.times) and self.times[self._pos] <= limit:
            self.capture(self.times[self._pos], state)
            self._pos += 1

    def capture(self, time, state):
        raise NotImplementedError


class TrajectoryRecorder(_GridRecorder):
    """Population and event counters on a time grid (``time,population,births,deaths``)."""

    columns = ("time", "population", "births", "deaths")

    def __init__(self, times):
        super().__init__(times)
        self.rows = []

    @classmethod
    def every(cls, interval, horizon):
        """Grid ``0, interval, 2 interval, ...`` up to ``horizon``.

        ``interval=None`` splits a finite horizon into 100 steps. A zero horizon gives the
        single point 0; without a finite horizon the grid has
        :data:`DEFAULT_GRID_POINTS` points, unit-spaced unless ``interval`` is given.

        Raises:
            ParameterError: if ``interval`` is not positive and finite
        """
        bounded = horizon is not None and math.isfinite(horizon)
        if interval is None:
            interval = horizon / 100.0 if bounded and horizon > 0 else 1.0
        if not (interval > 0 and math.isfinite(interval)):
            raise ParameterError("grid spacing must be positive, got {}".format(interval), module="ctmc-engine")
        if bounded and horizon == 0:
            return cls([0.0])
        if bounded:
            count = int(np.floor(horizon / interval + 1e-9))
        else:
            count = DEFAULT_GRID_POINTS - 1
        return cls([i * interval for i in range(count + 1)])

    def capture(self, time, state):
        self.rows.append((time, state.population, state.births, state.deaths))


class SnapshotRecorder(_GridRecorder):
    """Snapshots on a time grid; see :func:`snapshot`."""

    def __init__(self, times, raster=None):
        super().__init__(times)
        self.raster = raster
        self.snapshots = []

    def capture(self, time, state):
        self.snapshots.append(_capture(state, time, self.raster))


class CombinedRecorder:
    """Feed several recorders from one run."""

    def __init__(self, *recorders):
        self.recorders = recorders

    def next_time(self):
        times = [r.next_time() for r in self.recorders if r.next_time() is not None]
        return min(times) if times else None

    def record(self, state):
        for recorder in self.recorders:
            pending = recorder.next_time()
            if pending is not None and pending <= state.time:
                recorder.record(state)

    def finish(self, state, horizon):
        for recorder in self.recorders:
            recorder.finish(state, horizon)
