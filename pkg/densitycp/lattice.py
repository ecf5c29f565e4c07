r"""Geometry, occupancy state and transition rates.

An occupied site :math:`x` of the configuration :math:`\xi` dies at rate one and gives birth at
rate

.. math:: \Phi(x, \xi) = \lambda \, h(a f_1(x, \xi)),

where :math:`f_1` is the fraction of the :math:`2d` neighbours of :math:`x` that are occupied.
The offspring is sent to a neighbour chosen uniformly at random; if that neighbour is already
occupied the two particles coalesce and nothing changes. Seen from an empty site the same
dynamics fill it at rate

.. math:: \psi(x, \xi) = \sum_{y \sim x} \Phi(y, \xi) \xi(y) / 2d.

Sites are identified by their row-major linear index. Every public function also accepts a
coordinate tuple and resolves it against the geometry.
"""
import enum
import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from densitycp.exceptions import (
    CoordinateError,
    DomainError,
    ParameterError,
    StateError,
    TopologyError,
)
from densitycp.sumtree import SumSegmentTree

logger = logging.getLogger(__name__)


class Variant(enum.Enum):
    """Birth-rate rule of the process."""

    STANDARD = "standard"
    FLOOR_RATE = "floor"
    HARD_CORE = "hardcore"


class HKind(enum.Enum):
    EXP = "exp"
    CUSTOM = "custom"


class Boundary(enum.Enum):
    """What lies past the edge of the box.

    ``PERIODIC`` wraps every axis. ``EMPTY_FROZEN`` surrounds the box with sites that are
    permanently empty: they still count in the denominator ``2d`` of ``f1`` and births aimed
    at them are lost.
    """

    PERIODIC = "periodic"
    EMPTY_FROZEN = "frozen"


@dataclass(frozen=True)
class Params:
    """Model parameters; the single source of rate semantics.

    Args:
        lam (float): natural birth rate :math:`\\lambda \\geq 0`
        a (float): payoff coefficient in :math:`[-\\infty, \\infty)`
        dim (int): lattice dimension :math:`d`
        variant (Variant): inferred from ``a`` when omitted, ``HARD_CORE`` exactly when
            ``a = -inf``
        h_kind (HKind): ``EXP`` or ``CUSTOM``
        h (callable): increasing function with ``h(0) = 1``, required for ``CUSTOM``
    """

    lam: float
    a: float = 0.0
    dim: int = 1
    variant: Optional[Variant] = None
    h_kind: HKind = HKind.EXP
    h: Optional[Callable[[float], float]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        lam = float(self.lam)
        a = float(self.a)
        if math.isnan(lam) or lam < 0:
            raise ParameterError("lambda must be nonnegative, got {}".format(self.lam))
        if math.isnan(a) or a == math.inf:
            raise ParameterError("a must lie in [-inf, inf), got {}".format(self.a))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParameterError("dim must be a positive integer, got {}".format(self.dim))
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "dim", int(self.dim))

        variant = self.variant
        if variant is None:
            variant = Variant.HARD_CORE if a == -math.inf else Variant.STANDARD
        variant = Variant(variant)
        if (variant is Variant.HARD_CORE) != (a == -math.inf):
            raise ParameterError("variant hardcore is used exactly when a = -inf")
        object.__setattr__(self, "variant", variant)

        h_kind = HKind(self.h_kind)
        object.__setattr__(self, "h_kind", h_kind)
        if h_kind is HKind.CUSTOM:
            if not callable(self.h):
                raise ParameterError("h_kind custom needs a callable h")
            if not math.isclose(self.h(0.0), 1.0, rel_tol=0.0, abs_tol=1e-12):
                raise ParameterError("h(0) must equal 1, got {}".format(self.h(0.0)))
            self._check_h()
        elif self.h is not None:
            raise ParameterError("h is only accepted together with h_kind custom")

    def _check_h(self):
        """Spot-check a custom ``h`` on ``[-1, 1]`` and on the arguments this model uses."""
        used = []
        if math.isfinite(self.a):
            used = [self.a * k / (2 * self.dim) for k in range(2 * self.dim + 1)]
        points = sorted(set(np.linspace(-1.0, 1.0, 9).tolist()) | set(used))
        values = [float(self.h(x)) for x in points]
        for x, low, high in zip(points[1:], values, values[1:]):
            if not high >= low - 1e-12:
                raise DomainError("h must be non-decreasing, h drops before {}".format(x), module="lattice-core")
        if any(not (math.isfinite(self.h(x)) and self.h(x) >= 0) for x in used):
            raise DomainError("h must give finite nonnegative rates", module="lattice-core")

    @classmethod
    def hardcore(cls, lam, dim=1):
        """The limit ``a = -inf``: only players without occupied neighbours give birth."""
        return cls(lam, -math.inf, dim, Variant.HARD_CORE)

    @classmethod
    def floor_rate(cls, lam, a, dim=1):
        """The floor-rate process used by the doubling construction."""
        return cls(lam, a, dim, Variant.FLOOR_RATE)

    @property
    def degree(self):
        """int: number of neighbour slots ``2d``"""
        return 2 * self.dim

    def evolve(self, **changes):
        """Copy with some fields replaced; the variant is re-inferred unless given."""
        if "a" in changes and "variant" not in changes and self.variant is not Variant.FLOOR_RATE:
            changes["variant"] = None
        return replace(self, **changes)

    def h_value(self, x):
        if self.h_kind is HKind.CUSTOM:
            return float(self.h(x))
        return math.exp(x)

    def rate(self, k):
        """Birth rate of an occupied site with ``k`` occupied neighbours.

        Args:
            k (int): occupied neighbour count in ``[0, 2d]``

        Returns:
            float: :math:`\\Phi`
        """
        if self.variant is Variant.HARD_CORE:
            return self.lam if k == 0 else 0.0
        if self.variant is Variant.FLOOR_RATE:
            return self.lam * self.h_value(self.a / self.degree) if k > 0 else 0.0
        return self.lam * self.h_value(self.a * k / self.degree)

    def rate_table(self):
        """tuple[float]: ``rate(k)`` for ``k = 0, ..., 2d``"""
        return tuple(self.rate(k) for k in range(self.degree + 1))

    def max_rate(self):
        return max(self.rate_table())


class TorusGeometry:
    """Finite box of :math:`\\mathbb{Z}^d` with a boundary policy.

    Neighbour slots of a site are ordered axis by axis, first the ``-1`` then the ``+1``
    direction. Slots that leave an ``EMPTY_FROZEN`` box hold ``-1``. On a periodic axis of
    length two both slots point at the same site, which is then counted twice.

    Args:
        side_lengths (Sequence[int]): the box is ``[0, l_1) x ... x [0, l_d)``
        boundary (Boundary): boundary policy
    """

    def __init__(self, side_lengths, boundary=Boundary.PERIODIC):
        shape = tuple(int(l) for l in side_lengths)
        boundary = Boundary(boundary)
        if not shape:
            raise ParameterError("a torus needs at least one axis", module="lattice-core")
        smallest = 2 if boundary is Boundary.PERIODIC else 1
        if any(l < smallest for l in shape):
            raise ParameterError(
                "side lengths must be at least {} under {} boundary, got {}".format(
                    smallest, boundary.value, shape
                ),
                module="lattice-core",
            )
        self.shape = shape
        self.boundary = boundary
        self.dim = len(shape)
        self.degree = 2 * self.dim
        self.n_sites = int(np.prod(shape))
        self.neighbors = self._neighbor_table()

    @classmethod
    def cube(cls, side, dim, boundary=Boundary.PERIODIC):
        return cls((side,) * dim, boundary)

    def __repr__(self):
        return "TorusGeometry({}, {})".format(self.shape, self.boundary.value)

    def __eq__(self, other):
        return (
            isinstance(other, TorusGeometry)
            and self.shape == other.shape
            and self.boundary is other.boundary
        )

    def __hash__(self):
        return hash((self.shape, self.boundary))

    def _neighbor_table(self):
        coords = np.indices(self.shape).reshape(self.dim, -1)
        columns = []
        for axis, length in enumerate(self.shape):
            for delta in (-1, 1):
                shifted = coords.copy()
                shifted[axis] += delta
                if self.boundary is Boundary.PERIODIC:
                    shifted[axis] %= length
                    valid = np.ones(self.n_sites, dtype=bool)
                else:
                    valid = (shifted[axis] >= 0) & (shifted[axis] < length)
                    shifted[axis] = np.clip(shifted[axis], 0, length - 1)
                flat = np.ravel_multi_index(tuple(shifted), self.shape)
                columns.append(np.where(valid, flat, -1))
        table = np.stack(columns, axis=1)
        return [tuple(row) for row in table.tolist()]

    def index(self, coord):
        """Linear index of a coordinate tuple."""
        coord = tuple(int(c) for c in coord)
        if len(coord) != self.dim or any(not 0 <= c < l for c, l in zip(coord, self.shape)):
            raise CoordinateError("site {} outside torus {}".format(coord, self.shape))
        return int(np.ravel_multi_index(coord, self.shape))

    def coord(self, index):
        if not 0 <= index < self.n_sites:
            raise CoordinateError("site index {} outside [0, {})".format(index, self.n_sites))
        return tuple(int(c) for c in np.unravel_index(index, self.shape))

    def resolve(self, site):
        """Accept a linear index or a coordinate tuple and return the linear index."""
        if isinstance(site, (int, np.integer)):
            site = int(site)
            if not 0 <= site < self.n_sites:
                raise CoordinateError("site index {} outside [0, {})".format(site, self.n_sites))
            return site
        return self.index(site)

    def center(self):
        return tuple(l // 2 for l in self.shape)

    def translate(self, coord, offset):
        """Coordinate ``coord + offset``, wrapped on a periodic torus.

        Raises:
            CoordinateError: if the result leaves a frozen box
        """
        moved = [c + o for c, o in zip(coord, offset)]
        if self.boundary is Boundary.PERIODIC:
            moved = [m % l for m, l in zip(moved, self.shape)]
        return self.index(moved)

    def box(self, lower, upper, origin=None):
        """Sites ``origin + [lower_1, upper_1] x ... x [lower_d, upper_d]`` (bounds inclusive).

        Args:
            lower (int or Sequence[int]): lower offsets per axis
            upper (int or Sequence[int]): upper offsets per axis
            origin (tuple[int]): anchor coordinate, the center by default

        Returns:
            list[int]: sorted linear indices without repetition
        """
        if origin is None:
            origin = self.center()
        if np.isscalar(lower):
            lower = (lower,) * self.dim
        if np.isscalar(upper):
            upper = (upper,) * self.dim
        ranges = [np.arange(lo, hi + 1) for lo, hi in zip(lower, upper)]
        offsets = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(self.dim, -1).T
        return sorted({self.translate(origin, off) for off in offsets.tolist()})

    def distances_from(self, origin):
        """L-infinity distance of every site to ``origin``, around the torus on periodic axes.

        Returns:
            numpy.ndarray: integer distances indexed by site
        """
        origin = self.coord(self.resolve(origin))
        coords = np.indices(self.shape).reshape(self.dim, -1)
        gaps = np.abs(coords - np.array(origin).reshape(-1, 1))
        if self.boundary is Boundary.PERIODIC:
            gaps = np.minimum(gaps, np.array(self.shape).reshape(-1, 1) - gaps)
        return gaps.max(axis=0)

    def distance(self, first, second):
        return int(self.distances_from(first)[self.resolve(second)])


RateQuery = namedtuple("RateQuery", ["site", "f1", "phi", "psi"])
RateQuery.__doc__ = """Rates seen from one site.

``phi`` is the birth rate when the site is occupied and ``psi`` the fill rate when it is
empty; the other one is zero.
"""


class Configuration:
    """Occupancy field with cached rates and a weighted sampling index.

    The configuration keeps, for every site, the number of occupied neighbours as an integer,
    the cached birth rate :math:`\\Phi` of occupied sites and the site's total event weight in
    a :class:`~densitycp.sumtree.SumSegmentTree`. After every change only the changed site
    and its occupied neighbours are refreshed; a full rebuild runs every
    ``REBUILD_INTERVAL`` updates.

    In the default mode the weight of an occupied site is ``1 + Phi``: one death clock plus
    the birth clock, including births that end up coalescing. With ``skip_null_births`` the
    weight is ``1 + Phi * m / 2d`` where ``m`` counts the neighbour slots whose target would
    actually become occupied; births that cannot change the state are never sampled. Both
    modes produce the same law for the occupancy trajectory.

    Args:
        params (Params): model parameters
        geo (TorusGeometry): geometry, with ``geo.dim == params.dim``
        occupied (Iterable): initially occupied sites (indices or coordinates)
        skip_null_births (bool): sample only births that change the configuration
        birth_window (Iterable): if given, births onto sites outside this set are suppressed
    """

    REBUILD_INTERVAL = 1 << 20

    def __init__(self, params, geo, occupied=(), skip_null_births=False, birth_window=None):
        if params.dim != geo.dim:
            raise ParameterError(
                "params.dim={} does not match a {}-dimensional torus".format(params.dim, geo.dim),
                module="lattice-core",
            )
        self.params = params
        self.geo = geo
        self.skip_null_births = bool(skip_null_births)
        self.occupancy = bytearray(geo.n_sites)
        self.counts = [0] * geo.n_sites
        self.rate_cache = [0.0] * geo.n_sites
        self.index = SumSegmentTree(geo.n_sites)
        self.occupied_count = 0
        self._rates = params.rate_table()
        self._updates = 0
        if birth_window is None:
            self.window = None
        else:
            self.window = bytearray(geo.n_sites)
            for site in birth_window:
                self.window[geo.resolve(site)] = 1
        for site in occupied:
            self.occupancy[geo.resolve(site)] = 1
        self.rebuild()

    def __repr__(self):
        return "Configuration({}, occupied={})".format(self.geo, self.occupied_count)

    @property
    def total_rate(self):
        """float: sum of all site weights held by the index"""
        return self.index.total

    def is_occupied(self, site):
        return self.occupancy[self.geo.resolve(site)] == 1

    def occupied_sites(self):
        """list[int]: occupied sites in increasing index order"""
        return [i for i, bit in enumerate(self.occupancy) if bit]

    def can_receive(self, site):
        """Whether a birth may land on ``site`` (valid, inside the window, empty)."""
        if site < 0 or self.occupancy[site]:
            return False
        return self.window is None or self.window[site] == 1

    def open_slots(self, site):
        """Neighbour slots of ``site`` whose target would become occupied by a birth."""
        return [s for s, y in enumerate(self.geo.neighbors[site]) if self.can_receive(y)]

    def weight(self, site):
        """Total event rate of ``site`` recomputed from its neighbour count."""
        if not self.occupancy[site]:
            return 0.0
        phi = self._rates[self.counts[site]]
        if self.skip_null_births:
            return 1.0 + phi * len(self.open_slots(site)) / self.geo.degree
        return 1.0 + phi

    def _refresh(self, site):
        self.rate_cache[site] = self._rates[self.counts[site]] if self.occupancy[site] else 0.0
        self.index[site] = self.weight(site)

    def _tick(self):
        self._updates += 1
        if self._updates >= self.REBUILD_INTERVAL:
            self.rebuild()

    def _set(self, site, bit):
        self.occupancy[site] = bit
        self.occupied_count += 1 if bit else -1
        delta = 1 if bit else -1
        changed = {site}
        for y in self.geo.neighbors[site]:
            if y < 0:
                continue
            self.counts[y] += delta
            if self.occupancy[y]:
                changed.add(y)
        for y in changed:
            self._refresh(y)
        self._tick()
        return changed

    def occupy(self, site):
        """Mark an empty site occupied; returns the change-set."""
        if self.occupancy[site]:
            raise StateError("site {} is already occupied".format(self.geo.coord(site)))
        return self._set(site, 1)

    def vacate(self, site):
        """Mark an occupied site empty; returns the change-set."""
        if not self.occupancy[site]:
            raise StateError("site {} is empty".format(self.geo.coord(site)))
        return self._set(site, 0)

    def rebuild(self):
        """Recompute neighbour counts, rates and the whole index from the occupancy."""
        neighbors = self.geo.neighbors
        occupancy = self.occupancy
        self.counts = [sum(occupancy[y] for y in nbrs if y >= 0) for nbrs in neighbors]
        self.occupied_count = sum(occupancy)
        self.rate_cache = [
            self._rates[k] if bit else 0.0 for k, bit in zip(self.counts, occupancy)
        ]
        self.index.rebuild([self.weight(x) for x in range(self.geo.n_sites)])
        if self._updates:
            logger.debug("rebuilt rate index after %d updates", self._updates)
        self._updates = 0

    def check_coherence(self):
        """Compare every cache against a from-scratch recomputation.

        Returns:
            list[int]: sites whose neighbour count, cached rate or index weight disagrees;
            empty when the configuration is coherent
        """
        bad = []
        leaves = self.index.leaves()
        for x in range(self.geo.n_sites):
            k = sum(self.occupancy[y] for y in self.geo.neighbors[x] if y >= 0)
            expected_phi = self.params.rate(k) if self.occupancy[x] else 0.0
            if (
                k != self.counts[x]
                or self.rate_cache[x] != expected_phi
                or leaves[x] != self.weight(x)
            ):
                bad.append(x)
        if not math.isclose(self.index.total, math.fsum(leaves), rel_tol=1e-12, abs_tol=1e-12):
            bad.append(-1)
        return bad


def _occupied_neighbor_count(config, geo, site):
    return sum(config.occupancy[y] for y in geo.neighbors[site] if y >= 0)


def neighbor_fraction(config, geo, site):
    """Fraction of occupied neighbours ``f1``, counted from scratch.

    Args:
        config (Configuration): current state
        geo (TorusGeometry): geometry of ``config``
        site (int or tuple): site to inspect

    Returns:
        Fraction: ``k / 2d``

    Raises:
        CoordinateError: if ``site`` is outside the geometry
    """
    x = geo.resolve(site)
    return Fraction(_occupied_neighbor_count(config, geo, x), geo.degree)


def birth_rate(params, config, site):
    """Birth rate ``Phi`` of an occupied site, recomputed from the occupancy.

    Raises:
        StateError: if the site is empty
    """
    geo = config.geo
    x = geo.resolve(site)
    if not config.occupancy[x]:
        raise StateError("birth rate of empty site {}".format(geo.coord(x)))
    return params.rate(_occupied_neighbor_count(config, geo, x))


def fill_rate(params, config, site):
    """Rate at which an empty site becomes occupied.

    Sums ``Phi(y) / 2d`` over the occupied neighbour slots ``y`` of the site.

    Raises:
        StateError: if the site is occupied
    """
    geo = config.geo
    x = geo.resolve(site)
    if config.occupancy[x]:
        raise StateError("fill rate of occupied site {}".format(geo.coord(x)))
    rates = [birth_rate(params, config, y) for y in geo.neighbors[x] if y >= 0 and config.occupancy[y]]
    return math.fsum(rates) / geo.degree


def rate_query(params, config, site):
    """Collect ``f1``, ``Phi`` and ``psi`` of a site into a :class:`RateQuery`."""
    geo = config.geo
    x = geo.resolve(site)
    f1 = neighbor_fraction(config, geo, x)
    if config.occupancy[x]:
        return RateQuery(geo.coord(x), f1, birth_rate(params, config, x), 0.0)
    return RateQuery(geo.coord(x), f1, 0.0, fill_rate(params, config, x))


def apply_birth(config, geo, parent, target):
    """Let ``parent`` give birth onto the neighbouring site ``target``.

    A birth onto an occupied target is a coalescence and changes nothing.

    Returns:
        set[int]: sites whose cached rate was refreshed

    Raises:
        StateError: if ``parent`` is empty
        TopologyError: if ``target`` is not a neighbour of ``parent``
    """
    x = geo.resolve(parent)
    y = geo.resolve(target)
    if not config.occupancy[x]:
        raise StateError("parent {} is empty".format(geo.coord(x)))
    if y not in geo.neighbors[x]:
        raise TopologyError("{} is not a neighbour of {}".format(geo.coord(y), geo.coord(x)))
    if config.occupancy[y]:
        return set()
    return config.occupy(y)


def apply_death(config, geo, site):
    """Kill the player at ``site``.

    Returns:
        set[int]: sites whose cached rate was refreshed

    Raises:
        StateError: if ``site`` is empty
    """
    return config.vacate(geo.resolve(site))


OccupancyDump = namedtuple("OccupancyDump", ["side_lengths", "time", "sites"])


def dump_occupancy(config, time=0.0):
    """Text dump of the occupied sites.

    The first line is ``# torus=<l1>x...x<ld> t=<time>`` and every further line holds the
    comma-separated coordinates of one occupied site, in increasing index order. The time is
    written with :func:`repr` so that :func:`load_occupancy` restores it exactly.
    """
    geo = config.geo
    lines = ["# torus={} t={}".format("x".join(str(l) for l in geo.shape), repr(float(time)))]
    for x in config.occupied_sites():
        lines.append(",".join(str(c) for c in geo.coord(x)))
    return "\n".join(lines) + "\n"


def load_occupancy(text):
    """Parse the output of :func:`dump_occupancy`.

    Returns:
        OccupancyDump: side lengths, time and the list of occupied coordinates
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("# torus="):
        raise ValueError("occupancy dump must start with a '# torus=' header")
    torus, stamp = lines[0][len("# torus="):].split(" t=")
    shape = tuple(int(l) for l in torus.split("x"))
    sites = [tuple(int(c) for c in line.split(",")) for line in lines[1:]]
    return OccupancyDump(shape, float(stamp), sites)
