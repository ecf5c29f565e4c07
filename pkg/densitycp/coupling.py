r"""Several processes built on one graphical representation.

Every site carries death marks at rate one and every directed edge carries arrows at rate
:math:`D / 2d`, each arrow with an independent uniform mark :math:`U`. A death mark kills the
player at its site in every process. An arrow :math:`x \to y` with mark :math:`U` produces a
birth in process :math:`k` when :math:`x` is occupied and :math:`y` is empty in
:math:`\xi^k`, and :math:`U` falls in the acceptance interval of process :math:`k` for the
current neighbour count of :math:`x`. With the interval :math:`[0, \Phi_k / D)` this is plain
thinning and process :math:`k` on its own has exactly its standalone law.

Marks and arrows at sites that are empty in every process cannot change anything, so the
stream is only sampled on the union of occupied sites: at total rate
:math:`|U| (1 + D)` a site of the union is drawn uniformly and the event there is a death with
probability :math:`1 / (1 + D)` and an arrow along a uniform slot otherwise.

When the parameters are ordered, :math:`\lambda_1 \le \lambda_2` and
:math:`a_1 \vee 0 \le a_2`, the thresholds are ordered too and the processes stay nested;
every event is checked.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from densitycp.exceptions import ParameterOrderError, UnsupportedError
from densitycp.lattice import Params, Variant
from densitycp.replicates import UniformStream

logger = logging.getLogger(__name__)


class EventStream:
    """The shared randomness of a coupled bundle.

    Args:
        dominating_rate (float): total arrow rate :math:`D` out of a site
        seed (int): experiment seed
        replicate_id (int): replicate index
    """

    def __init__(self, dominating_rate, seed, replicate_id=0):
        if dominating_rate < 0 or not math.isfinite(dominating_rate):
            raise ParameterOrderError("dominating rate must be finite and nonnegative")
        self.dominating_rate = float(dominating_rate)
        self.seed = seed
        self.replicate_id = replicate_id
        self._uniforms = UniformStream.for_replicate(seed, replicate_id)

    def waiting_time(self, active):
        return self._uniforms.exponential(active * (1.0 + self.dominating_rate))

    def pick(self, n):
        return self._uniforms.below(n)

    def is_death(self):
        return self._uniforms.uniform() * (1.0 + self.dominating_rate) < 1.0

    def mark(self):
        return self._uniforms.uniform()


def thinning_intervals(params, dominating_rate):
    """Acceptance interval ``[0, Phi(k) / D)`` for every neighbour count ``k``."""
    if dominating_rate <= 0:
        return [(0.0, 0.0)] * (params.degree + 1)
    return [(0.0, rate / dominating_rate) for rate in params.rate_table()]


def typed_intervals(params, dominating_rate):
    """Acceptance intervals of the typed-arrow construction.

    The mark interval is cut into consecutive pieces of length
    ``lam * exp(i * a / 2d) / D`` for ``i = 0, ..., 2d``; piece ``i`` holds the type ``i``
    arrows. A finite ``a`` accepts a type ``i`` arrow only from a site with exactly ``i``
    occupied neighbours, the hard-core limit only type 0 arrows from isolated sites.

    Returns:
        list[tuple[float, float]]: interval per neighbour count
    """
    if params.variant is Variant.FLOOR_RATE:
        raise UnsupportedError("typed arrows are defined for the standard and hard-core rules")
    degree = params.degree
    widths = [type_rate / dominating_rate for type_rate in _type_rates(params.lam, params.a, degree)]
    edges = np.cumsum([0.0] + widths).tolist()
    if params.variant is Variant.HARD_CORE:
        return [(0.0, edges[1])] + [(0.0, 0.0)] * degree
    return [(edges[i], edges[i + 1]) for i in range(degree + 1)]


def _type_rates(lam, a, degree):
    if a == -math.inf:
        return [lam] + [0.0] * degree
    return [lam * math.exp(i * a / degree) for i in range(degree + 1)]


@dataclass
class ContainmentReport:
    """Outcome of a coupled run.

    ``orderings`` lists the pairs ``(smaller, larger)`` whose inclusion was asserted after
    every event; ``violations`` counts events after which some inclusion failed and
    ``threshold_violations`` counts arrows where the smaller process had the larger
    acceptance interval. ``traces`` maps each label to ``[time, population]`` rows.
    """

    horizon: float
    labels: List[str]
    orderings: List[Tuple[str, str]]
    violations: int = 0
    first_violation: Optional[dict] = None
    threshold_violations: int = 0
    events: int = 0
    final_time: float = 0.0
    final_populations: Dict[str, int] = field(default_factory=dict)
    traces: Dict[str, list] = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


@dataclass
class AgreementReport:
    """Finite ``a`` against the hard-core limit on typed arrows.

    ``nonzero_type_arrows`` counts arrows of type ``i >= 1`` whose tail was occupied in one
    of the two processes; the processes can only separate at such an arrow.
    ``agreement_bound`` is the probability that no type ``i >= 1`` arrow at all occurs on the
    torus before the horizon.
    """

    horizon: float
    lam: float
    a: float
    first_disagreement: Optional[dict] = None
    nonzero_type_arrows: int = 0
    agree_at_end: bool = True
    agreement_bound: float = 1.0
    events: int = 0
    traces: Dict[str, list] = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


@dataclass
class DominationReport:
    """Interacting hard-core process against non-interacting single-seed copies.

    ``violations`` counts sites and times where the interacting indicator exceeded the number
    of copies present; ``typed_violations`` where a type ``z`` player of the interacting
    process had no type ``z`` copy underneath.
    """

    horizon: float
    seeds: List[list]
    violations: int = 0
    typed_violations: int = 0
    first_violation: Optional[dict] = None
    max_multiplicity: int = 0
    shared_site_events: int = 0
    events: int = 0
    traces: Dict[str, list] = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


class _TraceGrid:
    def __init__(self, horizon, points):
        self.times = np.linspace(0.0, horizon, points).tolist() if points > 1 else []
        self._pos = 0

    def advance(self, until, populations, rows):
        while self._pos < len(self.times) and self.times[self._pos] < until:
            for row, pop in zip(rows, populations):
                row.append([self.times[self._pos], pop])
            self._pos += 1

    def finish(self, populations, rows):
        self.advance(math.inf, populations, rows)


class CoupledSystem:
    """Processes sharing one :class:`EventStream`.

    Args:
        geo (TorusGeometry): common geometry
        labels (Sequence[str]): one label per process
        intervals (Sequence[list]): acceptance intervals per process, indexed by neighbour
            count, see :func:`thinning_intervals` and :func:`typed_intervals`
        inits (Sequence[Iterable]): initially occupied sites per process
        stream (EventStream): the shared randomness
        orderings (Sequence[tuple[int, int]]): pairs ``(i, j)`` for which
            :math:`\\xi^i \\subseteq \\xi^j` is asserted
    """

    def __init__(self, geo, labels, intervals, inits, stream, orderings=()):
        self.geo = geo
        self.labels = list(labels)
        self.intervals = [list(iv) for iv in intervals]
        self.stream = stream
        self.orderings = list(orderings)
        n = geo.n_sites
        self.occupancy = [bytearray(n) for _ in self.labels]
        self.counts = [[0] * n for _ in self.labels]
        self.populations = [0] * len(self.labels)
        self.cover = [0] * n
        self.active = []
        self._position = {}
        self.time = 0.0
        self.events = 0
        self.violations = 0
        self.threshold_violations = 0
        self.first_violation = None
        for k, init in enumerate(inits):
            for site in init:
                x = geo.resolve(site)
                if not self.occupancy[k][x]:
                    self._occupy(k, x)
        for x in range(n):
            self._check_site(x)

    def _activate(self, x):
        self._position[x] = len(self.active)
        self.active.append(x)

    def _deactivate(self, x):
        pos = self._position.pop(x)
        last = self.active.pop()
        if last != x:
            self.active[pos] = last
            self._position[last] = pos

    def _occupy(self, k, x):
        self.occupancy[k][x] = 1
        self.populations[k] += 1
        counts = self.counts[k]
        for y in self.geo.neighbors[x]:
            if y >= 0:
                counts[y] += 1
        self.cover[x] += 1
        if self.cover[x] == 1:
            self._activate(x)

    def _vacate(self, k, x):
        self.occupancy[k][x] = 0
        self.populations[k] -= 1
        counts = self.counts[k]
        for y in self.geo.neighbors[x]:
            if y >= 0:
                counts[y] -= 1
        self.cover[x] -= 1
        if self.cover[x] == 0:
            self._deactivate(x)

    def _check_site(self, x):
        for i, j in self.orderings:
            if self.occupancy[i][x] > self.occupancy[j][x]:
                self.violations += 1
                if self.first_violation is None:
                    self.first_violation = {
                        "site": list(self.geo.coord(x)),
                        "time": self.time,
                        "pair": [self.labels[i], self.labels[j]],
                    }
                    logger.warning("containment %s <= %s broken at %s, t=%r", self.labels[i], self.labels[j], self.geo.coord(x), self.time)
                return

    def _check_thresholds(self, x, y):
        for i, j in self.orderings:
            if self.occupancy[i][x] and self.occupancy[j][x] and not self.occupancy[j][y]:
                lo_i, hi_i = self.intervals[i][self.counts[i][x]]
                lo_j, hi_j = self.intervals[j][self.counts[j][x]]
                if hi_i > lo_i and (lo_i < lo_j or hi_i > hi_j):
                    self.threshold_violations += 1

    def step(self):
        """Realise the next event of the union; returns its time.

        Returns ``None`` without changing the state when every process is empty.
        """
        if not self.active:
            return None
        self.time += self.stream.waiting_time(len(self.active))
        return self.time

    def apply(self):
        """Apply the event whose time was produced by :meth:`step`.

        Returns:
            tuple: ``(kind, site, target, mark)`` with ``kind`` ``"death"`` or ``"arrow"``
        """
        stream = self.stream
        x = self.active[stream.pick(len(self.active))]
        self.events += 1
        if stream.is_death():
            for k in range(len(self.labels)):
                if self.occupancy[k][x]:
                    self._vacate(k, x)
            self._check_site(x)
            return "death", x, None, None
        y = self.geo.neighbors[x][stream.pick(self.geo.degree)]
        mark = stream.mark()
        if y < 0:
            return "arrow", x, y, mark
        if self.orderings:
            self._check_thresholds(x, y)
        fired = []
        for k in range(len(self.labels)):
            occupancy = self.occupancy[k]
            if occupancy[x] and not occupancy[y]:
                lo, hi = self.intervals[k][self.counts[k][x]]
                if lo <= mark < hi:
                    fired.append(k)
        for k in fired:
            self._occupy(k, y)
        if fired:
            self._check_site(y)
        return "arrow", x, y, mark

    def evolve(self, horizon, trace_points=101, on_event=None):
        """Run to ``horizon`` or until every process is empty.

        Args:
            horizon (float): final time
            trace_points (int): number of grid times for the population traces
            on_event (callable): called with the result of :meth:`apply` after every event

        Returns:
            dict[str, list]: population trace per label
        """
        rows = [[] for _ in self.labels]
        grid = _TraceGrid(horizon, trace_points)
        while True:
            now = self.time
            t = self.step()
            if t is None or t > horizon:
                self.time = max(now, horizon) if t is not None else now
                break
            grid.advance(t, self.populations, rows)
            result = self.apply()
            if on_event is not None:
                on_event(result)
        grid.finish(self.populations, rows)
        return dict(zip(self.labels, rows))

    def report(self, horizon, traces):
        return ContainmentReport(
            horizon=horizon,
            labels=self.labels,
            orderings=[(self.labels[i], self.labels[j]) for i, j in self.orderings],
            violations=self.violations,
            first_violation=self.first_violation,
            threshold_violations=self.threshold_violations,
            events=self.events,
            final_time=self.time,
            final_populations=dict(zip(self.labels, self.populations)),
            traces=traces,
        )


def _check_standard(*params):
    for p in params:
        if p.variant is Variant.FLOOR_RATE:
            raise ParameterOrderError("monotone couplings need the standard or hard-core rule")


def evolve_coupled_pair(p1, p2, init1, init2, geo, horizon, seed, replicate_id=0, trace_points=101):
    """Run two ordered processes on one stream and assert :math:`\\xi^1 \\subseteq \\xi^2`.

    Args:
        p1 (Params): parameters of the smaller process
        p2 (Params): parameters of the larger process, with ``p1.lam <= p2.lam`` and
            ``max(p1.a, 0) <= p2.a``
        init1 (Iterable): initial sites of the smaller process
        init2 (Iterable): initial sites of the larger process, a superset of ``init1``
        geo (TorusGeometry): common geometry
        horizon (float): final time
        seed (int): experiment seed
        replicate_id (int): replicate index

    Returns:
        ContainmentReport

    Raises:
        ParameterOrderError: if the parameters or the initial sets are not ordered
    """
    _check_standard(p1, p2)
    if p1.dim != geo.dim or p2.dim != geo.dim:
        raise ParameterOrderError("parameters and geometry disagree on the dimension")
    if p1.lam > p2.lam or max(p1.a, 0.0) > p2.a:
        raise ParameterOrderError(
            "coupling needs lambda1 <= lambda2 and max(a1, 0) <= a2, got ({}, {}) and ({}, {})".format(
                p1.lam, p1.a, p2.lam, p2.a
            )
        )
    first = {geo.resolve(s) for s in init1}
    second = {geo.resolve(s) for s in init2}
    if not first <= second:
        raise ParameterOrderError("the initial set of the smaller process must be contained in the other")
    dominating = max(p1.max_rate(), p2.max_rate())
    stream = EventStream(dominating, seed, replicate_id)
    system = CoupledSystem(
        geo,
        ["xi1", "xi2"],
        [thinning_intervals(p1, dominating), thinning_intervals(p2, dominating)],
        [sorted(first), sorted(second)],
        stream,
        orderings=[(0, 1)],
    )
    traces = system.evolve(horizon, trace_points)
    return system.report(horizon, traces)


def sandwich_params(lam, a, dim):
    """The three processes of the sandwich: contact at ``lam``, the model, contact at
    ``lam * exp(a (1 - 1/2d))``."""
    eta = Params(lam, 0.0, dim)
    xi = Params(lam, a, dim)
    zeta = Params(lam * math.exp(a * (1.0 - 1.0 / (2 * dim))), 0.0, dim)
    return eta, xi, zeta


def evolve_sandwich(lam, a, geo, init, horizon, seed, replicate_id=0, trace_points=101):
    """Couple the model between two basic contact processes.

    For ``a <= 0`` the run asserts ``zeta <= xi <= eta``, for ``a > 0`` it asserts
    ``eta <= xi <= zeta``, where ``eta`` runs at ``lam`` and ``zeta`` at
    ``lam * exp(a (1 - 1/2d))``, both with ``a = 0``.

    Raises:
        UnsupportedError: for ``a = -inf``; use :func:`evolve_vs_noninteracting`
    """
    if a == -math.inf:
        raise UnsupportedError(
            "the sandwich needs a finite payoff; compare the hard-core limit with "
            "evolve_vs_noninteracting instead",
            module="coupling",
        )
    eta, xi, zeta = sandwich_params(lam, a, geo.dim)
    dominating = lam * math.exp(max(a, 0.0))
    sites = sorted({geo.resolve(s) for s in init})
    orderings = [(2, 1), (1, 0)] if a <= 0 else [(0, 1), (1, 2)]
    stream = EventStream(dominating, seed, replicate_id)
    system = CoupledSystem(
        geo,
        ["eta", "xi", "zeta"],
        [thinning_intervals(p, dominating) for p in (eta, xi, zeta)],
        [sites, sites, sites],
        stream,
        orderings=orderings,
    )
    traces = system.evolve(horizon, trace_points)
    return system.report(horizon, traces)


def survival_indicators_coupled(params_list, geo, init, horizon, seed, replicate_id=0):
    """Survival at ``horizon`` of several processes driven by one stream.

    Every process starts from ``init``. The dominating rate is the largest birth rate among
    the processes, so every marginal is exact; pairs with ordered parameters come out
    pathwise ordered.

    Returns:
        list[bool]: whether each process is nonempty at ``horizon``
    """
    _check_standard(*params_list)
    dominating = max(p.max_rate() for p in params_list)
    sites = sorted({geo.resolve(s) for s in init})
    stream = EventStream(dominating, seed, replicate_id)
    system = CoupledSystem(
        geo,
        [str(i) for i in range(len(params_list))],
        [thinning_intervals(p, dominating) for p in params_list],
        [sites] * len(params_list),
        stream,
    )
    system.evolve(horizon, trace_points=0)
    return [pop > 0 for pop in system.populations]


def perturbation_agreement_probability(lam, a, n_sites, horizon, dim):
    """Probability of no arrow of type ``i >= 1`` on ``n_sites`` sites during ``horizon``."""
    if a == -math.inf:
        return 1.0
    rate = sum(_type_rates(lam, a, 2 * dim)[1:])
    return math.exp(-n_sites * horizon * rate)


def evolve_perturbation(lam, a, geo, init, horizon, seed, replicate_id=0, trace_points=101):
    """Run the model at finite ``a`` and the hard-core limit on one typed-arrow stream.

    Returns:
        AgreementReport
    """
    if a == -math.inf or a >= 0:
        raise UnsupportedError("the perturbation coupling compares a finite a < 0 with a = -inf", module="coupling")
    finite = Params(lam, a, geo.dim)
    limit = Params.hardcore(lam, geo.dim)
    dominating = sum(_type_rates(lam, a, geo.degree))
    sites = sorted({geo.resolve(s) for s in init})
    stream = EventStream(dominating, seed, replicate_id)
    system = CoupledSystem(
        geo,
        ["finite", "hardcore"],
        [typed_intervals(finite, dominating), typed_intervals(limit, dominating)],
        [sites, sites],
        stream,
    )
    type0 = lam / dominating
    report = AgreementReport(
        horizon=horizon,
        lam=lam,
        a=a,
        agreement_bound=perturbation_agreement_probability(lam, a, geo.n_sites, horizon, geo.dim),
    )

    def watch(result):
        kind, x, y, mark = result
        if kind == "arrow" and mark >= type0:
            report.nonzero_type_arrows += 1
        if report.first_disagreement is None:
            changed = x if kind == "death" else y
            if changed >= 0 and system.occupancy[0][changed] != system.occupancy[1][changed]:
                report.first_disagreement = {"site": list(geo.coord(changed)), "time": system.time}

    report.traces = system.evolve(horizon, trace_points, on_event=watch)
    report.events = system.events
    report.agree_at_end = system.occupancy[0] == system.occupancy[1]
    return report


def evolve_vs_noninteracting(seeds, lam, geo, horizon, seed, a=-math.inf, replicate_id=0, trace_points=101):
    """Compare the hard-core process from ``seeds`` with non-interacting single-seed copies.

    The player starting at the ``z``-th seed and all its descendants have type ``z``. Type
    ``z`` players own arrows at rate ``lam / 2d`` per edge and death marks at rate one. In the
    interacting process a type ``z`` arrow fires when its tail holds a type ``z`` player with
    no occupied neighbour at all; in the family of copies it fires when the tail holds a type
    ``z`` copy with no type ``z`` neighbour. The copies may stack several types on one site.

    The interacting process is not dominated pathwise by the sum of the copies. When two
    families come within distance two of each other, a birth blocked in the interacting
    process by a player of the other family still goes through for the copies. The extra
    copy has its parent's type, so it can later block a birth of its own family that the
    interacting process, where its site is empty, lets through. A site can then be
    occupied in the interacting process with no copy on it. Such events are
    counted in ``violations`` (occupied without any copy) and ``typed_violations`` (occupied
    without a copy of the owner's type); a single seed, or families that stay apart,
    never produce one.

    Args:
        seeds (Iterable): the initial set, one type per site
        lam (float): birth rate
        geo (TorusGeometry): common geometry
        horizon (float): final time
        seed (int): experiment seed
        a (float): must be ``-inf``

    Returns:
        DominationReport

    Raises:
        UnsupportedError: for a finite ``a``
    """
    if a != -math.inf:
        raise UnsupportedError("the comparison with non-interacting copies holds at a = -inf only", module="coupling")
    sites = sorted({geo.resolve(s) for s in seeds})
    n_types = len(sites)
    n = geo.n_sites
    neighbors = geo.neighbors
    owner = [-1] * n
    any_count = [0] * n
    copies = [bytearray(n) for _ in range(n_types)]
    type_count = [[0] * n for _ in range(n_types)]
    multiplicity = [0] * n
    pairs = []
    position = {}
    uniforms = UniformStream.for_replicate(seed, replicate_id)
    report = DominationReport(horizon=horizon, seeds=[list(geo.coord(s)) for s in sites])
    totals = [0, 0]

    def refresh_pair(z, x):
        alive = owner[x] == z or copies[z][x]
        key = (z, x)
        if alive and key not in position:
            position[key] = len(pairs)
            pairs.append(key)
        elif not alive and key in position:
            pos = position.pop(key)
            last = pairs.pop()
            if last != key:
                pairs[pos] = last
                position[last] = pos

    def set_owner(x, z):
        delta = 1 if z >= 0 else -1
        previous = owner[x]
        owner[x] = z
        totals[0] += delta
        for y in neighbors[x]:
            if y >= 0:
                any_count[y] += delta
        refresh_pair(z if z >= 0 else previous, x)

    def set_copy(z, x, bit):
        copies[z][x] = bit
        delta = 1 if bit else -1
        multiplicity[x] += delta
        totals[1] += delta
        for y in neighbors[x]:
            if y >= 0:
                type_count[z][y] += delta
        report.max_multiplicity = max(report.max_multiplicity, multiplicity[x])
        if multiplicity[x] > 1:
            report.shared_site_events += 1
        refresh_pair(z, x)

    def check(x, time):
        occupied = 1 if owner[x] >= 0 else 0
        if occupied > multiplicity[x]:
            report.violations += 1
        if owner[x] >= 0 and not copies[owner[x]][x]:
            report.typed_violations += 1
        if (occupied > multiplicity[x] or (owner[x] >= 0 and not copies[owner[x]][x])) and report.first_violation is None:
            report.first_violation = {"site": list(geo.coord(x)), "time": time}

    for z, x in enumerate(sites):
        set_owner(x, z)
        set_copy(z, x, 1)

    interacting_rows, copies_rows = [], []
    grid = _TraceGrid(horizon, trace_points)
    time = 0.0

    while pairs:
        wait = uniforms.exponential(len(pairs) * (1.0 + lam))
        if time + wait > horizon:
            break
        time += wait
        grid.advance(time, list(totals), [interacting_rows, copies_rows])
        z, x = pairs[uniforms.below(len(pairs))]
        report.events += 1
        if uniforms.uniform() * (1.0 + lam) < 1.0:
            if owner[x] == z:
                set_owner(x, -1)
            if copies[z][x]:
                set_copy(z, x, 0)
            check(x, time)
            continue
        y = neighbors[x][uniforms.below(geo.degree)]
        if y < 0:
            continue
        if owner[x] == z and any_count[x] == 0 and owner[y] < 0:
            set_owner(y, z)
        if copies[z][x] and type_count[z][x] == 0 and not copies[z][y]:
            set_copy(z, y, 1)
        check(y, time)
    grid.finish(list(totals), [interacting_rows, copies_rows])
    report.traces = {"interacting": interacting_rows, "copies": copies_rows}
    return report
