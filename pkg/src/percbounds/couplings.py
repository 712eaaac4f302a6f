"""Susceptible-infected couplings between percolation models.

Each coupling grows an infected set in a *source* lattice one frontier item
at a time (smallest item first in canonical order). An item is resolved by
querying a *target* lattice through a memoized :class:`LatticeView`; on
success the new infected vertex is mapped to the target point where the
query landed. Because all target randomness goes through one view, the
domination claims can be checked pathwise inside a single probability
space: the image map must stay injective, satisfy the coupling's
projection identity, and land inside the target's open cluster.

Four couplings are implemented:

``triangular``
    Bond percolation on T driven by anisotropic bond percolation on Z^3.
``edge-split``
    Oriented bond percolation on Z^d driven by Z^{d+1} with every edge
    along the last axis split into d parallel copies.
``vertex-split``
    Site percolation on Z^d driven by Z^{d+1} with every vertex split into
    2d - 1 copies; starts from the two vertices {0, e_1}.
``fold``
    Site percolation on Z^k driven by Z^d with the d axes grouped into k
    classes (oriented or not).

The same engines also run the *direct* source model, where each frontier
item is an independent Bernoulli with the coupling's event probability.
Comparing truncated size laws of the two is the distributional check.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .lattice import TRIANGULAR_DIRECTIONS, DirectionMap, Vertex
from .mc_engine import LatticeView

DEFAULT_STEP_CAP = 10**5
K_CAP = 10**4
KINDS = ("triangular", "edge-split", "vertex-split", "fold")


class CouplingError(RuntimeError):
    """A coupling invariant failed: this is an implementation bug."""


class EscalationCapError(RuntimeError):
    """An event walk climbed more than ``K_CAP`` levels."""


@dataclass(frozen=True)
class EventOutcome:
    occurred: bool
    landing_k: Optional[int] = None
    landing_label: Optional[int] = None
    landing: Optional[tuple] = None

    def to_dict(self) -> dict:
        return {"occurred": self.occurred, "k": self.landing_k, "label": self.landing_label}


@dataclass
class StepRecord:
    n: int
    item: tuple
    source: Vertex
    outcome: EventOutcome
    infected_size: int
    j: Optional[int] = None

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "item": _jsonable(self.item),
            "source": list(self.source),
            "event": self.outcome.to_dict(),
            "landing": _jsonable(self.outcome.landing),
            "infected_size": self.infected_size,
        }
        if self.j is not None:
            out["j"] = self.j
        return out


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(c) for c in x]
    return x


@dataclass
class ExplorationState:
    """The quadruple (I_n, x(I_n), R_n, S_n) and the step counter."""

    mode: str  # "bond" or "site"
    infected: set
    image: dict
    removed: set = field(default_factory=set)
    susceptible: set = field(default_factory=set)
    step: int = 0
    log: list = field(default_factory=list)


@dataclass
class CouplingTrace:
    kind: str
    params: dict
    state: ExplorationState
    image_cluster_size: int
    frozen: bool
    capped: bool

    @property
    def infected_size(self) -> int:
        return len(self.state.infected)

    @property
    def steps(self) -> int:
        return self.state.step

    @property
    def log(self) -> list:
        return self.state.log

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.state.log)


# -- lattice plumbing for the source processes ------------------------------


def _l1(v) -> int:
    return sum(map(abs, v))


def _shift(v: tuple, axis: int, amount: int) -> tuple:
    w = list(v)
    w[axis] += amount
    return tuple(w)


class _Triangular:
    """Moves of T; a direction is ``(axis, sign)`` over TRIANGULAR_DIRECTIONS."""

    oriented = False

    @staticmethod
    def moves(v):
        a, b = v
        out = []
        for axis, (da, db) in enumerate(TRIANGULAR_DIRECTIONS):
            w = (a + da, b + db)
            out.append((w, (axis, 1), (v, axis)))
            w = (a - da, b - db)
            out.append((w, (axis, -1), (w, axis)))
        return out

    back_moves = moves  # undirected: the same pairs, read from the other end

    @staticmethod
    def key(edge):
        base, axis = edge
        return (abs(base[0]) + abs(base[1]), base, axis)


class _Cubic:
    """Moves of Z^d, non-oriented or oriented; a direction is ``(axis, sign)``."""

    def __init__(self, d: int, oriented: bool):
        self.d = d
        self.oriented = oriented
        self.dirs = [(i, 1) for i in range(d)] if oriented else [
            (i, s) for i in range(d) for s in (1, -1)
        ]

    def moves(self, v):
        out = []
        for axis, sign in self.dirs:
            w = _shift(v, axis, sign)
            out.append((w, (axis, sign), (v if sign > 0 else w, axis)))
        return out

    def back_moves(self, v):
        # moves that end at v: from u = v - sign * e_axis
        out = []
        for axis, sign in self.dirs:
            u = _shift(v, axis, -sign)
            out.append((u, (axis, sign), (u if sign > 0 else v, axis)))
        return out

    @staticmethod
    def key(edge):
        base, axis = edge
        return (_l1(base), base, axis)

    @staticmethod
    def vertex_key(v):
        return (_l1(v), v)


# -- the two exploration engines --------------------------------------------

Resolver = Callable  # (image_of_v, direction, edge_or_None, j) -> (landing | None, k, label)


def _run_bond_process(
    lattice,
    start: Vertex,
    x0,
    resolve: Resolver,
    step_cap: int,
    record: bool,
    on_infect: Optional[Callable] = None,
    check_frontier: bool = False,
) -> tuple[ExplorationState, bool]:
    """Grow through source edges; a resolved edge is always removed."""
    infected = {start}
    image = {start: x0}
    removed: set = set()
    frontier: dict = {}  # edge -> (v, w, direction); exactly S_n
    heap: list = []
    log: list = []
    moves, back_moves, key = lattice.moves, lattice.back_moves, lattice.key

    def expose(v):
        for u, _, edge in back_moves(v):
            if u in infected:
                frontier.pop(edge, None)
        for w, direction, edge in moves(v):
            if w in infected or edge in removed or edge in frontier:
                continue
            frontier[edge] = (v, w, direction)
            heapq.heappush(heap, (key(edge), edge))

    expose(start)
    n = 0
    while n < step_cap and frontier:
        _, edge = heapq.heappop(heap)
        entry = frontier.pop(edge, None)
        if entry is None:
            continue  # stale: the far end was infected meanwhile
        v, w, direction = entry
        removed.add(edge)
        landing, k, label = resolve(image[v], direction, edge, None)
        n += 1
        if landing is not None:
            infected.add(w)
            image[w] = landing
            if on_infect is not None:
                on_infect(w, landing)
            expose(w)
        if record:
            outcome = EventOutcome(landing is not None, k, label, landing)
            log.append(StepRecord(n, (v, w), v, outcome, len(infected)))
        if check_frontier:
            _check_bond_frontier(lattice, infected, removed, frontier)
    state = ExplorationState("bond", infected, image, removed, set(frontier), n, log)
    return state, not frontier


def _check_bond_frontier(lattice, infected, removed, frontier) -> None:
    expected = {
        edge
        for v in infected
        for w, _, edge in lattice.moves(v)
        if w not in infected and edge not in removed
    }
    if expected != set(frontier):
        raise CouplingError("stored susceptible edges differ from their definition")


def _run_site_process(
    lattice,
    start_images: dict,
    resolve: Resolver,
    step_cap: int,
    record: bool,
    on_infect: Optional[Callable] = None,
    check_frontier: bool = False,
    max_j: Optional[int] = None,
) -> tuple[ExplorationState, bool]:
    """Grow through source vertices; a failed vertex is removed."""
    infected = set(start_images)
    image = dict(start_images)
    removed: set = set()
    frontier: set = set()
    heap: list = []
    log: list = []
    moves, back_moves, vkey = lattice.moves, lattice.back_moves, lattice.vertex_key

    def expose(v):
        for w, _, _ in moves(v):
            if w in infected or w in removed or w in frontier:
                continue
            frontier.add(w)
            heapq.heappush(heap, (vkey(w), w))

    for v in sorted(start_images, key=vkey):
        expose(v)
    n = 0
    while n < step_cap and frontier:
        _, a = heapq.heappop(heap)
        # a = v + direction with v the smallest infected vertex next to a
        v, direction = min(
            ((u, dr) for u, dr, _ in back_moves(a) if u in infected),
            key=lambda t: vkey(t[0]),
        )
        j = sum(1 for w, _, _ in moves(v) if w in frontier)
        if max_j is not None and not 1 <= j <= max_j:
            raise CouplingError(f"j_n={j} outside 1..{max_j}")
        frontier.discard(a)
        landing, k, label = resolve(image[v], direction, None, j)
        n += 1
        if landing is not None:
            infected.add(a)
            image[a] = landing
            if on_infect is not None:
                on_infect(a, landing)
            expose(a)
        else:
            removed.add(a)
        if record:
            outcome = EventOutcome(landing is not None, k, label, landing)
            log.append(StepRecord(n, a, v, outcome, len(infected), j))
        if check_frontier:
            _check_site_frontier(lattice, infected, removed, frontier)
    state = ExplorationState("site", infected, image, removed, set(frontier), n, log)
    return state, not frontier


def _check_site_frontier(lattice, infected, removed, frontier) -> None:
    expected = {
        w for v in infected for w, _, _ in lattice.moves(v)
        if w not in infected and w not in removed
    }
    if expected != frontier:
        raise CouplingError("stored susceptible vertices differ from their definition")


# -- event samplers -----------------------------------------------------------


def sample_event_A(
    view: LatticeView,
    anchor,
    direction,
    kind: str = "edge_split",
    j: Optional[int] = None,
    k_cap: int = K_CAP,
) -> EventOutcome:
    """Resolve one frontier item of a split-lattice coupling.

    ``edge_split``: ``anchor`` is a point of Z^{d+1}, ``direction`` an axis
    i < d. Succeeds at level k if the side bond at ``anchor + k u_{d+1}`` is
    open, after climbing k open copies labelled i + 1 past closed side
    bonds.

    ``vertex_split``: ``anchor`` is a split vertex ``(point, copy)``,
    ``direction`` an ``(axis, sign)`` pair and ``j`` the copy used for the
    climb. Succeeds at level k with the first open copy ``l`` of
    ``point + k u_{d+1} ± u_axis``, after climbing k open copies ``j`` past
    fully closed targets.
    """
    if kind == "edge_split":
        landing, k, label = _walk_edge_split(view, tuple(anchor), direction, k_cap)
    elif kind == "vertex_split":
        if j is None:
            raise ValueError("vertex_split events need the climbing copy j")
        landing, k, label = _walk_vertex_split(view, anchor, direction, j, k_cap)
    else:
        raise ValueError(f"unknown event kind {kind!r}")
    if landing is None:
        return EventOutcome(False)
    return EventOutcome(True, k, label, landing)


def _walk_edge_split(view, point, axis, k_cap):
    top = len(point) - 1
    is_open = view.is_open
    for k in range(k_cap + 1):
        if is_open((point, axis, 0)):
            return _shift(point, axis, 1), k, None
        if not is_open((point, top, axis + 1)):
            return None, k, None
        point = _shift(point, top, 1)
    raise EscalationCapError(f"edge-split walk exceeded k={k_cap}")


def _walk_vertex_split(view, anchor, direction, j, k_cap):
    point, _ = anchor
    axis, sign = direction
    top = len(point) - 1
    copies = 2 * top - 1
    is_open = view.is_open
    for k in range(k_cap + 1):
        target = _shift(point, axis, sign)
        for label in range(1, copies + 1):
            if is_open((target, label)):
                return (target, label), k, label
        point = _shift(point, top, 1)
        if not is_open((point, j)):
            return None, k, None
    raise EscalationCapError(f"vertex-split walk exceeded k={k_cap}")


def sample_event_B(view: LatticeView, anchor, direction, partition: DirectionMap) -> EventOutcome:
    """Fold event: some ``anchor ± e`` with e in the class of ``direction`` is open.

    ``direction`` is ``(class index, sign)``; the first open member in
    canonical order is used and its axis is reported as the label.
    """
    landing, _, label = _walk_fold(view, tuple(anchor), direction, partition.axis_classes())
    if landing is None:
        return EventOutcome(False)
    return EventOutcome(True, 0, label, landing)


def _walk_fold(view, point, direction, classes):
    cls, sign = direction
    is_open = view.is_open
    for axis in classes[cls]:
        target = _shift(point, axis, sign)
        if is_open((target, 0)):
            return target, 0, axis
    return None, 0, None


# -- closed forms -------------------------------------------------------------


def combine_last_two_directions(p_d: float, p_d1: float) -> float:
    """Parameter p~ with (1 - p~) = (1 - p_d)(1 - p_{d+1})."""
    for x in (p_d, p_d1):
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"probability {x} outside [0, 1]")
    return 1.0 - (1.0 - p_d) * (1.0 - p_d1)


def split_edge_probability(d: int, p: float) -> float:
    """q with (1 - p) = (1 - q)^d."""
    return 1.0 - (1.0 - p) ** (1.0 / d)


def split_vertex_probability(d: int, p: float) -> float:
    """q with (1 - p) = (1 - q)^(2d - 1)."""
    return 1.0 - (1.0 - p) ** (1.0 / (2 * d - 1))


def event_A_probability(d: int, p: float) -> float:
    return p / (p + (1 - p) ** ((d + 1) / d))


def event_An_probability(d: int, p: float) -> float:
    return p / (p + (1 - p) ** (2 * d / (2 * d - 1)))


def event_B_probability(d: int, k: int, p: float) -> float:
    return 1.0 - (1.0 - p) ** (d / k)


# -- the couplings ------------------------------------------------------------


def _check_unit(p: float, name: str = "p", open_interval: bool = False) -> None:
    ok = 0.0 < p < 1.0 if open_interval else 0.0 <= p <= 1.0
    if not ok or math.isnan(p):
        raise ValueError(f"{name}={p} outside {'(0, 1)' if open_interval else '[0, 1]'}")


class _ImageGuard:
    """Asserts injectivity and the projection identity at each infection."""

    def __init__(self, identity: Callable, initial: Sequence):
        self.identity = identity
        self.points = set(initial)

    def __call__(self, w, landing):
        if landing in self.points:
            raise CouplingError(f"image map not injective at {w} -> {landing}")
        if not self.identity(w, landing):
            raise CouplingError(f"projection identity fails at {w} -> {landing}")
        self.points.add(landing)


def triangular_identity(v, x) -> bool:
    return v[0] == x[0] + x[2] and v[1] == x[1] + x[2]


def _finish(kind, params, state, frozen, cluster_size) -> CouplingTrace:
    return CouplingTrace(kind, params, state, cluster_size, frozen, not frozen)


def run_triangular_coupling(
    p1: float,
    p2: float,
    p3: float,
    step_cap: int = DEFAULT_STEP_CAP,
    master_seed: int = 0,
    replica: int = 0,
    record: bool = True,
    check: bool = True,
    check_frontier: bool = False,
) -> CouplingTrace:
    """Infection on T driven by anisotropic bond percolation on Z^3.

    The T edge <v, v+u> is resolved by the Z^3 bond <x(v), x(v) + tau(u)>.
    """
    for name, x in (("p1", p1), ("p2", p2), ("p3", p3)):
        _check_unit(x, name)
    if step_cap < 1:
        raise ValueError("step_cap must be >= 1")
    view = LatticeView((p1, p2, p3), master_seed, replica)
    is_open = view.is_open

    def resolve(x, direction, edge, j):
        axis, sign = direction
        y = _shift(x, axis, sign)
        if is_open((x if sign > 0 else y, axis, 0)):
            return y, 0, None
        return None, 0, None

    origin = (0, 0, 0)
    guard = _ImageGuard(triangular_identity, [origin]) if check else None
    state, frozen = _run_bond_process(
        _Triangular, (0, 0), origin, resolve, step_cap, record, guard, check_frontier
    )
    cluster = _bond_cluster(view, [origin], 3, oriented=False)
    params = {"p": [p1, p2, p3], "step_cap": step_cap, "seed": master_seed, "replica": replica}
    trace = _finish("triangular", params, state, frozen, len(cluster))
    if check:
        _check_pathwise(trace, cluster)
    return trace


def run_oriented_edge_split_coupling(
    d: int,
    p: float,
    step_cap: int = DEFAULT_STEP_CAP,
    master_seed: int = 0,
    replica: int = 0,
    record: bool = True,
    check: bool = True,
    check_frontier: bool = False,
) -> CouplingTrace:
    """Oriented bond infection on Z^d driven by the edge-split Z^{d+1}.

    Ordinary bonds are open with probability p, each of the d copies of a
    last-axis bond with q where (1 - p) = (1 - q)^d.
    """
    if d < 2:
        raise ValueError("edge-split coupling needs d >= 2")
    _check_unit(p, open_interval=True)
    q = split_edge_probability(d, p)
    view = LatticeView([p] * d + [q], master_seed, replica)

    def resolve(x, direction, edge, j):
        return _walk_edge_split(view, x, direction[0], K_CAP)

    origin = (0,) * (d + 1)
    guard = _ImageGuard(lambda v, x: x[:d] == v, [origin]) if check else None
    state, frozen = _run_bond_process(
        _Cubic(d, True), (0,) * d, origin, resolve, step_cap, record, guard, check_frontier
    )
    cluster = _split_edge_cluster(view, origin, d)
    params = {"d": d, "p": p, "q": q, "step_cap": step_cap, "seed": master_seed, "replica": replica}
    trace = _finish("edge-split", params, state, frozen, len(cluster))
    if check:
        _check_pathwise(trace, cluster)
    return trace


def run_site_vertex_split_coupling(
    d: int,
    p: float,
    step_cap: int = DEFAULT_STEP_CAP,
    master_seed: int = 0,
    replica: int = 0,
    record: bool = True,
    check: bool = True,
    check_frontier: bool = False,
) -> CouplingTrace:
    """Site infection on Z^d from {0, e_1} driven by the vertex-split Z^{d+1}.

    Each of the 2d - 1 copies of a vertex is open with q where
    (1 - p) = (1 - q)^(2d - 1). The two start images are declared open.
    """
    if d < 2:
        raise ValueError("vertex-split coupling needs d >= 2")
    _check_unit(p, open_interval=True)
    q = split_vertex_probability(d, p)
    view = LatticeView(q, master_seed, replica)
    origin = ((0,) * (d + 1), 1)
    second = (_shift((0,) * (d + 1), 0, 1), 1)
    view.force(origin, True)
    view.force(second, True)

    def resolve(x, direction, edge, j):
        return _walk_vertex_split(view, x, direction, j, K_CAP)

    starts = {(0,) * d: origin, _shift((0,) * d, 0, 1): second}
    guard = _ImageGuard(lambda v, x: x[0][:d] == v, starts.values()) if check else None
    state, frozen = _run_site_process(
        _Cubic(d, False), starts, resolve, step_cap, record, guard, check_frontier, max_j=2 * d - 1
    )
    cluster = _split_vertex_cluster(view, [origin, second], d)
    params = {"d": d, "p": p, "q": q, "step_cap": step_cap, "seed": master_seed, "replica": replica}
    trace = _finish("vertex-split", params, state, frozen, len(cluster))
    if check:
        _check_pathwise(trace, cluster)
    return trace


def class_sum_identity(partition: DirectionMap) -> Callable:
    classes = partition.axis_classes()

    def identity(v, x) -> bool:
        return all(sum(x[a] for a in cls) == v[j] for j, cls in enumerate(classes))

    return identity


def run_dimension_fold_coupling(
    d: int,
    k: int,
    p: float,
    oriented: bool = False,
    step_cap: int = DEFAULT_STEP_CAP,
    master_seed: int = 0,
    replica: int = 0,
    record: bool = True,
    check: bool = True,
    check_frontier: bool = False,
) -> CouplingTrace:
    """Site infection on Z^k driven by site percolation on Z^d, k | d.

    The step v -> v ± u_j is taken at the first open x(v) ± e, e in D_{u_j}.
    """
    if k < 1 or d % k:
        raise ValueError(f"k={k} does not divide d={d}")
    _check_unit(p, open_interval=True)
    partition = DirectionMap.partition(d, k)
    classes = partition.axis_classes()
    view = LatticeView(p, master_seed, replica)
    origin = (0,) * d
    view.force((origin, 0), True)

    def resolve(x, direction, edge, j):
        return _walk_fold(view, x, direction, classes)

    identity = class_sum_identity(partition)
    guard = _ImageGuard(identity, [origin]) if check else None
    state, frozen = _run_site_process(
        _Cubic(k, oriented), {(0,) * k: origin}, resolve, step_cap, record, guard, check_frontier
    )
    cluster = _site_cluster(view, [origin], d, oriented)
    params = {
        "d": d, "k": k, "p": p, "oriented": oriented, "step_cap": step_cap,
        "seed": master_seed, "replica": replica,
    }
    trace = _finish("fold", params, state, frozen, len(cluster))
    if check:
        _check_pathwise(trace, cluster)
    return trace


# -- target clusters from the explored region ---------------------------------


def _bfs(starts, step) -> set:
    seen = set(starts)
    stack = list(starts)
    while stack:
        y = stack.pop()
        for z in step(y):
            if z not in seen:
                seen.add(z)
                stack.append(z)
    return seen


def _bond_cluster(view: LatticeView, starts, dim: int, oriented: bool) -> set:
    peek = view.cache.get
    dirs = (1,) if oriented else (1, -1)

    def step(y):
        for axis in range(dim):
            for sign in dirs:
                z = _shift(y, axis, sign)
                if peek((y if sign > 0 else z, axis, 0)):
                    yield z

    return _bfs(starts, step)


def _split_edge_cluster(view: LatticeView, origin, d: int) -> set:
    peek = view.cache.get

    def step(y):
        for axis in range(d):
            if peek((y, axis, 0)):
                yield _shift(y, axis, 1)
        if any(peek((y, d, label)) for label in range(1, d + 1)):
            yield _shift(y, d, 1)

    return _bfs([origin], step)


def _split_vertex_cluster(view: LatticeView, starts, d: int) -> set:
    by_point: dict = {}
    for (point, label), state in view.cache.items():
        if state:
            by_point.setdefault(point, []).append(label)

    def step(y):
        point, _ = y
        for axis in range(d + 1):
            for sign in (1, -1):
                z = _shift(point, axis, sign)
                for label in by_point.get(z, ()):
                    yield (z, label)

    return _bfs(starts, step)


def _site_cluster(view: LatticeView, starts, d: int, oriented: bool) -> set:
    peek = view.cache.get
    dirs = (1,) if oriented else (1, -1)

    def step(y):
        for axis in range(d):
            for sign in dirs:
                z = _shift(y, axis, sign)
                if peek((z, 0)):
                    yield z

    return _bfs(starts, step)


def _check_pathwise(trace: CouplingTrace, cluster: set) -> None:
    images = list(trace.state.image.values())
    if len(set(images)) != len(images):
        raise CouplingError("image map is not injective")
    if not set(images) <= cluster:
        raise CouplingError("an image point lies outside the target open cluster")
    if trace.infected_size > trace.image_cluster_size:
        raise CouplingError("infected set larger than the image cluster")


# -- direct simulation of the source models -----------------------------------


def _direct_bond(lattice, start, view, step_cap, coupling_p=None):
    is_open = view.is_open

    def resolve(x, direction, edge, j):
        base, axis = edge
        return (True, 0, None) if is_open((base, axis, 0)) else (None, 0, None)

    state, _ = _run_bond_process(lattice, start, True, resolve, step_cap, record=False)
    return len(state.infected)


def _direct_site(lattice, starts, view, step_cap):
    is_open = view.is_open

    def resolve(x, direction, edge, j):
        # the target is x + direction in the source lattice itself
        axis, sign = direction
        target = _shift(x, axis, sign)
        return (target, 0, None) if is_open((target, 0)) else (None, 0, None)

    state, _ = _run_site_process(lattice, {s: s for s in starts}, resolve, step_cap, record=False)
    return len(state.infected)


def direct_source_size(kind: str, params: dict, step_cap: int, master_seed: int, replica: int) -> int:
    """Infected-set size of the source model simulated on its own lattice.

    The exploration order and step cap are those of the coupling; each
    frontier item is open with the coupling's event probability.
    """
    if kind == "triangular":
        view = LatticeView(tuple(params["p"]), master_seed, replica)
        return _direct_bond(_Triangular, (0, 0), view, step_cap)
    if kind == "edge-split":
        d, p = params["d"], params["p"]
        view = LatticeView(event_A_probability(d, p), master_seed, replica)
        return _direct_bond(_Cubic(d, True), (0,) * d, view, step_cap)
    if kind == "vertex-split":
        d, p = params["d"], params["p"]
        view = LatticeView(event_An_probability(d, p), master_seed, replica)
        return _direct_site(_Cubic(d, False), [(0,) * d, _shift((0,) * d, 0, 1)], view, step_cap)
    if kind == "fold":
        d, k, p = params["d"], params["k"], params["p"]
        view = LatticeView(event_B_probability(d, k, p), master_seed, replica)
        return _direct_site(_Cubic(k, params.get("oriented", False)), [(0,) * k], view, step_cap)
    raise ValueError(f"unknown coupling kind {kind!r}")


def run_coupling(kind: str, params: dict, step_cap: int, master_seed: int, replica: int = 0, **kw) -> CouplingTrace:
    """Dispatch on ``kind`` with a parameter dict (as used by the CLI)."""
    if kind == "triangular":
        p1, p2, p3 = params["p"]
        return run_triangular_coupling(p1, p2, p3, step_cap, master_seed, replica, **kw)
    if kind == "edge-split":
        return run_oriented_edge_split_coupling(params["d"], params["p"], step_cap, master_seed, replica, **kw)
    if kind == "vertex-split":
        return run_site_vertex_split_coupling(params["d"], params["p"], step_cap, master_seed, replica, **kw)
    if kind == "fold":
        return run_dimension_fold_coupling(
            params["d"], params["k"], params["p"], params.get("oriented", False),
            step_cap, master_seed, replica, **kw,
        )
    raise ValueError(f"unknown coupling kind {kind!r}")


# -- event calibration --------------------------------------------------------

EVENTS = ("A", "An", "B")


@dataclass(frozen=True)
class EventCalibration:
    event: str
    d: int
    p: float
    k: Optional[int]
    resolutions: int
    hits: int
    expected: float

    @property
    def frequency(self) -> float:
        return self.hits / self.resolutions

    @property
    def sd(self) -> float:
        """Binomial standard deviation of the frequency under the closed form."""
        return math.sqrt(self.expected * (1 - self.expected) / self.resolutions)

    @property
    def z(self) -> float:
        return (self.frequency - self.expected) / self.sd if self.sd > 0 else 0.0

    def within(self, n_sd: float = 3.0) -> bool:
        return abs(self.frequency - self.expected) <= n_sd * self.sd


def calibrate_event(
    event: str, d: int, p: float, resolutions: int, master_seed: int = 0, k: Optional[int] = None
) -> EventCalibration:
    """Empirical frequency of one event over independent resolutions.

    Resolution ``r`` uses a fresh view on stream ``(master_seed, r)``, so
    the resolutions are i.i.d. ``event`` is ``"A"`` (edge split, first
    axis), ``"An"`` (vertex split, climbing copy cycling through 1..2d-1)
    or ``"B"`` (fold into ``k`` classes, first class).
    """
    _check_unit(p, open_interval=True)
    if resolutions < 1:
        raise ValueError("resolutions must be >= 1")
    hits = 0
    if event == "A":
        q = split_edge_probability(d, p)
        probs = [p] * d + [q]
        origin = (0,) * (d + 1)
        for r in range(resolutions):
            hits += _walk_edge_split(LatticeView(probs, master_seed, r), origin, 0, K_CAP)[0] is not None
        expected = event_A_probability(d, p)
    elif event == "An":
        q = split_vertex_probability(d, p)
        anchor = ((0,) * (d + 1), 1)
        copies = 2 * d - 1
        for r in range(resolutions):
            view = LatticeView(q, master_seed, r)
            hits += _walk_vertex_split(view, anchor, (0, 1), 1 + r % copies, K_CAP)[0] is not None
        expected = event_An_probability(d, p)
    elif event == "B":
        if k is None:
            raise ValueError("event B needs the number of classes k")
        classes = DirectionMap.partition(d, k).axis_classes()
        origin = (0,) * d
        for r in range(resolutions):
            hits += _walk_fold(LatticeView(p, master_seed, r), origin, (0, 1), classes)[0] is not None
        expected = event_B_probability(d, k, p)
    else:
        raise ValueError(f"unknown event {event!r}; expected one of {EVENTS}")
    return EventCalibration(event, d, p, k, resolutions, hits, expected)


# -- domination checks --------------------------------------------------------

DEFAULT_SIZE_GRID = (2, 5, 10, 25, 50)


@dataclass(frozen=True)
class TailComparison:
    m: int
    coupled: float
    direct: float
    p_value: float
    rejected: bool


@dataclass(frozen=True)
class DominationReport:
    kind: str
    params: dict
    replicas: int
    step_cap: int
    master_seed: int
    pathwise_violations: int
    tails: tuple
    alpha: float

    @property
    def passed(self) -> bool:
        return self.pathwise_violations == 0 and not any(t.rejected for t in self.tails)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params,
            "replicas": self.replicas,
            "step_cap": self.step_cap,
            "seed": self.master_seed,
            "alpha": self.alpha,
            "pathwise_violations": self.pathwise_violations,
            "tails": [t.__dict__ for t in self.tails],
            "passed": self.passed,
        }


def _two_sample_p_value(hits_a: int, hits_b: int, n: int) -> float:
    if hits_a == hits_b:
        return 1.0
    if {hits_a, hits_b} <= {0, n}:
        return 0.0
    from statsmodels.stats.proportion import proportions_ztest

    return float(proportions_ztest([hits_a, hits_b], [n, n])[1])


def validate_domination(
    kind: str,
    params: dict,
    replicas: int,
    size_grid: Sequence[int] = DEFAULT_SIZE_GRID,
    master_seed: int = 0,
    step_cap: int = 10**3,
    alpha: float = 1e-3,
) -> DominationReport:
    """Pathwise and distributional checks of one coupling.

    Replicas ``0..R-1`` run the coupling with all pathwise checks; replicas
    ``R..2R-1`` of the same seed run the source model directly. For each
    m the tails P(|I| >= m) are compared by a two-sample proportion test at
    the Bonferroni level ``alpha / len(size_grid)``.
    """
    from ._kernels import run_batch

    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    coupled = run_batch(kind, params, step_cap, master_seed, range(replicas), check=True)
    direct = run_batch(kind, params, step_cap, master_seed, range(replicas, 2 * replicas), direct=True)
    violations = int(((coupled[:, 4] != 0) | (coupled[:, 0] > coupled[:, 3])).sum())
    level = alpha / len(size_grid)
    tails = []
    for m in size_grid:
        a = int((coupled[:, 0] >= m).sum())
        b = int((direct[:, 0] >= m).sum())
        pv = _two_sample_p_value(a, b, replicas)
        tails.append(TailComparison(m, a / replicas, b / replicas, pv, pv < level))
    return DominationReport(kind, dict(params), replicas, step_cap, master_seed, violations, tuple(tails), alpha)
