"""Monte Carlo percolation on lazily sampled infinite lattices.

The state of an edge or site is decided the first time it is asked for and
memoized, with the uniform drawn from a counter-based stream so that the
answer does not depend on query order. On top of that sit a cluster
explorer with box and step limits, a finite-box survival proxy with Wilson
intervals, a brute-force enumeration oracle for tiny boxes, and a
Newman-Ziff style union-find sweep giving crossing curves for a whole grid
of p in one pass per replica.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.stats import binomtest

from . import rng
from .lattice import Kind, ModelSpec, Vertex, box_vertices, signed_directions

DEFAULT_STEP_CAP = 10**6
MAX_ENUMERATED = 25


class LatticeView:
    """Memoized open/closed states for one replica.

    Parameters
    ----------
    params
        Either one open probability for every element, or a sequence indexed
        by the element's class. The class of a bond ``(base, axis, label)``
        is its axis; pass ``classify`` to override.
    master_seed, replica
        Select the random stream.
    """

    __slots__ = ("params", "classify", "key", "cache", "master_seed", "replica")

    def __init__(
        self,
        params: Union[float, Sequence[float]],
        master_seed: int = 0,
        replica: int = 0,
        classify: Optional[Callable] = None,
    ):
        if isinstance(params, (int, float)):
            probs = [float(params)]
        else:
            probs = [float(x) for x in params]
        for x in probs:
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"probability {x} outside [0, 1]")
        self.params = params if not isinstance(params, (int, float)) else float(params)
        self.classify = classify
        self.master_seed = master_seed
        self.replica = replica
        self.key = rng.stream_key(master_seed, replica)
        self.cache: dict = {}

    def probability(self, ident) -> float:
        if isinstance(self.params, float):
            return self.params
        cls = self.classify(ident) if self.classify else ident[1]
        return self.params[cls]

    def is_open(self, ident) -> bool:
        state = self.cache.get(ident)
        if state is None:
            state = rng.uniform(self.key, ident) < self.probability(ident)
            self.cache[ident] = state
        return state

    def peek(self, ident) -> Optional[bool]:
        """State if already sampled, else None; never samples."""
        return self.cache.get(ident)

    def force(self, ident, state: bool) -> None:
        self.cache[ident] = bool(state)

    def __len__(self) -> int:
        return len(self.cache)


@dataclass(frozen=True)
class ClusterReport:
    size: int
    truncated: bool
    boundary_hit: bool
    steps: int


@dataclass(frozen=True)
class SurvivalEstimate:
    p: float
    box_radius: int
    replicas: int
    hits: int
    estimate: float
    ci_low: float
    ci_high: float
    family: str = ""
    d: int = 0
    master_seed: int = 0
    convention: str = "start vertices open"

    def to_dict(self) -> dict:
        return asdict(self)


def wilson_interval(hits: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = binomtest(hits, n).proportion_ci(confidence_level=confidence, method="wilson")
    return max(0.0, float(ci.low)), min(1.0, float(ci.high))


def _steps_from(model: ModelSpec, v: Vertex):
    """Yield ``(w, element)`` for every move out of ``v``."""
    bond = model.kind is Kind.BOND
    for axis, sign in signed_directions(model.d, model.oriented):
        w = list(v)
        w[axis] += sign
        w = tuple(w)
        if bond:
            yield w, ((v if sign > 0 else w), axis, 0)
        else:
            yield w, (w, 0)


def _in_box(w: Vertex, radius: int, oriented: bool) -> bool:
    if oriented:
        return all(0 <= c <= radius for c in w)
    return all(-radius <= c <= radius for c in w)


def _on_boundary(w: Vertex, radius: int) -> bool:
    return max(abs(c) for c in w) == radius


def explore_cluster(
    view: LatticeView,
    model: ModelSpec,
    start: Union[Vertex, Iterable[Vertex], None] = None,
    box_radius: int = 10,
    step_cap: int = DEFAULT_STEP_CAP,
    order: str = "bfs",
    stop_at_boundary: bool = True,
) -> ClusterReport:
    """Explore the open cluster of ``start`` inside a box.

    The box is ``[-L, L]^d`` (``[0, L]^d`` for oriented models). Bonds are
    traversed when open; for site models a neighbor must be open, and the
    start vertices themselves count as open. ``order="bfs"`` is breadth
    first; ``order="outward"`` expands the vertex with largest sup-norm
    first, which reaches the boundary sooner without changing whether it is
    reached. ``steps`` counts expanded vertices; reaching ``step_cap``
    truncates.
    """
    if step_cap < 1:
        raise ValueError("step_cap must be >= 1")
    d = model.d
    if start is None:
        start = (0,) * d
    starts = [tuple(start)] if start and isinstance(next(iter(start)), int) else [tuple(s) for s in start]
    for s in starts:
        if len(s) != d or not _in_box(s, box_radius, model.oriented):
            raise ValueError(f"start {s} is outside the box of radius {box_radius}")
    if order not in ("bfs", "outward"):
        raise ValueError(f"unknown order {order!r}")

    seen = set(starts)
    boundary_hit = any(_on_boundary(s, box_radius) for s in starts)
    if boundary_hit and stop_at_boundary:
        return ClusterReport(len(seen), True, True, 0)
    if order == "bfs":
        frontier = deque(starts)
        pop, push = frontier.popleft, frontier.append
    else:
        heap = [(-max(map(abs, s)), i, s) for i, s in enumerate(starts)]
        heapq.heapify(heap)
        counter = itertools.count(len(starts))
        frontier = heap

        def pop():
            return heapq.heappop(heap)[2]

        def push(w):
            heapq.heappush(heap, (-max(map(abs, w)), next(counter), w))

    steps = 0
    truncated = False
    oriented = model.oriented
    while frontier:
        if steps >= step_cap:
            truncated = True
            break
        v = pop()
        steps += 1
        for w, element in _steps_from(model, v):
            if w in seen or not _in_box(w, box_radius, oriented):
                continue
            if not view.is_open(element):
                continue
            seen.add(w)
            push(w)
            if _on_boundary(w, box_radius):
                boundary_hit = True
                if stop_at_boundary:
                    return ClusterReport(len(seen), True, True, steps)
    return ClusterReport(len(seen), truncated or boundary_hit, boundary_hit, steps)


def survival_proxy(
    model: ModelSpec,
    p: float,
    box_radius: int,
    replicas: int,
    master_seed: int = 0,
    step_cap: int = DEFAULT_STEP_CAP,
) -> SurvivalEstimate:
    """Fraction of replicas whose origin cluster reaches the box boundary.

    Replica ``r`` uses stream ``(master_seed, r)``, so the estimate is a
    pure function of the arguments whatever order replicas run in.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if replicas < 1 or box_radius < 1:
        raise ValueError("replicas and box_radius must be >= 1")
    hits = 0
    for r in range(replicas):
        view = LatticeView(p, master_seed, r)
        report = explore_cluster(view, model, None, box_radius, step_cap, order="outward")
        hits += report.boundary_hit
    lo, hi = wilson_interval(hits, replicas)
    return SurvivalEstimate(
        p=p,
        box_radius=box_radius,
        replicas=replicas,
        hits=hits,
        estimate=hits / replicas,
        ci_low=lo,
        ci_high=hi,
        family=model.family,
        d=model.d,
        master_seed=master_seed,
    )


def _box_elements(model: ModelSpec, vertices: list[Vertex], start: Vertex):
    """Random elements of a finite box and the directed moves they allow.

    Returns ``(elements, moves)`` where ``moves`` is a list of
    ``(from_index, to_index, element_index)``; for sites the element is the
    destination vertex (``-1`` when it is the always-open start).
    """
    index = {v: i for i, v in enumerate(vertices)}
    moves = []
    elements: list = []
    element_index: dict = {}
    for v in vertices:
        for w, element in _steps_from(model, v):
            if w not in index:
                continue
            if model.kind is Kind.SITE and w == start:
                moves.append((index[v], index[w], -1))
                continue
            if element not in element_index:
                element_index[element] = len(elements)
                elements.append(element)
            moves.append((index[v], index[w], element_index[element]))
    return elements, moves


def exact_cluster_distribution(
    model: ModelSpec,
    p: float,
    box: Union[int, Iterable[Vertex]],
    start: Optional[Vertex] = None,
    chunk_bits: int = 16,
) -> dict[int, float]:
    """Exact law of the origin-cluster size restricted to a finite box.

    Every one of the 2^n configurations of the n random elements is
    enumerated (vectorized in chunks) and weighted by p^open (1-p)^closed.
    ``box`` is a radius, as in :func:`explore_cluster`, or an explicit
    vertex collection.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    d = model.d
    start = (0,) * d if start is None else tuple(start)
    if isinstance(box, int):
        vertices = box_vertices(d, box, model.oriented)
    else:
        vertices = sorted({tuple(v) for v in box})
    if start not in vertices:
        raise ValueError("start vertex is not in the box")
    elements, moves = _box_elements(model, vertices, start)
    n = len(elements)
    if n > MAX_ENUMERATED:
        raise ValueError(f"box has {n} random elements; at most {MAX_ENUMERATED} are enumerable")
    nv = len(vertices)
    s = vertices.index(start)
    total = 1 << n
    chunk = 1 << min(n, chunk_bits)
    masses = np.zeros(nv + 1)
    for lo in range(0, total, chunk):
        configs = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        open_ = [((configs >> e) & 1).astype(bool) for e in range(n)]
        n_open = np.zeros(configs.shape, dtype=np.int64)
        for o in open_:
            n_open += o
        weight = p**n_open * (1 - p) ** (n - n_open)
        reached = [np.zeros(configs.shape, dtype=bool) for _ in range(nv)]
        reached[s][:] = True
        changed = True
        while changed:
            changed = False
            for a, b, e in moves:
                gate = reached[a] if e < 0 else reached[a] & open_[e]
                new = gate & ~reached[b]
                if new.any():
                    reached[b] |= new
                    changed = True
        size = np.sum(reached, axis=0)
        masses += np.bincount(size, weights=weight, minlength=nv + 1)
    return {int(k): float(m) for k, m in enumerate(masses) if m > 0}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical_cluster_distribution(
    model: ModelSpec,
    p: Union[float, Sequence[float]],
    box_radius: int,
    replicas: int,
    master_seed: int = 0,
) -> dict[int, float]:
    """Cluster-size frequencies from full in-box explorations."""
    counts: dict[int, int] = {}
    for r in range(replicas):
        view = LatticeView(p, master_seed, r)
        rep = explore_cluster(view, model, None, box_radius, stop_at_boundary=False)
        counts[rep.size] = counts.get(rep.size, 0) + 1
    return {k: c / replicas for k, c in sorted(counts.items())}


# -- union-find sweep ------------------------------------------------------


def _find(parent: list, x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def _crossing_threshold(n_vertices: int, order, pairs, uniforms, left: int, right: int, site: bool) -> float:
    """Smallest uniform at which LEFT and RIGHT join, adding elements in order."""
    parent = list(range(n_vertices + 2))
    size = [1] * (n_vertices + 2)
    opened = [False] * n_vertices if site else None

    def union(a, b):
        ra, rb = _find(parent, a), _find(parent, b)
        if ra == rb:
            return
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]

    for idx in order:
        for a, b in pairs[idx]:
            if site:
                # pairs of an opened site: its attachments, plus neighbors
                if b < n_vertices and not opened[b]:
                    continue
            union(a, b)
        if site:
            opened[idx] = True
        if _find(parent, left) == _find(parent, right):
            return float(uniforms[idx])
    return math.inf


def union_find_sweep(
    model: ModelSpec,
    box_radius: int,
    p_grid: Sequence[float],
    replicas: int,
    master_seed: int = 0,
) -> list[SurvivalEstimate]:
    """Left-right crossing probability of ``[-L, L]^d`` for every p in a grid.

    Each replica draws one uniform per element; the open set at p is
    {u < p}. Elements are added in increasing u with a union-find, and the
    uniform at which the two faces x_1 = -L and x_1 = L first connect is the
    replica's threshold: it crosses at p iff threshold < p. Curves are
    therefore monotone in p replica by replica.
    """
    if model.oriented:
        raise ValueError("union_find_sweep supports non-oriented models only")
    grid = [float(x) for x in p_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("p_grid must be sorted ascending")
    if any(not 0 <= x <= 1 for x in grid):
        raise ValueError("p_grid values must lie in [0, 1]")
    thresholds = sweep_thresholds(model, box_radius, replicas, master_seed)
    out = []
    for x in grid:
        hits = int(np.sum(thresholds < x))
        lo, hi = wilson_interval(hits, replicas)
        out.append(
            SurvivalEstimate(
                p=x, box_radius=box_radius, replicas=replicas, hits=hits,
                estimate=hits / replicas, ci_low=lo, ci_high=hi,
                family=model.family, d=model.d, master_seed=master_seed,
                convention="left-right crossing",
            )
        )
    return out


def sweep_thresholds(model: ModelSpec, box_radius: int, replicas: int, master_seed: int = 0) -> np.ndarray:
    """Per-replica crossing thresholds used by :func:`union_find_sweep`."""
    d, L = model.d, box_radius
    vertices = box_vertices(d, L)
    index = {v: i for i, v in enumerate(vertices)}
    nv = len(vertices)
    left, right = nv, nv + 1
    site = model.kind is Kind.SITE
    if site:
        pairs = []
        for v in vertices:
            links = []
            if v[0] == -L:
                links.append((index[v], left))
            if v[0] == L:
                links.append((index[v], right))
            for axis in range(d):
                for sign in (1, -1):
                    w = list(v)
                    w[axis] += sign
                    w = tuple(w)
                    if w in index:
                        links.append((index[v], index[w]))
            pairs.append(links)
        n_elements = nv
    else:
        pairs = []
        for v in vertices:
            for axis in range(d):
                w = list(v)
                w[axis] += 1
                w = tuple(w)
                if w in index:
                    pairs.append([(index[v], index[w])])
        # the faces are joined to LEFT/RIGHT from the start
        face = [(index[v], left) for v in vertices if v[0] == -L]
        face += [(index[v], right) for v in vertices if v[0] == L]
        n_elements = len(pairs)
    out = np.empty(replicas)
    for r in range(replicas):
        gen = np.random.Generator(np.random.Philox(key=rng.stream_key(master_seed, r)))
        u = gen.random(n_elements)
        order = np.argsort(u, kind="stable")
        if site:
            out[r] = _crossing_threshold(nv, order, pairs, u, left, right, site=True)
        else:
            out[r] = _bond_threshold(nv, order, pairs, face, u, left, right)
    return out


def _bond_threshold(nv, order, pairs, face, uniforms, left, right) -> float:
    parent = list(range(nv + 2))
    for a, b in face:
        ra, rb = _find(parent, a), _find(parent, b)
        if ra != rb:
            parent[ra] = rb
    for idx in order:
        (a, b), = pairs[idx]
        ra, rb = _find(parent, a), _find(parent, b)
        if ra != rb:
            parent[ra] = rb
            if _find(parent, left) == _find(parent, right):
                return float(uniforms[idx])
    return math.inf
