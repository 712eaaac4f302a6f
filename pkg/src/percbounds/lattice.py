"""Coordinates, neighborhoods and direction maps for the lattices in play.

Four graphs are handled, none of them ever materialized:

* the hypercubic lattice Z^d, non-oriented (2d neighbors) or oriented
  (the d forward neighbors v + e_i);
* the triangular lattice T = Z^2 plus the diagonals <v, v + (1, 1)>;
* the edge-split multigraph Z^{d+1}_E, where every edge parallel to the
  last axis is replaced by d labelled parallel copies;
* the vertex-split graph Z^{d+1}_V, where every vertex is replaced by
  2d - 1 copies and copies of neighboring vertices are all adjacent.

Identifiers are plain tuples so they hash cheaply and can be used directly
as cache keys:

* a bond is ``(base, axis, label)``: the edge <base, base + dir(axis)> with
  ``dir(axis)`` a *positive* direction, ``label`` 0 for ordinary edges and
  1..d for the parallel copies of a split edge;
* a site is ``(point, index)``: ``index`` 0 for an ordinary vertex and
  1..2d-1 for a split copy.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

Vertex = tuple[int, ...]

TRIANGULAR_DIRECTIONS: tuple[Vertex, ...] = ((1, 0), (0, 1), (1, 1))

FAMILIES = ("bond", "oriented-bond", "site", "oriented-site")


class Kind(str, enum.Enum):
    BOND = "bond"
    SITE = "site"


@dataclass(frozen=True)
class ModelSpec:
    """Which of the four percolation families a computation targets."""

    d: int
    kind: Kind = Kind.BOND
    oriented: bool = False

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "kind", Kind(self.kind))

    @classmethod
    def from_family(cls, family: str, d: int) -> "ModelSpec":
        if family not in FAMILIES:
            raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
        oriented = family.startswith("oriented-")
        kind = Kind(family.removeprefix("oriented-"))
        return cls(d, kind, oriented)

    @property
    def family(self) -> str:
        return ("oriented-" if self.oriented else "") + self.kind.value

    def with_dimension(self, d: int) -> "ModelSpec":
        return ModelSpec(d, self.kind, self.oriented)


class EdgeId(NamedTuple):
    """Bond <base, base + dir(axis)>; ``label`` > 0 marks a split copy."""

    base: Vertex
    axis: int
    label: int = 0


class SplitEdgeId(NamedTuple):
    """One of the d parallel copies of <base, base + u_{d+1}> in Z^{d+1}_E."""

    base: Vertex
    label: int

    def as_edge(self) -> EdgeId:
        return EdgeId(self.base, len(self.base) - 1, self.label)


class SplitVertexId(NamedTuple):
    """Copy ``index`` (1..2d-1) of ``base`` in Z^{d+1}_V."""

    base: Vertex
    index: int


def unit(d: int, axis: int, sign: int = 1) -> Vertex:
    return tuple(sign if i == axis else 0 for i in range(d))


def add(v: Sequence[int], w: Sequence[int]) -> Vertex:
    return tuple(a + b for a, b in zip(v, w))


def sub(v: Sequence[int], w: Sequence[int]) -> Vertex:
    return tuple(a - b for a, b in zip(v, w))


def neg(v: Sequence[int]) -> Vertex:
    return tuple(-a for a in v)


def l1(v: Sequence[int]) -> int:
    return sum(abs(a) for a in v)


def _check_dim(v: Sequence[int], d: int) -> None:
    if len(v) != d:
        raise ValueError(f"vertex {tuple(v)} has length {len(v)}, expected {d}")


def signed_directions(d: int, oriented: bool = False) -> list[tuple[int, int]]:
    """``(axis, sign)`` pairs in canonical order: by axis, + before -."""
    if oriented:
        return [(i, 1) for i in range(d)]
    return [(i, s) for i in range(d) for s in (1, -1)]


def neighbors(model: ModelSpec, v: Sequence[int]) -> list[Vertex]:
    """Neighbors of ``v`` in Z^d, in canonical order.

    Non-oriented models give the 2d vertices ``v ± e_i``; oriented models
    give only the forward neighbors ``v + e_i``.
    """
    _check_dim(v, model.d)
    out = []
    for axis, sign in signed_directions(model.d, model.oriented):
        w = list(v)
        w[axis] += sign
        out.append(tuple(w))
    return out


def triangular_neighbors(v: Sequence[int]) -> list[Vertex]:
    """The six neighbors ``v ± (1,0), v ± (0,1), v ± (1,1)`` in T."""
    _check_dim(v, 2)
    a, b = v
    out = []
    for da, db in TRIANGULAR_DIRECTIONS:
        out.append((a + da, b + db))
        out.append((a - da, b - db))
    return out


def bond_between(v: Sequence[int], axis: int, sign: int, label: int = 0) -> EdgeId:
    """Canonical id of the bond from ``v`` along ``sign * e_axis``."""
    v = tuple(v)
    if sign > 0:
        return EdgeId(v, axis, label)
    w = list(v)
    w[axis] -= 1
    return EdgeId(tuple(w), axis, label)


def triangular_bond(v: Sequence[int], axis: int, sign: int) -> EdgeId:
    """Canonical id of the T bond from ``v`` along ``sign * TRIANGULAR_DIRECTIONS[axis]``."""
    v = tuple(v)
    if sign > 0:
        return EdgeId(v, axis, 0)
    da, db = TRIANGULAR_DIRECTIONS[axis]
    return EdgeId((v[0] - da, v[1] - db), axis, 0)


def canonical_order_key(item) -> tuple:
    """Deterministic total-order key for bonds, sites and plain vertices.

    The key is ``(L1 norm of base, base coordinates, direction index,
    label or copy index)``. Plain vertices use direction index -1 so that
    they sort consistently with nothing else in a mixed collection.
    """
    if isinstance(item, SplitEdgeId):
        item = item.as_edge()
    if isinstance(item, SplitVertexId):
        return (l1(item.base), tuple(item.base), -1, item.index)
    if len(item) == 3 and isinstance(item[0], tuple):
        base, axis, label = item
        return (l1(base), tuple(base), axis, label)
    if len(item) == 2 and isinstance(item[0], tuple):
        base, index = item
        return (l1(base), tuple(base), -1, index)
    return (l1(item), tuple(item), -1, 0)


class MapKind(str, enum.Enum):
    TAU = "tau"
    SIGMA = "sigma"
    PARTITION = "partition"


@dataclass(frozen=True)
class DirectionMap:
    """How directions of a source lattice are sent to a target lattice.

    ``assignment`` maps a signed source direction to a signed target
    direction (``tau``, ``sigma``) or, for ``partition``, a signed target
    direction ``±u_j`` to the tuple of signed source directions ``D_{±u_j}``.
    """

    kind: MapKind
    source_dim: int
    target_dim: int
    assignment: dict = field(hash=False, compare=True)

    @classmethod
    def tau(cls) -> "DirectionMap":
        """T -> Z^3: ±(1,0) -> ±e_1, ±(0,1) -> ±e_2, ±(1,1) -> ±e_3."""
        assignment = {}
        for axis, u in enumerate(TRIANGULAR_DIRECTIONS):
            assignment[u] = unit(3, axis)
            assignment[neg(u)] = unit(3, axis, -1)
        return cls(MapKind.TAU, 2, 3, assignment)

    @classmethod
    def sigma(cls, d: int) -> "DirectionMap":
        """Z^d -> Z^{d+1}: ±e_i -> ±u_i."""
        assignment = {}
        for i in range(d):
            assignment[unit(d, i)] = unit(d + 1, i)
            assignment[unit(d, i, -1)] = unit(d + 1, i, -1)
        return cls(MapKind.SIGMA, d, d + 1, assignment)

    @classmethod
    def partition(cls, d: int, k: int) -> "DirectionMap":
        """Uniform partition of e_1..e_d into k consecutive classes of size d/k."""
        if k < 1 or d % k:
            raise ValueError(f"k={k} does not divide d={d}")
        size = d // k
        assignment = {}
        for j in range(k):
            members = tuple(unit(d, i) for i in range(j * size, (j + 1) * size))
            assignment[unit(k, j)] = members
            assignment[unit(k, j, -1)] = tuple(neg(e) for e in members)
        return cls(MapKind.PARTITION, k, d, assignment)

    def __call__(self, u: Sequence[int]):
        return self.assignment[tuple(u)]

    def classes(self) -> list[tuple[Vertex, ...]]:
        """Positive partition classes D_{u_1}, ..., D_{u_k}."""
        if self.kind is not MapKind.PARTITION:
            raise TypeError("classes() is only defined for partition maps")
        return [self.assignment[unit(self.source_dim, j)] for j in range(self.source_dim)]

    def axis_classes(self) -> list[tuple[int, ...]]:
        """Partition classes as tuples of target axis indices."""
        return [tuple(e.index(1) for e in cls_) for cls_ in self.classes()]


def split_edge_copies(base: Sequence[int], d: int) -> list[SplitEdgeId]:
    """The d labelled copies of <base, base + u_{d+1}> in Z^{d+1}_E."""
    _check_dim(base, d + 1)
    return [SplitEdgeId(tuple(base), label) for label in range(1, d + 1)]


def split_vertex_copies(base: Sequence[int], d: int) -> list[SplitVertexId]:
    """The 2d - 1 copies of ``base`` in Z^{d+1}_V."""
    _check_dim(base, d + 1)
    return [SplitVertexId(tuple(base), i) for i in range(1, 2 * d)]


def box_vertices(d: int, radius: int, oriented: bool = False) -> list[Vertex]:
    """Vertices of the box [-L, L]^d, or [0, L]^d for oriented models."""
    lo = 0 if oriented else -radius
    return [tuple(c) for c in itertools.product(range(lo, radius + 1), repeat=d)]
