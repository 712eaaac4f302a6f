import pytest
from hypothesis import given, strategies as st

from percbounds.lattice import (
    FAMILIES,
    DirectionMap,
    EdgeId,
    Kind,
    ModelSpec,
    SplitEdgeId,
    SplitVertexId,
    bond_between,
    box_vertices,
    canonical_order_key,
    neighbors,
    signed_directions,
    split_edge_copies,
    split_vertex_copies,
    triangular_bond,
    triangular_neighbors,
    unit,
)

vertices = st.lists(st.integers(-50, 50), min_size=1, max_size=6).map(tuple)


def test_family_round_trip():
    for family in FAMILIES:
        assert ModelSpec.from_family(family, 4).family == family
    m = ModelSpec.from_family("oriented-site", 3)
    assert m.kind is Kind.SITE and m.oriented


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_model_rejects_bad_dimension(bad):
    with pytest.raises(ValueError):
        ModelSpec(bad)


def test_unknown_family():
    with pytest.raises(ValueError):
        ModelSpec.from_family("hexagonal", 3)


def test_neighbors_counts_and_order():
    v = (0, 0, 0)
    nb = neighbors(ModelSpec(3), v)
    assert nb == [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    assert neighbors(ModelSpec(3, oriented=True), v) == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]


def test_neighbors_dimension_mismatch():
    with pytest.raises(ValueError):
        neighbors(ModelSpec(3), (0, 0))


@given(vertices)
def test_neighbors_are_at_distance_one(v):
    for w in neighbors(ModelSpec(len(v)), v):
        assert sum(abs(a - b) for a, b in zip(v, w)) == 1


def test_triangular_neighbors():
    assert sorted(triangular_neighbors((0, 0))) == sorted(
        [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)]
    )


@given(vertices, st.data())
def test_bond_ids_agree_from_both_ends(v, data):
    axis = data.draw(st.integers(0, len(v) - 1))
    w = tuple(c + (i == axis) for i, c in enumerate(v))
    assert bond_between(v, axis, 1) == bond_between(w, axis, -1) == EdgeId(v, axis, 0)


def test_triangular_bond_ids():
    assert triangular_bond((2, 3), 2, -1) == EdgeId((1, 2), 2, 0)
    assert triangular_bond((1, 2), 2, 1) == EdgeId((1, 2), 2, 0)


def test_signed_directions():
    assert signed_directions(2) == [(0, 1), (0, -1), (1, 1), (1, -1)]
    assert signed_directions(2, oriented=True) == [(0, 1), (1, 1)]


def test_tau_and_sigma():
    tau = DirectionMap.tau()
    assert tau((1, 1)) == (0, 0, 1)
    assert tau((0, -1)) == (0, -1, 0)
    sigma = DirectionMap.sigma(3)
    assert sigma((0, 0, -1)) == (0, 0, -1, 0)
    assert len(sigma.assignment) == 6


def test_partition_classes():
    part = DirectionMap.partition(6, 2)
    assert part.axis_classes() == [(0, 1, 2), (3, 4, 5)]
    assert part((0, -1)) == tuple(unit(6, a, -1) for a in (3, 4, 5))
    with pytest.raises(ValueError):
        DirectionMap.partition(6, 4)
    with pytest.raises(TypeError):
        DirectionMap.tau().classes()


@given(st.sampled_from([(d, k) for d in range(1, 13) for k in range(1, d + 1) if d % k == 0]))
def test_partition_is_a_partition(dk):
    d, k = dk
    classes = DirectionMap.partition(d, k).axis_classes()
    flat = [a for c in classes for a in c]
    assert sorted(flat) == list(range(d))
    assert {len(c) for c in classes} == {d // k}


def test_split_copies():
    assert split_edge_copies((0, 0, 0), 2) == [SplitEdgeId((0, 0, 0), 1), SplitEdgeId((0, 0, 0), 2)]
    assert SplitEdgeId((0, 0, 0), 2).as_edge() == EdgeId((0, 0, 0), 2, 2)
    copies = split_vertex_copies((0, 0, 0, 0), 3)
    assert [c.index for c in copies] == [1, 2, 3, 4, 5]
    with pytest.raises(ValueError):
        split_vertex_copies((0, 0), 3)


def test_canonical_order_is_total_and_deterministic():
    items = [EdgeId((1, 0), 0), EdgeId((0, 0), 1), EdgeId((0, 0), 0), EdgeId((-1, 0), 1)]
    ordered = sorted(items, key=canonical_order_key)
    assert ordered == [EdgeId((0, 0), 0), EdgeId((0, 0), 1), EdgeId((-1, 0), 1), EdgeId((1, 0), 0)]
    assert canonical_order_key(SplitVertexId((0, 1), 2)) == (1, (0, 1), -1, 2)
    assert canonical_order_key((3, -1)) == (4, (3, -1), -1, 0)


def test_box_vertices():
    assert len(box_vertices(2, 1)) == 9
    assert len(box_vertices(3, 1, oriented=True)) == 8
    assert min(box_vertices(2, 2, oriented=True)) == (0, 0)
