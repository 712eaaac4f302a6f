import json

import pytest

from percbounds import _kernels as K
from percbounds import couplings as C
from percbounds.lattice import DirectionMap
from percbounds.mc_engine import LatticeView

CASES = [
    ("triangular", {"p": [0.4, 0.4, 0.4]}),
    ("triangular", {"p": [0.15, 0.6, 0.35]}),
    ("edge-split", {"d": 4, "p": 0.45}),
    ("edge-split", {"d": 2, "p": 0.7}),
    ("vertex-split", {"d": 3, "p": 0.5}),
    ("vertex-split", {"d": 2, "p": 0.62}),
    ("fold", {"d": 6, "k": 2, "p": 0.2}),
    ("fold", {"d": 4, "k": 2, "p": 0.5}),
    ("fold", {"d": 4, "k": 2, "p": 0.6, "oriented": True}),
]


def test_closed_forms():
    assert C.combine_last_two_directions(0.2, 0.5) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        C.combine_last_two_directions(1.2, 0.5)
    q = C.split_edge_probability(4, 0.45)
    assert (1 - q) ** 4 == pytest.approx(0.55)
    q = C.split_vertex_probability(3, 0.5)
    assert (1 - q) ** 5 == pytest.approx(0.5)
    assert C.event_B_probability(6, 2, 0.2) == pytest.approx(1 - 0.8**3)
    # A-chain as a geometric series: p sum_k (q(1-p))^k
    d, p = 3, 0.45
    q = C.split_edge_probability(d, p)
    assert C.event_A_probability(d, p) == pytest.approx(p / (1 - q * (1 - p)))
    # A_n-chain: each level all 2d-1 copies closed with prob 1-p, then one climb copy open
    q = C.split_vertex_probability(d, p)
    assert C.event_An_probability(d, p) == pytest.approx(p / (1 - q * (1 - p)))


def _forced(states, default=False):
    view = LatticeView(1.0 if default else 0.0)
    for ident, s in states.items():
        view.force(ident, s)
    return view


def test_edge_split_event_walk():
    o = (0, 0, 0)
    assert not C.sample_event_A(_forced({}), o, 0).occurred
    out = C.sample_event_A(_forced({(o, 1, 0): True}), o, 1)
    assert out == C.EventOutcome(True, 0, None, (0, 1, 0))
    # climb one copy labelled 1, then the side bond is open
    view = _forced({(o, 2, 1): True, ((0, 0, 1), 0, 0): True})
    out = C.sample_event_A(view, o, 0)
    assert out.occurred and out.landing_k == 1 and out.landing == (1, 0, 1)
    # the copy with the wrong label does not help
    view = _forced({(o, 2, 2): True, ((0, 0, 1), 0, 0): True})
    assert not C.sample_event_A(view, o, 0).occurred


def test_vertex_split_event_walk():
    o = (0, 0, 0)
    anchor = (o, 1)
    out = C.sample_event_A(_forced({((1, 0, 0), 2): True}), anchor, (0, 1), "vertex_split", j=1)
    assert out == C.EventOutcome(True, 0, 2, ((1, 0, 0), 2))
    view = _forced({((0, 0, 1), 3): True, ((0, -1, 1), 1): True})
    out = C.sample_event_A(view, anchor, (1, -1), "vertex_split", j=3)
    assert out.occurred and out.landing_k == 1 and out.landing == ((0, -1, 1), 1)
    assert not C.sample_event_A(view, anchor, (1, -1), "vertex_split", j=2).occurred
    with pytest.raises(ValueError):
        C.sample_event_A(view, anchor, (1, -1), "vertex_split")
    with pytest.raises(ValueError):
        C.sample_event_A(view, anchor, (1, -1), "hexagon")


def test_escalation_cap():
    view = LatticeView([0.0, 0.0, 1.0])  # side bonds closed, every copy open
    with pytest.raises(C.EscalationCapError):
        C.sample_event_A(view, (0, 0, 0), 0, k_cap=50)


def test_fold_event():
    part = DirectionMap.partition(4, 2)
    o = (0, 0, 0, 0)
    view = _forced({((0, 0, 0, -1), 0): True, ((0, 0, -1, 0), 0): True})
    out = C.sample_event_B(view, o, (1, -1), part)
    assert out.occurred and out.landing_label == 2 and out.landing == (0, 0, -1, 0)
    assert not C.sample_event_B(view, o, (0, 1), part).occurred


@pytest.mark.parametrize("kind,params", CASES)
def test_reference_coupling_invariants(kind, params):
    for r in range(3):
        tr = C.run_coupling(kind, params, 200, 5, r, check_frontier=True)
        assert tr.infected_size <= tr.image_cluster_size
        images = list(tr.state.image.values())
        assert len(set(images)) == len(images)
        assert [s.n for s in tr.log] == list(range(1, tr.steps + 1))
        sizes = [s.infected_size for s in tr.log]
        assert sizes == sorted(sizes)
        for step in tr.log:
            if not step.outcome.occurred:
                continue
            w, x = (step.item[1] if tr.state.mode == "bond" else step.item), step.outcome.landing
            if kind == "triangular":
                assert C.triangular_identity(w, x)
            elif kind == "edge-split":
                assert x[: params["d"]] == w
            elif kind == "vertex-split":
                assert x[0][: params["d"]] == w
            else:
                assert C.class_sum_identity(DirectionMap.partition(params["d"], params["k"]))(w, x)
        if kind == "vertex-split":
            assert all(1 <= s.j <= 2 * params["d"] - 1 for s in tr.log)


def test_zero_probability_triangular_freezes():
    tr = C.run_triangular_coupling(0.0, 0.0, 0.0, step_cap=100)
    assert tr.frozen and not tr.capped
    assert tr.steps == 6 and tr.infected_size == 1


def test_full_probability_hits_cap():
    tr = C.run_triangular_coupling(1.0, 1.0, 1.0, step_cap=50)
    assert tr.capped and tr.steps == 50


def test_traces_are_deterministic_json_lines():
    a = C.run_site_vertex_split_coupling(3, 0.5, 100, master_seed=8).to_jsonl()
    b = C.run_site_vertex_split_coupling(3, 0.5, 100, master_seed=8).to_jsonl()
    assert a == b
    rows = [json.loads(line) for line in a.splitlines()]
    assert set(rows[0]) >= {"n", "item", "event", "landing", "infected_size"}


@pytest.mark.parametrize("bad", [
    lambda: C.run_oriented_edge_split_coupling(1, 0.5),
    lambda: C.run_oriented_edge_split_coupling(3, 1.0),
    lambda: C.run_site_vertex_split_coupling(3, 1.5),
    lambda: C.run_dimension_fold_coupling(6, 4, 0.3),
    lambda: C.run_triangular_coupling(0.2, -0.1, 0.3),
    lambda: C.run_coupling("hexagonal", {}, 10, 0),
])
def test_parameter_errors(bad):
    with pytest.raises(ValueError):
        bad()


@pytest.mark.parametrize("kind,params", CASES)
def test_kernels_match_reference(kind, params):
    rows = K.run_batch(kind, params, 250, 13, range(4))
    direct = K.run_batch(kind, params, 250, 14, range(4), direct=True)
    for r in range(4):
        tr = C.run_coupling(kind, params, 250, 13, r, record=False)
        assert tuple(rows[r]) == (tr.infected_size, tr.steps, tr.frozen, tr.image_cluster_size, 0)
        assert direct[r, 0] == C.direct_source_size(kind, params, 250, 14, r)


def test_kernel_retries_when_tables_fill():
    small = K._retry(K.bond_batch, 8, K.TRIANGULAR, 2, K.np.array([0.6, 0.6, 0.6]),
                     K.np.array([K.stream_key(1, 0)], dtype=K.np.uint64), 300, True)
    tr = C.run_triangular_coupling(0.6, 0.6, 0.6, 300, 1, 0, record=False)
    assert small[0, 0] == tr.infected_size


def test_calibration_small():
    for event, k in (("A", None), ("An", None), ("B", 2)):
        cal = C.calibrate_event(event, 4, 0.45, 3000, master_seed=6, k=k)
        assert cal.within(4.0), cal
    with pytest.raises(ValueError):
        C.calibrate_event("B", 4, 0.45, 10)
    with pytest.raises(ValueError):
        C.calibrate_event("Z", 4, 0.45, 10)


def test_validate_domination_small():
    rep = C.validate_domination("fold", {"d": 4, "k": 2, "p": 0.5}, 300, master_seed=3, step_cap=200)
    assert rep.pathwise_violations == 0
    assert rep.passed
    assert [t.m for t in rep.tails] == list(C.DEFAULT_SIZE_GRID)
    assert json.loads(json.dumps(rep.to_dict()))["passed"] is True


def test_two_sample_p_value_edges():
    assert C._two_sample_p_value(0, 0, 50) == 1.0
    assert C._two_sample_p_value(0, 50, 50) == 0.0
    assert 0 < C._two_sample_p_value(10, 20, 100) < 0.1
