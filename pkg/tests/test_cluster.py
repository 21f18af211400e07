import datetime as dt
import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_ad
from listingdedup.bench import WORKED_EXAMPLE_EDGES, WORKED_EXAMPLE_PARTITION
from listingdedup.cluster import (
    ClusterDecision,
    DuplicateGraph,
    aggregate_unit,
    check_density,
    resolve_clusters,
)


def _sets(parts):
    return sorted(sorted(p) for p in parts)


def test_worked_example():
    g = DuplicateGraph.from_edges(WORKED_EXAMPLE_EDGES, nodes=range(1, 11))
    trace = []
    parts = resolve_clusters(g, trace=trace)
    assert _sets(parts) == _sets(WORKED_EXAMPLE_PARTITION)
    assert [(e.a, e.b, e.reason) for e in trace] == [(4, 5, "density")]


def test_density_boundary():
    # 4 nodes need 5 of 6 edges
    assert ClusterDecision(frozenset(range(4)), 5).accepted
    assert not ClusterDecision(frozenset(range(4)), 4).accepted
    # 3 nodes: 3 * 6 >= 5 * 3 but 2 * 6 < 15
    assert ClusterDecision(frozenset(range(3)), 3).accepted
    assert not ClusterDecision(frozenset(range(3)), 2).accepted
    assert ClusterDecision(frozenset({1}), 0).accepted
    # a looser rule admits the path
    assert ClusterDecision(frozenset(range(3)), 2, (2, 3)).accepted


def test_path_of_three_splits_on_weakest_edge():
    g = DuplicateGraph.from_edges([("a", "b", 0.9), ("b", "c", 0.6)])
    assert _sets(resolve_clusters(g)) == [["a", "b"], ["c"]]
    assert _sets(resolve_clusters(g, density=(2, 3))) == [["a", "b", "c"]]


def test_ties_break_on_smallest_node_pair():
    g = DuplicateGraph.from_edges([("a", "b", 0.7), ("b", "c", 0.7)])
    trace = []
    resolve_clusters(g, trace=trace)
    assert (trace[0].a, trace[0].b) == ("a", "b")


def test_at_most_one_unit_per_cluster():
    # new ad x links to units U1 (0.9) and U2 (0.6): the weaker link goes
    g = DuplicateGraph.from_edges([("U1", "x", 0.9), ("U2", "x", 0.6)])
    trace = []
    parts = resolve_clusters(g, units={"U1", "U2"}, trace=trace)
    assert _sets(parts) == [["U1", "x"], ["U2"]]
    assert [(e.a, e.b, e.reason) for e in trace] == [("U2", "x", "units")]


def test_graph_rejects_bad_edges():
    g = DuplicateGraph()
    with pytest.raises(ValueError):
        g.add_edge("a", "a", 0.9)
    with pytest.raises(ValueError):
        g.add_edge("a", "b", 0.5)
    g.add_edge("a", "b", 0.7)
    with pytest.raises(ValueError):
        g.add_edge("b", "a", 0.8)


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 9))
    nodes = list(range(n))
    pairs = list(itertools.combinations(nodes, 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    ws = draw(st.lists(st.floats(0.51, 1.0), min_size=len(chosen), max_size=len(chosen)))
    n_units = draw(st.integers(0, n))
    return DuplicateGraph.from_edges([(a, b, w) for (a, b), w in zip(chosen, ws)], nodes), set(nodes[:n_units])


@given(graphs())
def test_partition_invariants(case):
    g, units = case
    parts = resolve_clusters(g, units=units)
    flat = [x for p in parts for x in p]
    assert sorted(flat) == sorted(g.nodes)
    assert check_density(parts, g) == []
    assert all(len(p & units) <= 1 for p in parts)
    # every cluster is connected through surviving graph edges
    for p in parts:
        if len(p) > 1:
            assert all(any((min(a, b), max(a, b)) in g.edges for b in p if b != a) for a in p)
    assert resolve_clusters(g, units=units) == parts


def test_aggregate_unit_rules():
    w = dt.date(2016, 1, 4)
    a = make_ad("a", created=w, rooms=3, price=200_000.0, removed_on=dt.date(2016, 2, 1))
    b = make_ad("b", created=w + dt.timedelta(7), rooms=4, price=210_000.0, lat=45.002)
    c = make_ad("c", created=w + dt.timedelta(14), rooms=4, price=210_000.0, lat=45.004)
    u = aggregate_unit([c, b, a], "U7")
    assert u.id == "U7" and u.member_ad_ids == {"a", "b", "c"}
    assert u.rooms == 4 and u.entry_date == w and u.exit_date is None
    assert u.asking_price == 210_000.0
    assert u.location.lat == pytest.approx(45.002)
    # tie on rooms: earliest-created ad wins
    assert aggregate_unit([make_ad("x", rooms=2), make_ad("y", rooms=5, created=w + dt.timedelta(1))]).rooms == 2
    gone = aggregate_unit([a, make_ad("d", removed_on=dt.date(2016, 3, 7))])
    assert gone.exit_date == dt.date(2016, 3, 7)
    with pytest.raises(ValueError):
        aggregate_unit([])


def test_spec_boundary_cases():
    assert not ClusterDecision(frozenset(range(5)), 8).accepted
    assert not ClusterDecision(frozenset(range(5)), 6).accepted
    assert ClusterDecision(frozenset(range(5)), 9).accepted
    assert _sets(resolve_clusters(DuplicateGraph.from_edges([("A", "B", 0.6)]))) == [["A", "B"]]


def test_aggregate_spec_examples():
    w = dt.date(2016, 1, 4)
    ads = [make_ad("a", maintenance=2), make_ad("b", maintenance=2, created=w + dt.timedelta(1)),
           make_ad("c", maintenance=4, created=w + dt.timedelta(2))]
    assert aggregate_unit(ads).maintenance == 2
    u = aggregate_unit([make_ad("p", lat=45.0, lon=9.0), make_ad("q", lat=45.002, lon=9.0)])
    assert (u.location.lat, u.location.lon) == (pytest.approx(45.001), pytest.approx(9.0))
    u = aggregate_unit([make_ad("p", created=dt.date(2016, 1, 4), removed_on=dt.date(2016, 2, 15)),
                        make_ad("q", created=dt.date(2016, 2, 1))])
    assert u.entry_date == dt.date(2016, 1, 4) and u.exit_date is None
