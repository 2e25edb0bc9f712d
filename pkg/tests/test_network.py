import random

import pytest
from hypothesis import given, settings, strategies as st

from fragsolve.fragments import NodeH, enumerate_fragments, make_fragment
from fragsolve.instance import enumerate_routes_oracle, random_instance
from fragsolve.network import (NetworkError, build_network, check_properties, constructible_chains,
                               find_representation, to_dot)

N25 = NodeH(2, frozenset({5}))
N36 = NodeH(3, frozenset({6}))


def minimal(small, extra=None):
    frags, nodes = enumerate_fragments(small)
    return build_network(small, frags, nodes, extra_times=extra)


def by_path(net, path, onboard):
    f = make_fragment(net.inst, path, onboard)
    return [rf for rf in net.resourced_fragments() if rf.fragment == f]


def test_minimal_network(small):
    net = minimal(small)
    assert net.stats() == {"resourced_nodes": 6, "resourced_fragments": 13}
    assert len({rf.fragment for rf in net.resourced_fragments()}) == 13
    assert check_properties(net) == []


def test_extra_copy_catches_arrival(small):
    net = minimal(small, {N25: [90]})
    (rf,) = by_path(net, (1, 4, 2), {4})
    assert rf.start_time == 50
    assert rf.true_end_time == pytest.approx(101.26, abs=0.01)
    assert rf.arrival.node == N25 and rf.arrival.time == 90
    assert check_properties(net) == []


def test_insert_rewires_to_new_copy(small):
    net = minimal(small)
    (rf,) = by_path(net, (1, 4, 3), {4})
    assert rf.arrival.time == 100
    report = net.insert_resourced_node(N36, 109.51)
    assert report
    assert [(r.fragment.path, old.time, new.time) for r, old, new in report.rewired] == [((1, 4, 3), 100, 109.51)]
    assert rf.arrival is report.node
    # (3,2,5,6,7) cannot start after 100.85, so it does not depart the new copy
    assert all(r.fragment.path != (3, 2, 5, 6, 7) for r in report.added)
    assert [r.fragment.path for r in report.added] == [(3, 6, 7)]
    assert check_properties(net) == []


def test_insert_late_time_only_adds_departures(small):
    net = minimal(small)
    report = net.insert_resourced_node(N36, 129)
    assert report.rewired == []
    assert report.added


def test_insert_duplicate_is_empty(small):
    net = minimal(small)
    assert not net.insert_resourced_node(N36, 100)
    net.insert_resourced_node(N36, 105)
    assert not net.insert_resourced_node(N36, 105)


def test_insert_rejections(small):
    net = minimal(small)
    with pytest.raises(NetworkError):
        net.insert_resourced_node(net.start, 5)
    with pytest.raises(NetworkError):
        net.insert_resourced_node(N36, 150)
    with pytest.raises(NetworkError):
        net.insert_resourced_node(NodeH(3, frozenset({4})), 110)


def test_longest_arc_fault_detected(small):
    net = minimal(small, {N36: [105]})
    (rf,) = by_path(net, (1, 4, 3), {4})
    assert rf.arrival.time == 105
    # point it back at the older copy although the 105 copy is eligible
    old = net.copy_at(N36, 100)
    net.arrivals[rf.arrival].remove(rf)
    rf.arrival = old
    net.arrivals[old].append(rf)
    assert any("longest arc" in v for v in check_properties(net))


def test_coverage_fault_detected(small):
    net = minimal(small, {N36: [105]})
    first = net.nodes[N36].pop(0)
    net.departures.pop(first)
    assert any("coverage" in v for v in check_properties(net))


def test_example_chains(small):
    net = minimal(small, {N25: [90]})
    good = find_representation(net, (0, 1, 4, 2, 3, 5, 6, 7), canonical=False)
    assert [(rf.fragment.path, rf.start_time) for rf in good] == [
        ((0, 1), 0), ((1, 4, 2), 50), ((2, 3, 5, 6, 7), 90)]
    f1 = make_fragment(small, (1, 4, 3), {4})
    f2 = make_fragment(small, (3, 2, 5, 6, 7), {6})
    chains = constructible_chains(net, [f1, f2])
    assert [(c[0].start_time, c[1].start_time) for c in chains] == [(50, 100)]
    net.insert_resourced_node(N36, 109.51)
    assert constructible_chains(net, [f1, f2]) == []


def test_grid_network(small):
    frags, nodes = enumerate_fragments(small)
    net = build_network(small, frags, nodes, grid_delta=5)
    assert check_properties(net) == []
    times = [v.time for v in net.copies(N36)]
    assert times[0] == 100 and times[-1] == 130
    assert all(b - a == pytest.approx(5) for a, b in zip(times, times[1:]))
    assert len(net.copies(net.start)) == 1 and len(net.copies(net.end)) == 1


def test_dot_output(small):
    text = to_dot(minimal(small))
    assert text.startswith("digraph") and text.count("->") == 13


def _random_network(inst, rng, extra_per_node):
    frags, nodes = enumerate_fragments(inst)
    extra = {}
    for v in nodes:
        if v.vertex in (0, inst.end):
            continue
        a, b = inst.windows[v.vertex]
        extra[v] = [round(rng.uniform(a, b), 2) for _ in range(extra_per_node)]
    return build_network(inst, frags, nodes, extra_times=extra)


def _representable(net, routes):
    return {r.path for r in routes if find_representation(net, r.path) is not None}


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10**6), st.integers(0, 3))
def test_every_route_has_a_representation(pairs, seed, extra):
    inst = random_instance(pairs, seed % 3000)
    net = _random_network(inst, random.Random(seed), extra)
    assert check_properties(net) == []
    routes = enumerate_routes_oracle(inst)
    for r in routes:
        canonical = find_representation(net, r.path)
        assert canonical is not None
        assert sum(rf.cost for rf in canonical) == pytest.approx(r.cost)
        assert find_representation(net, r.path, canonical=False) is not None


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10**6))
def test_insertions_keep_properties_and_representations(pairs, seed):
    inst = random_instance(pairs, seed % 3000)
    rng = random.Random(seed)
    net = _random_network(inst, rng, 0)
    routes = enumerate_routes_oracle(inst)
    before = _representable(net, routes)
    for _ in range(10):
        inner = [v for v in net.nodes if v not in (net.start, net.end)]
        if not inner:
            break
        v = rng.choice(sorted(inner))
        a, b = inst.windows[v.vertex]
        net.insert_resourced_node(v, round(rng.uniform(a, b), 2))
        assert check_properties(net) == []
        after = _representable(net, routes)
        assert before <= after
        before = after
