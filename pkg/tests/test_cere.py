import math

import pytest
from hypothesis import given, settings, strategies as st

from fragsolve.cere import absorb_nodes, join_fragments
from fragsolve.colgen import new_master, run_with_cuts, set_vehicle_constraint
from fragsolve.fl import DualSnapshot, FlContext
from fragsolve.fragments import NodeH, appropriate_sequence, enumerate_fragments, make_fragment, nodes_of
from fragsolve.instance import enumerate_routes_oracle, oracle_optimum, random_instance
from fragsolve.network import build_network
from fragsolve.mip import solve_mip
from fragsolve.rfn import build_rfn, ddd_solve

N356 = NodeH(3, frozenset({5, 6}))


def test_join_matches_direct_construction(small):
    a = make_fragment(small, (1, 2, 4, 3), {4})
    b = make_fragment(small, (3, 5, 6, 7), {5, 6})
    g = join_fragments(a, b)
    direct = make_fragment(small, (1, 2, 4, 3, 5, 6, 7), {4})
    assert g.path == direct.path and g.start_onboard == direct.start_onboard
    assert g.end_onboard == direct.end_onboard and g.covered == direct.covered
    for attr in ("A", "B", "earliest_start", "latest_start", "cost"):
        assert getattr(g, attr) == pytest.approx(getattr(direct, attr))


def test_join_mismatch_raises(small):
    a = make_fragment(small, (1, 4, 3), {4})
    b = make_fragment(small, (3, 5, 6, 7), {5, 6})
    with pytest.raises(ValueError):
        join_fragments(a, b)


def test_join_with_empty_window(small):
    # (1,4,3) reaches 3 at 109.51 at the earliest, but (3,2,5,6,7) must start by 100.85
    a = make_fragment(small, (1, 4, 3), {4})
    b = make_fragment(small, (3, 2, 5, 6, 7), {6})
    assert join_fragments(a, b) is None


def test_absorb_single_pair_node(small):
    frags, nodes = enumerate_fragments(small)
    out, out_nodes, plans = absorb_nodes(frags, nodes, max_increase=0, end_vertex=small.end)
    plan = next(p for p in plans if p.node == N356)
    assert plan.absorbed and plan.delta == -1
    assert len(plan.incoming) == 1 and len(plan.outgoing) == 1
    assert N356 not in out_nodes


def test_no_absorption_at_minus_infinity(small):
    frags, nodes = enumerate_fragments(small)
    out, out_nodes, plans = absorb_nodes(frags, nodes, max_increase=-math.inf)
    assert out == sorted(frags) and out_nodes == sorted(nodes) and plans == []


def test_infinite_budget_enumerates_routes(small):
    frags, nodes = enumerate_fragments(small)
    out, out_nodes, _ = absorb_nodes(frags, nodes, max_increase=math.inf, end_vertex=small.end)
    assert {f.path for f in out} == {r.path for r in enumerate_routes_oracle(small)}
    assert {v.vertex for v in out_nodes} == {0, small.end}


def _splits(path, k, node, by_start):
    if k == len(path) - 1:
        return 1
    total = 0
    for f in by_start.get(node, []):
        if path[k:k + len(f.path)] == f.path:
            total += _splits(path, k + len(f.path) - 1, f.end_node, by_start)
    return total


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 5000), st.sampled_from([0, 5, 50, math.inf]))
def test_absorption_properties(pairs, seed, budget):
    inst = random_instance(pairs, seed)
    frags, nodes = enumerate_fragments(inst)
    out, out_nodes, plans = absorb_nodes(frags, nodes, max_increase=budget, end_vertex=inst.end)
    absorbed = {p.node for p in plans if p.absorbed}
    assert out_nodes == nodes_of(out)
    for f in out:
        assert f.start_node not in absorbed and f.end_node not in absorbed
    by_start = {}
    for f in out:
        by_start.setdefault(f.start_node, []).append(f)
    routes = enumerate_routes_oracle(inst)
    for r in routes:
        # each route is still a chain of rewritten fragments, and in one way only
        assert _splits(r.path, 0, NodeH(0, frozenset()), by_start) == 1
    if budget == math.inf:
        assert {f.path for f in out} == {r.path for r in routes}
    oracle = oracle_optimum(inst)
    before = ddd_solve(inst, build_network(inst, frags, nodes), oracle.vehicles)
    after = ddd_solve(inst, build_network(inst, out, out_nodes), oracle.vehicles)
    assert after.cost == pytest.approx(before.cost) == pytest.approx(oracle.cost)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 4), st.integers(0, 5000))
def test_absorption_tightens_the_relaxation(pairs, seed):
    inst = random_instance(pairs, seed)
    vehicles = oracle_optimum(inst).vehicles
    frags, nodes = enumerate_fragments(inst)
    out, out_nodes, _ = absorb_nodes(frags, nodes, max_increase=5, end_vertex=inst.end)
    first = solve_mip(build_rfn(build_network(inst, frags, nodes), vehicles).mip)
    second = solve_mip(build_rfn(build_network(inst, out, out_nodes), vehicles).mip)
    assert second.objective >= first.objective - 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 4), st.integers(0, 5000))
def test_absorption_under_fixing_keeps_surviving_routes(pairs, seed):
    inst = random_instance(pairs, seed)
    oracle = oracle_optimum(inst)
    state = new_master(inst, "travel_cost")
    set_vehicle_constraint(state, oracle.vehicles)
    run_with_cuts(state, 2)
    # a deliberately small gap so that fixing bites
    snap = DualSnapshot(inst, state.pricing_duals(), state.z_lb, state.z_lb + 10)
    fl = FlContext([snap])
    frags, _ = enumerate_fragments(inst)
    kept = fl.filter_fragments(frags)
    out, _, _ = absorb_nodes(kept, nodes_of(kept), fl, max_increase=20, end_vertex=inst.end)
    by_start = {}
    for f in out:
        by_start.setdefault(f.start_node, []).append(f)
    for r in enumerate_routes_oracle(inst):
        rc = snap.duals.path_reduced_cost(inst, r.path)
        if set(appropriate_sequence(inst, r.path)) <= set(kept) and rc <= snap.gap - 1e-6:
            assert _splits(r.path, 0, NodeH(0, frozenset()), by_start) == 1
