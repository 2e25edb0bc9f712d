import itertools
import json

import pytest
from hypothesis import given, settings, strategies as st

from fragsolve.colgen import (Column, SubsetRowCut, integer_rmp_bound, new_master, run_with_cuts,
                              separate_src_cuts, set_vehicle_constraint, solve_master, src_lhs)
from fragsolve.instance import (enumerate_routes_oracle, oracle_optimum, parse_instance, random_instance,
                                route_pair_mask)
from fragsolve.labelling import solve_pricing_forward


def test_vehicle_bound_small(small):
    state = solve_master(new_master(small, "vehicles"))
    assert state.feasible
    assert state.z_lb == pytest.approx(1.0)


def test_cost_bound_small(small):
    state = new_master(small, "travel_cost")
    set_vehicle_constraint(state, 1)
    solve_master(state)
    assert state.feasible
    assert state.z_lb <= 166.74 + 1e-6
    cost, routes = integer_rmp_bound(state)
    assert cost == pytest.approx(166.74)
    assert routes == [(0, 1, 4, 2, 3, 5, 6, 7)]


def test_zero_vehicles_is_infeasible(small):
    state = new_master(small, "travel_cost")
    set_vehicle_constraint(state, 0)
    solve_master(state)
    assert not state.feasible


def test_empty_instance():
    inst = parse_instance(json.dumps({"n": 0, "capacity": 10, "weights": [0, 0],
                                      "windows": [[0, 100], [0, 100]], "travel": [[0, 0], [0, 0]]}))
    state = solve_master(new_master(inst, "vehicles"))
    assert state.z_lb == 0
    assert solve_pricing_forward(inst, state.pricing_duals()) == []


def test_only_artificials_gives_no_integer_bound(small):
    state = new_master(small, "travel_cost", seed_routes=False)
    set_vehicle_constraint(state, 1)
    assert integer_rmp_bound(state) is None


def test_bad_mode(small):
    with pytest.raises(ValueError):
        new_master(small, "profit")


def _fractional_state(small, paths, lam):
    state = new_master(small, "travel_cost", seed_routes=False)
    for p in paths:
        state.add_column(p)
    state.lambdas = [lam] * len(paths)
    return state


def test_src_two_half_routes_not_violated(small):
    # routes over {1,2} and {2,3}; each has coefficient 1 on C = {1,2,3}
    state = _fractional_state(small, [(0, 1, 2, 4, 5, 7), (0, 2, 3, 5, 6, 7)], 0.5)
    assert src_lhs(state, {1, 2, 3}) == pytest.approx(1.0)
    assert separate_src_cuts(state) == []


def test_src_three_half_routes_violated(small):
    paths = [(0, 1, 2, 4, 5, 7), (0, 2, 3, 5, 6, 7), (0, 1, 3, 4, 6, 7)]
    state = _fractional_state(small, paths, 0.5)
    assert src_lhs(state, {1, 2, 3}) == pytest.approx(1.5)
    cuts = separate_src_cuts(state)
    assert [c.members for c in cuts] == [frozenset({1, 2, 3})]


def test_src_integral_solution_not_violated(small):
    state = _fractional_state(small, [(0, 1, 4, 2, 3, 5, 6, 7)], 1.0)
    assert separate_src_cuts(state) == []


def test_cut_coefficient():
    cut = SubsetRowCut(frozenset({1, 2, 3}))
    assert cut.coefficient((0, 1, 4, 7)) == 0
    assert cut.coefficient((0, 1, 2, 4, 5, 7)) == 1
    assert cut.coefficient((0, 1, 2, 3, 4, 5, 6, 7)) == 1


def exact_covers(inst, routes):
    """Every partition of the requests into oracle routes (small n only)."""
    by_mask = {}
    for r in routes:
        by_mask.setdefault(route_pair_mask(inst, r.path), []).append(r)
    full = (1 << inst.n) - 1

    def rec(mask):
        if mask == full:
            yield []
            return
        low = (~mask) & (mask + 1)
        for m, rs in by_mask.items():
            if m & low and not m & mask:
                for r in rs:
                    for rest in rec(mask | m):
                        yield [r] + rest

    yield from rec(0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 5000))
def test_master_bounds_against_oracle(pairs, seed):
    inst = random_instance(pairs, seed)
    oracle = oracle_optimum(inst)
    vstate = solve_master(new_master(inst, "vehicles"))
    assert vstate.z_lb <= oracle.vehicles + 1e-6
    state = new_master(inst, "travel_cost")
    set_vehicle_constraint(state, oracle.vehicles)
    solve_master(state)
    assert state.feasible
    before = state.z_lb
    assert before <= oracle.cost + 1e-6
    assert state.solution.dual_objective(state.lp) == pytest.approx(state.z_lb, abs=1e-6)
    run_with_cuts(state, 3)
    assert state.z_lb >= before - 1e-6
    assert state.z_lb <= oracle.cost + 1e-6
    assert state.solution.dual_objective(state.lp) == pytest.approx(state.z_lb, abs=1e-6)
    # converged: nothing prices out
    assert solve_pricing_forward(inst, state.pricing_duals(), tol=1e-6) == []


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 4), st.integers(0, 5000))
def test_src_cuts_valid_for_every_partition(pairs, seed):
    inst = random_instance(pairs, seed)
    routes = enumerate_routes_oracle(inst)
    for partition in itertools.islice(exact_covers(inst, routes), 2000):
        for triple in itertools.combinations(inst.pickups, 3):
            cut = SubsetRowCut(frozenset(triple))
            assert sum(cut.coefficient(r.path) for r in partition) <= 1


def test_column_visits_skip_depots(small):
    col = Column.from_path(small, (0, 1, 4, 7))
    assert col.visits == {1: 1, 4: 1}
    assert col.cost == pytest.approx(25.73 + 41.29 + 16.1)
