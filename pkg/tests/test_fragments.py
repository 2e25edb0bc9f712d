import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from fragsolve.fragments import (Fragment, FragmentCapExceeded, NodeH, appropriate_sequence,
                                 enumerate_fragments, feasible_start_window, fragment_end_time,
                                 fragments_to_json, make_fragment, nodes_of)
from fragsolve.instance import enumerate_routes_oracle, make_instance, random_instance

# the thirteen fragments listed for the small example, as (path, onboard at start)
EXAMPLE_FRAGMENTS = {
    ((0, 1), ()), ((1, 4, 2), (4,)), ((1, 4, 3), (4,)), ((1, 4, 7), (4,)), ((1, 2, 4, 5, 7), (4,)),
    ((1, 2, 4, 3), (4,)), ((0, 2), ()), ((2, 5, 7), (5,)), ((2, 3, 5, 6, 7), (5,)), ((0, 3), ()),
    ((3, 6, 7), (6,)), ((3, 2, 5, 6, 7), (6,)), ((3, 5, 6, 7), (5, 6)),
}
EXAMPLE_NODES = {(0, ()), (1, (4,)), (2, (5,)), (3, (6,)), (3, (5, 6)), (7, ())}


def as_pairs(frags):
    return {(f.path, tuple(sorted(f.start_onboard))) for f in frags}


def frag(inst, path, onboard):
    f = make_fragment(inst, path, onboard)
    assert f is not None
    return f


def test_small_instance_fragments(small):
    frags, nodes = enumerate_fragments(small)
    assert as_pairs(frags) == EXAMPLE_FRAGMENTS
    assert {(v.vertex, tuple(sorted(v.onboard))) for v in nodes} == EXAMPLE_NODES
    assert nodes == nodes_of(frags)


def test_single_pair_instance():
    inst = make_instance(1, 10, [0, 5, -5, 0], [(0, 100)] * 4,
                         [[0, 10, 10, 0], [10, 0, 10, 10], [10, 10, 0, 10], [0, 10, 10, 0]])
    frags, _ = enumerate_fragments(inst)
    assert as_pairs(frags) == {((0, 1), ()), ((1, 2, 3), (2,))}


def test_start_windows(small):
    assert feasible_start_window(frag(small, (3, 5, 6, 7), {5, 6})) == pytest.approx((100, 119.4), abs=0.01)
    assert feasible_start_window(frag(small, (3, 2, 5, 6, 7), {6})) == pytest.approx((100, 100.85), abs=0.01)
    # the upper end is clipped to the latest service time at 2 (the acceptance test pins 110.25)
    lo, hi = feasible_start_window(frag(small, (2, 3, 5, 6, 7), {5}))
    assert lo == pytest.approx(80) and hi <= small.windows[2][1]


def test_end_times(small):
    assert fragment_end_time(frag(small, (1, 4, 3), {4}), 50) == pytest.approx(109.51, abs=0.01)
    assert fragment_end_time(frag(small, (3, 2, 5, 6, 7), {6}), 100) == pytest.approx(188.21, abs=0.01)
    assert fragment_end_time(frag(small, (1, 4, 2), {4}), 50) == pytest.approx(101.26, abs=0.01)
    with pytest.raises(ValueError):
        fragment_end_time(frag(small, (3, 2, 5, 6, 7), {6}), 101)


def test_appropriate_sequences(small):
    seq = appropriate_sequence(small, (0, 1, 4, 2, 3, 5, 6, 7))
    assert [(f.path, tuple(sorted(f.start_onboard))) for f in seq] == [
        ((0, 1), ()), ((1, 4, 2), (4,)), ((2, 3, 5, 6, 7), (5,))]
    seq = appropriate_sequence(small, (0, 1, 2, 4, 3, 5, 6, 7))
    assert [(f.path, tuple(sorted(f.start_onboard))) for f in seq] == [
        ((0, 1), ()), ((1, 2, 4, 3), (4,)), ((3, 5, 6, 7), (5, 6))]
    with pytest.raises(ValueError):
        appropriate_sequence(small, (0, 1, 4))


def test_make_fragment_rejects_bad_paths(small):
    assert make_fragment(small, (1, 1, 4), {4}) is None
    assert make_fragment(small, (1, 5, 7), {4}) is None  # 5 not onboard
    assert make_fragment(small, (0, 1), {4}) is None


def test_cap_is_enforced(small):
    with pytest.raises(FragmentCapExceeded):
        enumerate_fragments(small, cap=3)


def test_json_dump(small):
    frags, _ = enumerate_fragments(small)
    data = json.loads(fragments_to_json(frags))
    assert len(data) == 13
    assert {(tuple(d["path"]), tuple(d["onboard"])) for d in data} == EXAMPLE_FRAGMENTS


def _iterated_end_time(inst, f: Fragment, t):
    for i, j in zip(f.path, f.path[1:]):
        t = max(t + inst.travel[i][j], inst.windows[j][0])
    return t


def _meets_windows(inst, f: Fragment, t):
    for i, j in zip(f.path, f.path[1:]):
        t = max(t + inst.travel[i][j], inst.windows[j][0])
        if t > inst.windows[j][1] + 1e-6:
            return False
    return True


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10**6))
def test_closed_form_end_time(pairs, seed):
    inst = random_instance(pairs, seed % 2000)
    rng = random.Random(seed)
    frags, _ = enumerate_fragments(inst)
    for f in frags:
        lo, hi = f.window
        for _ in range(100):
            t = rng.uniform(lo, hi)
            assert abs(f.end_time(t) - _iterated_end_time(inst, f, t)) < 1e-9
            assert _meets_windows(inst, f, t)
        if hi + 0.01 < inst.windows[f.first][1]:
            assert not _meets_windows(inst, f, hi + 0.01)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10**6))
def test_every_route_has_one_appropriate_sequence(pairs, seed):
    inst = random_instance(pairs, seed % 2000)
    frags, _ = enumerate_fragments(inst)
    known = set(as_pairs(frags))
    by_start = {}
    for f in frags:
        by_start.setdefault(f.start_node, []).append(f)
    for route in enumerate_routes_oracle(inst):
        seq = appropriate_sequence(inst, route.path)
        assert as_pairs(seq) <= known
        assert sum(f.cost for f in seq) == pytest.approx(route.cost)
        # uniqueness: count every split of the route into enumerated fragments
        assert _count_splits(route.path, 0, NodeH(0, frozenset()), by_start) == 1


def _count_splits(path, k, node, by_start):
    if k == len(path) - 1:
        return 1
    total = 0
    for f in by_start.get(node, []):
        if path[k:k + len(f.path)] == f.path:
            total += _count_splits(path, k + len(f.path) - 1, f.end_node, by_start)
    return total
