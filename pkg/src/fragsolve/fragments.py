"""PDPTW fragments: enumeration, closed-form time REFs, start windows and nodes.

A fragment is either a start arc ``(0, p)`` or a sub-path that starts at a
pickup, has exactly one pickup -> delivery edge, and ends at a pickup or the
end depot.  ``start_onboard`` is the set of open deliveries after servicing
the first vertex.  The time REF over the whole path is ``max(t + A, B)``.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from typing import Optional

from .instance import EPS, Instance, simulate_route


class FragmentCapExceeded(RuntimeError):
    pass


def _mask(vertices) -> int:
    return sum(1 << v for v in vertices)


@dataclass(frozen=True)
class NodeH:
    """A depot or pickup together with the deliveries onboard after servicing it."""

    vertex: int
    onboard: frozenset

    @property
    def key(self):
        return (self.vertex, _mask(self.onboard))

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return f"({self.vertex},{{{','.join(map(str, sorted(self.onboard)))}}})"


@dataclass(frozen=True)
class Fragment:
    path: tuple
    start_onboard: frozenset
    A: float
    B: float
    earliest_start: float
    latest_start: float
    cost: float
    end_onboard: frozenset
    covered: frozenset

    @property
    def first(self) -> int:
        return self.path[0]

    @property
    def last(self) -> int:
        return self.path[-1]

    @property
    def start_node(self) -> NodeH:
        return NodeH(self.path[0], self.start_onboard)

    @property
    def end_node(self) -> NodeH:
        return NodeH(self.path[-1], self.end_onboard)

    @property
    def key(self):
        return (self.path, _mask(self.start_onboard))

    @property
    def window(self) -> tuple:
        return (self.earliest_start, self.latest_start)

    def end_time(self, t: float) -> float:
        return max(t + self.A, self.B)

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return f"({self.path},{{{','.join(map(str, sorted(self.start_onboard)))}}})"


def _onboard_after(inst: Instance, onboard: frozenset, v: int) -> Optional[frozenset]:
    """Open deliveries after servicing ``v``; None if servicing v is illegal."""
    if v == 0:
        return frozenset()
    if v == inst.end:
        return frozenset() if not onboard else None
    if inst.is_pickup(v):
        d = v + inst.n
        return None if d in onboard else onboard | {d}
    return onboard - {v} if v in onboard else None


def make_fragment(inst: Instance, path, start_onboard) -> Optional[Fragment]:
    """Build a fragment from an arbitrary elementary path, or None if no start
    time makes it feasible.  Rule conformance is not checked here."""
    path = tuple(path)
    start_onboard = frozenset(start_onboard)
    if len(path) < 2 or len(set(path)) != len(path):
        return None
    t, w = inst.travel, inst.windows
    first = path[0]
    if first == 0 and start_onboard:
        return None
    if first != 0 and first != inst.end:
        if inst.is_pickup(first) and first + inst.n not in start_onboard:
            return None
        if inst.is_delivery(first) and first in start_onboard:
            return None
    load = -sum(inst.weights[d] for d in start_onboard)
    if load > inst.capacity + EPS:
        return None
    onboard = start_onboard
    A, B = 0.0, w[first][0]
    cost = 0.0
    for i, j in zip(path, path[1:]):
        if j == 0:
            return None
        onboard = _onboard_after(inst, onboard, j)
        if onboard is None:
            return None
        load += inst.weights[j]
        if load > inst.capacity + EPS:
            return None
        A += t[i][j]
        B = max(B + t[i][j], w[j][0])
        if B > w[j][1] + EPS:
            return None
        cost += t[i][j]
    latest = w[path[-1]][1]
    for i, j in zip(reversed(path[:-1]), reversed(path[1:])):
        latest = min(latest - t[i][j], w[i][1])
    earliest = w[first][0]
    if latest < earliest - EPS:
        return None
    covered = frozenset(v for v in path[:-1] if v != 0)
    return Fragment(path, start_onboard, A, B, earliest, latest, cost, onboard, covered)


def feasible_start_window(f: Fragment) -> tuple:
    return f.window


def fragment_end_time(f: Fragment, t_start: float) -> float:
    lo, hi = f.window
    if t_start < lo - EPS or t_start > hi + EPS:
        raise ValueError(f"start time {t_start} outside window [{lo}, {hi}] of {f}")
    return f.end_time(t_start)


def _fragments_from(inst: Instance, node: NodeH, budget: list) -> list:
    """All rule-conforming fragments leaving ``node`` that are feasible from its
    earliest start, ignoring reachability."""
    n, end = inst.n, inst.end
    t, w = inst.travel, inst.windows
    out = []
    v0 = node.vertex
    if v0 == 0:
        for p in inst.pickups:
            f = make_fragment(inst, (0, p), frozenset())
            if f is not None:
                out.append(f)
        return out

    # DFS over (path, onboard, earliest time, load, in_delivery_phase)
    load0 = -sum(inst.weights[d] for d in node.onboard)
    stack = [((v0,), node.onboard, w[v0][0], load0, False)]
    while stack:
        path, onboard, time, load, delivering = stack.pop()
        budget[0] -= 1
        if budget[0] < 0:
            raise FragmentCapExceeded("fragment enumeration cap exceeded")
        last = path[-1]
        for j in range(1, end + 1):
            if j in path:
                continue
            arr = max(time + t[last][j], w[j][0])
            if arr > w[j][1] + EPS:
                continue
            if j == end:
                if delivering and not onboard:
                    f = make_fragment(inst, path + (j,), node.onboard)
                    if f is not None:
                        out.append(f)
                continue
            if j <= n:
                if j + n in onboard or load + inst.weights[j] > inst.capacity + EPS:
                    continue
                if delivering:
                    f = make_fragment(inst, path + (j,), node.onboard)
                    if f is not None:
                        out.append(f)
                else:
                    stack.append((path + (j,), onboard | {j + n}, arr, load + inst.weights[j], False))
            else:
                if j not in onboard:
                    continue
                stack.append((path + (j,), onboard - {j}, arr, load + inst.weights[j], True))
    return out


def enumerate_fragments(inst: Instance, cap: int = 10**7):
    """Fragments reachable by chaining from ``(0, {})`` at time 0.

    Returns ``(fragments, nodes)``, both sorted canonically.  A fragment is kept
    when the earliest arrival time at its start node does not exceed its latest
    start.
    """
    budget = [cap]
    root = NodeH(0, frozenset())
    earliest = {root: 0.0}
    cache: dict = {}
    heap = [(0.0, root.key, root)]
    while heap:
        time, _, node = heapq.heappop(heap)
        if time > earliest[node]:
            continue
        if node not in cache:
            cache[node] = _fragments_from(inst, node, budget)
        for f in cache[node]:
            if time > f.latest_start + EPS:
                continue
            arr = f.end_time(max(time, f.earliest_start))
            nxt = f.end_node
            if nxt.vertex == inst.end:
                earliest[nxt] = min(earliest.get(nxt, arr), arr)
                continue
            if arr < earliest.get(nxt, float("inf")) - 1e-12:
                earliest[nxt] = arr
                heapq.heappush(heap, (arr, nxt.key, nxt))
    frags = []
    for node, fs in cache.items():
        for f in fs:
            if earliest[node] <= f.latest_start + EPS:
                frags.append(f)
    frags.sort()
    nodes = set()
    for f in frags:
        nodes.add(f.start_node)
        nodes.add(f.end_node)
    return frags, sorted(nodes)


def nodes_of(fragments) -> list:
    nodes = set()
    for f in fragments:
        nodes.add(f.start_node)
        nodes.add(f.end_node)
    return sorted(nodes)


def appropriate_sequence(inst: Instance, path) -> list:
    """Split a feasible route into its unique sequence of rule-conforming fragments."""
    path = tuple(path)
    res = simulate_route(inst, path)
    if not res.feasible:
        raise ValueError(f"route {path} is infeasible: {res.reason}")
    if len(path) < 3:
        raise ValueError("an empty route has no appropriate sequence")
    n = inst.n
    cuts = [0, 1]
    k = 1
    while path[k] != inst.end:
        # pickups, then deliveries, then stop at the next pickup or end depot
        j = k
        while path[j + 1] <= n and path[j + 1] != 0:
            j += 1
        j += 1
        while path[j] != inst.end and path[j] > n:
            j += 1
        cuts.append(j)
        k = j
    out = []
    onboard = frozenset()
    for a, b in zip(cuts, cuts[1:]):
        f = make_fragment(inst, path[a:b + 1], onboard)
        if f is None:
            raise ValueError(f"sub-path {path[a:b + 1]} is not a feasible fragment")
        out.append(f)
        onboard = f.end_onboard
    return out


def fragments_to_json(fragments) -> str:
    return json.dumps([
        {"path": list(f.path), "onboard": sorted(f.start_onboard),
         "window": [f.earliest_start, f.latest_start], "A": f.A, "B": f.B, "cost": f.cost}
        for f in fragments
    ], indent=1)
