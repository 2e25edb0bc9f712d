"""Resource expanded network over time.

Resourced nodes are timed copies of fragment nodes.  Every fragment departs
each copy whose time lies in its start window, and arrives at the latest copy
of its end node that is not later than its true end time.  Holdover arcs join
consecutive copies of a node and are left implicit.
"""
from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field
from typing import Optional

from .fragments import Fragment, NodeH, appropriate_sequence, nodes_of
from .instance import EPS, Instance

TIME_TOL = 1e-9

# ids are unique across networks so bounds can be memoised per resourced fragment
_NODE_IDS = itertools.count()
_FRAGMENT_IDS = itertools.count()


class NetworkError(ValueError):
    pass


@dataclass(eq=False)
class ResourcedNode:
    node: NodeH
    time: float
    uid: int = 0

    def __repr__(self):
        return f"({self.node!r},{self.time:g})"


@dataclass(eq=False)
class ResourcedFragment:
    fragment: Fragment
    start_time: float
    true_end_time: float
    departure: ResourcedNode
    arrival: ResourcedNode
    uid: int = 0

    @property
    def cost(self) -> float:
        return self.fragment.cost

    @property
    def key(self):
        return (self.fragment.key, self.start_time)

    def __repr__(self):
        return f"({self.fragment!r},{self.start_time:g})"


@dataclass
class ChangeReport:
    node: Optional[ResourcedNode] = None
    added: list = field(default_factory=list)
    rewired: list = field(default_factory=list)  # (resourced fragment, old arrival, new arrival)

    def __bool__(self):
        return self.node is not None


class Network:
    def __init__(self, inst: Instance, fragments):
        self.inst = inst
        self.fragments = sorted(fragments)
        self.frag_index = {f: k for k, f in enumerate(self.fragments)}
        self.nodes = {}  # NodeH -> time-sorted list of ResourcedNode
        self.by_start = {}  # NodeH -> fragments leaving it
        for f in self.fragments:
            self.by_start.setdefault(f.start_node, []).append(f)
        self.departures = {}  # ResourcedNode -> list of ResourcedFragment
        self.arrivals = {}  # ResourcedNode -> list of ResourcedFragment
        self.start = NodeH(0, frozenset())
        self.end = NodeH(inst.end, frozenset())

    # -- queries
    def copies(self, node: NodeH) -> list:
        return self.nodes.get(node, [])

    def resourced_nodes(self) -> list:
        out = []
        for node in sorted(self.nodes):
            out.extend(self.nodes[node])
        return out

    def resourced_fragments(self) -> list:
        out = []
        for v in self.resourced_nodes():
            out.extend(self.departures.get(v, []))
        out.sort(key=lambda rf: (self.frag_index[rf.fragment], rf.start_time))
        return out

    @property
    def source(self) -> ResourcedNode:
        return self.nodes[self.start][0]

    @property
    def sink(self) -> ResourcedNode:
        return self.nodes[self.end][0]

    def copy_at(self, node: NodeH, time: float) -> Optional[ResourcedNode]:
        for v in self.copies(node):
            if abs(v.time - time) <= TIME_TOL:
                return v
        return None

    def latest_copy_le(self, node: NodeH, time: float) -> Optional[ResourcedNode]:
        lst = self.copies(node)
        k = bisect.bisect_right([v.time for v in lst], time + TIME_TOL)
        return lst[k - 1] if k else None

    def next_copy(self, v: ResourcedNode) -> Optional[ResourcedNode]:
        lst = self.nodes[v.node]
        k = lst.index(v)
        return lst[k + 1] if k + 1 < len(lst) else None

    def holdovers(self) -> list:
        out = []
        for node in sorted(self.nodes):
            lst = self.nodes[node]
            out.extend(zip(lst, lst[1:]))
        return out

    def departing(self, v: ResourcedNode, fragment: Fragment) -> Optional[ResourcedFragment]:
        for rf in self.departures.get(v, []):
            if rf.fragment == fragment:
                return rf
        return None

    def stats(self) -> dict:
        return {"resourced_nodes": sum(len(l) for l in self.nodes.values()),
                "resourced_fragments": sum(len(l) for l in self.departures.values())}

    # -- construction
    def _window(self, node: NodeH) -> tuple:
        return self.inst.windows[node.vertex]

    def _new_copy(self, node: NodeH, time: float) -> ResourcedNode:
        v = ResourcedNode(node, time, next(_NODE_IDS))
        lst = self.nodes.setdefault(node, [])
        bisect.insort(lst, v, key=lambda c: c.time)
        self.departures[v] = []
        self.arrivals[v] = []
        return v

    def _add_departures(self, v: ResourcedNode) -> list:
        added = []
        for f in self.by_start.get(v.node, []):
            if f.earliest_start - TIME_TOL <= v.time <= f.latest_start + TIME_TOL:
                tau = f.end_time(v.time)
                arr = self.latest_copy_le(f.end_node, tau)
                if arr is None:
                    raise NetworkError(f"no copy of {f.end_node!r} at or before {tau}")
                rf = ResourcedFragment(f, v.time, tau, v, arr, next(_FRAGMENT_IDS))
                self.departures[v].append(rf)
                self.arrivals[arr].append(rf)
                added.append(rf)
        return added

    def insert_resourced_node(self, node: NodeH, time: float) -> ChangeReport:
        """Add a copy of ``node`` at ``time``, creating departures and re-aiming
        arrivals that now violate the longest arc property."""
        if node not in self.nodes:
            raise NetworkError(f"unknown node {node!r}")
        if node == self.start or node == self.end:
            raise NetworkError("depot nodes have a single copy")
        a, b = self._window(node)
        if time < a - EPS or time > b + EPS:
            raise NetworkError(f"time {time} outside window [{a}, {b}] of {node!r}")
        if self.copy_at(node, time) is not None:
            return ChangeReport()
        prev = self.latest_copy_le(node, time)
        v = self._new_copy(node, time)
        report = ChangeReport(v)
        if prev is not None:
            keep = []
            for rf in self.arrivals[prev]:
                if rf.true_end_time >= time - TIME_TOL:
                    rf.arrival = v
                    self.arrivals[v].append(rf)
                    report.rewired.append((rf, prev, v))
                else:
                    keep.append(rf)
            self.arrivals[prev] = keep
        report.added = self._add_departures(v)
        return report


def build_network(inst: Instance, fragments, nodes=None, extra_times=None,
                  grid_delta: Optional[float] = None) -> Network:
    """Network with an earliest copy per node plus ``extra_times`` (node -> times)
    or, with ``grid_delta``, copies every ``grid_delta`` within each window."""
    net = Network(inst, fragments)
    nodes = sorted(set(nodes) if nodes is not None else set(nodes_of(net.fragments)))
    nodes_set = set(nodes)
    for f in net.fragments:
        if f.start_node not in nodes_set or f.end_node not in nodes_set:
            raise NetworkError(f"fragment {f!r} touches a node outside the node set")
    times = {}
    for node in nodes:
        a, b = inst.windows[node.vertex]
        ts = {a}
        if node not in (net.start, net.end):
            if grid_delta:
                k = 1
                while a + k * grid_delta <= b + EPS:
                    ts.add(min(a + k * grid_delta, b))
                    k += 1
            for t in (extra_times or {}).get(node, ()):
                if t < a - EPS or t > b + EPS:
                    raise NetworkError(f"extra time {t} outside window [{a}, {b}] of {node!r}")
                ts.add(t)
        times[node] = sorted(ts)
    for node in nodes:
        last = None
        for t in times[node]:
            if last is None or t - last > TIME_TOL:
                net._new_copy(node, t)
                last = t
    for v in net.resourced_nodes():
        net._add_departures(v)
    return net


def check_properties(net: Network) -> list:
    """Violations of the five network properties; empty when valid."""
    out = []
    inst = net.inst
    for node in sorted(net.nodes):
        lst = net.nodes[node]
        a, b = inst.windows[node.vertex]
        if not lst or all(abs(v.time - a) > TIME_TOL for v in lst):
            out.append(f"coverage: no earliest copy of {node!r}")
        for v in lst:
            if v.time < a - EPS or v.time > b + EPS:
                out.append(f"copy {v!r} outside its window")
        for u, w in zip(lst, lst[1:]):
            if w.time <= u.time + TIME_TOL:
                out.append(f"ordering: copies of {node!r} not strictly increasing")
    for node, frags in net.by_start.items():
        if node not in net.nodes:
            out.append(f"coverage: node {node!r} missing")
    for v in net.resourced_nodes():
        have = {}
        for rf in net.departures.get(v, []):
            have.setdefault(rf.fragment, []).append(rf)
            f = rf.fragment
            if rf.start_time != v.time or rf.departure is not v:
                out.append(f"{rf!r} departure mismatch")
            if not (f.earliest_start - TIME_TOL <= v.time <= f.latest_start + TIME_TOL):
                out.append(f"{rf!r} departs outside its start window")
            if rf.arrival.node != f.end_node:
                out.append(f"early arrival: {rf!r} arrives at wrong node {rf.arrival!r}")
                continue
            if rf.arrival.time > rf.true_end_time + TIME_TOL:
                out.append(f"early arrival: {rf!r} arrives after its true end time")
            later = [u for u in net.copies(f.end_node) if u.time > rf.arrival.time + TIME_TOL]
            if any(u.time <= rf.true_end_time + TIME_TOL for u in later):
                out.append(f"longest arc: {rf!r} does not arrive at the latest eligible copy")
            if rf not in net.arrivals.get(rf.arrival, []):
                out.append(f"{rf!r} missing from arrival index")
        for f in net.by_start.get(v.node, []):
            if f.earliest_start - TIME_TOL <= v.time <= f.latest_start + TIME_TOL:
                n = len(have.get(f, []))
                if n != 1:
                    out.append(f"unique departure: {n} copies of {f!r} depart {v!r}")
    return out


def find_representation(net: Network, path, canonical: bool = True) -> Optional[list]:
    """Walk a route's appropriate sequence through the network.

    The canonical chain departs each fragment from the latest copy not later
    than the route's actual (earliest-schedule) time there, holding over as
    needed; otherwise each fragment departs the copy its predecessor reached.
    """
    try:
        seq = appropriate_sequence(net.inst, path)
    except ValueError:
        return None
    v = net.source
    actual = net.inst.windows[0][0]
    chain = []
    for f in seq:
        if canonical:
            if not f.earliest_start - EPS <= actual <= f.latest_start + EPS:
                return None
            u = net.latest_copy_le(f.start_node, actual)
            if u is None or u.time < v.time - TIME_TOL:
                return None
            v = u
            actual = f.end_time(max(actual, f.earliest_start))
        rf = net.departing(v, f)
        if rf is None:
            return None
        chain.append(rf)
        v = rf.arrival
    return chain if v is net.sink else None


def constructible_chains(net: Network, fragments) -> list:
    """Every chain of resourced copies of ``fragments`` (in order), allowing
    holdovers between consecutive resourced fragments."""
    fragments = list(fragments)
    if not fragments:
        return []
    partial = [[rf] for v in net.copies(fragments[0].start_node)
               for rf in net.departures.get(v, []) if rf.fragment == fragments[0]]
    for f in fragments[1:]:
        nxt = []
        for chain in partial:
            arr = chain[-1].arrival
            if arr.node != f.start_node:
                continue
            for v in net.copies(f.start_node):
                if v.time < arr.time - TIME_TOL:
                    continue
                rf = net.departing(v, f)
                if rf is not None:
                    nxt.append(chain + [rf])
        partial = nxt
    return partial


def to_dot(net: Network) -> str:
    lines = ["digraph ren {", "  rankdir=LR;"]
    for v in net.resourced_nodes():
        lines.append(f'  v{v.uid} [label="{v.node!r}\\n{v.time:g}"];')
    for u, w in net.holdovers():
        lines.append(f"  v{u.uid} -> v{w.uid} [style=dashed];")
    for rf in net.resourced_fragments():
        path = ",".join(map(str, rf.fragment.path))
        lines.append(f'  v{rf.departure.uid} -> v{rf.arrival.uid} [label="{path}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
