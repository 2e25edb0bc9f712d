"""Integer program over the resource expanded network, chain decomposition,
underestimating-chain detection and the two refinement loops (dynamic
discretization discovery, and no-good cuts over a static network)."""
from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .instance import Instance
from .mip import LinearProgram, MipModel, solve_mip
from .network import Network, ResourcedFragment, TIME_TOL

log = logging.getLogger(__name__)


class RfnError(RuntimeError):
    pass


@dataclass
class RfnModel:
    mip: MipModel
    x_cols: list  # ResourcedFragment per x column
    y_cols: list  # (copy, next copy) per holdover column
    cover_rows: dict
    flow_rows: dict
    vehicle_row: int
    branching_row: Optional[int] = None
    cut_rows: list = field(default_factory=list)

    @property
    def num_x(self) -> int:
        return len(self.x_cols)


def build_rfn(net: Network, z_ub_v: int, branching=None, keep: Optional[Callable] = None,
              nogoods=()) -> RfnModel:
    """``branching`` is a collection of resourced fragments of which at least one
    must be used; ``keep`` filters resourced fragments (variable fixing);
    ``nogoods`` are resourced-fragment sets that may not all be used."""
    inst = net.inst
    lp = LinearProgram()
    cover_rows = {v: lp.add_row("=", 1.0, name=f"cover_{v}") for v in inst.requests}
    flow_rows = {}
    for v in net.resourced_nodes():
        if v.node not in (net.start, net.end):
            flow_rows[v] = lp.add_row("=", 0.0, name=f"flow_{v.uid}")
    vehicle_row = lp.add_row("=", float(z_ub_v), name="vehicles")
    rfs = [rf for rf in net.resourced_fragments() if keep is None or keep(rf)]
    branching_row = None
    bset = None
    if branching is not None:
        bset = {rf.uid for rf in branching}
        branching_row = lp.add_row(">=", 1.0, name="branching")
    nogoods = [frozenset(rf.uid for rf in ng) for ng in nogoods]
    cut_rows = [lp.add_row("<=", len(ng) - 1.0, name=f"nogood_{k}") for k, ng in enumerate(nogoods)]
    x_cols = []
    for rf in rfs:
        ents = [(cover_rows[v], 1.0) for v in rf.fragment.covered]
        if rf.departure in flow_rows:
            ents.append((flow_rows[rf.departure], -1.0))
        if rf.arrival in flow_rows:
            ents.append((flow_rows[rf.arrival], 1.0))
        if rf.departure is net.source:
            ents.append((vehicle_row, 1.0))
        if bset is not None and rf.uid in bset:
            ents.append((branching_row, 1.0))
        for r, ng in zip(cut_rows, nogoods):
            if rf.uid in ng:
                ents.append((r, 1.0))
        lp.add_column(rf.cost, ents, 0.0, 1.0, name=f"x_{rf.uid}")
        x_cols.append(rf)
    y_cols = []
    for u, w in net.holdovers():
        if u in flow_rows and w in flow_rows:
            lp.add_column(0.0, [(flow_rows[u], -1.0), (flow_rows[w], 1.0)], name=f"y_{u.uid}_{w.uid}")
            y_cols.append((u, w))
    integer = [True] * len(x_cols) + [False] * len(y_cols)
    return RfnModel(MipModel.from_lp(lp, integer), x_cols, y_cols, cover_rows, flow_rows,
                    vehicle_row, branching_row, cut_rows)


@dataclass
class Chain:
    fragments: list  # ResourcedFragment sequence
    cyclic: bool = False

    @property
    def represented_path(self) -> tuple:
        path = list(self.fragments[0].fragment.path)
        for rf in self.fragments[1:]:
            path.extend(rf.fragment.path[1:])
        return tuple(path)

    @property
    def cost(self) -> float:
        return sum(rf.cost for rf in self.fragments)

    def __len__(self):
        return len(self.fragments)


def decompose_solution(model: RfnModel, values, net: Network) -> list:
    """Split an integral RFN solution into source-to-sink chains plus any
    leftover cycles (flagged ``cyclic``)."""
    nx = model.num_x
    order = {}
    x_left = {}
    for k, rf in enumerate(model.x_cols):
        if values[k] > 0.5:
            x_left[rf.uid] = rf
            order[rf.uid] = (net.frag_index[rf.fragment], rf.start_time)
    y_left = {}
    for k, (u, w) in enumerate(model.y_cols):
        amt = round(values[nx + k])
        if amt > 0:
            y_left[u.uid] = [w, amt]

    def out_x(v):
        cands = [rf for rf in net.departures.get(v, []) if rf.uid in x_left]
        return min(cands, key=lambda rf: order[rf.uid]) if cands else None

    def step(v):
        """Consume one unit of flow leaving ``v``; returns (rf or None, next copy)."""
        rf = out_x(v)
        if rf is not None:
            del x_left[rf.uid]
            return rf, rf.arrival
        hold = y_left.get(v.uid)
        if hold is None:
            return None, None
        w = hold[0]
        hold[1] -= 1
        if hold[1] <= 0:
            del y_left[v.uid]
        return None, w

    chains = []
    src = net.source
    while True:
        rf = out_x(src)
        if rf is None:
            break
        seq = []
        v = src
        while v is not net.sink:
            rf, nxt = step(v)
            if nxt is None:
                raise RfnError(f"flow imbalance at {v!r}")
            if rf is not None:
                seq.append(rf)
            v = nxt
        chains.append(Chain(seq))
    # leftover flow can only form cycles
    while x_left:
        start_rf = min(x_left.values(), key=lambda rf: order[rf.uid])
        del x_left[start_rf.uid]
        seq = [start_rf]
        v = start_rf.arrival
        steps = 0
        while v is not start_rf.departure:
            rf, nxt = step(v)
            if nxt is None:
                raise RfnError("leftover flow does not close into a cycle")
            if rf is not None:
                seq.append(rf)
            v = nxt
            steps += 1
            if steps > nx + len(model.y_cols) + 1:
                raise RfnError("runaway cycle extraction")
        chains.append(Chain(seq, cyclic=True))
    return chains


def chain_times(chain_fragments, start: Optional[float] = None):
    """True service-start times at each fragment start; returns (times, index of
    first fragment whose window is missed or None)."""
    t = chain_fragments[0].fragment.earliest_start if start is None else start
    times = []
    for k, rf in enumerate(chain_fragments):
        f = rf.fragment
        t = max(t, f.earliest_start)
        if t > f.latest_start + TIME_TOL:
            return times, k
        times.append(t)
        t = f.end_time(t)
    times.append(t)
    return times, None


@dataclass
class Classification:
    representation: bool
    minimal: Optional[list] = None  # minimal underestimating sub-chain


def _minimal_from(seq) -> list:
    """Shortest infeasible prefix, then trimmed from the front while still infeasible."""
    _, bad = chain_times(seq)
    if bad is None:
        return None
    prefix = seq[:bad + 1]
    s = 0
    while s + 1 < len(prefix) and chain_times(prefix[s + 1:])[1] is not None:
        s += 1
    return prefix[s:]


def classify_chain(inst: Instance, chain) -> Classification:
    seq = chain.fragments if isinstance(chain, Chain) else list(chain)
    cyclic = isinstance(chain, Chain) and chain.cyclic
    if not cyclic:
        minimal = _minimal_from(seq)
        return Classification(minimal is None, minimal)
    # a cycle is never a route: unroll it until the true times break a window
    loop_time = sum(rf.fragment.A for rf in seq)
    if loop_time <= 0:
        raise RfnError("zero-time cycle of fragments cannot be separated by time")
    unrolled = list(seq)
    horizon = inst.windows[inst.end][1] - inst.windows[0][0]
    reps = int(horizon / loop_time) + 2
    for _ in range(reps):
        minimal = _minimal_from(unrolled)
        if minimal is not None:
            return Classification(False, minimal)
        unrolled = unrolled + list(seq)
    raise RfnError("cycle unrolling did not become infeasible")


def separation_times(minimal) -> list:
    """(node, time) insertions that break a minimal underestimating chain."""
    out = []
    t = minimal[0].fragment.earliest_start
    for rf in minimal[:-1]:
        t = rf.fragment.end_time(max(t, rf.fragment.earliest_start))
        out.append((rf.fragment.end_node, t))
    return out


@dataclass
class RfnResult:
    status: str  # optimal | infeasible | node_limit | iteration_limit
    cost: float
    chains: list
    routes: list
    iterations: int
    mip_nodes: int
    stats: list


def _solve_loop(inst: Instance, net: Network, z_ub_v: int, cutoff, branching, keep, refine,
                max_iterations: int, node_limit: int, nogoods, time_budget=None,
                early_abort: bool = True) -> RfnResult:
    stats = []
    total_nodes = 0
    deadline = None if time_budget is None else _time.perf_counter() + time_budget
    for it in range(1, max_iterations + 1):
        if deadline is not None and _time.perf_counter() > deadline:
            return RfnResult("time_limit", float("inf"), [], [], it - 1, total_nodes, stats)
        t0 = _time.perf_counter()
        bset = branching(net) if callable(branching) else branching
        model = build_rfn(net, z_ub_v, bset, keep, nogoods)
        harvested = []
        best_known = float("inf") if cutoff is None else cutoff

        def callback(values, obj):
            chains = decompose_solution(model, values, net)
            bad = []
            for ch in chains:
                c = classify_chain(inst, ch)
                if not c.representation:
                    bad.append(c.minimal)
            harvested.extend(bad)
            return bool(bad) and early_abort and obj < best_known - 1e-9

        sol = solve_mip(model.mip, cutoff=cutoff, node_limit=node_limit, callback=callback)
        total_nodes += sol.nodes
        rec = {"iteration": it, **net.stats(), "x_columns": model.num_x, "mip_nodes": sol.nodes,
               "status": sol.status, "objective": sol.objective}
        if sol.status in ("infeasible", "cutoff"):
            rec["seconds"] = _time.perf_counter() - t0
            stats.append(rec)
            return RfnResult("infeasible", float("inf"), [], [], it, total_nodes, stats)
        if not harvested and sol.status == "optimal":
            chains = decompose_solution(model, sol.values, net)
            rec["chains_separated"] = 0
            rec["seconds"] = _time.perf_counter() - t0
            stats.append(rec)
            routes = [ch.represented_path for ch in chains]
            return RfnResult("optimal", sol.objective, chains, routes, it, total_nodes, stats)
        if not harvested:
            rec["seconds"] = _time.perf_counter() - t0
            stats.append(rec)
            return RfnResult("node_limit", float("inf"), [], [], it, total_nodes, stats)
        progress = refine(harvested)
        rec["chains_separated"] = len(harvested)
        rec["seconds"] = _time.perf_counter() - t0
        stats.append(rec)
        log.debug("rfn iteration %d: %s", it, rec)
        if not progress:
            raise RfnError("refinement made no progress on an underestimating chain")
    return RfnResult("iteration_limit", float("inf"), [], [], max_iterations, total_nodes, stats)


def ddd_solve(inst: Instance, net: Network, z_ub_v: int, cutoff: Optional[float] = None,
              branching=None, keep: Optional[Callable] = None, max_iterations: int = 10000,
              node_limit: int = 1_000_000, time_budget: Optional[float] = None,
              early_abort: bool = True) -> RfnResult:
    """Solve the RFN, inserting resourced nodes until every chain is a representation."""

    def refine(minimals):
        inserted = 0
        for chain in minimals:
            for node, t in separation_times(chain):
                if net.insert_resourced_node(node, t):
                    inserted += 1
        return inserted > 0

    return _solve_loop(inst, net, z_ub_v, cutoff, branching, keep, refine, max_iterations,
                       node_limit, (), time_budget, early_abort)


def bc_solve(inst: Instance, net: Network, z_ub_v: int, cutoff: Optional[float] = None,
             branching=None, keep: Optional[Callable] = None, max_iterations: int = 10000,
             node_limit: int = 1_000_000, nogoods: Optional[list] = None,
             time_budget: Optional[float] = None, early_abort: bool = True) -> RfnResult:
    """Static network; minimal underestimating chains are forbidden by no-good
    cuts ``sum x <= k - 1`` and the model is re-solved."""
    cuts = nogoods if nogoods is not None else []
    seen = {frozenset(rf.uid for rf in ng) for ng in cuts}

    def refine(minimals):
        added = 0
        for chain in minimals:
            key = frozenset(rf.uid for rf in chain)
            if key not in seen:
                seen.add(key)
                cuts.append(list({rf.uid: rf for rf in chain}.values()))
                added += 1
        return added > 0

    return _solve_loop(inst, net, z_ub_v, cutoff, branching, keep, refine, max_iterations,
                       node_limit, cuts, time_budget, early_abort)
