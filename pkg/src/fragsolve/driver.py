"""Overall solve: vehicle and cost column generation, fragment enumeration,
formulation leveraging, CERE, network build and RFN refinement, repeated over
cost guesses and vehicle targets."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

from .cere import absorb_nodes
from .colgen import (integer_rmp_bound, new_master, run_with_cuts, set_vehicle_constraint,
                     solve_master)
from .fl import DualSnapshot, FlContext
from .fragments import enumerate_fragments, fragments_to_json, nodes_of
from .instance import Instance, simulate_route
from .network import build_network, to_dot
from .rfn import bc_solve, ddd_solve

log = logging.getLogger(__name__)

VARIANTS = ("B", "D", "BF", "DF", "BFC", "DFC")


@dataclass
class Config:
    variant: str = "DFC"
    psi_same: float = 20.0
    psi_diff: float = 30.0
    grid_delta: float = 5.0
    max_increase_phase1: float = 500
    max_increase_phase2: float = 6000
    cut_rounds: int = 3
    vehicle_cut_rounds: int = 0
    max_cuts: int = 50
    time_limit: Optional[float] = None
    seed: int = 0
    threads: int = 1
    vehicles_override: Optional[int] = None
    node_limit: int = 1_000_000
    cache_root: bool = True
    cg_trace: Optional[str] = None
    fragment_dump: Optional[str] = None
    dot_dump: Optional[str] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.grid_delta <= 0:
            raise ValueError("grid_delta must be positive")

    @property
    def uses_ddd(self) -> bool:
        return self.variant.startswith("D")

    @property
    def uses_fl(self) -> bool:
        return "F" in self.variant

    @property
    def uses_cere(self) -> bool:
        return self.variant.endswith("C")


@dataclass
class RunReport:
    status: str
    vehicles: int
    cost: float
    routes: list
    phases: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


@dataclass
class CostRoot:
    """Result of the vehicle-constrained cost phase for one vehicle target."""

    feasible: bool
    z_lb: float
    snapshot: Optional[DualSnapshot]
    rmp: Optional[tuple]  # (cost, routes) from the integer master


@dataclass
class VehicleRoot:
    z_lb: float
    snapshot: DualSnapshot


_ROOT_CACHE: dict = {}
_CACHE_LIMIT = 64


def _instance_key(inst: Instance) -> str:
    return json.dumps(inst.to_json(), sort_keys=True)


def _cached(key, build, use_cache: bool):
    if not use_cache:
        return build()
    if key not in _ROOT_CACHE:
        if len(_ROOT_CACHE) >= _CACHE_LIMIT:
            _ROOT_CACHE.pop(next(iter(_ROOT_CACHE)))
        _ROOT_CACHE[key] = build()
    return _ROOT_CACHE[key]


def clear_cache():
    _ROOT_CACHE.clear()


def vehicle_phase(inst: Instance, config: Config) -> VehicleRoot:
    def build():
        state = new_master(inst, "vehicles", trace=config.cg_trace)
        run_with_cuts(state, config.vehicle_cut_rounds, config.max_cuts)
        z_lb = state.z_lb
        return VehicleRoot(z_lb, DualSnapshot(inst, state.pricing_duals(), z_lb, math.inf))

    key = ("vehicles", _instance_key(inst), config.vehicle_cut_rounds, config.max_cuts)
    return _cached(key, build, config.cache_root)


def cost_phase(inst: Instance, config: Config, z_ub_v: int) -> CostRoot:
    def build():
        state = new_master(inst, "travel_cost", trace=config.cg_trace)
        set_vehicle_constraint(state, z_ub_v)
        run_with_cuts(state, config.cut_rounds, config.max_cuts)
        if not state.feasible:
            return CostRoot(False, math.inf, None, None)
        rmp = integer_rmp_bound(state)
        snap = DualSnapshot(inst, state.pricing_duals(), state.z_lb, math.inf)
        return CostRoot(True, state.z_lb, snap, rmp)

    key = ("cost", _instance_key(inst), z_ub_v, config.cut_rounds, config.max_cuts)
    return _cached(key, build, config.cache_root)


def _fragments(inst: Instance, use_cache: bool):
    return _cached(("fragments", _instance_key(inst)), lambda: enumerate_fragments(inst), use_cache)


def _with_gap(snap: DualSnapshot, z_ub: float) -> Optional[DualSnapshot]:
    """Share pools and memoised bounds but use another upper bound."""
    if snap is None or not z_ub < math.inf:
        return None
    out = DualSnapshot.__new__(DualSnapshot)
    out.__dict__.update(snap.__dict__)
    out.z_ub = z_ub
    return out


class _TimeUp(Exception):
    pass


def solve(inst: Instance, config: Optional[Config] = None) -> RunReport:
    config = config or Config()
    t_start = time.perf_counter()
    deadline = None if config.time_limit is None else t_start + config.time_limit
    phases = []

    if inst.n == 0:
        return RunReport("optimal", 0, 0.0, [], phases)

    # vehicle lower bound from the route formulation
    vroot = vehicle_phase(inst, config)
    z_lb_v = vroot.z_lb
    z_ub_v = math.ceil(z_lb_v - 1e-6) if config.vehicles_override is None else config.vehicles_override
    frags0, _ = _fragments(inst, config.cache_root)
    if config.fragment_dump:
        with open(config.fragment_dump, "w") as fh:
            fh.write(fragments_to_json(frags0))
    reused_times: dict = {}

    try:
        while z_ub_v <= inst.n:
            result = _solve_for_vehicles(inst, config, z_ub_v, vroot, frags0, reused_times,
                                         phases, deadline)
            if result is not None:
                cost, routes = result
                return _report("optimal", z_ub_v, cost, routes, phases, inst)
            z_ub_v += 1
    except _TimeUp:
        return RunReport("time_limit", z_ub_v, math.inf, [], phases)
    return RunReport("infeasible", -1, math.inf, [], phases)


def _report(status, vehicles, cost, routes, phases, inst):
    total = 0.0
    for r in routes:
        sim = simulate_route(inst, r)
        if not sim.feasible:
            raise AssertionError(f"reported route {r} is infeasible: {sim.reason}")
        total += sim.cost
    if abs(total - cost) > 1e-6:
        raise AssertionError(f"route costs {total} disagree with objective {cost}")
    return RunReport(status, vehicles, total, sorted(list(r) for r in routes), phases)


def _check_time(deadline):
    if deadline is not None and time.perf_counter() > deadline:
        raise _TimeUp()


def _solve_for_vehicles(inst, config, z_ub_v, vroot, frags0, reused_times, phases, deadline):
    """Cost search for one vehicle target; returns (cost, routes) or None."""
    _check_time(deadline)
    croot = cost_phase(inst, config, z_ub_v)
    if not croot.feasible:
        phases.append({"z_ub_v": z_ub_v, "z_lb_v": vroot.z_lb, "z_lb_c": None, "master": "infeasible",
                       "fragments": 0, "resourced_fragments": 0, "resourced_nodes": 0,
                       "ddd_iterations": 0, "mip_nodes": 0, "seconds": 0.0})
        return None
    z_lb_c = croot.z_lb
    if croot.rmp is not None:
        z_ub_c0 = min(croot.rmp[0], z_lb_c + config.psi_same)
    else:
        z_ub_c0 = z_lb_c + config.psi_diff
    z_ub_c = z_ub_c0
    z_force = -math.inf
    h_prime = None
    incumbent = (math.inf, None)

    vsnap = _with_gap(vroot.snapshot, z_ub_v) if config.uses_fl else None
    while True:
        _check_time(deadline)
        t0 = time.perf_counter()
        csnap = _with_gap(croot.snapshot, z_ub_c) if config.uses_fl else None
        fl = FlContext([vsnap, csnap]) if config.uses_fl else None
        # drop fragments whose bound exceeds a gap
        frags = fl.filter_fragments(frags0) if fl else list(frags0)
        # node absorption, with a larger budget once a bound is being forced
        plans = []
        if config.uses_cere:
            if z_force == -math.inf:
                frags, nodes, plans = absorb_nodes(frags, nodes_of(frags), fl, config.max_increase_phase1,
                                                   end_vertex=inst.end)
                h_prime = set(nodes)
            else:
                restrict = set(nodes_of(frags)) - h_prime
                frags, nodes, plans = absorb_nodes(frags, nodes_of(frags), fl, config.max_increase_phase2,
                                                   restrict_to=restrict, end_vertex=inst.end)
                if set(nodes) != h_prime:
                    z_ub_c, z_force, h_prime = z_ub_c0, -math.inf, set(nodes)
        nodes = nodes_of(frags)
        if not any(f.first == 0 for f in frags) or not any(f.last == inst.end for f in frags):
            res_status, z_rfn, routes, stats = "infeasible", math.inf, None, {}
        else:
            if config.uses_ddd:
                extra = {v: sorted(reused_times.get(v, ())) for v in nodes}
                net = build_network(inst, frags, nodes, extra_times=extra)
            else:
                net = build_network(inst, frags, nodes, grid_delta=config.grid_delta)
            keep = (lambda rf: fl.keep_resourced(net, rf)) if fl else None
            # forcing row: some arc whose bound reaches the forced value must be used
            branching = None
            if z_force > -math.inf:
                g = z_force - z_lb_c
                branching = lambda n: [rf for rf in n.resourced_fragments()
                                       if croot.snapshot.rho_double_prime(n, rf) >= g - 1e-6]
            cutoff = z_ub_c if (z_force > -math.inf and z_ub_c < math.inf) else None
            solver = ddd_solve if config.uses_ddd else bc_solve
            remaining = None if deadline is None else max(0.0, deadline - time.perf_counter())
            res = solver(inst, net, z_ub_v, cutoff=cutoff, branching=branching, keep=keep,
                         node_limit=config.node_limit, time_budget=remaining)
            if res.status == "time_limit":
                raise _TimeUp()
            if config.uses_ddd:
                for v in net.resourced_nodes():
                    reused_times.setdefault(v.node, set()).add(v.time)
            if config.dot_dump:
                with open(config.dot_dump, "w") as fh:
                    fh.write(to_dot(net))
            res_status, z_rfn, routes = res.status, res.cost, res.routes
            stats = {"resourced_fragments": res.stats[-1]["x_columns"] if res.stats else 0,
                     "resourced_nodes": net.stats()["resourced_nodes"],
                     "ddd_iterations": res.iterations, "mip_nodes": res.mip_nodes}
            if res_status not in ("optimal", "infeasible"):
                raise RuntimeError(f"RFN solve stopped with status {res_status}")
        phases.append({"z_ub_v": z_ub_v, "z_lb_v": vroot.z_lb, "z_lb_c": z_lb_c, "z_ub_c": z_ub_c,
                       "z_force": None if z_force == -math.inf else z_force,
                       "fragments": len(frags), "resourced_fragments": stats.get("resourced_fragments", 0),
                       "resourced_nodes": stats.get("resourced_nodes", 0),
                       "ddd_iterations": stats.get("ddd_iterations", 0),
                       "mip_nodes": stats.get("mip_nodes", 0),
                       "z_rfn": z_rfn if z_rfn < math.inf else None,
                       "cere": [p.summary() for p in plans if p.absorbed],
                       "seconds": time.perf_counter() - t0})
        log.info("vehicles=%d z_ub_c=%.4f z_force=%s rfn=%s", z_ub_v, z_ub_c, z_force, z_rfn)
        if z_rfn <= z_ub_c + 1e-9 and z_rfn < math.inf:
            if z_rfn <= incumbent[0]:
                return z_rfn, routes
            return incumbent
        if z_force == -math.inf:
            if z_rfn < incumbent[0]:
                incumbent = (z_rfn, routes)
            z_force, z_ub_c = z_ub_c, z_rfn
            continue
        # phase two found nothing better than the first-phase solution
        if incumbent[0] < math.inf:
            return incumbent
        return None
