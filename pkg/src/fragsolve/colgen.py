"""Column generation over the route (set-partitioning) formulation.

The restricted master has one cover row per request vertex, an optional
vehicle-count equality row and subset-row cut rows.  Pricing is the forward
SPPRC from :mod:`labelling`.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .instance import Instance, simulate_route
from .labelling import PricingDuals, solve_pricing_forward
from .mip import LinearProgram, LpSolution, MipModel, solve_lp, solve_mip

log = logging.getLogger(__name__)

ARTIFICIAL_COST = 1e7
RC_TOL = 1e-6
CUT_VIOLATION = 1e-4


class ColgenError(RuntimeError):
    pass


@dataclass
class SubsetRowCut:
    """Rank-1 cut over three requests (pickup ids) with multipliers 1/2."""

    members: frozenset
    dual: float = 0.0

    def coefficient(self, path) -> int:
        return sum(1 for v in path if v in self.members) // 2


@dataclass
class Column:
    path: tuple
    cost: float
    visits: dict

    @classmethod
    def from_path(cls, inst: Instance, path) -> "Column":
        path = tuple(path)
        visits = Counter(v for v in path if v != 0 and v != inst.end)
        return cls(path, inst.path_cost(path), dict(visits))


@dataclass
class MasterState:
    inst: Instance
    objective_mode: str = "vehicles"  # vehicles | travel_cost
    vehicle_rhs: Optional[int] = None
    columns: list = field(default_factory=list)
    cuts: list = field(default_factory=list)
    pi: list = field(default_factory=list)
    sigma: float = 0.0
    z_lb: float = math.nan
    feasible: bool = True
    lambdas: list = field(default_factory=list)
    lp: Optional[LinearProgram] = None
    solution: Optional[LpSolution] = None
    iterations: int = 0
    max_routes_per_iter: int = 30
    trace: Optional[str] = None
    _paths: set = field(default_factory=set)

    def add_column(self, path) -> bool:
        path = tuple(path)
        if path in self._paths:
            return False
        self._paths.add(path)
        self.columns.append(Column.from_path(self.inst, path))
        return True

    def column_cost(self, col: Column) -> float:
        return 1.0 if self.objective_mode == "vehicles" else col.cost

    def pricing_duals(self) -> PricingDuals:
        base = 1.0 if self.objective_mode == "vehicles" else 0.0
        return PricingDuals(
            list(self.pi) if self.pi else [0.0] * self.inst.num_vertices,
            route_const=base - self.sigma,
            cost_scale=0.0 if self.objective_mode == "vehicles" else 1.0,
            cuts=[(c.members, c.dual) for c in self.cuts],
        )

    def positive_columns(self, tol: float = 1e-9) -> list:
        return [(col, lam) for col, lam in zip(self.columns, self.lambdas) if lam > tol]


def new_master(inst: Instance, objective_mode: str = "vehicles", seed_routes: bool = True, **kw) -> MasterState:
    if objective_mode not in ("vehicles", "travel_cost"):
        raise ValueError(f"unknown objective mode {objective_mode!r}")
    state = MasterState(inst, objective_mode, **kw)
    if seed_routes:
        for p in inst.pickups:
            path = (0, p, p + inst.n, inst.end)
            if simulate_route(inst, path).feasible:
                state.add_column(path)
    return state


def set_vehicle_constraint(state: MasterState, z_ub_v: int) -> MasterState:
    """Fix the number of routes to ``z_ub_v`` and switch to the travel-cost objective."""
    state.vehicle_rhs = int(z_ub_v)
    state.objective_mode = "travel_cost"
    return state


def build_rmp(state: MasterState) -> LinearProgram:
    inst = state.inst
    lp = LinearProgram()
    cover = {v: lp.add_row("=", 1.0, name=f"cover_{v}") for v in inst.requests}
    veh = None
    if state.vehicle_rhs is not None:
        veh = lp.add_row("=", float(state.vehicle_rhs), name="vehicles")
    cut_rows = [lp.add_row("<=", 1.0, name=f"src_{k}") for k in range(len(state.cuts))]
    for k, col in enumerate(state.columns):
        ents = [(cover[v], float(a)) for v, a in col.visits.items()]
        if veh is not None:
            ents.append((veh, 1.0))
        for r, cut in zip(cut_rows, state.cuts):
            c = cut.coefficient(col.path)
            if c:
                ents.append((r, float(c)))
        lp.add_column(state.column_cost(col), ents, name=f"route_{k}")
    for v in inst.requests:
        lp.add_column(ARTIFICIAL_COST, [(cover[v], 1.0)], name=f"art_{v}")
    if veh is not None:
        lp.add_column(ARTIFICIAL_COST, [(veh, 1.0)], name="art_veh_plus")
        lp.add_column(ARTIFICIAL_COST, [(veh, -1.0)], name="art_veh_minus")
    return lp


def _solve_rmp(state: MasterState):
    inst = state.inst
    lp = build_rmp(state)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise ColgenError(f"restricted master not solved: {sol.status}")
    nreq = len(inst.requests)
    pi = [0.0] * inst.num_vertices
    for k, v in enumerate(inst.requests):
        pi[v] = float(sol.dual[k])
    row = nreq
    state.sigma = 0.0
    if state.vehicle_rhs is not None:
        state.sigma = float(sol.dual[row])
        row += 1
    for cut in state.cuts:
        cut.dual = min(0.0, float(sol.dual[row]))
        row += 1
    state.pi = pi
    ncol = len(state.columns)
    state.lambdas = [float(x) for x in sol.primal[:ncol]]
    state.feasible = all(x <= 1e-7 for x in sol.primal[ncol:])
    state.lp, state.solution = lp, sol
    state.z_lb = sol.objective
    return sol


def _trace(state: MasterState, **record):
    if state.trace:
        with open(state.trace, "a") as fh:
            fh.write(json.dumps(record) + "\n")


def solve_master(state: MasterState, max_iterations: int = 10000) -> MasterState:
    """Alternate RMP solves and pricing until no column prices out."""
    inst = state.inst
    for it in range(max_iterations):
        _solve_rmp(state)
        state.iterations += 1
        routes = solve_pricing_forward(inst, state.pricing_duals(), "all_negative",
                                       max_routes=state.max_routes_per_iter, tol=RC_TOL)
        added = sum(state.add_column(lab.path) for lab in routes)
        _trace(state, iteration=state.iterations, mode=state.objective_mode, z_lb=state.z_lb,
               columns_added=added, cuts=len(state.cuts))
        log.debug("cg iter %d z=%.6f added=%d", state.iterations, state.z_lb, added)
        if not routes:
            return state
        if added == 0:
            raise ColgenError("pricing returned only existing columns")
    raise ColgenError(f"column generation exceeded {max_iterations} iterations")


def src_lhs(state: MasterState, members) -> float:
    cut = SubsetRowCut(frozenset(members))
    return sum(cut.coefficient(col.path) * lam for col, lam in zip(state.columns, state.lambdas))


def separate_src_cuts(state: MasterState, max_cuts: int = 50) -> list:
    """Most violated subset-row cuts over triples of requests (pickups)."""
    existing = {c.members for c in state.cuts}
    active = state.positive_columns()
    found = []
    for triple in itertools.combinations(state.inst.pickups, 3):
        members = frozenset(triple)
        if members in existing:
            continue
        lhs = 0.0
        for col, lam in active:
            c = sum(1 for v in col.path if v in members) // 2
            if c:
                lhs += c * lam
        if lhs - 1.0 > CUT_VIOLATION:
            found.append((lhs - 1.0, tuple(sorted(members))))
    found.sort(key=lambda x: (-x[0], x[1]))
    return [SubsetRowCut(frozenset(m)) for _, m in found[:max_cuts]]


def run_with_cuts(state: MasterState, rounds: int, max_cuts: int = 50) -> MasterState:
    solve_master(state)
    for _ in range(rounds):
        if not state.feasible:
            break
        cuts = separate_src_cuts(state, max_cuts)
        if not cuts:
            break
        state.cuts.extend(cuts)
        _trace(state, iteration=state.iterations, cuts_added=len(cuts))
        solve_master(state)
    return state


def integer_rmp_bound(state: MasterState, node_limit: int = 20000):
    """Best integer solution over the generated (non-artificial) columns.

    Returns ``(objective, routes)`` or None.  Cut rows are left out; they are
    valid for every integer solution anyway.
    """
    inst = state.inst
    cols = [c for c in state.columns if all(a == 1 for a in c.visits.values())]
    if not cols and inst.n > 0:
        return None
    lp = LinearProgram()
    cover = {v: lp.add_row("=", 1.0) for v in inst.requests}
    veh = lp.add_row("=", float(state.vehicle_rhs)) if state.vehicle_rhs is not None else None
    for col in cols:
        ents = [(cover[v], 1.0) for v in col.visits]
        if veh is not None:
            ents.append((veh, 1.0))
        lp.add_column(state.column_cost(col), ents, 0.0, 1.0)
    res = solve_mip(MipModel.from_lp(lp, [True] * lp.num_cols), node_limit=node_limit)
    if not res.has_solution:
        return None
    routes = [cols[k].path for k, x in enumerate(res.values) if x > 0.5]
    return res.objective, routes
