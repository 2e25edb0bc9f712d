"""LP solving with duals (HiGHS backend) and a best-first branch-and-bound MIP solver.

Rows are added with a sense ('<=', '=', '>=') and a right-hand side; columns
carry an objective coefficient, bounds and sparse row entries.  The problem is
always a minimisation.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import highspy
import numpy as np

INF = math.inf
FEAS_TOL = 1e-7
INT_TOL = 1e-6

_SENSES = ("<=", "=", ">=")


class LpNumericalError(RuntimeError):
    pass


@dataclass
class LinearProgram:
    cost: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    col_entries: list = field(default_factory=list)
    col_names: list = field(default_factory=list)
    sense: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    row_names: list = field(default_factory=list)

    @property
    def num_cols(self) -> int:
        return len(self.cost)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def add_row(self, sense: str, rhs: float, coeffs: Optional[dict] = None, name: str = "") -> int:
        if sense not in _SENSES:
            raise ValueError(f"bad row sense {sense!r}")
        coeffs = coeffs or {}
        for j in coeffs:
            if not 0 <= j < self.num_cols:
                raise IndexError(f"row references unknown column {j}")
        i = len(self.rhs)
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"r{i}")
        for j, v in coeffs.items():
            self.col_entries[j].append((i, float(v)))
        return i

    def add_column(self, cost: float, entries=(), lo: float = 0.0, hi: float = INF, name: str = "") -> int:
        if lo > hi:
            raise ValueError("column lower bound exceeds upper bound")
        j = len(self.cost)
        ents = [(int(i), float(v)) for i, v in (entries.items() if isinstance(entries, dict) else entries)]
        for i, _ in ents:
            if not 0 <= i < self.num_rows:
                raise IndexError(f"column references unknown row {i}")
        self.cost.append(float(cost))
        self.lower.append(float(lo))
        self.upper.append(float(hi))
        self.col_entries.append(ents)
        self.col_names.append(name or f"x{j}")
        return j

    def row_activity(self, x) -> np.ndarray:
        act = np.zeros(self.num_rows)
        for j, ents in enumerate(self.col_entries):
            if x[j]:
                for i, v in ents:
                    act[i] += v * x[j]
        return act

    def is_feasible(self, x, tol: float = FEAS_TOL) -> bool:
        for j, xj in enumerate(x):
            if xj < self.lower[j] - tol or xj > self.upper[j] + tol:
                return False
        for s, b, a in zip(self.sense, self.rhs, self.row_activity(x)):
            if (s == "<=" and a > b + tol) or (s == ">=" and a < b - tol) or (s == "=" and abs(a - b) > tol):
                return False
        return True

    def to_highs(self) -> highspy.HighsLp:
        lp = highspy.HighsLp()
        lp.num_col_ = self.num_cols
        lp.num_row_ = self.num_rows
        lp.col_cost_ = np.asarray(self.cost, dtype=float)
        lp.col_lower_ = np.asarray(self.lower, dtype=float)
        lp.col_upper_ = np.asarray([highspy.kHighsInf if u == INF else u for u in self.upper], dtype=float)
        lo = np.full(self.num_rows, -highspy.kHighsInf)
        hi = np.full(self.num_rows, highspy.kHighsInf)
        for i, (s, b) in enumerate(zip(self.sense, self.rhs)):
            if s != "<=":
                lo[i] = b
            if s != ">=":
                hi[i] = b
        lp.row_lower_ = lo
        lp.row_upper_ = hi
        starts, index, value = [0], [], []
        for ents in self.col_entries:
            for i, v in sorted(ents):
                index.append(i)
                value.append(v)
            starts.append(len(index))
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = np.asarray(starts, dtype=np.int32)
        lp.a_matrix_.index_ = np.asarray(index, dtype=np.int32)
        lp.a_matrix_.value_ = np.asarray(value, dtype=float)
        return lp


@dataclass
class LpSolution:
    status: str
    primal: np.ndarray
    dual: np.ndarray
    reduced_costs: np.ndarray
    objective: float

    def dual_objective(self, lp: LinearProgram) -> float:
        """Objective of the dual solution ``y``, including the column-bound terms."""
        val = float(np.dot(self.dual, lp.rhs)) if lp.num_rows else 0.0
        for d, lo, hi in zip(self.reduced_costs, lp.lower, lp.upper):
            if d > 0:
                val += d * lo if lo > -INF else (-INF if d > 1e-9 else 0.0)
            elif d < 0:
                val += d * hi if hi < INF else (-INF if d < -1e-9 else 0.0)
        return val


def _new_highs() -> highspy.Highs:
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    return h


_STATUS = {
    highspy.HighsModelStatus.kOptimal: "optimal",
    highspy.HighsModelStatus.kInfeasible: "infeasible",
    highspy.HighsModelStatus.kUnbounded: "unbounded",
    highspy.HighsModelStatus.kUnboundedOrInfeasible: "infeasible",
    highspy.HighsModelStatus.kModelEmpty: "optimal",
}


def _read(h: highspy.Highs, ncols: int, nrows: int) -> LpSolution:
    status = _STATUS.get(h.getModelStatus())
    if status is None:
        raise LpNumericalError(h.modelStatusToString(h.getModelStatus()))
    if status != "optimal":
        return LpSolution(status, np.zeros(ncols), np.zeros(nrows), np.zeros(ncols), INF)
    sol = h.getSolution()
    x = np.asarray(sol.col_value, dtype=float)
    y = np.asarray(sol.row_dual, dtype=float) if nrows else np.zeros(0)
    d = np.asarray(sol.col_dual, dtype=float)
    return LpSolution(status, x, y, d, float(h.getInfo().objective_function_value))


def _run(h: highspy.Highs, ncols: int, nrows: int) -> LpSolution:
    h.run()
    try:
        return _read(h, ncols, nrows)
    except LpNumericalError:
        # refactorise from scratch with presolve before giving up
        h.clearSolver()
        h.setOptionValue("presolve", "on")
        h.run()
        return _read(h, ncols, nrows)


def solve_lp(lp: LinearProgram, dump: Optional[str] = None) -> LpSolution:
    if dump:
        write_lp(lp, dump)
    if lp.num_cols == 0:
        feasible = all(
            (s == "<=" and b >= -FEAS_TOL) or (s == ">=" and b <= FEAS_TOL) or (s == "=" and abs(b) <= FEAS_TOL)
            for s, b in zip(lp.sense, lp.rhs)
        )
        status = "optimal" if feasible else "infeasible"
        return LpSolution(status, np.zeros(0), np.zeros(lp.num_rows), np.zeros(0), 0.0 if feasible else INF)
    h = _new_highs()
    h.passModel(lp.to_highs())
    return _run(h, lp.num_cols, lp.num_rows)


def write_lp(lp: LinearProgram, path: str, integer=None) -> None:
    """Dump in CPLEX-style LP text for cross-checking with other solvers."""

    def expr(terms):
        out = []
        for v, name in terms:
            out.append(f"{'+' if v >= 0 else '-'} {abs(v):.12g} {name}")
        return " ".join(out) if out else "0"

    rows = [[] for _ in range(lp.num_rows)]
    for j, ents in enumerate(lp.col_entries):
        for i, v in ents:
            rows[i].append((v, lp.col_names[j]))
    lines = ["Minimize", " obj: " + expr(zip(lp.cost, lp.col_names)), "Subject To"]
    for i, terms in enumerate(rows):
        op = {"<=": "<=", ">=": ">=", "=": "="}[lp.sense[i]]
        lines.append(f" {lp.row_names[i]}: {expr(terms)} {op} {lp.rhs[i]:.12g}")
    lines.append("Bounds")
    for j, name in enumerate(lp.col_names):
        hi = "+inf" if lp.upper[j] == INF else f"{lp.upper[j]:.12g}"
        lo = "-inf" if lp.lower[j] == -INF else f"{lp.lower[j]:.12g}"
        lines.append(f" {lo} <= {name} <= {hi}")
    if integer is not None and any(integer):
        lines.append("Generals")
        lines.append(" " + " ".join(n for n, flag in zip(lp.col_names, integer) if flag))
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class MipModel:
    lp: LinearProgram
    integer: list

    @classmethod
    def from_lp(cls, lp: LinearProgram, integer=None) -> "MipModel":
        return cls(lp, list(integer) if integer is not None else [False] * lp.num_cols)


@dataclass
class MipSolution:
    status: str  # optimal | infeasible | cutoff | node_limit | aborted
    values: Optional[np.ndarray]
    objective: float
    nodes: int
    gap: float

    @property
    def has_solution(self) -> bool:
        return self.values is not None


def _most_fractional(x, int_cols):
    best, best_j = INT_TOL, -1
    for j in int_cols:
        f = x[j] - math.floor(x[j])
        frac = min(f, 1.0 - f)
        if frac > best + 1e-12:
            best, best_j = frac, j
    return best_j


def solve_mip(
    m: MipModel,
    cutoff: Optional[float] = None,
    node_limit: int = 1_000_000,
    callback: Optional[Callable[[np.ndarray, float], bool]] = None,
) -> MipSolution:
    """Best-first branch and bound on LP relaxations.

    Branches on the most fractional integer column (lowest index on ties);
    open nodes are ordered by bound then creation order.  ``callback`` sees
    every new incumbent and may return True to stop the search.
    """
    lp = m.lp
    ncols, nrows = lp.num_cols, lp.num_rows
    int_cols = [j for j in range(ncols) if m.integer[j]]
    limit = INF if cutoff is None else cutoff + 1e-9
    if ncols == 0:
        sol = solve_lp(lp)
        if sol.status != "optimal":
            return MipSolution("infeasible", None, INF, 1, INF)
        if sol.objective > limit:
            return MipSolution("cutoff", None, INF, 1, INF)
        return MipSolution("optimal", np.zeros(0), 0.0, 1, 0.0)

    h = _new_highs()
    h.setOptionValue("presolve", "off")
    h.passModel(lp.to_highs())
    base_lo = np.asarray([lp.lower[j] for j in int_cols], dtype=float)
    base_hi = np.asarray([lp.upper[j] if lp.upper[j] < INF else highspy.kHighsInf for j in int_cols], dtype=float)
    pos = {j: k for k, j in enumerate(int_cols)}
    idx = np.asarray(int_cols, dtype=np.int32)

    best_x, best_obj = None, INF
    counter = itertools.count()
    heap = [(-INF, next(counter), ())]
    nodes = 0
    status = None
    cut_off = False

    while heap:
        bound, _, fixes = heapq.heappop(heap)
        if bound > limit:
            cut_off = True
            continue
        if bound > best_obj - 1e-9:
            continue
        if nodes >= node_limit:
            heapq.heappush(heap, (bound, 0, fixes))
            status = "node_limit"
            break
        nodes += 1
        if int_cols:
            lo, hi = base_lo.copy(), base_hi.copy()
            for j, l, u in fixes:
                k = pos[j]
                lo[k], hi[k] = max(lo[k], l), min(hi[k], u)
            if np.any(lo > hi):
                continue
            h.changeColsBounds(len(idx), idx, lo, hi)
        sol = _run(h, ncols, nrows)
        if sol.status == "unbounded":
            raise LpNumericalError("unbounded relaxation in branch and bound")
        if sol.status != "optimal":
            continue
        if sol.objective > limit:
            cut_off = True
            continue
        if sol.objective > best_obj - 1e-9:
            continue
        x = sol.primal
        j = _most_fractional(x, int_cols)
        if j < 0:
            x = x.copy()
            for k in int_cols:
                x[k] = round(x[k])
            best_x, best_obj = x, sol.objective
            if callback is not None and callback(x, best_obj):
                status = "aborted"
                break
            continue
        v = x[j]
        heapq.heappush(heap, (sol.objective, next(counter), fixes + ((j, -INF, math.floor(v)),)))
        heapq.heappush(heap, (sol.objective, next(counter), fixes + ((j, math.ceil(v), INF),)))

    open_bound = min((b for b, _, _ in heap), default=INF)
    if best_x is None:
        if status is None:
            status = "cutoff" if cut_off else "infeasible"
        return MipSolution(status, None, INF, nodes, INF)
    if status is None:
        status = "optimal"
    gap = 0.0 if status == "optimal" else max(0.0, best_obj - open_bound)
    return MipSolution(status, best_x, best_obj, nodes, gap)
