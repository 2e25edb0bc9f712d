"""PDPTW instance model, parsers, route simulation and a brute-force oracle.

Vertex layout: 0 is the start depot, 1..n are pickups, n+1..2n the matching
deliveries and 2n+1 the end depot.  Costs equal travel times.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

EPS = 1e-6


class InstanceError(ValueError):
    """Malformed instance text or an instance breaking the model invariants."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Instance:
    n: int
    capacity: float
    weights: tuple
    windows: tuple
    travel: tuple
    name: str = "instance"

    def __post_init__(self):
        n = self.n
        nv = 2 * n + 2
        if n < 0:
            raise InstanceError("negative number of requests")
        if self.capacity < 0:
            raise InstanceError("negative capacity")
        if len(self.weights) != nv or len(self.windows) != nv or len(self.travel) != nv:
            raise InstanceError(f"expected {nv} vertices")
        if any(len(row) != nv for row in self.travel):
            raise InstanceError("travel matrix is not square")
        if self.weights[0] != 0 or self.weights[nv - 1] != 0:
            raise InstanceError("depot weights must be zero")
        for p in range(1, n + 1):
            if self.weights[p] <= 0:
                raise InstanceError(f"pickup {p} must have positive weight")
            if abs(self.weights[p + n] + self.weights[p]) > EPS:
                raise InstanceError(f"pairing violation: q[{p + n}] != -q[{p}]")
        for i, (a, b) in enumerate(self.windows):
            if a > b:
                raise InstanceError(f"empty time window at vertex {i}")
        for row in self.travel:
            if any(t < 0 for t in row):
                raise InstanceError("negative travel time")

    @property
    def end(self) -> int:
        return 2 * self.n + 1

    @property
    def num_vertices(self) -> int:
        return 2 * self.n + 2

    @property
    def pickups(self) -> range:
        return range(1, self.n + 1)

    @property
    def deliveries(self) -> range:
        return range(self.n + 1, 2 * self.n + 1)

    @property
    def requests(self) -> range:
        return range(1, 2 * self.n + 1)

    def is_pickup(self, v: int) -> bool:
        return 1 <= v <= self.n

    def is_delivery(self, v: int) -> bool:
        return self.n < v <= 2 * self.n

    def path_cost(self, path: Sequence[int]) -> float:
        t = self.travel
        return sum(t[i][j] for i, j in zip(path, path[1:]))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "capacity": self.capacity,
            "weights": list(self.weights),
            "windows": [list(w) for w in self.windows],
            "travel": [list(r) for r in self.travel],
        }


@dataclass(frozen=True)
class Route:
    path: tuple
    cost: float

    @property
    def feasible(self) -> bool:
        return True


class Infeasible(NamedTuple):
    reason: str
    position: int

    @property
    def feasible(self) -> bool:
        return False


def make_instance(n, capacity, weights, windows, travel, name="instance") -> Instance:
    return Instance(
        n=int(n),
        capacity=float(capacity),
        weights=tuple(float(q) for q in weights),
        windows=tuple((float(a), float(b)) for a, b in windows),
        travel=tuple(tuple(float(x) for x in row) for row in travel),
        name=name,
    )


def _from_json(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceError(e.msg, e.lineno, e.colno) from None
    try:
        return make_instance(
            data["n"], data["capacity"], data["weights"], data["windows"], data["travel"],
            name=data.get("name", "instance"),
        )
    except KeyError as e:
        raise InstanceError(f"missing field {e.args[0]!r}") from None


def _from_benchmark(text: str, name: str) -> Instance:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0]
        if stripped.strip():
            rows.append((lineno, raw, stripped.split()))
    if not rows:
        raise InstanceError("empty input", 1, 1)

    def number(lineno, raw, tok, cast=float):
        try:
            return cast(tok)
        except ValueError:
            raise InstanceError(f"expected a number, got {tok!r}", lineno, raw.find(tok) + 1) from None

    lineno, raw, header = rows[0]
    if len(header) != 2:
        raise InstanceError("header must be 'n Q'", lineno, 1)
    n = number(lineno, raw, header[0], int)
    cap = number(lineno, raw, header[1])
    if len(rows) - 1 != 2 * n + 2:
        last = rows[-1][0]
        raise InstanceError(f"expected {2 * n + 2} vertex lines, found {len(rows) - 1}", last, 1)
    xy, q, tw = [], [], []
    for expected_id, (lineno, raw, toks) in enumerate(rows[1:]):
        if len(toks) != 6:
            raise InstanceError("vertex line must be 'id x y q alpha beta'", lineno, 1)
        vid = number(lineno, raw, toks[0], int)
        if vid != expected_id:
            raise InstanceError(f"vertex ids must be consecutive, expected {expected_id}", lineno, 1)
        x, y, w, a, b = (number(lineno, raw, tok) for tok in toks[1:])
        xy.append((x, y))
        q.append(w)
        tw.append((a, b))
    travel = [[round(math.dist(p1, p2), 2) for p2 in xy] for p1 in xy]
    return make_instance(n, cap, q, tw, travel, name=name)


def parse_instance(text: str, format: str = "auto", name: str = "instance") -> Instance:
    """Parse ``canonical_json`` or ``benchmark_text`` (``auto`` sniffs the first byte)."""
    if format == "auto":
        format = "canonical_json" if text.lstrip().startswith("{") else "benchmark_text"
    if format == "canonical_json":
        return _from_json(text)
    if format == "benchmark_text":
        return _from_benchmark(text, name)
    raise ValueError(f"unknown instance format {format!r}")


def small_paper_instance() -> Instance:
    """Three-request worked example (Q = 15); one vehicle, optimum 166.74."""
    upper = [
        [0, 25.73, 17.37, 25.69, 16.1, 26.72, 10.55, 0],
        [0, 38.68, 43.65, 41.29, 26.35, 26.35, 25.73],
        [0, 9.15, 9.97, 44.02, 27.62, 17.37],
        [0, 18.22, 52.39, 35.36, 25.69],
        [0, 40.26, 26.38, 16.1],
        [0, 17.66, 26.72],
        [0, 10.55],
        [0],
    ]
    travel = [[0.0] * 8 for _ in range(8)]
    for i, row in enumerate(upper):
        for k, t in enumerate(row):
            travel[i][i + k] = travel[i + k][i] = t
    weights = [0, 8, 7, 8, -8, -7, -8, 0]
    windows = [(0, 200), (50, 70), (80, 110), (100, 130), (80, 110), (160, 190), (170, 200), (0, 200)]
    return make_instance(3, 15, weights, windows, travel, name="small-example")


def simulate_route(inst: Instance, path: Sequence[int]):
    """Check a depot-to-depot path; returns a :class:`Route` or an :class:`Infeasible`."""
    path = tuple(path)
    end = inst.end
    if len(path) < 2 or path[0] != 0 or path[-1] != end:
        return Infeasible("route must start at 0 and end at the end depot", 0)
    if len(set(path)) != len(path):
        return Infeasible("repeated vertex", len(path) - 1)
    t = inst.travel
    time, load, onboard = 0.0, 0.0, set()
    for k in range(1, len(path)):
        i, j = path[k - 1], path[k]
        if not 0 < j <= end:
            return Infeasible(f"invalid vertex {j}", k)
        a, b = inst.windows[j]
        time = max(time + t[i][j], a)
        if time > b + EPS:
            return Infeasible("time window", k)
        if inst.is_pickup(j):
            onboard.add(j + inst.n)
        elif inst.is_delivery(j):
            if j not in onboard:
                return Infeasible("precedence", k)
            onboard.remove(j)
        elif j == end and onboard:
            return Infeasible("pairing", k)
        load += inst.weights[j]
        if load > inst.capacity + EPS:
            return Infeasible("capacity", k)
    return Route(path, inst.path_cost(path))


class OracleTooLarge(ValueError):
    pass


def enumerate_routes_oracle(inst: Instance, max_pairs: int = 5, include_empty_route: bool = False) -> list:
    """All feasible elementary routes by exhaustive DFS, in lexicographic path order.

    Prunes only on windows, capacity and pairing; no dominance.
    """
    if inst.n > max_pairs:
        raise OracleTooLarge(f"oracle limited to {max_pairs} pairs, instance has {inst.n}")
    n, end, t = inst.n, inst.end, inst.travel
    alpha = [w[0] for w in inst.windows]
    beta = [w[1] for w in inst.windows]
    q, cap = inst.weights, inst.capacity
    routes = []
    path = [0]
    visited = [False] * (end + 1)
    visited[0] = True

    def dfs(i, time, load, onboard):
        for j in range(1, end + 1):
            if visited[j]:
                continue
            if j == end:
                if onboard or (len(path) == 1 and not include_empty_route):
                    continue
            elif j > n:
                if not onboard >> j & 1:
                    continue
            elif load + q[j] > cap + EPS:
                continue
            arr = max(time + t[i][j], alpha[j])
            if arr > beta[j] + EPS:
                continue
            path.append(j)
            if j == end:
                routes.append(Route(tuple(path), inst.path_cost(path)))
            else:
                visited[j] = True
                nxt = onboard | (1 << (j + n)) if j <= n else onboard & ~(1 << j)
                dfs(j, arr, load + q[j], nxt)
                visited[j] = False
            path.pop()

    dfs(0, 0.0, 0.0, 0)
    routes.sort(key=lambda r: r.path)
    return routes


def route_pair_mask(inst: Instance, path: Sequence[int]) -> int:
    return sum(1 << (v - 1) for v in set(path) if inst.is_pickup(v))


@dataclass
class OracleSolution:
    vehicles: int
    cost: float
    routes: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.vehicles >= 0


def oracle_optimum(inst: Instance, routes=None, max_pairs: int = 5) -> OracleSolution:
    """Lexicographic optimum (vehicles, then cost) by DP over request subsets."""
    if routes is None:
        routes = enumerate_routes_oracle(inst, max_pairs)
    best = {}
    for r in routes:
        m = route_pair_mask(inst, r.path)
        if m not in best or r.cost < best[m].cost - 1e-12:
            best[m] = r
    full = (1 << inst.n) - 1
    inf = (math.inf, math.inf)
    dp = [inf] * (full + 1)
    choice = [0] * (full + 1)
    dp[0] = (0, 0.0)
    for mask in range(1, full + 1):
        low = mask & -mask
        sub = mask
        while sub:
            if sub & low and sub in best and dp[mask ^ sub] != inf:
                v, c = dp[mask ^ sub]
                cand = (v + 1, c + best[sub].cost)
                if cand[0] < dp[mask][0] or (cand[0] == dp[mask][0] and cand[1] < dp[mask][1] - 1e-9):
                    dp[mask] = cand
                    choice[mask] = sub
            sub = (sub - 1) & mask
    if dp[full] == inf:
        return OracleSolution(-1, math.inf, [])
    chosen, mask = [], full
    while mask:
        chosen.append(best[choice[mask]])
        mask ^= choice[mask]
    chosen.sort(key=lambda r: r.path)
    return OracleSolution(dp[full][0], dp[full][1], chosen)


def random_instance(pairs: int, seed: int, capacity: float = 15.0) -> Instance:
    """Random instance shaped after the small example's magnitudes.

    Every request gets windows anchored on a visit time reachable from the
    depot, so each request is servable by its own vehicle.
    """
    rng = random.Random(seed)
    nv = 2 * pairs + 2
    pts = [(rng.uniform(0, 100), rng.uniform(0, 100)) for _ in range(nv - 1)]
    pts.append(pts[0])
    travel = [[round(math.dist(a, b), 2) for b in pts] for a in pts]
    weights = [0] * nv
    windows = [None] * nv

    def window(anchor):
        width = rng.randint(20, 60)
        lo = max(0, math.floor(anchor - rng.uniform(0, width)))
        return (lo, max(lo + width, math.ceil(anchor)))

    for p in range(1, pairs + 1):
        d = p + pairs
        w = rng.randint(5, 10)
        weights[p], weights[d] = w, -w
        anchor_p = travel[0][p] + rng.uniform(0, 100)
        anchor_d = anchor_p + travel[p][d] + rng.uniform(0, 40)
        windows[p] = window(anchor_p)
        windows[d] = window(anchor_d)
    horizon = max([windows[d][1] + travel[d][nv - 1] for d in range(pairs + 1, nv - 1)], default=0.0)
    horizon = math.ceil(horizon)
    windows[0] = windows[nv - 1] = (0, horizon)
    return make_instance(pairs, capacity, weights, windows, travel, name=f"rand-{pairs}-{seed}")
