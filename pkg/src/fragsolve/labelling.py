"""Forward and backward SPPRC labelling for PDPTW pricing.

Open delivery sets are bitmasks over vertex ids.  Subset-row cut states are a
bitmask with one bit per active cut: the bit holds the parity of visits to the
cut's vertex set, and a wrap 1 -> 0 charges the (non-positive) cut dual.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Optional

from .instance import EPS, Instance


@dataclass
class PricingDuals:
    """Dual information needed to price a route.

    ``pi`` has one entry per vertex (depots 0).  ``route_const`` is charged on
    the edge leaving the start depot: 1 when minimising vehicles, ``-sigma``
    under a vehicle-count row.  ``cost_scale`` multiplies travel costs (0 for
    the vehicle objective).  ``cuts`` holds ``(vertex set, mu)`` with mu <= 0.
    """

    pi: list
    route_const: float = 0.0
    cost_scale: float = 1.0
    cuts: list = field(default_factory=list)

    @classmethod
    def zero(cls, inst: Instance) -> "PricingDuals":
        return cls([0.0] * inst.num_vertices)

    def edge(self, inst: Instance, i: int, j: int) -> float:
        rc = self.cost_scale * inst.travel[i][j] - 0.5 * self.pi[i] - 0.5 * self.pi[j]
        if i == 0:
            rc += self.route_const
        return rc

    def cut_masks(self, inst: Instance) -> list:
        masks = [0] * inst.num_vertices
        for k, (members, _) in enumerate(self.cuts):
            for v in members:
                masks[v] |= 1 << k
        return masks

    def penalty(self, bits: int) -> float:
        """Sum of -mu over the cuts selected by ``bits``."""
        total, k = 0.0, 0
        while bits:
            if bits & 1:
                total -= self.cuts[k][1]
            bits >>= 1
            k += 1
        return total

    def path_reduced_cost(self, inst: Instance, path) -> float:
        rc = sum(self.edge(inst, i, j) for i, j in zip(path, path[1:]))
        for members, mu in self.cuts:
            rc -= mu * (sum(1 for v in path if v in members) // 2)
        return rc


class Label:
    __slots__ = ("head", "rcost", "time", "load", "open", "pred", "src", "hops", "dead")

    def __init__(self, head, rcost, time, load, open, pred=None, src=0, hops=0):
        self.head = head
        self.rcost = rcost
        self.time = time
        self.load = load
        self.open = open
        self.pred = pred
        self.src = src
        self.hops = hops
        self.dead = False

    @property
    def path(self) -> tuple:
        out, lab = [], self
        while lab is not None:
            out.append(lab.head)
            lab = lab.pred
        return tuple(reversed(out))

    def __repr__(self):
        return f"Label(head={self.head}, rc={self.rcost:.4f}, t={self.time:.2f}, q={self.load}, open={self.open:b})"


class BackwardLabel:
    """Suffix state at ``head``: ``open`` is the onboard set when departing head,
    ``latest_start`` the latest service start at head keeping the suffix feasible."""

    __slots__ = ("head", "rcost", "latest_start", "load", "open", "succ", "src", "hops", "dead")

    def __init__(self, head, rcost, latest_start, load, open, succ=None, src=0, hops=0):
        self.head = head
        self.rcost = rcost
        self.latest_start = latest_start
        self.load = load
        self.open = open
        self.succ = succ
        self.src = src
        self.hops = hops
        self.dead = False

    @property
    def path(self) -> tuple:
        out, lab = [], self
        while lab is not None:
            out.append(lab.head)
            lab = lab.succ
        return tuple(out)

    def __repr__(self):
        return (f"BackwardLabel(head={self.head}, rc={self.rcost:.4f}, L={self.latest_start:.2f}, "
                f"q={self.load}, open={self.open:b})")


def open_mask(vertices) -> int:
    return sum(1 << v for v in vertices)


def mask_vertices(mask: int) -> frozenset:
    out, v = [], 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return frozenset(out)


def hop_cap(inst: Instance) -> Optional[int]:
    """Edge-count cap, needed only when zero-time cycles among requests exist."""
    t = inst.travel
    for i in inst.requests:
        for j in inst.requests:
            if i != j and t[i][j] <= 0:
                return 2 * inst.n + 2
    return None


def initial_label(inst: Instance) -> Label:
    return Label(0, 0.0, inst.windows[0][0], 0.0, 0)


def extend_forward(inst: Instance, duals: PricingDuals, lab: Label, j: int, cut_masks=None) -> Optional[Label]:
    """Extend ``lab`` to vertex ``j``; None when the extension is infeasible."""
    i = lab.head
    n, end = inst.n, inst.end
    if j == i or j == 0 or i == end:
        return None
    open_ = lab.open
    if j == end:
        if open_ or i == 0:
            return None
    elif j <= n:
        if open_ >> (j + n) & 1:
            return None
        open_ |= 1 << (j + n)
    else:
        if not open_ >> j & 1:
            return None
        open_ &= ~(1 << j)
    load = lab.load + inst.weights[j]
    if load > inst.capacity + EPS:
        return None
    a, b = inst.windows[j]
    time = lab.time + inst.travel[i][j]
    if time < a:
        time = a
    if time > b + EPS:
        return None
    rc = lab.rcost + duals.edge(inst, i, j)
    src = lab.src
    if duals.cuts:
        masks = cut_masks if cut_masks is not None else duals.cut_masks(inst)
        m = masks[j]
        if m:
            rc += duals.penalty(src & m)
            src ^= m
    return Label(j, rc, time, load, open_, lab, src, lab.hops + 1)


def dominates(l1: Label, l2: Label, duals: Optional[PricingDuals] = None, use_hops: bool = False) -> bool:
    if l1.head != l2.head:
        raise ValueError("dominance is only defined between labels with the same head")
    if l1.open != l2.open or l1.time > l2.time + 1e-9 or l1.load > l2.load + 1e-9:
        return False
    if use_hops and l1.hops > l2.hops:
        return False
    rc = l1.rcost
    if duals is not None and duals.cuts:
        rc += duals.penalty(l1.src & ~l2.src)
    return rc <= l2.rcost + 1e-9


def dominates_backward(b1: BackwardLabel, b2: BackwardLabel, duals: Optional[PricingDuals] = None,
                       use_hops: bool = False) -> bool:
    if b1.head != b2.head:
        raise ValueError("dominance is only defined between labels with the same head")
    if b1.open != b2.open or b1.latest_start < b2.latest_start - 1e-9 or b1.load > b2.load + 1e-9:
        return False
    if use_hops and b1.hops > b2.hops:
        return False
    rc = b1.rcost
    if duals is not None and duals.cuts:
        rc += duals.penalty(b1.src & ~b2.src)
    return rc <= b2.rcost + 1e-9


def _insert(bucket: list, lab, dom, duals, use_hops) -> bool:
    for other in bucket:
        if dom(other, lab, duals, use_hops):
            return False
    keep = []
    for other in bucket:
        if dom(lab, other, duals, use_hops):
            other.dead = True
        else:
            keep.append(other)
    keep.append(lab)
    bucket[:] = keep
    return True


def _successors(inst: Instance) -> list:
    t, w = inst.travel, inst.windows
    succ = []
    for i in range(inst.num_vertices):
        succ.append([j for j in range(1, inst.num_vertices)
                     if j != i and w[i][0] + t[i][j] <= w[j][1] + EPS])
    return succ


def _predecessors(inst: Instance) -> list:
    t, w = inst.travel, inst.windows
    pred = []
    for j in range(inst.num_vertices):
        pred.append([i for i in range(inst.num_vertices - 1)
                     if i != j and w[i][0] + t[i][j] <= w[j][1] + EPS])
    return pred


@dataclass
class LabelPool:
    """Undominated labels bucketed by (head, open set)."""

    buckets: dict

    def labels(self):
        for key in sorted(self.buckets):
            yield from self.buckets[key]

    def at(self, head: int, open_: int) -> list:
        return self.buckets.get((head, open_), [])

    def __len__(self):
        return sum(len(b) for b in self.buckets.values())


def solve_pricing_forward(inst: Instance, duals: PricingDuals, mode: str = "all_negative",
                          max_routes: Optional[int] = None, tol: float = 1e-6):
    """Label-setting in nondecreasing time order (ties: vertex, insertion).

    ``all_negative`` returns the end-depot labels with reduced cost below
    ``-tol`` sorted by reduced cost; ``full_frontier`` returns a
    :class:`LabelPool` of every undominated label.
    """
    if mode not in ("all_negative", "full_frontier"):
        raise ValueError(f"unknown pricing mode {mode!r}")
    cap = hop_cap(inst)
    use_hops = cap is not None
    masks = duals.cut_masks(inst) if duals.cuts else None
    succ = _successors(inst)
    end = inst.end
    buckets: dict = {}
    seq = itertools.count()
    start = initial_label(inst)
    buckets[(0, 0)] = [start]
    heap = [(start.time, 0, next(seq), start)]
    complete = []
    while heap:
        _, _, _, lab = heapq.heappop(heap)
        if lab.dead:
            continue
        if cap is not None and lab.hops >= cap:
            continue
        for j in succ[lab.head]:
            new = extend_forward(inst, duals, lab, j, masks)
            if new is None:
                continue
            if j == end:
                if mode == "all_negative":
                    if new.rcost < -tol:
                        complete.append(new)
                    continue
            key = (j, new.open)
            bucket = buckets.setdefault(key, [])
            if _insert(bucket, new, dominates, duals, use_hops) and j != end:
                heapq.heappush(heap, (new.time, j, next(seq), new))
    if mode == "full_frontier":
        return LabelPool(buckets)
    complete.sort(key=lambda l: (l.rcost, l.path))
    out, seen = [], set()
    for lab in complete:
        p = lab.path
        if p not in seen:
            seen.add(p)
            out.append(lab)
            if max_routes is not None and len(out) >= max_routes:
                break
    return out


def initial_backward_label(inst: Instance) -> BackwardLabel:
    return BackwardLabel(inst.end, 0.0, inst.windows[inst.end][1], 0.0, 0)


def _mask_load(inst: Instance, mask: int) -> float:
    load, v = 0.0, 0
    while mask:
        if mask & 1:
            load -= inst.weights[v]
        mask >>= 1
        v += 1
    return load


def extend_backward(inst: Instance, duals: PricingDuals, lab: BackwardLabel, i: int,
                    cut_masks=None) -> Optional[BackwardLabel]:
    """Prepend vertex ``i`` to the suffix starting at ``lab.head``."""
    j = lab.head
    n, end = inst.n, inst.end
    if i == j or i == end or j == 0:
        return None
    if i == 0 and j == end:
        return None
    # onboard set on arrival at j, i.e. when departing i
    open_ = lab.open
    if j == end:
        open_ = 0
    elif j <= n:
        if not open_ >> (j + n) & 1:
            return None
        open_ &= ~(1 << (j + n))
    else:
        if open_ >> j & 1:
            return None
        open_ |= 1 << j
    if i == 0:
        if open_:
            return None
    elif i <= n:
        if not open_ >> (i + n) & 1:
            return None
        if _mask_load(inst, open_ & ~(1 << (i + n))) > inst.capacity + EPS:
            return None
    else:
        if open_ >> i & 1:
            return None
        if _mask_load(inst, open_ | (1 << i)) > inst.capacity + EPS:
            return None
    load = _mask_load(inst, open_)
    if load > inst.capacity + EPS:
        return None
    a, b = inst.windows[i]
    latest = lab.latest_start - inst.travel[i][j]
    if latest > b:
        latest = b
    if latest < a - EPS:
        return None
    rc = lab.rcost + duals.edge(inst, i, j)
    src = lab.src
    if duals.cuts:
        masks = cut_masks if cut_masks is not None else duals.cut_masks(inst)
        m = masks[i]
        if m:
            rc += duals.penalty(src & m)
            src ^= m
    return BackwardLabel(i, rc, latest, load, open_, lab, src, lab.hops + 1)


def solve_pricing_backward(inst: Instance, duals: PricingDuals) -> LabelPool:
    """Full undominated backward pool, processed in nonincreasing latest start."""
    cap = hop_cap(inst)
    use_hops = cap is not None
    masks = duals.cut_masks(inst) if duals.cuts else None
    pred = _predecessors(inst)
    start = initial_backward_label(inst)
    buckets: dict = {(inst.end, 0): [start]}
    seq = itertools.count()
    heap = [(-start.latest_start, inst.end, next(seq), start)]
    while heap:
        _, _, _, lab = heapq.heappop(heap)
        if lab.dead:
            continue
        if cap is not None and lab.hops >= cap:
            continue
        for i in pred[lab.head]:
            new = extend_backward(inst, duals, lab, i, masks)
            if new is None:
                continue
            bucket = buckets.setdefault((i, new.open), [])
            if _insert(bucket, new, dominates_backward, duals, use_hops) and i != 0:
                heapq.heappush(heap, (-new.latest_start, i, next(seq), new))
    return LabelPool(buckets)
