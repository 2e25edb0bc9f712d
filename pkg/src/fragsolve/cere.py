"""Column enumeration for row elimination: absorb a node by replacing every
fragment entering or leaving it with their pairwise concatenations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .fragments import Fragment, NodeH, nodes_of
from .instance import EPS


@dataclass
class AbsorptionPlan:
    node: NodeH
    incoming: list
    outgoing: list
    joined: list = field(default_factory=list)
    absorbed: bool = False

    @property
    def delta(self) -> int:
        return len(self.joined) - len(self.incoming) - len(self.outgoing)

    def summary(self) -> dict:
        return {"node": [self.node.vertex, sorted(self.node.onboard)], "incoming": len(self.incoming),
                "outgoing": len(self.outgoing), "joined": len(self.joined), "delta": self.delta,
                "absorbed": self.absorbed}


def join_fragments(f1: Fragment, f2: Fragment):
    """Concatenate ``f1`` and ``f2`` at their shared node; None if the result is
    not elementary or has an empty start window."""
    if f1.last != f2.first or f1.end_onboard != f2.start_onboard:
        raise ValueError(f"{f1!r} does not end where {f2!r} starts")
    path = f1.path + f2.path[1:]
    if len(set(path)) != len(path):
        return None
    # max(max(t + A1, B1) + A2, B2) = max(t + A1 + A2, max(B1 + A2, B2))
    A = f1.A + f2.A
    B = max(f1.B + f2.A, f2.B)
    if f1.B > f2.latest_start + EPS:
        return None
    latest = min(f1.latest_start, f2.latest_start - f1.A)
    if latest < f1.earliest_start - EPS:
        return None
    return Fragment(path, f1.start_onboard, A, B, f1.earliest_start, latest, f1.cost + f2.cost,
                    f2.end_onboard, f1.covered | f2.covered)


def _is_depot(node: NodeH, end: int) -> bool:
    return node.vertex == 0 or node.vertex == end


def absorb_nodes(fragments, nodes, fl_context=None, max_increase: float = 0, restrict_to=None,
                 end_vertex: int = None):
    """Absorb nodes (cheapest |in|*|out| first) while the post-filter growth
    stays below ``max_increase``; repeated until a full pass absorbs nothing.

    Returns ``(fragments, nodes, plans)``.
    """
    frags = set(fragments)
    if end_vertex is None:
        end_vertex = max((f.last for f in frags), default=0)
    plans = []
    if max_increase == -math.inf:
        return sorted(frags), sorted(nodes_of(frags)), plans
    restrict = set(restrict_to) if restrict_to is not None else None
    changed = True
    while changed:
        changed = False
        incoming, outgoing = {}, {}
        for f in frags:
            outgoing.setdefault(f.start_node, []).append(f)
            incoming.setdefault(f.end_node, []).append(f)
        live = set(incoming) | set(outgoing)
        cands = [v for v in live if not _is_depot(v, end_vertex) and (restrict is None or v in restrict)]
        cands.sort(key=lambda v: (len(incoming.get(v, [])) * len(outgoing.get(v, [])), v.key))
        for node in cands:
            f_in = sorted(f for f in frags if f.end_node == node)
            f_out = sorted(f for f in frags if f.start_node == node)
            if not f_in and not f_out:
                continue
            plan = AbsorptionPlan(node, f_in, f_out)
            joined = []
            budget = len(f_in) + len(f_out) + max_increase
            for a in f_in:
                for b in f_out:
                    g = join_fragments(a, b)
                    if g is None:
                        continue
                    if fl_context and not fl_context.keep_fragment(g):
                        continue
                    joined.append(g)
                if len(joined) >= budget:
                    break
            plan.joined = joined
            plan.absorbed = plan.delta < max_increase
            plans.append(plan)
            if plan.absorbed:
                frags.difference_update(f_in)
                frags.difference_update(f_out)
                frags.update(joined)
                changed = True
    return sorted(frags), sorted(nodes_of(frags)), plans
