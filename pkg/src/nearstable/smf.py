"""Stable multicommodity flow: verification and iterative rounding.

The pipeline takes a fractional stable flow (from the instance file or the
bundled generator), rounds each commodity to integers along fractional
cycles and source-sink paths, and emits revised aggregate capacities.
Commodity-specific capacities never change; aggregate capacities move by at
most k - 1 (k = number of commodities).  In the default mode every
commodity's flow size drifts by strictly less than one; the balanced mode
trades that for an aggregate drift below one with per-commodity drift
below two.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Mapping

from .errors import InputError, InternalError, PreconditionError, UnstableInputError
from .model import CapacityRevision, FlowInstance, require_valid
from .scarf import TraceSink

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class BlockingWalk:
    commodity: int
    vertices: tuple[str, ...]
    arcs: tuple[str, ...]


@dataclass(frozen=True)
class FlowReport:
    kirchhoff_violations: tuple
    capacity_violations: tuple
    commodity_capacity_violations: tuple
    negative_values: tuple
    blocking_walks: tuple

    @property
    def feasible(self) -> bool:
        return not (
            self.kirchhoff_violations
            or self.capacity_violations
            or self.commodity_capacity_violations
            or self.negative_values
        )

    @property
    def stable(self) -> bool:
        return not self.blocking_walks

    @property
    def ok(self) -> bool:
        return self.feasible and self.stable


def flow_value(flow: Mapping, arc: str, j: int) -> Fraction:
    return Fraction(flow.get((arc, j), 0))


def flow_size(inst: FlowInstance, flow: Mapping, j: int) -> Fraction:
    source = inst.commodities[j - 1].source
    return sum((flow_value(flow, a, j) for a in inst.outgoing()[source]), ZERO)


def aggregate_size(inst: FlowInstance, flow: Mapping) -> Fraction:
    return sum((flow_size(inst, flow, j) for j in range(1, inst.num_commodities + 1)), ZERO)


def _find_blocking_walk(inst: FlowInstance, flow: Mapping, j: int, capacity, ccap) -> BlockingWalk | None:
    """Breadth-first search over usable arcs for one commodity.

    An arc is usable when it has commodity capacity left and either spare
    aggregate capacity or a strictly less preferred commodity routed on it.
    Valid walk starts leave the source or improve on a positive outgoing
    arc at their tail; valid ends enter the sink or improve at their head.
    Every blocking walk collapses to such a path, so the search is
    complete.
    """
    source = inst.commodities[j - 1].source
    sink = inst.commodities[j - 1].sink
    arcs = inst.arcs
    arc_map = inst.arc_by_id()
    outgoing, incoming = inst.outgoing(), inst.incoming()
    totals = {a.id: sum((flow_value(flow, a.id, i) for i in range(1, inst.num_commodities + 1)), ZERO) for a in arcs}

    def usable(aid: str) -> bool:
        if flow_value(flow, aid, j) >= ccap[(aid, j)]:
            return False
        if totals[aid] < capacity[aid]:
            return True
        ranks = inst.arc_prefs[aid].ranks()
        return any(
            flow_value(flow, aid, other) > 0 and ranks[j] < ranks[other]
            for other in range(1, inst.num_commodities + 1)
            if other != j
        )

    def improves_at(v: str, aid: str, candidates) -> bool:
        ranks = inst.vertex_prefs[(v, j)].ranks()
        return any(flow_value(flow, b, j) > 0 and ranks[aid] < ranks[b] for b in candidates)

    usable_ids = [a.id for a in arcs if usable(a.id)]
    usable_set = set(usable_ids)
    starts = [
        aid
        for aid in usable_ids
        if arc_map[aid].tail == source or improves_at(arc_map[aid].tail, aid, outgoing[arc_map[aid].tail])
    ]

    def is_end(aid: str) -> bool:
        head = arc_map[aid].head
        return head == sink or improves_at(head, aid, incoming[head])

    parent: dict[str, str | None] = {}
    queue = []
    for aid in starts:
        if aid not in parent:
            parent[aid] = None
            queue.append(aid)
    pos = 0
    while pos < len(queue):
        aid = queue[pos]
        pos += 1
        if is_end(aid):
            chain = [aid]
            while parent[chain[-1]] is not None:
                chain.append(parent[chain[-1]])
            chain.reverse()
            vertices = [arc_map[chain[0]].tail] + [arc_map[c].head for c in chain]
            return BlockingWalk(commodity=j, vertices=tuple(vertices), arcs=tuple(chain))
        head = arc_map[aid].head
        for nxt in outgoing[head]:
            if nxt in usable_set and nxt not in parent:
                parent[nxt] = aid
                queue.append(nxt)
    return None


def verify_flow(
    inst: FlowInstance,
    flow: Mapping,
    capacity: Mapping | None = None,
    commodity_capacity: Mapping | None = None,
) -> FlowReport:
    """Kirchhoff, capacity, and blocking-walk report for a multiflow.

    Capacity overrides allow re-checking a rounded flow against revised
    capacities.  Weak preference orders are handled directly.
    """
    capacity = dict(inst.capacity) if capacity is None else capacity
    ccap = dict(inst.commodity_capacity) if commodity_capacity is None else commodity_capacity
    k = inst.num_commodities
    missing = [a.id for a in inst.arcs if a.id not in capacity]
    missing += [key for a in inst.arcs for j in range(1, k + 1) if (key := (a.id, j)) not in ccap]
    if missing:
        raise InputError(f"capacities missing for: {missing[:5]}")
    negative = tuple(
        (a.id, j) for a in inst.arcs for j in range(1, k + 1) if flow_value(flow, a.id, j) < 0
    )
    commodity_violations = tuple(
        (a.id, j)
        for a in inst.arcs
        for j in range(1, k + 1)
        if flow_value(flow, a.id, j) > ccap[(a.id, j)]
    )
    capacity_violations = tuple(
        a.id
        for a in inst.arcs
        if sum((flow_value(flow, a.id, j) for j in range(1, k + 1)), ZERO) > capacity[a.id]
    )
    outgoing, incoming = inst.outgoing(), inst.incoming()
    kirchhoff = []
    for j in range(1, k + 1):
        com = inst.commodities[j - 1]
        for v in inst.vertices:
            if v in (com.source, com.sink):
                continue
            out_sum = sum((flow_value(flow, a, j) for a in outgoing[v]), ZERO)
            in_sum = sum((flow_value(flow, a, j) for a in incoming[v]), ZERO)
            if out_sum != in_sum:
                kirchhoff.append((v, j))
    blocking = []
    for j in range(1, k + 1):
        walk = _find_blocking_walk(inst, flow, j, capacity, ccap)
        if walk is not None:
            blocking.append(walk)
    return FlowReport(
        kirchhoff_violations=tuple(kirchhoff),
        capacity_violations=capacity_violations,
        commodity_capacity_violations=commodity_violations,
        negative_values=negative,
        blocking_walks=tuple(blocking),
    )


# ---------------------------------------------------------------------------
# fractional structures and rounding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentingStructure:
    kind: str  # "cycle" or "st_path"
    arcs: tuple  # (arc id, forward) along the traversal orientation
    vertices: tuple[str, ...]
    eps_up: Fraction  # step that raises forward arcs to the next integer
    eps_down: Fraction  # step that lowers forward arcs to the previous integer


def _is_integral(value: Fraction) -> bool:
    return value.denominator == 1


def find_fractional_structure(inst: FlowInstance, values: Mapping, j: int) -> AugmentingStructure:
    """A cycle or source-sink path of fractional arcs, in the undirected sense.

    Greedy walk preferring to start at the commodity's source, extending
    along the lowest-id unused fractional arc.  Flow conservation makes a
    dead end impossible anywhere except the source and the sink, so the
    walk always closes a cycle or connects the terminals; a closed walk
    that returns to its own start is reported as a cycle.
    """
    source = inst.commodities[j - 1].source
    sink = inst.commodities[j - 1].sink
    arc_map = inst.arc_by_id()
    fractional = [a.id for a in inst.arcs if not _is_integral(Fraction(values.get(a.id, 0)))]
    if not fractional:
        raise PreconditionError("no fractional arc to route")
    touching: dict[str, list[str]] = {}
    for aid in fractional:
        touching.setdefault(arc_map[aid].tail, []).append(aid)
        touching.setdefault(arc_map[aid].head, []).append(aid)
    if source in touching:
        start = source
    else:
        start = arc_map[fractional[0]].tail
    used: set[str] = set()
    vertices = [start]
    walk: list[tuple[str, bool]] = []
    reversed_once = False
    while True:
        current = vertices[-1]
        step = None
        for aid in touching.get(current, ()):
            if aid in used:
                continue
            arc = arc_map[aid]
            step = (aid, arc.tail == current)
            break
        if step is None:
            start_terminal = vertices[0] in (source, sink)
            if current not in (source, sink):
                raise InternalError("fractional walk stuck at an interior vertex")
            if start_terminal:
                break
            if reversed_once:
                raise InternalError("fractional walk stuck with a non-terminal endpoint")
            reversed_once = True
            vertices.reverse()
            walk.reverse()
            walk = [(aid, not fwd) for aid, fwd in walk]
            continue
        aid, forward = step
        used.add(aid)
        nxt = arc_map[aid].head if forward else arc_map[aid].tail
        if nxt in vertices:
            at = vertices.index(nxt)
            cycle_vertices = vertices[at:] + [nxt]
            cycle_walk = walk[at:] + [(aid, forward)]
            return _finish_structure(inst, values, j, "cycle", cycle_walk, cycle_vertices)
        vertices.append(nxt)
        walk.append((aid, forward))
    ends = (vertices[0], vertices[-1])
    if ends[0] == ends[1]:
        kind = "cycle"
    else:
        kind = "st_path"
        if vertices[0] != source:
            vertices.reverse()
            walk.reverse()
            walk = [(aid, not fwd) for aid, fwd in walk]
    return _finish_structure(inst, values, j, kind, walk, vertices)


def _finish_structure(inst, values, j, kind, walk, vertices) -> AugmentingStructure:
    if not walk:
        raise InternalError("empty fractional structure")
    up = []
    down = []
    for aid, forward in walk:
        v = Fraction(values[aid])
        to_floor = v - floor(v)
        to_ceil = 1 - to_floor
        if forward:
            up.append(to_ceil)
            down.append(to_floor)
        else:
            up.append(to_floor)
            down.append(to_ceil)
    return AugmentingStructure(
        kind=kind,
        arcs=tuple(walk),
        vertices=tuple(vertices),
        eps_up=min(up),
        eps_down=min(down),
    )


def _source_coefficient(inst: FlowInstance, structure: AugmentingStructure, j: int) -> int:
    """Net effect of a unit forward augmentation on the commodity's size."""
    source = inst.commodities[j - 1].source
    arc_map = inst.arc_by_id()
    sigma = 0
    for aid, forward in structure.arcs:
        if arc_map[aid].tail == source:
            sigma += 1 if forward else -1
    return sigma


def round_flow(inst: FlowInstance, flow: Mapping, balanced: bool = False, trace: TraceSink | None = None):
    """Round a feasible multiflow to adjacent integers, commodity by commodity.

    Cycles are rounded in whichever direction reaches an integer first;
    source-sink paths (and closed walks whose augmentation shifts the
    commodity's size) follow the size rule: shrink when already above the
    fractional size, grow otherwise.  Balanced mode keys the rule to the
    aggregate size instead.  Flow conservation holds after every single
    augmentation.
    """
    k = inst.num_commodities
    g = {(a.id, j): Fraction(flow.get((a.id, j), 0)) for a in inst.arcs for j in range(1, k + 1)}
    f_sizes = {j: flow_size(inst, flow, j) for j in range(1, k + 1)}
    f_total = sum(f_sizes.values(), ZERO)
    g_sizes = dict(f_sizes)
    g_total = f_total
    steps = []
    outgoing, incoming = inst.outgoing(), inst.incoming()
    for j in range(1, k + 1):
        com = inst.commodities[j - 1]
        guard = 0
        while True:
            per_arc = {a.id: g[(a.id, j)] for a in inst.arcs}
            if all(_is_integral(v) for v in per_arc.values()):
                break
            guard += 1
            if guard > len(inst.arcs) + 1:
                raise InternalError("rounding failed to make progress")
            structure = find_fractional_structure(inst, per_arc, j)
            sigma = _source_coefficient(inst, structure, j)
            if structure.kind == "cycle" and sigma == 0:
                use_up = structure.eps_up < structure.eps_down
            else:
                if balanced:
                    grow = g_total < f_total
                    if grow and g_sizes[j] > f_sizes[j] + 1:
                        grow = False
                    elif not grow and g_sizes[j] < f_sizes[j] - 1:
                        grow = True
                else:
                    grow = g_sizes[j] <= f_sizes[j]
                if sigma >= 0:
                    use_up = grow
                else:
                    use_up = not grow
            eps = structure.eps_up if use_up else structure.eps_down
            delta = eps if use_up else -eps
            for aid, forward in structure.arcs:
                sign = 1 if forward == use_up else -1
                g[(aid, j)] += sign * eps
                if g[(aid, j)] < 0:
                    raise InternalError("augmentation drove a flow value negative")
            size_shift = sigma * delta
            g_sizes[j] += size_shift
            g_total += size_shift
            if abs(g_sizes[j] - f_sizes[j]) >= (2 if balanced else 1):
                raise InternalError("per-commodity size drift bound violated")
            if balanced and abs(g_total - f_total) >= 1:
                raise InternalError("aggregate size drift bound violated")
            for v in inst.vertices:
                if v in (com.source, com.sink):
                    continue
                out_sum = sum((g[(a, j)] for a in outgoing[v]), ZERO)
                in_sum = sum((g[(a, j)] for a in incoming[v]), ZERO)
                if out_sum != in_sum:
                    raise InternalError("augmentation broke flow conservation")
            steps.append(
                {
                    "commodity": j,
                    "kind": structure.kind,
                    "arcs": [aid for aid, _ in structure.arcs],
                    "step": str(eps),
                    "direction": "up" if use_up else "down",
                }
            )
            if trace is not None:
                trace(
                    f"round commodity {j}: {structure.kind} of {len(structure.arcs)} arcs, "
                    f"{'up' if use_up else 'down'} by {eps}"
                )
    for a in inst.arcs:
        for j in range(1, k + 1):
            old = Fraction(flow.get((a.id, j), 0))
            new = g[(a.id, j)]
            if _is_integral(old):
                if new != old:
                    raise InternalError("integral flow value changed during rounding")
            elif new not in (floor(old), floor(old) + 1):
                raise InternalError("rounded value is not an adjacent integer")
    g_int = {key: int(v) for key, v in g.items()}
    return g_int, steps


@dataclass(frozen=True)
class FlowCapacities:
    aggregate: dict  # arc id -> int
    per_commodity: dict  # (arc id, commodity) -> int


def compute_flow_capacities(inst: FlowInstance, flow: Mapping, rounded: Mapping) -> FlowCapacities:
    """Revised capacities under which the rounded flow stays stable.

    Tight capacities follow the rounded flow exactly; loose ones only ever
    grow, and only up to the rounded usage.
    """
    k = inst.num_commodities
    for a in inst.arcs:
        for j in range(1, k + 1):
            if flow_value(flow, a.id, j) == 0 and rounded.get((a.id, j), 0) != 0:
                raise PreconditionError(f"support containment fails on arc {a.id!r} commodity {j}")
            if not _is_integral(Fraction(rounded.get((a.id, j), 0))):
                raise PreconditionError("rounded flow must be integral")
    per_commodity = {}
    aggregate = {}
    for a in inst.arcs:
        total_f = sum((flow_value(flow, a.id, j) for j in range(1, k + 1)), ZERO)
        total_g = sum(int(rounded.get((a.id, j), 0)) for j in range(1, k + 1))
        for j in range(1, k + 1):
            cj = inst.commodity_capacity[(a.id, j)]
            gj = int(rounded.get((a.id, j), 0))
            per_commodity[(a.id, j)] = gj if flow_value(flow, a.id, j) == cj else max(gj, cj)
        c = inst.capacity[a.id]
        aggregate[a.id] = total_g if total_f == c else max(total_g, c)
    return FlowCapacities(aggregate=aggregate, per_commodity=per_commodity)


@dataclass(frozen=True)
class SmfResult:
    revision: CapacityRevision  # aggregate capacities
    capacities: FlowCapacities
    rounded: dict  # (arc, commodity) -> int
    certificate: dict
    rounding_steps: list


def round_stable_flow(
    inst: FlowInstance,
    flow: Mapping,
    balanced: bool = False,
    trace: TraceSink | None = None,
) -> SmfResult:
    """Round a stable fractional flow and certify the revised capacities.

    The input must verify as feasible and stable; otherwise the error
    carries the witness blocking walk.  Certificates assert: commodity
    capacities unchanged, aggregate revision at most k - 1 per arc, the
    mode's size-drift bounds, and stability of the rounded flow under the
    revised capacities.
    """
    require_valid(inst)
    report = verify_flow(inst, flow)
    if not report.feasible:
        raise PreconditionError(
            f"input flow infeasible: kirchhoff={report.kirchhoff_violations} "
            f"capacity={report.capacity_violations + report.commodity_capacity_violations}"
        )
    if not report.stable:
        raise UnstableInputError("input flow is not stable", witness=report.blocking_walks[0])
    k = inst.num_commodities
    rounded, steps = round_flow(inst, flow, balanced=balanced, trace=trace)
    caps = compute_flow_capacities(inst, flow, rounded)
    for key, value in caps.per_commodity.items():
        if value != inst.commodity_capacity[key]:
            raise InternalError(f"commodity capacity changed at {key}")
    revision = CapacityRevision(original=dict(inst.capacity), revised=caps.aggregate)
    if revision.max_deviation() > max(k - 1, 0):
        raise InternalError(f"aggregate capacity revision exceeds {k - 1}")
    drift_limit = 2 if balanced else 1
    per_drift = {}
    for j in range(1, k + 1):
        drift = abs(flow_size(inst, rounded, j) - flow_size(inst, flow, j))
        if drift >= drift_limit:
            raise InternalError(f"size drift bound violated for commodity {j}")
        per_drift[j] = drift
    total_drift = abs(aggregate_size(inst, rounded) - aggregate_size(inst, flow))
    if balanced and total_drift >= 1:
        raise InternalError("aggregate size drift bound violated")
    if not balanced and total_drift >= k:
        raise InternalError("aggregate size drift exceeded the commodity sum bound")
    final = verify_flow(inst, rounded, capacity=caps.aggregate, commodity_capacity=caps.per_commodity)
    if not final.ok:
        raise InternalError("rounded flow is unstable under the revised capacities")
    certificate = {
        "pipeline": "smf",
        "mode": "balanced" if balanced else "default",
        "commodities": k,
        "bounds": {
            "max_capacity_deviation": revision.max_deviation(),
            "max_capacity_allowed": max(k - 1, 0),
            "per_commodity_drift": {str(j): str(per_drift[j]) for j in per_drift},
            "per_commodity_drift_allowed": f"<{drift_limit}",
            "aggregate_drift": str(total_drift),
        },
        "capacity": {
            a.id: {"original": inst.capacity[a.id], "revised": caps.aggregate[a.id]} for a in inst.arcs
        },
        "flow_sizes": {
            str(j): {
                "fractional": str(flow_size(inst, flow, j)),
                "rounded": str(flow_size(inst, rounded, j)),
            }
            for j in range(1, k + 1)
        },
        "verifier": {
            "stable": final.stable,
            "feasible": final.feasible,
        },
        "iterations": len(steps),
    }
    return SmfResult(
        revision=revision,
        capacities=caps,
        rounded=rounded,
        certificate=certificate,
        rounding_steps=steps,
    )
