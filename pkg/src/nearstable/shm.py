"""End-to-end solver for stable hypergraph matching with capacities.

The pipeline finds revised capacities within max-edge-size - 1 of the
originals together with an integral matching that is stable for them:

1. break preference ties deterministically,
2. append per-vertex saturation edges (strictly worst singletons), which
   forces every fractional stable matching to fill all capacities,
3. build the dominance problem whose matrix stacks the incidence rows over
   an identity block and solve it for a fractional stable point,
4. round iteratively: delete a capacity row whose fractional column mass is
   at most the maximum edge size (or, when a single fractional component
   remains, the aggregate capacity row), then re-maximize the size-weighted
   sum over the surviving equalities with all integer components fixed,
5. read the revised capacities off the rounded vector, strip the gadget
   edges, and verify stability of the result on the original instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .errors import InputError, InternalError, PreconditionError
from .model import CapacityRevision, HyperEdge, HypergraphInstance, require_valid
from .orders import WeakOrder, break_ties
from .polytope import LinearRow, LinearSystem, extreme_point
from .scarf import (
    DEFAULT_PIVOT_BUDGET,
    DominatingPoint,
    ScarfProblem,
    TraceSink,
    make_problem,
    solve_scarf,
)

ZERO = Fraction(0)
ONE = Fraction(1)


def break_instance_ties(inst: HypergraphInstance) -> HypergraphInstance:
    """Refine every vertex order to a strict one; fallback is declared edge order."""
    fallback = {e.id: i for i, e in enumerate(inst.edges)}
    return HypergraphInstance(
        vertices=inst.vertices,
        edges=inst.edges,
        capacities=dict(inst.capacities),
        preferences={v: break_ties(order, fallback) for v, order in inst.preferences.items()},
    )


def gadget_edge_ids(original: HypergraphInstance, gadgeted: HypergraphInstance) -> tuple[str, ...]:
    return tuple(e.id for e in gadgeted.edges[len(original.edges):])


def add_saturation_gadget(inst: HypergraphInstance) -> HypergraphInstance:
    """Append q(v) singleton edges per vertex, strictly worst in that order.

    With the gadget in place every fractional stable matching saturates
    every vertex, so the capacity rows can be imposed as equalities.
    """
    used = {e.id for e in inst.edges}
    edges = list(inst.edges)
    extra: dict[str, list[str]] = {v: [] for v in inst.vertices}
    for v in inst.vertices:
        for t in range(1, inst.capacities[v] + 1):
            eid = f"{v}~g{t}"
            while eid in used:
                eid += "~"
            used.add(eid)
            edges.append(HyperEdge(id=eid, vertices=(v,)))
            extra[v].append(eid)
    preferences = {}
    for v in inst.vertices:
        groups = list(inst.preferences[v].tie_groups)
        groups.extend((eid,) for eid in extra[v])
        preferences[v] = WeakOrder(tuple(groups))
    return HypergraphInstance(
        vertices=inst.vertices,
        edges=tuple(edges),
        capacities=dict(inst.capacities),
        preferences=preferences,
    )


@dataclass(frozen=True)
class ShmScarfBuild:
    problem: ScarfProblem
    columns: tuple[str, ...]  # scarf column -> edge id
    vertex_rows: dict  # vertex id -> row index
    fixed_zero: tuple[str, ...]  # edges forced to 0 (incident to a zero-capacity vertex)

    def expand(self, point: DominatingPoint) -> dict:
        """Fractional vector over all edges, zeros on the pre-fixed ones."""
        x = {eid: ZERO for eid in self.fixed_zero}
        for col, eid in enumerate(self.columns):
            x[eid] = point.x[col]
        return x


def build_shm_scarf(inst: HypergraphInstance) -> ShmScarfBuild:
    """Incidence rows (bound q(v)) over an identity block (bound 1).

    Vertex row orders follow the strict preferences; identity rows are
    trivially ordered.  Zero-capacity vertices cannot carry a positive row
    bound, so their incident edges are pre-fixed to zero and both the rows
    and columns leave the problem.
    """
    for v in inst.vertices:
        if not inst.preferences[v].is_strict:
            raise PreconditionError(f"vertex {v!r} still has ties; break them first")
    dead = {v for v in inst.vertices if inst.capacities[v] == 0}
    fixed_zero = tuple(e.id for e in inst.edges if any(v in dead for v in e.vertices))
    columns = tuple(e.id for e in inst.edges if e.id not in set(fixed_zero))
    col_index = {eid: i for i, eid in enumerate(columns)}
    m = len(columns)
    live_vertices = [v for v in inst.vertices if v not in dead]
    rows = []
    bounds = []
    orders = []
    vertex_rows = {}
    edge_map = inst.edge_by_id()
    for v in live_vertices:
        row = [ZERO] * m
        for eid in columns:
            if v in edge_map[eid].vertices:
                row[col_index[eid]] = ONE
        vertex_rows[v] = len(rows)
        rows.append(tuple(row))
        bounds.append(Fraction(inst.capacities[v]))
        ranked = [eid for group in inst.preferences[v].tie_groups for eid in group]
        orders.append(tuple(col_index[eid] for eid in ranked if eid in col_index))
    for eid in columns:
        row = [ZERO] * m
        row[col_index[eid]] = ONE
        rows.append(tuple(row))
        bounds.append(ONE)
        orders.append((col_index[eid],))
    problem = make_problem(rows, bounds, orders)
    return ShmScarfBuild(problem=problem, columns=columns, vertex_rows=vertex_rows, fixed_zero=fixed_zero)


def _is_integral(value: Fraction) -> bool:
    return value.denominator == 1


def _vertex_loads(inst: HypergraphInstance, values: Mapping) -> dict:
    loads = {v: ZERO for v in inst.vertices}
    for e in inst.edges:
        value = values.get(e.id, ZERO)
        if value == 0:
            continue
        for v in e.vertices:
            loads[v] += value
    return loads


def round_shm(inst: HypergraphInstance, x_star: Mapping, trace: TraceSink | None = None):
    """Iterative rounding of a saturating fractional stable vector.

    `inst` is the gadgeted instance; every vertex row must be tight at the
    input.  Returns the integral vector and a per-iteration trace of
    (deleted row, fractional count, objective value).
    """
    edges = [e.id for e in inst.edges]
    sizes = {e.id: len(e.vertices) for e in inst.edges}
    index = {eid: i for i, eid in enumerate(edges)}
    ell = inst.max_edge_size
    loads = _vertex_loads(inst, x_star)
    for v in inst.vertices:
        if loads[v] != inst.capacities[v]:
            raise PreconditionError(f"vertex row {v!r} is not tight at the fractional point")
    z = [Fraction(x_star[eid]) for eid in edges]
    incident = inst.incident()
    active = list(inst.vertices)
    aggregate_active = True
    aggregate_target = Fraction(sum(inst.capacities[v] for v in inst.vertices))
    objective = [Fraction(sizes[eid]) for eid in edges]
    steps = []
    deletions_cap = len(inst.vertices) + 1
    while any(not _is_integral(v) for v in z):
        fractional = {edges[i] for i, v in enumerate(z) if not _is_integral(v)}
        deleted = None
        for v in active:
            mass = sum(1 for eid in incident[v] if eid in fractional)
            if mass <= ell:
                deleted = v
                break
        if deleted is not None:
            active.remove(deleted)
            kind = "vertex"
        elif aggregate_active and len(fractional) <= 1:
            aggregate_active = False
            kind = "aggregate"
            deleted = "aggregate"
        else:
            raise InternalError("no deletable row although the vector is fractional")
        rows = []
        for v in active:
            coeffs = [ZERO] * len(edges)
            for eid in incident[v]:
                coeffs[index[eid]] = ONE
            rows.append(LinearRow(tuple(coeffs), "eq", Fraction(inst.capacities[v])))
        if aggregate_active:
            rows.append(LinearRow(tuple(objective), "eq", aggregate_target))
        system = LinearSystem(
            num_vars=len(edges),
            rows=tuple(rows),
            lower=(ZERO,) * len(edges),
            upper=(ONE,) * len(edges),
            fixed={i: z[i] for i in range(len(edges)) if _is_integral(z[i])},
        )
        previous_value = sum(objective[i] * z[i] for i in range(len(edges)))
        z = list(extreme_point(system, objective, z))
        value = sum(objective[i] * z[i] for i in range(len(edges)))
        if value < previous_value:
            raise InternalError("rounding objective decreased")
        steps.append(
            {
                "deleted": deleted,
                "kind": kind,
                "fractional": len(fractional),
                "objective": str(value),
            }
        )
        if trace is not None:
            trace(f"round step {len(steps)}: delete {kind} {deleted}, fractional={len(fractional)}, objective={value}")
        if len(steps) > deletions_cap:
            raise InternalError("rounding exceeded the deletion bound")
    y = {edges[i]: int(z[i]) for i in range(len(edges))}
    return y, steps


def compute_shm_capacities(inst: HypergraphInstance, x_star: Mapping, y: Mapping) -> CapacityRevision:
    """Revised capacities under which the rounded matching is stable.

    For each vertex: the rounded load if the vertex row was tight at the
    fractional point, otherwise the larger of the original capacity and
    the rounded load.
    """
    for e in inst.edges:
        xv = Fraction(x_star[e.id])
        if _is_integral(xv) and y[e.id] != xv:
            raise PreconditionError(f"rounded vector changes integral component {e.id!r}")
    x_loads = _vertex_loads(inst, x_star)
    y_loads = _vertex_loads(inst, y)
    revised = {}
    for v in inst.vertices:
        q = inst.capacities[v]
        if x_loads[v] == q:
            revised[v] = int(y_loads[v])
        else:
            revised[v] = max(q, int(y_loads[v]))
    return CapacityRevision(original=dict(inst.capacities), revised=revised)


def strip_gadget(matching: Mapping, gadget_ids) -> dict:
    gadget = set(gadget_ids)
    return {eid: value for eid, value in matching.items() if eid not in gadget}


@dataclass(frozen=True)
class ShmReport:
    blocking_edges: tuple
    capacity_violations: tuple
    value_violations: tuple

    @property
    def ok(self) -> bool:
        return not (self.blocking_edges or self.capacity_violations or self.value_violations)


def verify_shm(inst: HypergraphInstance, capacities: Mapping, matching: Mapping) -> ShmReport:
    """Stability and feasibility report; weak orders are handled directly.

    An edge blocks when its own value is below one and every member vertex
    is either unsaturated or holds an edge it strictly disprefers.  Works
    for fractional and integral matchings alike.
    """
    missing = [v for v in inst.vertices if v not in capacities]
    if missing:
        raise InputError(f"capacities missing for vertices: {missing}")
    unknown = sorted(set(matching) - {e.id for e in inst.edges})
    if unknown:
        raise InputError(f"matching references unknown edges: {unknown}")
    values = {e.id: Fraction(matching.get(e.id, 0)) for e in inst.edges}
    value_violations = tuple(
        eid for eid, v in values.items() if v < 0 or v > 1
    )
    loads = _vertex_loads(inst, values)
    capacity_violations = tuple(
        v for v in inst.vertices if loads[v] > capacities[v]
    )
    blocking = []
    ranks = {v: inst.preferences[v].ranks() for v in inst.vertices}
    incident = inst.incident()
    for e in inst.edges:
        if values[e.id] >= 1:
            continue
        blocks = True
        for v in e.vertices:
            if loads[v] < capacities[v]:
                continue  # unsaturated: this vertex does not object
            rank = ranks[v]
            has_worse = any(
                values[other] > 0 and rank[other] > rank[e.id]
                for other in incident[v]
            )
            if not has_worse:
                blocks = False
                break
        if blocks:
            blocking.append(e.id)
    return ShmReport(
        blocking_edges=tuple(blocking),
        capacity_violations=capacity_violations,
        value_violations=value_violations,
    )


@dataclass(frozen=True)
class ShmResult:
    revision: CapacityRevision
    matching: dict  # original edge id -> 0/1
    gadget_matching: dict  # gadgeted edge id -> 0/1
    fractional: dict  # gadgeted edge id -> Fraction
    certificate: dict
    rounding_steps: list


def solve_shm(
    inst: HypergraphInstance,
    pivot_budget: int = DEFAULT_PIVOT_BUDGET,
    trace: TraceSink | None = None,
) -> ShmResult:
    """Full pipeline with the near-feasibility bounds asserted as certificates.

    Guarantees on every run: per-vertex revision at most max-edge-size - 1,
    total revision between 0 and max-edge-size - 1 (measured where the
    rounding ran, i.e. with gadget edges counted), and a verifier pass with
    zero blocking edges on the original instance.
    """
    require_valid(inst)
    strict = break_instance_ties(inst)
    gadgeted = add_saturation_gadget(strict)
    gadget_ids = gadget_edge_ids(strict, gadgeted)
    build = build_shm_scarf(gadgeted)
    point = solve_scarf(build.problem, pivot_budget=pivot_budget, trace=trace)
    x_star = build.expand(point)
    y, steps = round_shm(gadgeted, x_star, trace=trace)
    revision = compute_shm_capacities(gadgeted, x_star, y)
    gadget_report = verify_shm(gadgeted, revision.revised, y)
    if not gadget_report.ok:
        raise InternalError("rounded matching unstable on the gadgeted instance")
    matching = strip_gadget(y, gadget_ids)
    report = verify_shm(inst, revision.revised, matching)
    if not report.ok:
        raise InternalError("stripped matching unstable on the original instance")
    ell = gadgeted.max_edge_size
    max_dev = revision.max_deviation()
    sum_dev = revision.sum_deviation()
    if max_dev > ell - 1:
        raise InternalError(f"pointwise capacity bound violated: {max_dev} > {ell - 1}")
    if not 0 <= sum_dev <= ell - 1:
        raise InternalError(f"total capacity bound violated: {sum_dev}")
    matched_real = sum(
        len(e.vertices) * matching[e.id] for e in inst.edges
    )
    certificate = {
        "pipeline": "shm",
        "max_edge_size": ell,
        "bounds": {
            "max_deviation": max_dev,
            "max_allowed": ell - 1,
            "sum_deviation": sum_dev,
            "sum_allowed": ell - 1,
        },
        "capacities": {
            v: {
                "original": revision.original[v],
                "revised": revision.revised[v],
            }
            for v in inst.vertices
        },
        "stripped_matched_capacity": matched_real,
        "verifier": {
            "blocking_edges": list(report.blocking_edges),
            "capacity_violations": list(report.capacity_violations),
            "stable": report.ok,
        },
        "iterations": len(steps),
    }
    return ShmResult(
        revision=revision,
        matching=matching,
        gadget_matching=y,
        fractional=x_star,
        certificate=certificate,
        rounding_steps=steps,
    )
