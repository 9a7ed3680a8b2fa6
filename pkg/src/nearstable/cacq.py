"""College admission with common quotas: near-feasible stable matchings.

Set quotas (including each college's own singleton set) may be revised by
at most 2L - 1, where L is the largest number of sets any college belongs
to; student capacities are never touched.  The pipeline mirrors the
hypergraph one but rounds against inequality rows: a set row is deleted
when its fractional column mass is at most 2L - 1 (non-tight rows) or 2L
(tight rows), and students matched fully by the fractional solution are
pinned as equalities so they stay matched.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .errors import InputError, InternalError, PreconditionError
from .model import CacqInstance, CapacityRevision, CollegeSet, normalize_cacq, require_valid
from .orders import break_ties
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


def break_cacq_ties(inst: CacqInstance) -> CacqInstance:
    """Strictify all orders with shared fallbacks.

    Master lists and college lists break ties by declared student order, so
    the consistency between them survives; student lists break ties by
    declared edge order.
    """
    student_fallback = {s: i for i, s in enumerate(inst.students)}
    edge_fallback = {e.id: i for i, e in enumerate(inst.edges)}
    sets = tuple(
        CollegeSet(id=cs.id, colleges=cs.colleges, quota=cs.quota, master=break_ties(cs.master, student_fallback))
        for cs in inst.sets
    )
    return CacqInstance(
        students=inst.students,
        colleges=inst.colleges,
        edges=inst.edges,
        college_quotas=dict(inst.college_quotas),
        college_prefs={c: break_ties(o, student_fallback) for c, o in inst.college_prefs.items()},
        sets=sets,
        student_prefs={s: break_ties(o, edge_fallback) for s, o in inst.student_prefs.items()},
    )


@dataclass(frozen=True)
class CacqScarfBuild:
    problem: ScarfProblem
    columns: tuple[str, ...]  # scarf column -> edge id
    set_rows: dict  # set id -> row index
    student_rows: dict  # student id -> row index
    fixed_zero: tuple[str, ...]  # edges forced to 0 by zero-quota sets

    def expand(self, point: DominatingPoint) -> dict:
        x = {eid: ZERO for eid in self.fixed_zero}
        for col, eid in enumerate(self.columns):
            x[eid] = point.x[col]
        return x


def build_cacq_scarf(inst: CacqInstance) -> CacqScarfBuild:
    """One row per college set (bound = quota) plus one per student (bound 1).

    A set row ranks columns by its master list, breaking same-student
    comparisons by that student's own preference.  Zero-quota sets cannot
    appear as rows, so every edge into their colleges is pre-fixed to zero.
    """
    for cs in inst.sets:
        if not cs.master.is_strict:
            raise PreconditionError(f"set {cs.id!r} still has ties; break them first")
    for s in inst.students:
        if not inst.student_prefs[s].is_strict:
            raise PreconditionError(f"student {s!r} still has ties; break them first")
    dead_colleges = set()
    for cs in inst.sets:
        if cs.quota == 0:
            dead_colleges.update(cs.colleges)
    fixed_zero = tuple(e.id for e in inst.edges if e.college in dead_colleges)
    columns = tuple(e.id for e in inst.edges if e.id not in set(fixed_zero))
    col_index = {eid: i for i, eid in enumerate(columns)}
    edge_map = inst.edge_by_id()
    m = len(columns)
    rows = []
    bounds = []
    orders = []
    set_rows = {}
    student_ranks = {s: inst.student_prefs[s].ranks() for s in inst.students}
    for cs in inst.sets:
        if cs.quota == 0:
            continue
        members = set(cs.colleges)
        row = [ZERO] * m
        cols = []
        for eid in columns:
            if edge_map[eid].college in members:
                row[col_index[eid]] = ONE
                cols.append(eid)
        master_rank = cs.master.ranks()
        cols.sort(key=lambda eid: (master_rank[edge_map[eid].student], student_ranks[edge_map[eid].student][eid]))
        set_rows[cs.id] = len(rows)
        rows.append(tuple(row))
        bounds.append(Fraction(cs.quota))
        orders.append(tuple(col_index[eid] for eid in cols))
    student_rows = {}
    for s in inst.students:
        row = [ZERO] * m
        cols = []
        for eid in columns:
            if edge_map[eid].student == s:
                row[col_index[eid]] = ONE
                cols.append(eid)
        ranked = [eid for group in inst.student_prefs[s].tie_groups for eid in group if eid in col_index]
        student_rows[s] = len(rows)
        rows.append(tuple(row))
        bounds.append(ONE)
        orders.append(tuple(col_index[eid] for eid in ranked))
    problem = make_problem(rows, bounds, orders)
    return CacqScarfBuild(
        problem=problem,
        columns=columns,
        set_rows=set_rows,
        student_rows=student_rows,
        fixed_zero=fixed_zero,
    )


def _is_integral(value: Fraction) -> bool:
    return value.denominator == 1


def _set_loads(inst: CacqInstance, values: Mapping) -> dict:
    loads = {cs.id: ZERO for cs in inst.sets}
    members = {cs.id: set(cs.colleges) for cs in inst.sets}
    for e in inst.edges:
        value = values.get(e.id, ZERO)
        if value == 0:
            continue
        for cs in inst.sets:
            if e.college in members[cs.id]:
                loads[cs.id] += value
    return loads


def _student_loads(inst: CacqInstance, values: Mapping) -> dict:
    loads = {s: ZERO for s in inst.students}
    for e in inst.edges:
        value = values.get(e.id, ZERO)
        if value != 0:
            loads[e.student] += value
    return loads


def pinned_students(inst: CacqInstance, x_star: Mapping) -> tuple[str, ...]:
    loads = _student_loads(inst, x_star)
    return tuple(s for s in inst.students if loads[s] == 1)


def round_cacq(inst: CacqInstance, x_star: Mapping, trace: TraceSink | None = None):
    """Algorithm-2-style rounding over the set rows.

    Set rows stay inequalities; students assigned fully at the fractional
    point are pinned to stay fully assigned; student rows are never
    deleted.  Deletion prefers non-tight set rows with fractional mass at
    most 2L - 1, then tight set rows with mass at most 2L, scanning sets in
    declared order.  Tightness is evaluated at the current iterate.
    """
    edges = [e.id for e in inst.edges]
    index = {eid: i for i, eid in enumerate(edges)}
    edge_map = inst.edge_by_id()
    ell = inst.max_memberships
    z = [Fraction(x_star[eid]) for eid in edges]
    pinned = pinned_students(inst, x_star)
    active = [cs for cs in inst.sets if cs.quota > 0]
    set_columns = {
        cs.id: [eid for eid in edges if edge_map[eid].college in set(cs.colleges)] for cs in inst.sets
    }
    student_columns = {s: [eid for eid in edges if edge_map[eid].student == s] for s in inst.students}
    steps = []
    max_deletions = len(active) + 1
    while any(not _is_integral(v) for v in z):
        fractional = {edges[i] for i, v in enumerate(z) if not _is_integral(v)}
        current = {eid: z[index[eid]] for eid in edges}
        deleted = None
        tightness = None
        for cs in active:
            load = sum(current[eid] for eid in set_columns[cs.id])
            mass = sum(1 for eid in set_columns[cs.id] if eid in fractional)
            if load != cs.quota and mass <= 2 * ell - 1:
                deleted = cs
                tightness = "non-tight"
                break
        if deleted is None:
            for cs in active:
                load = sum(current[eid] for eid in set_columns[cs.id])
                mass = sum(1 for eid in set_columns[cs.id] if eid in fractional)
                if load == cs.quota and mass <= 2 * ell:
                    deleted = cs
                    tightness = "tight"
                    break
        if deleted is None:
            raise InternalError("no deletable set row although the vector is fractional")
        active.remove(deleted)
        rows = []
        for cs in active:
            coeffs = [ZERO] * len(edges)
            for eid in set_columns[cs.id]:
                coeffs[index[eid]] = ONE
            rows.append(LinearRow(tuple(coeffs), "le", Fraction(cs.quota)))
        for s in inst.students:
            coeffs = [ZERO] * len(edges)
            for eid in student_columns[s]:
                coeffs[index[eid]] = ONE
            relation = "eq" if s in pinned else "le"
            rows.append(LinearRow(tuple(coeffs), relation, ONE))
        system = LinearSystem(
            num_vars=len(edges),
            rows=tuple(rows),
            lower=(ZERO,) * len(edges),
            upper=(None,) * len(edges),
            fixed={i: z[i] for i in range(len(edges)) if _is_integral(z[i])},
        )
        z = list(extreme_point(system, None, z))
        steps.append(
            {
                "deleted": deleted.id,
                "kind": tightness,
                "fractional": len(fractional),
            }
        )
        if trace is not None:
            trace(f"round step {len(steps)}: delete {tightness} set {deleted.id}, fractional={len(fractional)}")
        if len(steps) > max_deletions:
            raise InternalError("rounding exceeded the set-row deletion bound")
    y = {edges[i]: int(z[i]) for i in range(len(edges))}
    return y, steps


def compute_cacq_quotas(inst: CacqInstance, x_star: Mapping, y: Mapping) -> CapacityRevision:
    """Revised set quotas under which the rounded matching is stable.

    Hypotheses checked: the rounded vector vanishes outside the fractional
    support, fully assigned students stay assigned, and nobody exceeds one
    seat.
    """
    for e in inst.edges:
        if Fraction(x_star[e.id]) == 0 and y[e.id] != 0:
            raise PreconditionError(f"support containment fails at edge {e.id!r}")
    x_loads = _student_loads(inst, x_star)
    y_loads = _student_loads(inst, y)
    for s in inst.students:
        if x_loads[s] == 1 and y_loads[s] != 1:
            raise PreconditionError(f"fully assigned student {s!r} lost the seat")
        if y_loads[s] > 1:
            raise PreconditionError(f"student {s!r} holds more than one seat")
    x_set = _set_loads(inst, x_star)
    y_set = _set_loads(inst, y)
    original = {cs.id: cs.quota for cs in inst.sets}
    revised = {}
    for cs in inst.sets:
        if x_set[cs.id] == cs.quota:
            revised[cs.id] = int(y_set[cs.id])
        else:
            revised[cs.id] = max(cs.quota, int(y_set[cs.id]))
    return CapacityRevision(original=original, revised=revised)


@dataclass(frozen=True)
class CacqReport:
    blocking_edges: tuple
    quota_violations: tuple
    student_violations: tuple
    value_violations: tuple

    @property
    def ok(self) -> bool:
        return not (
            self.blocking_edges or self.quota_violations or self.student_violations or self.value_violations
        )


def verify_cacq(inst: CacqInstance, quotas: Mapping, matching: Mapping) -> CacqReport:
    """Blocking-edge and feasibility report against given set quotas.

    An edge (student, college) blocks when the student strictly improves
    and every set containing the college is below quota or admits a
    strictly worse student under its master list.  Weak orders are
    compared directly.
    """
    missing = [cs.id for cs in inst.sets if cs.id not in quotas]
    if missing:
        raise InputError(f"quotas missing for sets: {missing}")
    unknown = sorted(set(matching) - {e.id for e in inst.edges})
    if unknown:
        raise InputError(f"matching references unknown edges: {unknown}")
    values = {e.id: Fraction(matching.get(e.id, 0)) for e in inst.edges}
    value_violations = tuple(eid for eid, v in values.items() if v < 0 or v > 1)
    student_loads = _student_loads(inst, values)
    set_loads = _set_loads(inst, values)
    student_violations = tuple(s for s in inst.students if student_loads[s] > 1)
    quota_violations = tuple(cs.id for cs in inst.sets if set_loads[cs.id] > quotas[cs.id])
    edge_map = inst.edge_by_id()
    student_ranks = {s: inst.student_prefs[s].ranks() for s in inst.students}
    sets_of_college = inst.memberships
    assigned_students = {
        cs.id: sorted(
            {edge_map[eid].student for eid, v in values.items() if v > 0 and edge_map[eid].college in set(cs.colleges)},
            key=str,
        )
        for cs in inst.sets
    }
    set_by_id = {cs.id: cs for cs in inst.sets}
    blocking = []
    for e in inst.edges:
        rank = student_ranks[e.student]
        improves = student_loads[e.student] < 1 or any(
            values[other] > 0 and rank[e.id] < rank[other]
            for other in rank
        )
        if not improves:
            continue
        all_sets_open = True
        for set_id in sets_of_college[e.college]:
            cs = set_by_id[set_id]
            if set_loads[set_id] < quotas[set_id]:
                continue
            master_rank = cs.master.ranks()
            if any(
                master_rank[e.student] < master_rank[s2]
                for s2 in assigned_students[set_id]
                if s2 in master_rank
            ):
                continue
            all_sets_open = False
            break
        if all_sets_open:
            blocking.append(e.id)
    return CacqReport(
        blocking_edges=tuple(blocking),
        quota_violations=quota_violations,
        student_violations=student_violations,
        value_violations=value_violations,
    )


@dataclass(frozen=True)
class CacqResult:
    revision: CapacityRevision
    matching: dict  # edge id -> 0/1
    fractional: dict  # edge id -> Fraction
    pinned: tuple
    certificate: dict
    rounding_steps: list


def solve_cacq(
    inst: CacqInstance,
    pivot_budget: int = DEFAULT_PIVOT_BUDGET,
    trace: TraceSink | None = None,
) -> CacqResult:
    """Full pipeline; revises only set quotas, by at most 2L - 1 each.

    Certificates assert the per-set bound, feasibility under the revised
    quotas, zero blocking edges, and that every student fully assigned by
    the fractional solution is matched in the output.
    """
    require_valid(inst)
    normalized = normalize_cacq(inst)
    strict = break_cacq_ties(normalized)
    build = build_cacq_scarf(strict)
    point = solve_scarf(build.problem, pivot_budget=pivot_budget, trace=trace)
    x_star = build.expand(point)
    pinned = pinned_students(strict, x_star)
    y, steps = round_cacq(strict, x_star, trace=trace)
    revision = compute_cacq_quotas(strict, x_star, y)
    report = verify_cacq(normalized, revision.revised, y)
    if not report.ok:
        raise InternalError("rounded matching unstable under the revised quotas")
    ell = normalized.max_memberships
    max_dev = revision.max_deviation()
    if max_dev > 2 * ell - 1:
        raise InternalError(f"quota bound violated: {max_dev} > {2 * ell - 1}")
    matched_students = {e.student for e in normalized.edges if y[e.id] == 1}
    missing = [s for s in pinned if s not in matched_students]
    if missing:
        raise InternalError(f"pinned students left unmatched: {missing}")
    x_set = _set_loads(strict, x_star)
    certificate = {
        "pipeline": "cacq",
        "max_memberships": ell,
        "bounds": {
            "max_deviation": max_dev,
            "max_allowed": 2 * ell - 1,
        },
        "quotas": {
            cs.id: {
                "original": revision.original[cs.id],
                "revised": revision.revised[cs.id],
                "tight_at_fractional": x_set[cs.id] == cs.quota,
            }
            for cs in normalized.sets
        },
        "pinned_students": list(pinned),
        "verifier": {
            "blocking_edges": list(report.blocking_edges),
            "quota_violations": list(report.quota_violations),
            "student_violations": list(report.student_violations),
            "stable": report.ok,
        },
        "iterations": len(steps),
    }
    return CacqResult(
        revision=revision,
        matching=y,
        fractional=x_star,
        pinned=pinned,
        certificate=certificate,
        rounding_steps=steps,
    )
