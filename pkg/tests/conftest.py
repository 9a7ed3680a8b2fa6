"""Shared instance builders and independent oracles for the test suite."""

from __future__ import annotations

import pytest

from nearstable.model import (
    Arc,
    CacqEdge,
    CacqInstance,
    CollegeSet,
    Commodity,
    FlowInstance,
    HyperEdge,
    HypergraphInstance,
)
from nearstable.orders import WeakOrder


def triangle_instance() -> HypergraphInstance:
    """Odd cycle with cyclic strict preferences: no stable matching at q = 1."""
    return HypergraphInstance(
        vertices=("a", "b", "c"),
        edges=(
            HyperEdge("ab", ("a", "b")),
            HyperEdge("bc", ("b", "c")),
            HyperEdge("ca", ("c", "a")),
        ),
        capacities={"a": 1, "b": 1, "c": 1},
        preferences={
            "a": WeakOrder((("ab",), ("ca",))),
            "b": WeakOrder((("bc",), ("ab",))),
            "c": WeakOrder((("ca",), ("bc",))),
        },
    )


def marriage_instance(men_prefs, women_prefs) -> HypergraphInstance:
    """Bipartite one-to-one instance over men m0.. and women w0.. .

    Preference arguments map each agent to its ranked partners, e.g.
    {"m0": ["w0", "w1"], ...}; edge ids are "m:w".
    """
    men = sorted(men_prefs)
    women = sorted(women_prefs)
    edges = []
    for m in men:
        for w in men_prefs[m]:
            edges.append(HyperEdge(f"{m}:{w}", (m, w)))
    prefs = {}
    for m in men:
        prefs[m] = WeakOrder(tuple((f"{m}:{w}",) for w in men_prefs[m]))
    for w in women:
        prefs[w] = WeakOrder(tuple((f"{m}:{w}",) for m in women_prefs[w]))
    return HypergraphInstance(
        vertices=tuple(men + women),
        edges=tuple(edges),
        capacities={v: 1 for v in men + women},
        preferences=prefs,
    )


def deferred_acceptance(men_prefs, women_prefs) -> set[str]:
    """Textbook proposer-optimal matching; returns edge ids "m:w"."""
    women_rank = {w: {m: i for i, m in enumerate(order)} for w, order in women_prefs.items()}
    next_choice = {m: 0 for m in men_prefs}
    engaged: dict[str, str] = {}
    free = sorted(men_prefs)
    while free:
        m = free.pop(0)
        if next_choice[m] >= len(men_prefs[m]):
            continue
        w = men_prefs[m][next_choice[m]]
        next_choice[m] += 1
        current = engaged.get(w)
        if current is None:
            engaged[w] = m
        elif women_rank[w][m] < women_rank[w][current]:
            engaged[w] = m
            free.append(current)
            free.sort()
        else:
            free.append(m)
            free.sort()
    return {f"{m}:{w}" for w, m in engaged.items()}


def two_by_two_cacq() -> CacqInstance:
    """Two students, two colleges, full acceptability, one common set."""
    edges = (
        CacqEdge("e11", "s1", "c1"),
        CacqEdge("e12", "s1", "c2"),
        CacqEdge("e21", "s2", "c1"),
        CacqEdge("e22", "s2", "c2"),
    )
    master = WeakOrder((("s1",), ("s2",)))
    return CacqInstance(
        students=("s1", "s2"),
        colleges=("c1", "c2"),
        edges=edges,
        college_quotas={"c1": 1, "c2": 1},
        college_prefs={"c1": master, "c2": master},
        sets=(CollegeSet("common", ("c1", "c2"), 1, master),),
        student_prefs={
            "s1": WeakOrder((("e11",), ("e12",))),
            "s2": WeakOrder((("e21",), ("e22",))),
        },
    )


def single_arc_flow_instance(k: int = 2) -> FlowInstance:
    """One arc s -> t shared by k commodities; the arc prefers commodity 1."""
    order = WeakOrder(tuple((j,) for j in range(1, k + 1)))
    return FlowInstance(
        vertices=("s", "t"),
        arcs=(Arc("a", "s", "t"),),
        commodities=tuple(Commodity("s", "t") for _ in range(k)),
        capacity={"a": 1},
        commodity_capacity={("a", j): 1 for j in range(1, k + 1)},
        vertex_prefs={(v, j): WeakOrder((("a",),)) for v in ("s", "t") for j in range(1, k + 1)},
        arc_prefs={"a": order},
    )


@pytest.fixture
def triangle():
    return triangle_instance()


@pytest.fixture
def cacq_2x2():
    return two_by_two_cacq()
