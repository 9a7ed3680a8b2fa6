"""Dominance solver for Scarf-type problems via complementary pivoting.

A problem is a nonnegative rational matrix Q (every column nonzero), a
positive bound vector d, and one strict order per row over that row's
nonzero columns.  `solve_scarf` returns an extreme point of
{Qx <= d, x >= 0} together with, for every column, a row that dominates it:
the row is tight at x and weakly prefers every positively-used column.

The pivoting works on the extended matrix [I | Q] in standard form: slack
column i is ranked strictly worst in row i and above every real column in
the other rows.  Cardinal (simplex) steps use a lexicographic ratio test on
a fraction-free integer tableau, so degenerate bound vectors need no
perturbation; ordinal steps replace a column of the ordinal basis by the
unique alternative completion.  Both bases evolve in lockstep until they
coincide, which is the termination guarantee of the underlying path
argument.  The worst case is exponential, so a configurable pivot budget
guards the loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Callable, Sequence

from .errors import InputError, InternalError, ResourceLimitError
from .polytope import exact_rank

DEFAULT_PIVOT_BUDGET = 10_000_000

TraceSink = Callable[[str], None]


@dataclass(frozen=True)
class ScarfProblem:
    """Matrix, bounds, and strict per-row column orders (best first)."""

    rows: tuple[tuple[Fraction, ...], ...]
    bounds: tuple[Fraction, ...]
    row_orders: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.rows)
        if len(self.bounds) != n or len(self.row_orders) != n:
            raise InputError("rows, bounds, and row_orders must have equal length")
        m = self.num_cols
        for row in self.rows:
            if len(row) != m:
                raise InputError("ragged matrix")
            if any(v < 0 for v in row):
                raise InputError("matrix entries must be nonnegative")
        for i, b in enumerate(self.bounds):
            if b <= 0:
                raise InputError(f"bound of row {i} must be positive; pre-eliminate zero rows")
        for j in range(m):
            if all(self.rows[i][j] == 0 for i in range(n)):
                raise InputError(f"column {j} has no nonzero entry")
        for i in range(n):
            nonzero = tuple(j for j in range(m) if self.rows[i][j] > 0)
            if sorted(self.row_orders[i]) != sorted(nonzero):
                raise InputError(f"order of row {i} must cover exactly its nonzero columns")

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    @property
    def num_cols(self) -> int:
        return len(self.rows[0]) if self.rows else 0


def make_problem(rows, bounds, row_orders) -> ScarfProblem:
    return ScarfProblem(
        rows=tuple(tuple(Fraction(v) for v in row) for row in rows),
        bounds=tuple(Fraction(b) for b in bounds),
        row_orders=tuple(tuple(order) for order in row_orders),
    )


@dataclass(frozen=True)
class DominatingPoint:
    x: tuple[Fraction, ...]
    dominating_row: dict

    def support(self) -> tuple[int, ...]:
        return tuple(j for j, v in enumerate(self.x) if v != 0)


@dataclass(frozen=True)
class DominationReport:
    nonnegative: bool
    within_bounds: bool
    witnesses: tuple[tuple[int, ...], ...]

    @property
    def ok(self) -> bool:
        return self.nonnegative and self.within_bounds and all(self.witnesses)


def row_value(problem: ScarfProblem, i: int, x: Sequence[Fraction]) -> Fraction:
    return sum((problem.rows[i][j] * x[j] for j in range(problem.num_cols) if problem.rows[i][j] != 0), Fraction(0))


def verify_dominating(problem: ScarfProblem, x: Sequence[Fraction]) -> DominationReport:
    """All valid witness rows per column, straight from the definitions.

    A row i witnesses column j when Q_ij > 0, the row is tight at x, and
    every column with positive contribution in row i is weakly preferred
    to j by that row's order.
    """
    n, m = problem.num_rows, problem.num_cols
    x = [Fraction(v) for v in x]
    nonnegative = all(v >= 0 for v in x)
    tight = [row_value(problem, i, x) == problem.bounds[i] for i in range(n)]
    within = all(row_value(problem, i, x) <= problem.bounds[i] for i in range(n))
    position = [{j: p for p, j in enumerate(problem.row_orders[i])} for i in range(n)]
    used = [
        [j for j in problem.row_orders[i] if x[j] != 0]
        for i in range(n)
    ]
    witnesses = []
    for j in range(m):
        rows = []
        for i in range(n):
            if problem.rows[i][j] == 0 or not tight[i]:
                continue
            pos = position[i]
            if all(pos[k] <= pos[j] for k in used[i]):
                rows.append(i)
        witnesses.append(tuple(rows))
    return DominationReport(nonnegative=nonnegative, within_bounds=within, witnesses=tuple(witnesses))


def certify_extreme(problem: ScarfProblem, x: Sequence[Fraction]) -> bool:
    """True iff x is a vertex of {Qx <= d, x >= 0}.

    The tight rows among the matrix rows and the nonnegativity rows must
    have rank equal to the number of columns.
    """
    n, m = problem.num_rows, problem.num_cols
    x = [Fraction(v) for v in x]
    if any(v < 0 for v in x):
        raise InputError("point has negative entries")
    vectors = []
    for i in range(n):
        value = row_value(problem, i, x)
        if value > problem.bounds[i]:
            raise InputError(f"point violates row {i}")
        if value == problem.bounds[i]:
            vectors.append(list(problem.rows[i]))
    unit = [Fraction(0)] * m
    for j in range(m):
        if x[j] == 0:
            vec = unit.copy()
            vec[j] = Fraction(1)
            vectors.append(vec)
    return exact_rank(vectors) == m


# ---------------------------------------------------------------------------
# the pivoting engine
# ---------------------------------------------------------------------------


def _utility_matrix(problem: ScarfProblem) -> list[list[int]]:
    """Standard-form utilities over slack columns 0..n-1 and real columns n..n+m-1.

    Within each row: the own slack gets 0 (unique minimum), ranked real
    columns get 1..r (best highest), zero-entry real columns sit above
    them, and foreign slacks sit above everything.  All entries in a row
    are distinct, which makes every ordinal step unambiguous.
    """
    n, m = problem.num_rows, problem.num_cols
    util = []
    for i in range(n):
        row = [0] * (n + m)
        order = problem.row_orders[i]
        r = len(order)
        for p, j in enumerate(order):
            row[n + j] = r - p
        t = 0
        for j in range(m):
            if problem.rows[i][j] == 0:
                t += 1
                row[n + j] = r + t
        for k in range(n):
            row[k] = m + 2 + k if k != i else 0
        util.append(row)
    return util


class _Tableau:
    """Fraction-free integer simplex tableau for [I | Q] x = d.

    Entries are `den` times the true rational tableau; pivots keep
    everything integral by exact division (the entries are minors of the
    integer input matrix).
    """

    def __init__(self, problem: ScarfProblem):
        n, m = problem.num_rows, problem.num_cols
        scale = lcm(
            *[v.denominator for row in problem.rows for v in row],
            *[b.denominator for b in problem.bounds],
        )
        self.n, self.m = n, m
        self.mat = []
        for i in range(n):
            row = [0] * (n + m)
            for j in range(m):
                row[n + j] = (scale * problem.rows[i][j]).numerator
            row[i] = 1
            self.mat.append(row)
        self.rhs = [(scale * b).numerator for b in problem.bounds]
        self.den = 1
        self.basis = list(range(n))

    def ratio_row(self, col: int) -> int:
        """Lexicographic minimum ratio row for an entering column."""
        n = self.n
        best = None
        for i in range(n):
            piv = self.mat[i][col]
            if piv <= 0:
                continue
            if best is None:
                best = i
                continue
            bpiv = self.mat[best][col]
            left = self.rhs[i] * bpiv
            right = self.rhs[best] * piv
            if left != right:
                if left < right:
                    best = i
                continue
            decided = False
            for c in range(n):
                left = self.mat[i][c] * bpiv
                right = self.mat[best][c] * piv
                if left != right:
                    if left < right:
                        best = i
                    decided = True
                    break
            if not decided:
                raise InternalError("lexicographic ratio test tie; basis inverse is singular")
        if best is None:
            raise InternalError("unbounded pivot column on a bounded polytope")
        return best

    def pivot(self, row: int, col: int) -> int:
        """Pivot and return the leaving column."""
        piv = self.mat[row][col]
        if piv <= 0:
            raise InternalError("nonpositive pivot element")
        den = self.den
        prow = self.mat[row]
        prhs = self.rhs[row]
        for i in range(self.n):
            if i == row:
                continue
            factor = self.mat[i][col]
            if factor == 0:
                if den != 1:
                    irow = self.mat[i]
                    self.mat[i] = [(v * piv) // den for v in irow]
                    self.rhs[i] = (self.rhs[i] * piv) // den
                else:
                    irow = self.mat[i]
                    self.mat[i] = [v * piv for v in irow]
                    self.rhs[i] = self.rhs[i] * piv
                continue
            irow = self.mat[i]
            self.mat[i] = [(v * piv - factor * p) // den for v, p in zip(irow, prow)]
            self.rhs[i] = (self.rhs[i] * piv - factor * prhs) // den
        self.den = piv
        leaving = self.basis[row]
        self.basis[row] = col
        return leaving

    def solution(self) -> list[Fraction]:
        x = [Fraction(0)] * self.m
        for i in range(self.n):
            col = self.basis[i]
            if col >= self.n:
                x[col - self.n] = Fraction(self.rhs[i], self.den)
        return x


class _OrdinalBasis:
    """Ordinal basis with the row -> minimum-holding-column bijection."""

    def __init__(self, util: list[list[int]], columns: list[int], owner: dict[int, int]):
        self.util = util
        self.columns = set(columns)
        self.owner = owner  # row -> column holding that row's minimum

    def replace(self, out_col: int) -> int:
        """Remove `out_col`, add the unique alternative completion.

        The orphaned row's minimum falls to some remaining column, which
        then holds two rows; the entering column is the best column (in
        the doubled column's original row) lying strictly above the
        current minima in every other row.
        """
        util = self.util
        n = len(util)
        total = len(util[0])
        orphan = next(row for row, col in self.owner.items() if col == out_col)
        remaining = self.columns - {out_col}
        mins = []
        argmins = []
        for i in range(n):
            best_col = None
            best_val = None
            for c in remaining:
                v = util[i][c]
                if best_val is None or v < best_val:
                    best_val = v
                    best_col = c
            mins.append(best_val)
            argmins.append(best_col)
        doubled = argmins[orphan]
        home = next(row for row, col in self.owner.items() if col == doubled)
        entering = None
        entering_val = None
        for c in range(total):
            if c in remaining:
                continue
            row_u = None
            ok = True
            for i in range(n):
                if i == home:
                    continue
                if util[i][c] <= mins[i]:
                    ok = False
                    break
            if ok:
                row_u = util[home][c]
                if entering_val is None or row_u > entering_val:
                    entering_val = row_u
                    entering = c
        if entering is None or entering_val >= mins[home]:
            raise InternalError("ordinal replacement step has no valid completion")
        self.columns = remaining | {entering}
        self.owner[orphan] = doubled
        self.owner[home] = entering
        return entering


def solve_scarf(
    problem: ScarfProblem,
    pivot_budget: int = DEFAULT_PIVOT_BUDGET,
    trace: TraceSink | None = None,
) -> DominatingPoint:
    """An extreme point of {Qx <= d, x >= 0} dominating every column.

    Deterministic for a fixed problem.  Raises ResourceLimitError when the
    pivot budget is exhausted.  The result is re-checked against the
    domination and extreme-point definitions before being returned.
    """
    n, m = problem.num_rows, problem.num_cols
    if m == 0:
        return DominatingPoint(x=(), dominating_row={})
    util = _utility_matrix(problem)
    tableau = _Tableau(problem)
    first_real = max(range(n, n + m), key=lambda c: util[0][c])
    owner = {0: first_real}
    for i in range(1, n):
        owner[i] = i
    ordinal = _OrdinalBasis(util, [first_real] + list(range(1, n)), owner)

    def colname(c: int) -> str:
        return f"s{c}" if c < n else f"x{c - n}"

    entering = first_real
    pivots = 0
    while True:
        if pivots >= pivot_budget:
            raise ResourceLimitError(f"pivot budget of {pivot_budget} exceeded")
        row = tableau.ratio_row(entering)
        leaving = tableau.pivot(row, entering)
        pivots += 1
        if trace is not None:
            trace(f"pivot {pivots} enter={colname(entering)} leave={colname(leaving)} kind=cardinal")
        if leaving == 0:
            break
        if pivots >= pivot_budget:
            raise ResourceLimitError(f"pivot budget of {pivot_budget} exceeded")
        added = ordinal.replace(leaving)
        pivots += 1
        if trace is not None:
            trace(f"pivot {pivots} enter={colname(added)} leave={colname(leaving)} kind=ordinal")
        if added == 0:
            break
        entering = added

    if set(tableau.basis) != ordinal.columns:
        raise InternalError("cardinal and ordinal bases disagree at termination")
    x = tableau.solution()
    report = verify_dominating(problem, x)
    if not report.ok:
        raise InternalError("pivoting terminated on a non-dominating point")
    if not certify_extreme(problem, x):
        raise InternalError("pivoting terminated on a non-extreme point")
    dominating_row = {j: rows[0] for j, rows in enumerate(report.witnesses)}
    return DominatingPoint(x=tuple(x), dominating_row=dominating_row)
