"""Balanced-occupancy linear program over exact rationals.

Maximizes the common incoming efficiency C subject to the per-node
normalization, the global active-edge budget, the data-forwarding bound
for non-root senders, and equal incoming efficiency at all non-root
nodes. Everything is Fraction arithmetic end to end: the schedule
compiler downstream needs exact denominators, so no floats anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


# ---------------------------------------------------------------------------
# generic exact simplex, dense tableau, two phase

class LPError(Exception):
    pass


def solve_lp(n, objective, le_rows, eq_rows):
    """Maximize objective . x  s.t.  le_rows (a, b): a.x <= b,
    eq_rows (a, b): a.x == b, x >= 0. All entries rational, all b >= 0.

    Returns (value, x). Raises LPError on infeasible/unbounded.
    Entering column: most negative reduced cost, switching to Bland's
    rule after a stretch of degenerate pivots so cycling cannot occur.
    """
    m_le = len(le_rows)
    m_eq = len(eq_rows)
    m = m_le + m_eq
    ncols = n + m_le + m_eq + 1  # structural, slacks, artificials, rhs
    art0 = n + m_le
    rows = []
    basis = []
    for i, (a, b) in enumerate(le_rows):
        if b < 0:
            raise LPError("negative rhs on <= row")
        row = [ZERO] * ncols
        for j, c in enumerate(a):
            row[j] = Fraction(c)
        row[n + i] = ONE
        row[-1] = Fraction(b)
        rows.append(row)
        basis.append(n + i)
    for i, (a, b) in enumerate(eq_rows):
        if b < 0:
            a = [-c for c in a]
            b = -b
        row = [ZERO] * ncols
        for j, c in enumerate(a):
            row[j] = Fraction(c)
        row[art0 + i] = ONE
        row[-1] = Fraction(b)
        rows.append(row)
        basis.append(art0 + i)

    def pivot(r, c):
        p = rows[r][c]
        inv = ONE / p
        rows[r] = [x * inv for x in rows[r]]
        prow = rows[r]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], prow)]
        basis[r] = c

    def run(cost, allowed):
        # cost: list over ncols-1 columns to MINIMIZE; reduced row built fresh
        z = [ZERO] * ncols
        for j in range(ncols - 1):
            z[j] = Fraction(cost[j])
        for r, bv in enumerate(basis):
            if cost[bv] != 0:
                f = cost[bv]
                z = [x - f * y for x, y in zip(z, rows[r])]
        stall = 0
        last = z[-1]
        while True:
            enter = -1
            if stall < 30:
                bestv = ZERO
                for j in range(ncols - 1):
                    if allowed[j] and z[j] < bestv:
                        bestv = z[j]
                        enter = j
            else:  # Bland
                for j in range(ncols - 1):
                    if allowed[j] and z[j] < 0:
                        enter = j
                        break
            if enter < 0:
                return -z[-1]
            leave = -1
            ratio = None
            for i in range(m):
                a = rows[i][enter]
                if a > 0:
                    r = rows[i][-1] / a
                    if ratio is None or r < ratio or (r == ratio and basis[i] < basis[leave]):
                        ratio = r
                        leave = i
            if leave < 0:
                raise LPError("unbounded")
            f = z[enter]
            pivot(leave, enter)
            z = [x - f * y for x, y in zip(z, rows[leave])]
            if z[-1] == last:
                stall += 1
            else:
                stall = 0
                last = z[-1]

    # phase 1: drive artificials to zero
    if m_eq:
        cost = [ZERO] * ncols
        for j in range(art0, art0 + m_eq):
            cost[j] = ONE
        allowed = [True] * (ncols - 1)
        v = run(cost, allowed)
        if v != 0:
            raise LPError("infeasible")
        # pivot lingering zero-level artificials out of the basis
        for i in range(m):
            if basis[i] >= art0:
                for j in range(art0):
                    if rows[i][j] != 0:
                        pivot(i, j)
                        break
    # phase 2
    cost = [ZERO] * ncols
    for j in range(n):
        cost[j] = -Fraction(objective[j])
    allowed = [True] * (ncols - 1)
    for j in range(art0, art0 + m_eq):
        allowed[j] = False
    v = run(cost, allowed)
    x = [ZERO] * n
    for i, bv in enumerate(basis):
        if bv < n:
            x[bv] = rows[i][-1]
    return -v, x


# ---------------------------------------------------------------------------
# the balanced-occupancy program

@dataclass(frozen=True)
class BalancedSolution:
    occupancies: dict          # (i, j) -> Fraction
    C: Fraction
    per_node_in: tuple         # Fraction per node (root entry is its raw in-sum)


def _assemble(t):
    dedges = t.directed_edges()
    idx = {e: i for i, e in enumerate(dedges)}
    n = len(dedges) + 1        # occupancies plus C
    ci = len(dedges)
    le = []
    # per-node send+receive budget
    for v in range(t.P):
        a = [ZERO] * n
        for w in t.adj[v]:
            a[idx[(v, w)]] += 1
            a[idx[(w, v)]] += 1
        le.append((a, ONE))
    # global budget: at most floor(P/2) concurrently active edges
    a = [ZERO] * n
    for e in dedges:
        a[idx[e]] = ONE
    le.append((a, Fraction(t.P // 2)))
    # a non-root node cannot forward more than it takes in
    for (i, j) in dedges:
        if i == t.root:
            continue
        a = [ZERO] * n
        a[idx[(i, j)]] += 1
        for k in t.adj[i]:
            a[idx[(k, i)]] -= 1
        le.append((a, ZERO))
    # equal incoming efficiency everywhere but the root
    eq = []
    for v in range(t.P):
        if v == t.root:
            continue
        a = [ZERO] * n
        for w in t.adj[v]:
            a[idx[(w, v)]] = t.rate(w, v)
        a[ci] = -ONE
        eq.append((a, ZERO))
    return dedges, idx, n, ci, le, eq


def solve_balanced(t, lex_cap=24):
    """Maximal-C occupancies, deterministic among ties.

    Tie-break: minimize total occupancy, then lexicographic smallest by
    directed-edge id. The lexicographic stage costs one LP per edge, so
    it is applied only when the edge count is at most lex_cap; larger
    instances stop after the total-occupancy stage, which is already
    deterministic (fixed pivot rules on a fixed tableau).
    """
    dedges, idx, n, ci, le, eq = _assemble(t)
    if t.P == 1:
        return BalancedSolution({}, ZERO, (ZERO,))
    obj = [ZERO] * n
    obj[ci] = ONE
    cstar, _ = solve_lp(n, obj, le, eq)
    eq2 = list(eq)
    a = [ZERO] * n
    a[ci] = ONE
    eq2.append((a, cstar))
    obj2 = [ZERO] * n
    for i in range(len(dedges)):
        obj2[i] = -ONE
    total, x = solve_lp(n, obj2, le, eq2)
    if len(dedges) <= lex_cap:
        a = [ZERO] * n
        for i in range(len(dedges)):
            a[i] = ONE
        eq2.append((a, -total))
        for i in range(len(dedges)):
            obj3 = [ZERO] * n
            obj3[i] = -ONE
            vi, x = solve_lp(n, obj3, le, eq2)
            a = [ZERO] * n
            a[i] = ONE
            eq2.append((a, -vi))
    occ = {}
    for e, i in idx.items():
        if x[i] != 0:
            occ[e] = x[i]
    per_in = []
    for v in range(t.P):
        per_in.append(sum((occ.get((w, v), ZERO) * t.rate(w, v)
                           for w in t.adj[v]), ZERO))
    return BalancedSolution(occ, cstar, tuple(per_in))


def verify_constraints(t, occupancies, slack=ZERO, C=None):
    """Check an occupancy map against every feasibility constraint.

    Returns a list of violation records (constraint, location, amount);
    empty means all hold. slack widens every bound, for maps measured
    from finite runs. When C is given, balance at non-root nodes is
    checked too.
    """
    report = []
    occ = {e: Fraction(v) for e, v in occupancies.items()}
    for (i, j), v in occ.items():
        if not t.has_edge(i, j):
            report.append(("edge", (i, j), v))
        if v < -slack or v > 1 + slack:
            report.append(("box", (i, j), v))
    total = sum(occ.values(), ZERO)
    cap = Fraction(t.P // 2)
    if total > cap + slack:
        report.append(("global-budget", None, total - cap))
    for v in range(t.P):
        s = sum((occ.get((v, w), ZERO) + occ.get((w, v), ZERO)
                 for w in t.adj[v]), ZERO)
        if s > 1 + slack:
            report.append(("node-budget", v, s - 1))
    for (i, j), v in occ.items():
        if i == t.root:
            continue
        recv = sum((occ.get((k, i), ZERO) for k in t.adj[i]), ZERO)
        if v > recv + slack:
            report.append(("data-forwarding", (i, j), v - recv))
    if C is not None:
        for v in range(t.P):
            if v == t.root:
                continue
            got = sum((occ.get((w, v), ZERO) * t.rate(w, v)
                       for w in t.adj[v]), ZERO)
            if abs(got - C) > slack:
                report.append(("balance", v, got - C))
    return report


def trace_to_occupancy(trace, t):
    """Per-edge active fraction of a completed run: sends / total steps."""
    if trace.T == 0:
        raise ValueError("empty trace")
    occ = {}
    for e, cnt in trace.edge_totals.items():
        if cnt:
            occ[e] = Fraction(cnt, trace.T)
    return occ


def estimate_stable_time(sol, N, t=None):
    """N/C, with the rate-bound bracket it must land in.

    Returns (estimate, (lo, hi)) where lo = N/sup(rates) and
    hi = N*P/inf(rates); containment is asserted.
    """
    if sol.C <= 0:
        raise ValueError("C must be positive")
    est = Fraction(N) / sol.C
    if t is not None:
        rates = [t.rate(i, j) for (i, j) in t.directed_edges()]
        sup_e, inf_e = max(rates), min(rates)
        P = t.P
    else:
        sup_e = inf_e = ONE
        P = len(sol.per_node_in)
    lo = Fraction(N) / sup_e
    hi = Fraction(N) * P / inf_e
    assert lo <= est <= hi, (lo, est, hi)
    return est, (lo, hi)
