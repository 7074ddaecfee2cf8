"""Spectral analysis of a single max-plus matrix via its precedence graph.

The graph of a d x d matrix has nodes 1..d and an arc (i, j) for every
finite entry A_ij, weighted by that entry. This module computes the maximum
cycle mean (Karp's dynamic program per strongly connected component), an
exhaustive elementary-circuit oracle for small dimensions, the critical
graph, its cyclicity, and a bounded-horizon check that powers of the
normalized matrix become periodic with period equal to the cyclicity.

All arithmetic is exact on rational entries; float entries are compared
with an absolute tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    NEG_INF,
    MaxPlusError,
    MpMatrix,
    mat_mul,
    scalar_eq,
)


@dataclass(frozen=True)
class WeightedDigraph:
    """Finite-entry precedence graph; nodes are 1..dim, arcs carry weights."""

    dim: int
    arcs: tuple  # tuple of ((i, j), weight), 1-based nodes

    @property
    def arc_set(self):
        return {ij for ij, _ in self.arcs}

    @property
    def nodes(self):
        return sorted({i for (i, j), _ in self.arcs} | {j for (i, j), _ in self.arcs})


def graph_of(a: MpMatrix) -> WeightedDigraph:
    arcs = []
    for i in range(a.dim):
        for j in range(a.dim):
            v = a.entry(i, j)
            if v is not NEG_INF:
                arcs.append(((i + 1, j + 1), v))
    return WeightedDigraph(a.dim, tuple(arcs))


def _adjacency(a: MpMatrix):
    """0-based adjacency list [(j, weight), ...] per node."""
    adj = [[] for _ in range(a.dim)]
    for i in range(a.dim):
        for j in range(a.dim):
            v = a.entry(i, j)
            if v is not NEG_INF:
                adj[i].append((j, v))
    return adj


def strongly_connected_components(a: MpMatrix):
    """Tarjan SCCs of the graph of ``a``, as sorted 0-based node lists."""
    adj = _adjacency(a)
    n = a.dim
    index = [None] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    sccs = []
    counter = 0

    for root in range(n):
        if index[root] is not None:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work.pop()
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            descended = False
            for k in range(pi, len(adj[v])):
                w = adj[v][k][0]
                if index[w] is None:
                    work.append((v, k + 1))
                    work.append((w, 0))
                    descended = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if descended:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(sorted(comp))
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
    return sorted(sccs, key=lambda c: c[0])


def is_strongly_connected(a: MpMatrix) -> bool:
    return len(strongly_connected_components(a)) == 1


def _karp_scc(a: MpMatrix, comp):
    """Max cycle mean inside one SCC (0-based node list), or None."""
    if len(comp) == 1:
        v = a.entry(comp[0], comp[0])
        return None if v is NEG_INF else _ratio(v, 1)
    pos = {v: k for k, v in enumerate(comp)}
    n = len(comp)
    arcs = []
    for i in comp:
        for j in comp:
            w = a.entry(i, j)
            if w is not NEG_INF:
                arcs.append((pos[i], pos[j], w))
    # F[k][v]: max weight of a k-arc walk from the source to v
    F = [[None] * n for _ in range(n + 1)]
    F[0][0] = 0
    for k in range(1, n + 1):
        fk, fp = F[k], F[k - 1]
        for (u, v, w) in arcs:
            if fp[u] is None:
                continue
            cand = fp[u] + w
            if fk[v] is None or cand > fk[v]:
                fk[v] = cand
    best = None
    for v in range(n):
        if F[n][v] is None:
            continue
        worst = None
        for k in range(n):
            if F[k][v] is None:
                continue
            mean = _ratio(F[n][v] - F[k][v], n - k)
            if worst is None or mean < worst:
                worst = mean
        if worst is not None and (best is None or worst > best):
            best = worst
    return best


def _ratio(num, den):
    if isinstance(num, (int, Fraction)):
        return Fraction(num, den)
    return num / den


def max_cycle_mean(a: MpMatrix):
    """Maximum average weight over elementary circuits; None if acyclic.

    Karp's dynamic program is run per strongly connected component and the
    overall maximum is returned (circuits never cross components).
    """
    best = None
    for comp in strongly_connected_components(a):
        rho = _karp_scc(a, comp)
        if rho is not None and (best is None or rho > best):
            best = rho
    return best


def enumerate_circuits(a: MpMatrix, max_len: int):
    """All elementary circuits of length <= max_len with exact mean weights.

    Brute-force oracle; restricted to small matrices (dim <= 8). Circuits
    are returned as closed 1-based node tuples starting at their smallest
    node, e.g. ``(1, 2, 1)`` for the two-cycle.
    """
    if max_len < 1:
        raise MaxPlusError("max_len must be >= 1")
    if a.dim > 8:
        raise MaxPlusError("circuit enumeration is an oracle for dim <= 8")
    adj = _adjacency(a)
    out = []

    def extend(root, path, weight, used):
        v = path[-1]
        for (w, wt) in adj[v]:
            if w == root and len(path) <= max_len:
                total = weight + wt
                out.append((tuple(p + 1 for p in path) + (root + 1,),
                            _ratio(total, len(path))))
            elif w > root and not used[w] and len(path) < max_len:
                used[w] = True
                extend(root, path + [w], weight + wt, used)
                used[w] = False

    for root in range(a.dim):
        used = [False] * a.dim
        used[root] = True
        extend(root, [root], 0, used)
    return out


def _closure_positive_lengths(a: MpMatrix):
    """Max weight over paths of length 1..dim between every node pair."""
    d = a.dim
    best = [list(row) for row in a.rows]
    power = MpMatrix(d, tuple(tuple(row) for row in a.rows))
    for _ in range(d - 1):
        power = mat_mul(power, a)
        for i in range(d):
            for j in range(d):
                v = power.entry(i, j)
                if v is NEG_INF:
                    continue
                if best[i][j] is NEG_INF or v > best[i][j]:
                    best[i][j] = v
    return best


def critical_graph(a: MpMatrix, tol: float = 1e-9) -> WeightedDigraph:
    """Subgraph of nodes and arcs lying on circuits of mean rho_max."""
    rho = max_cycle_mean(a)
    if rho is None:
        raise MaxPlusError("acyclic graph has no critical circuits")
    norm = a.shifted(-rho)
    best = _closure_positive_lengths(norm)
    zero = Fraction(0) if norm.is_exact else 0.0
    arcs = []
    for i in range(a.dim):
        for j in range(a.dim):
            w = norm.entry(i, j)
            if w is NEG_INF or best[j][i] is NEG_INF:
                continue
            if scalar_eq(w + best[j][i], zero, tol):
                arcs.append(((i + 1, j + 1), a.entry(i, j)))
    return WeightedDigraph(a.dim, tuple(arcs))


def _scc_of_arcs(dim: int, arc_pairs):
    """SCCs (0-based) of an arbitrary arc set, trivial components dropped."""
    adj = [[] for _ in range(dim)]
    for (i, j) in arc_pairs:
        adj[i - 1].append(j - 1)
    seen = [False] * dim
    order = []

    def dfs(start, graph, mark, sink):
        stack = [(start, iter(graph[start]))]
        mark[start] = True
        while stack:
            v, it = stack[-1]
            for w in it:
                if not mark[w]:
                    mark[w] = True
                    stack.append((w, iter(graph[w])))
                    break
            else:
                stack.pop()
                sink(v)

    for v in range(dim):
        if not seen[v]:
            dfs(v, adj, seen, order.append)
    radj = [[] for _ in range(dim)]
    for (i, j) in arc_pairs:
        radj[j - 1].append(i - 1)
    seen2 = [False] * dim
    comps = []
    for v in reversed(order):
        if not seen2[v]:
            comp = []
            dfs(v, radj, seen2, comp.append)
            comps.append(sorted(comp))
    arc_set = {(i - 1, j - 1) for (i, j) in arc_pairs}
    # keep components that carry at least one arc (i.e. contain a circuit)
    kept = []
    for comp in comps:
        members = set(comp)
        if any(u in members and v in members for (u, v) in arc_set):
            kept.append(comp)
    return kept


def cyclicity(a: MpMatrix, tol: float = 1e-9) -> int:
    """lcm over critical components of the gcd of their circuit lengths.

    The per-component gcd is computed from BFS levels: for every arc
    (u, v) inside the component, level(u) + 1 - level(v) is a circuit-length
    difference, and the gcd of those differences equals the gcd of the
    component's circuit lengths.
    """
    crit = critical_graph(a, tol)
    comps = _scc_of_arcs(a.dim, [ij for ij, _ in crit.arcs])
    if not comps:
        raise MaxPlusError("no critical circuits found")
    arc_set = {(i - 1, j - 1) for (i, j), _ in crit.arcs}
    result = 1
    for comp in comps:
        members = set(comp)
        adj = {u: [] for u in comp}
        for (u, v) in arc_set:
            if u in members and v in members:
                adj[u].append(v)
        level = {comp[0]: 0}
        frontier = [comp[0]]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in level:
                        level[v] = level[u] + 1
                        nxt.append(v)
            frontier = nxt
        g = 0
        for u in comp:
            for v in adj[u]:
                g = math.gcd(g, level[u] + 1 - level[v])
        result = result * g // math.gcd(result, g)
    return result


def _entries_equal(a: MpMatrix, b: MpMatrix, tol: float) -> bool:
    return all(scalar_eq(a.entry(i, j), b.entry(i, j), tol)
               for i in range(a.dim) for j in range(a.dim))


def ultimate_period_check(a: MpMatrix, horizon: int | None = None,
                          tol: float = 1e-9):
    """Detect the ultimate period of powers of the rho-normalized matrix.

    Requires a strongly connected graph. Computes powers of
    ``A - rho_max(A)`` up to ``horizon`` (default 4 d^2 + 2 cyclicity) and
    finds the smallest period c and onset n0 with equal powers on
    [n0, horizon - c]; at least one full extra period must be confirmed.
    Asserts that c equals the cyclicity. Returns (n0, c, rho_max), or None
    when the horizon is too small to confirm periodicity.
    """
    if not is_strongly_connected(a):
        raise MaxPlusError("graph is not strongly connected")
    rho = max_cycle_mean(a)
    cyc = cyclicity(a, tol)
    if horizon is None:
        horizon = 4 * a.dim * a.dim + 2 * cyc
    norm = a.shifted(-rho)
    powers = [None, norm]
    for _ in range(horizon - 1):
        powers.append(mat_mul(powers[-1], norm))
    for c in range(1, horizon // 2 + 1):
        n0 = None
        ok = True
        for n in range(1, horizon - c + 1):
            if _entries_equal(powers[n], powers[n + c], tol):
                if n0 is None:
                    n0 = n
            elif n0 is not None:
                n0 = None  # stability must hold for the whole tail
        if n0 is not None and (horizon - c) - n0 + 1 >= c:
            if c != cyc:
                raise MaxPlusError(
                    f"observed ultimate period {c} != cyclicity {cyc}")
            return (n0, c, rho)
    return None


@dataclass
class SpectralReport:
    dim: int
    operator_valid: bool
    strongly_connected: bool
    scc_partition: list
    rho_max: object
    critical_arcs: tuple = ()
    critical_nodes: tuple = ()
    cyclicity: int | None = None
    period_onset: int | None = None
    period: int | None = None
    notes: list = field(default_factory=list)


def analyze_matrix(a: MpMatrix, horizon: int | None = None,
                   tol: float = 1e-9) -> SpectralReport:
    sccs = strongly_connected_components(a)
    report = SpectralReport(
        dim=a.dim,
        operator_valid=a.is_operator_valid,
        strongly_connected=len(sccs) == 1,
        scc_partition=[[v + 1 for v in comp] for comp in sccs],
        rho_max=max_cycle_mean(a),
    )
    if not report.operator_valid:
        report.notes.append("matrix has a row of -inf entries; it defines no "
                            "topical operator (graph analysis only)")
    if report.rho_max is None:
        report.notes.append("graph is acyclic; no circuits, no critical graph")
        return report
    crit = critical_graph(a, tol)
    report.critical_arcs = tuple(ij for ij, _ in crit.arcs)
    report.critical_nodes = tuple(sorted({i for (i, _) in report.critical_arcs}
                                         | {j for (_, j) in report.critical_arcs}))
    report.cyclicity = cyclicity(a, tol)
    if report.strongly_connected:
        pc = ultimate_period_check(a, horizon, tol)
        if pc is None:
            report.notes.append("power periodicity not confirmed within horizon")
        else:
            report.period_onset, report.period, _ = pc
    else:
        report.notes.append("not strongly connected; periodicity check skipped")
    return report


def report_text(r: SpectralReport) -> str:
    from .core import format_scalar

    lines = [
        f"dim {r.dim}",
        f"operator_valid {str(r.operator_valid).lower()}",
        f"strongly_connected {str(r.strongly_connected).lower()}",
        "scc_partition " + " | ".join(
            ",".join(str(v) for v in comp) for comp in r.scc_partition),
        "rho_max " + ("none" if r.rho_max is None else format_scalar(r.rho_max)),
    ]
    if r.rho_max is not None:
        lines.append("critical_nodes " + ",".join(str(v) for v in r.critical_nodes))
        lines.append("critical_arcs " + " ".join(
            f"{i}->{j}" for (i, j) in r.critical_arcs))
        lines.append(f"cyclicity {r.cyclicity}")
    if r.period is not None:
        lines.append(f"period {r.period}")
        lines.append(f"period_onset {r.period_onset}")
    for note in r.notes:
        lines.append(f"note {note}")
    return "\n".join(lines) + "\n"
