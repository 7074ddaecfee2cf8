"""Tests for cycle means, critical graphs, cyclicity, and power periodicity."""

from fractions import Fraction as F

import numpy as np
import pytest

from mplimit.core import NEG_INF, MaxPlusError, MpMatrix, mat_power, mat_vec
from mplimit.spectral import (
    analyze_matrix,
    critical_graph,
    cyclicity,
    enumerate_circuits,
    graph_of,
    is_strongly_connected,
    max_cycle_mean,
    report_text,
    strongly_connected_components,
    ultimate_period_check,
)

A132 = MpMatrix.from_rows([[1, 3], [0, 2]])
P2 = MpMatrix.from_rows([[NEG_INF, 0], [0, NEG_INF]])
E2 = MpMatrix.identity(2)


def mdiag(u):
    return MpMatrix.from_rows([[-u, 0], [0, -u]])


def random_rational_matrix(rng, d, density=1.0, lo=-8, hi=8, dens_keep_rows=False):
    rows = []
    for i in range(d):
        row = []
        for j in range(d):
            if rng.random() > density:
                row.append(NEG_INF)
            else:
                row.append(F(int(rng.integers(lo, hi + 1)),
                             int(rng.integers(1, 5))))
        rows.append(row)
    if dens_keep_rows:
        for i, row in enumerate(rows):
            if all(v is NEG_INF for v in row):
                row[int(rng.integers(0, d))] = F(int(rng.integers(lo, hi + 1)))
    return MpMatrix.from_rows(rows)


def test_graph_of():
    g = graph_of(P2)
    assert g.arc_set == {(1, 2), (2, 1)}
    assert g.dim == 2


def test_sccs():
    upper = MpMatrix.from_rows([[NEG_INF, 0, 1], [NEG_INF, NEG_INF, 2],
                                [NEG_INF, NEG_INF, NEG_INF]])
    assert strongly_connected_components(upper) == [[0], [1], [2]]
    assert is_strongly_connected(P2)
    assert not is_strongly_connected(E2)


def test_max_cycle_mean_examples():
    assert max_cycle_mean(A132) == 2
    assert max_cycle_mean(mdiag(F(3, 2))) == 0
    assert max_cycle_mean(mdiag(0)) == 0
    assert max_cycle_mean(E2) == 0
    upper = MpMatrix.from_rows([[NEG_INF, 5], [NEG_INF, NEG_INF]])
    assert max_cycle_mean(upper) is None


def test_enumerate_circuits_examples():
    got = dict(enumerate_circuits(A132, 2))
    assert got == {(1, 1): 1, (2, 2): 2, (1, 2, 1): F(3, 2)}
    upper = MpMatrix.from_rows([[NEG_INF, 5], [NEG_INF, NEG_INF]])
    assert enumerate_circuits(upper, 2) == []
    assert dict(enumerate_circuits(P2, 2)) == {(1, 2, 1): 0}
    with pytest.raises(MaxPlusError):
        enumerate_circuits(P2, 0)


def test_karp_matches_enumeration_on_random_matrices():
    rng = np.random.default_rng(20240211)
    for _ in range(120):
        d = int(rng.integers(1, 7))
        density = float(rng.uniform(0.2, 1.0))
        a = random_rational_matrix(rng, d, density)
        circuits = enumerate_circuits(a, d)
        oracle = max(w for _, w in circuits) if circuits else None
        assert max_cycle_mean(a) == oracle


def test_critical_graph_examples():
    crit = critical_graph(A132)
    assert crit.arc_set == {(2, 2)}
    assert cyclicity(A132) == 1
    crit = critical_graph(P2)
    assert crit.arc_set == {(1, 2), (2, 1)}
    assert cyclicity(P2) == 2
    crit = critical_graph(E2)
    assert crit.arc_set == {(1, 1), (2, 2)}
    assert cyclicity(E2) == 1


def test_critical_graph_mixed_components():
    # block diagonal: a mean-2 self loop and a mean-2 two-cycle are both
    # critical; cyclicity is lcm(1, 2) = 2
    a = MpMatrix.from_rows([
        [2, NEG_INF, NEG_INF],
        [NEG_INF, NEG_INF, 2],
        [NEG_INF, 2, NEG_INF],
    ])
    assert max_cycle_mean(a) == 2
    assert critical_graph(a).arc_set == {(1, 1), (2, 3), (3, 2)}
    assert cyclicity(a) == 2


def test_critical_graph_acyclic_errors():
    upper = MpMatrix.from_rows([[NEG_INF, 5], [NEG_INF, NEG_INF]])
    with pytest.raises(MaxPlusError):
        critical_graph(upper)
    with pytest.raises(MaxPlusError):
        cyclicity(upper)


def test_ultimate_period_examples():
    assert ultimate_period_check(P2) == (1, 2, 0)
    assert ultimate_period_check(A132) == (1, 1, 2)
    # the max-plus identity is strongly connected only at dimension one
    one = MpMatrix.identity(1)
    assert ultimate_period_check(one) == (1, 1, 0)
    with pytest.raises(MaxPlusError):
        ultimate_period_check(E2)


def test_ultimate_period_respects_small_horizon():
    assert ultimate_period_check(P2, horizon=2) is None


def test_cycle_mean_shift_equivariance():
    rng = np.random.default_rng(7)
    for _ in range(25):
        d = int(rng.integers(2, 6))
        a = random_rational_matrix(rng, d, 0.7)
        rho = max_cycle_mean(a)
        c = F(int(rng.integers(-6, 6)), int(rng.integers(1, 4)))
        shifted = max_cycle_mean(a.shifted(c))
        if rho is None:
            assert shifted is None
        else:
            assert shifted == rho + c


def test_powers_match_path_oracle():
    # (A^n)_ij is the max weight over length-n paths from i to j
    rng = np.random.default_rng(99)
    for _ in range(10):
        d = int(rng.integers(2, 5))
        a = random_rational_matrix(rng, d, 0.8)
        n = int(rng.integers(1, 5))
        power = mat_power(a, n)

        def best_path(i, j, steps):
            if steps == 0:
                return F(0) if i == j else NEG_INF
            best = NEG_INF
            for k in range(d):
                v = a.entry(i, k)
                if v is NEG_INF:
                    continue
                rest = best_path(k, j, steps - 1)
                if rest is NEG_INF:
                    continue
                cand = v + rest
                if best is NEG_INF or cand > best:
                    best = cand
            return best

        for i in range(d):
            for j in range(d):
                assert power.entry(i, j) == best_path(i, j, n)


def test_normalized_powers_bounded_when_rho_zero():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 10:
        d = int(rng.integers(2, 5))
        a = random_rational_matrix(rng, d, 0.8)
        if not is_strongly_connected(a):
            continue
        checked += 1
        norm = a.shifted(-max_cycle_mean(a))
        x = tuple(F(int(rng.integers(-3, 4))) for _ in range(d))
        horizon = 4 * d * d
        cur = x
        seen = []
        for _ in range(horizon):
            cur = mat_vec(norm, cur)
            seen.append(max(cur))
        assert max(seen) <= max(x) + sum(
            abs(v) for row in norm.rows for v in row if v is not NEG_INF)


def test_period_equals_cyclicity_on_random_sc_matrices():
    rng = np.random.default_rng(424242)
    done = censored = 0
    while done < 40:
        d = int(rng.integers(2, 6))
        a = random_rational_matrix(rng, d, float(rng.uniform(0.35, 0.9)))
        if not is_strongly_connected(a):
            continue
        done += 1
        out = ultimate_period_check(a)
        if out is None:
            censored += 1
            continue
        _, period, rho = out
        assert period == cyclicity(a)
        assert rho == max_cycle_mean(a)
    assert censored <= 2


def test_analyze_and_report_text():
    r = analyze_matrix(A132)
    text = report_text(r)
    assert "rho_max 2" in text
    assert "cyclicity 1" in text
    assert "period 1" in text
    third = MpMatrix.from_rows([[F(1, 3), NEG_INF], [NEG_INF, F(1, 3)]])
    assert "rho_max 1/3" in report_text(analyze_matrix(third))
    # -inf row: diagnostic note, graph analysis still present
    bad = MpMatrix.from_rows([[NEG_INF, NEG_INF], [0, 1]])
    rb = analyze_matrix(bad)
    assert not rb.operator_valid
    assert any("no topical operator" in n for n in rb.notes)
