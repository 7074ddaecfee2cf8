"""Tests for operator laws, trajectories, coupling, and invariant sampling."""

from fractions import Fraction as F

import numpy as np
import pytest
from scipy.stats import ks_2samp

from mplimit.core import (
    NEG_INF,
    MpMatrix,
    PHI_MAX,
    PHI_MIN,
    mat_vec,
    phi_coord,
    project,
    reconstruct,
)
from mplimit.engine import (
    FiniteSupportLaw,
    LawError,
    ParametricLaw,
    X0Spec,
    detect_coupling,
    draw_operators,
    extend_cocycles,
    format_law,
    invariant_rep_array,
    iterate,
    parse_law,
    parse_noise,
    sample_invariant,
    sample_invariant_many,
    sample_operator,
    simulate_cocycles,
    stream,
    uniform_support_law,
)

Z = MpMatrix.full(2, 0)
P = MpMatrix.from_rows([[NEG_INF, 0], [0, NEG_INF]])


def mdiag(u):
    return MpMatrix.from_rows([[-u, 0], [0, -u]])


def flip_law(p=F(1, 2)):
    return FiniteSupportLaw((Z, P), (p, 1 - p))


# --- streams -----------------------------------------------------------------

def test_streams_reproducible_and_disjoint():
    a = stream(123, 5).random(8)
    b = stream(123, 5).random(8)
    assert (a == b).all()
    assert not (stream(123, 6).random(8) == a).all()
    assert not (stream(124, 5).random(8) == a).all()
    assert not (stream(123, 5, lane=1).random(8) == a).all()


# --- laws ---------------------------------------------------------------------

def test_law_validation():
    with pytest.raises(LawError):
        FiniteSupportLaw((Z,), (F(1, 2),))
    with pytest.raises(LawError):
        FiniteSupportLaw((Z, MpMatrix.full(3, 0)), (F(1, 2), F(1, 2)))
    bad = MpMatrix.from_rows([[NEG_INF, NEG_INF], [0, 0]])
    with pytest.raises(LawError):
        FiniteSupportLaw((bad,), (F(1),))
    with pytest.raises(LawError):
        ParametricLaw(bad, parse_noise("uniform(0,1)"))


def test_law_file_round_trip():
    law = flip_law()
    assert parse_law(format_law(law)) == law
    plaw = ParametricLaw(MpMatrix.full(2, 0), parse_noise("uniform(0,1)"))
    assert parse_law(format_law(plaw)) == plaw
    dlaw = ParametricLaw(
        MpMatrix.from_rows([[0, NEG_INF], [F(1, 2), 1]]),
        parse_noise("discrete{0:1/2,1:1/4,3/2:1/4}"))
    assert parse_law(format_law(dlaw)) == dlaw
    nlaw = ParametricLaw(MpMatrix.full(2, 0), parse_noise("normal(0,2)"))
    assert parse_law(format_law(nlaw)) == nlaw


def test_law_parse_errors():
    with pytest.raises(LawError):
        parse_law("dim 2\ntype finite\n")
    with pytest.raises(LawError):
        parse_law("dim 2\ntype parametric\nnoise uniform(0,1)\n")
    with pytest.raises(LawError):
        parse_noise("weird(1,2)")
    with pytest.raises(LawError):
        parse_noise("discrete{0:1/2,1:1/4}")


def test_sample_operator_point_mass_and_frequency():
    assert sample_operator(FiniteSupportLaw((Z,), (F(1),)), stream(1, 0)) == Z
    law = flip_law()
    rng = stream(2024, 0)
    draws = draw_operators(law, rng, 100_000)
    freq = sum(1 for m in draws if m == Z) / len(draws)
    assert abs(freq - 0.5) <= 0.01


def test_parametric_support():
    law = ParametricLaw(MpMatrix.full(2, 0), parse_noise("uniform(0,1)"))
    m = sample_operator(law, stream(3, 1))
    assert all(0 <= m.entry(i, j) <= 1 for i in range(2) for j in range(2))
    # -inf pattern entries stay -inf
    law2 = ParametricLaw(MpMatrix.from_rows([[0, NEG_INF], [0, 0]]),
                         parse_noise("uniform(0,1)"))
    m2 = sample_operator(law2, stream(3, 1))
    assert m2.entry(0, 1) is NEG_INF


# --- iterate -------------------------------------------------------------------

def test_iterate_constant_matrix_adds_per_step():
    law = FiniteSupportLaw((MpMatrix.full(2, 1),), (F(1),))
    traj = iterate(law, (0, 0), 12, [PHI_MAX], 5)
    assert traj.cocycle(PHI_MAX) == tuple(range(13))


def test_iterate_pure_swap():
    law = FiniteSupportLaw((P,), (F(1),))
    traj = iterate(law, (0, -1), 6, [PHI_MAX], 5)
    reps = [p.rep for p in traj.projs]
    assert reps == [(0, -1), (-1, 0), (0, -1), (-1, 0), (0, -1), (-1, 0), (0, -1)]
    assert set(traj.cocycle(PHI_MAX)) == {0}


def test_iterate_zero_horizon():
    law = flip_law()
    traj = iterate(law, (3, 1), 0, [PHI_MAX, PHI_MIN], 5)
    assert traj.length == 0
    assert traj.projs == (project((3, 1)),)
    assert traj.cocycle(PHI_MAX) == (0,)


def test_normalized_iteration_matches_naive():
    rng = np.random.default_rng(17)
    mats = []
    for _ in range(3):
        rows = [[F(int(rng.integers(-4, 5)), int(rng.integers(1, 4)))
                 for _ in range(3)] for _ in range(3)]
        mats.append(MpMatrix.from_rows(rows))
    law = uniform_support_law(mats)
    x0 = (F(1), F(-2), F(0))
    traj = iterate(law, x0, 50, [PHI_MAX, phi_coord(1)], 31, 4)
    ops = draw_operators(law, stream(31, 4), 50)
    x = x0
    for k, a in enumerate(ops, start=1):
        x = mat_vec(a, x)
        assert project(x) == traj.projs[k]
        assert traj.cocycle(PHI_MAX)[k] == max(x) - max(x0)
        assert traj.cocycle(phi_coord(1))[k] == x[1] - x0[1]


def test_trajectory_reconstruction():
    law = flip_law()
    traj = iterate(law, (2, -1), 20, [PHI_MIN], 77, 3)
    for k in range(21):
        x_k = reconstruct(traj.cocycle(PHI_MIN)[k] + min((2, -1)),
                          traj.projs[k], PHI_MIN)
        assert project(x_k) == traj.projs[k]
        assert min(x_k) - min((2, -1)) == traj.cocycle(PHI_MIN)[k]


# --- coupling -------------------------------------------------------------------

def test_coupling_flip_law_geometric():
    stats = detect_coupling(flip_law(), 40, 4000, 2025)
    assert stats.n_censored == 0
    assert abs(stats.mean_time() - 2.0) <= 0.08
    # exact geometric survival within binomial noise
    for n in (1, 2, 3, 4):
        p = stats.non_coupling_prob(n)
        expect = 0.5 ** n
        assert abs(p - expect) <= 4 * np.sqrt(expect * (1 - expect) / 4000) + 1e-12


def test_no_coupling_when_zero_penalty_impossible():
    law = uniform_support_law([mdiag(F(1, 4)), mdiag(F(1, 2)), mdiag(F(1))])
    stats = detect_coupling(law, 30, 300, 9)
    assert stats.n_censored == 300
    assert stats.mean_time() is None


def test_coupling_survival_submultiplicative():
    stats = detect_coupling(flip_law(F(1, 4)), 12, 4000, 11)
    surv = (1.0,) + stats.survival()
    for n in (2, 4):
        for m in (2, 4, 6):
            assert surv[n + m] <= surv[n] * surv[m] + 0.05


# --- invariant sampling -----------------------------------------------------------

def test_invariant_point_mass_laws():
    assert sample_invariant(FiniteSupportLaw((Z,), (F(1),)), 8, 5).depth == 1
    law = uniform_support_law([mdiag(F(0)), mdiag(F(1))])
    for i in range(40):
        s = sample_invariant(law, 64, 123, i)
        assert not s.censored
        assert s.proj.rep == (0, 0)


def test_invariant_flip_law():
    samples = sample_invariant_many(flip_law(), 50, 17, max_depth=64)
    assert all(not s.censored and s.proj.rep == (0, 0) for s in samples)
    depths = [s.depth for s in samples]
    assert min(depths) == 1 and max(depths) > 1


def test_invariant_censoring_monotone():
    law = flip_law(F(1, 8))
    for i in range(30):
        small = sample_invariant(law, 4, 500, i)
        big = sample_invariant(law, 64, 500, i)
        if not small.censored:
            assert (small.proj, small.depth) == (big.proj, big.depth)


def test_forward_distribution_approaches_invariant():
    # memory loss drives the projective part to its stationary law; the
    # KS distance to the exact backward samples must shrink with n
    law = flip_law(F(3, 10))
    inv = invariant_rep_array(sample_invariant_many(law, 400, 900, max_depth=256))
    dists = []
    for n in (2, 4, 8, 16):
        cs = simulate_cocycles(law, X0Spec.fixed((0, -3)), [n], 800, 901)
        ks = 0.0
        for coord in range(2):
            stat = ks_2samp(cs.rep[n][:, coord], inv[:, coord]).statistic
            ks = max(ks, stat)
        dists.append(ks)
    assert dists[-1] <= dists[0]
    assert dists[-1] <= 0.05
    assert all(b <= a + 0.06 for a, b in zip(dists, dists[1:]))


def test_invariant_stationarity_two_sample_ks():
    law = ParametricLaw(MpMatrix.full(2, 0), parse_noise("uniform(0,1)"))
    base = sample_invariant_many(law, 1500, 42, max_depth=256)
    fresh = sample_invariant_many(law, 1500, 43, max_depth=256)
    pushed = []
    for i, s in enumerate(fresh):
        if s.censored:
            continue
        a = sample_operator(law, stream(44, i, lane=7))
        pushed.append(project(mat_vec(a, s.proj.rep)).rep)
    x = invariant_rep_array(base)
    y = np.array([[float(v) for v in rep] for rep in pushed])
    for coord in range(2):
        assert ks_2samp(x[:, coord], y[:, coord]).pvalue > 0.01


# --- batch kernel -----------------------------------------------------------------

def test_batch_matches_scalar_path():
    law = FiniteSupportLaw(
        (MpMatrix.from_rows([[1, 3], [0, 2]]),
         MpMatrix.from_rows([[0, NEG_INF], [2, F(1, 2)]])),
        (F(1, 3), F(2, 3)))
    cs = simulate_cocycles(law, X0Spec.fixed((1, -2)), [7, 20], 6, 123)
    for t in range(6):
        traj = iterate(law, (1, -2), 20, [PHI_MAX, PHI_MIN], 123, t)
        for n in (7, 20):
            assert abs(cs.cocycle_values(PHI_MAX, n)[t]
                       - float(traj.cocycle(PHI_MAX)[n])) < 1e-9
            assert np.allclose(cs.rep[n][t],
                               [float(v) for v in traj.projs[n].rep])


def test_batch_thread_and_chunk_invariance():
    law = ParametricLaw(MpMatrix.full(2, 0), parse_noise("uniform(0,1)"))
    a = simulate_cocycles(law, X0Spec.zero(2), [40], 500, 7, threads=1, chunk=500)
    b = simulate_cocycles(law, X0Spec.zero(2), [40], 500, 7, threads=4, chunk=61)
    assert (a.shift[40] == b.shift[40]).all()
    assert (a.rep[40] == b.rep[40]).all()


def test_batch_random_x0_and_product_tracking():
    law = flip_law()
    cs = simulate_cocycles(law, X0Spec.uniform(-1, 1), [10], 300, 5,
                           track_product=True)
    assert cs.x0.shape == (300, 2)
    assert ((-1 <= cs.x0) & (cs.x0 <= 1)).all()
    # starting from 0 the max coordinate equals the product max exactly
    cs0 = simulate_cocycles(law, X0Spec.zero(2), [10], 300, 5,
                            track_product=True)
    assert (cs0.cocycle_values(PHI_MAX, 10) == cs0.prod_max[10]).all()


def test_extension_preserves_prefix():
    law = flip_law()
    c0 = simulate_cocycles(law, X0Spec.zero(2), [20], 50, 3, track_product=True)
    c1 = extend_cocycles(c0, law, X0Spec.zero(2), 130)
    assert c1.trials == 130
    assert (c1.shift[20][:50] == c0.shift[20]).all()
    assert (c1.prod_max[20][:50] == c0.prod_max[20]).all()
