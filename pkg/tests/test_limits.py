"""Tests for the Monte Carlo estimator suite."""

import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.stats import binom

from mplimit.core import NEG_INF, MaxPlusError, MpMatrix, PHI_MAX, PHI_MIN
from mplimit.engine import FiniteSupportLaw, X0Spec, uniform_support_law
from mplimit.limits import (
    DegenerateInstanceError,
    ExperimentPlan,
    LatticeRefusedError,
    Tent,
    berry_esseen_fit,
    build_plan,
    clt_test,
    estimate_gamma,
    estimate_sigma2,
    ks_normal,
    ldp_rate,
    llt_box_estimate,
    parse_plan,
    renewal_sum,
)
from mplimit.semigroup import certify

R2 = math.sqrt(2)
Z = MpMatrix.full(2, 0)
P = MpMatrix.from_rows([[NEG_INF, 0], [0, NEG_INF]])


def const(c):
    return MpMatrix.full(2, c)


def bernoulli_law():
    return uniform_support_law([const(0), const(1)])


def plan_for(law, horizons, trials, seed, phi=PHI_MAX, x0=None):
    return ExperimentPlan(law, phi, tuple(horizons), trials, seed,
                          x0 or X0Spec.zero(law.dim))


# --- plan validation -------------------------------------------------------------

def test_plan_validation():
    law = bernoulli_law()
    with pytest.raises(MaxPlusError):
        plan_for(law, (100,), 50, 1)  # too few trials
    with pytest.raises(MaxPlusError):
        plan_for(law, (100, 100), 200, 1)  # not strictly increasing
    with pytest.raises(MaxPlusError):
        plan_for(law, (), 200, 1)


def test_ks_normal_sane():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(4000)
    assert ks_normal(z) < 0.03
    assert ks_normal(z + 2.0) > 0.5


# --- growth rate ------------------------------------------------------------------

def test_gamma_deterministic_exact():
    det = FiniteSupportLaw((MpMatrix.from_rows([[1, 3], [0, 2]]),), (F(1),))
    for n in (2, 5, 40):
        plan = plan_for(det, (n,), 100, 5)
        g = estimate_gamma(plan)
        assert g.gamma_hat == 2.0
        assert g.se == 0.0
    # plain max/min variants at horizon n: (2n+1)/n and 2
    g = estimate_gamma(plan_for(det, (10,), 100, 5))
    assert g.gamma_max == pytest.approx(2.1)
    assert g.gamma_min == pytest.approx(2.0)
    assert g.gamma_min <= g.gamma_max


def test_gamma_bernoulli_ci():
    plan = plan_for(bernoulli_law(), (1000,), 2000, 11)
    g = estimate_gamma(plan)
    assert abs(g.gamma_hat - 0.5) <= 3 * g.se
    assert g.se > 0


def test_gamma_flip_law_zero_exact():
    law = uniform_support_law([Z, P])
    g = estimate_gamma(plan_for(law, (200,), 200, 3))
    assert g.gamma_hat == 0.0
    assert g.gamma_max == 0.0 and g.gamma_min == 0.0


def test_gamma_variant_order_always():
    law = uniform_support_law(
        [MpMatrix.from_rows([[1, 3], [0, 2]]), P, Z])
    g = estimate_gamma(plan_for(law, (60,), 300, 17))
    assert g.gamma_min <= g.gamma_max


# --- variance ----------------------------------------------------------------------

def test_sigma2_half_law():
    law = uniform_support_law([const(F(-1, 2)), const(F(1, 2))])
    plan = plan_for(law, (1000,), 4000, 13)
    est = estimate_sigma2(plan, F(0))
    assert abs(est.sigma2_hat - 0.25) <= 0.01
    assert est.matrix_matches_exactly is True
    assert est.sigma2_matrix == est.sigma2_hat
    assert abs(est.sigma2_batch - 0.25) <= 0.02


def test_sigma2_degenerate_flip_law():
    law = uniform_support_law([Z, P])
    est = estimate_sigma2(plan_for(law, (1000,), 1000, 7), F(0))
    assert est.sigma2_hat == 0.0
    assert est.sigma2_matrix == 0.0


def test_sigma2_constant_law_exact_zero():
    law = FiniteSupportLaw((const(0),), (F(1),))
    est = estimate_sigma2(plan_for(law, (100,), 100, 1), F(0))
    assert est.sigma2_hat == 0.0


# --- CLT --------------------------------------------------------------------------

def test_clt_bernoulli():
    plan = plan_for(bernoulli_law(), (400,), 4000, 19)
    rep = clt_test(plan, 0.5, 0.5)
    assert rep.points[0].ks <= 0.06
    assert rep.points[0].spread_q99 == 0.0


def test_clt_degenerate_error():
    law = uniform_support_law([Z, P])
    with pytest.raises(DegenerateInstanceError):
        clt_test(plan_for(law, (100,), 200, 3), 0.0, 0.0)


def test_clt_generic_parametric_law():
    from mplimit.engine import ParametricLaw, parse_noise
    law = ParametricLaw(MpMatrix.full(2, 0), parse_noise("uniform(0,1)"))
    plan = plan_for(law, (400,), 4000, 61)
    g = estimate_gamma(plan)
    s = estimate_sigma2(plan, g.gamma_hat)
    assert s.sigma2_hat > 0.005  # generic laws are nondegenerate
    rep = clt_test(plan, g.gamma_hat, s.sigma)
    assert rep.points[0].ks <= 0.08


def test_berry_esseen_slope():
    plan = plan_for(bernoulli_law(), (25, 100, 400, 1600), 20000, 23)
    fit = berry_esseen_fit(plan, 0.5, 0.5, moment_order=3)
    assert -0.65 <= fit.slope <= -0.35
    assert fit.vector_exponent == pytest.approx(3 / 8)
    with pytest.raises(MaxPlusError):
        berry_esseen_fit(plan_for(bernoulli_law(), (25, 100), 200, 1), 0.5, 0.5)


def test_scale_equivariance_exact():
    # shifting every finite entry by 2 shifts gamma by exactly 2 and leaves
    # sigma^2, KS, and the rate curve unchanged (dyadic values: exact floats)
    base = uniform_support_law([const(F(-1, 2)), const(F(1, 2))])
    shifted = uniform_support_law([const(F(3, 2)), const(F(5, 2))])
    p1 = plan_for(base, (200,), 1000, 29)
    p2 = plan_for(shifted, (200,), 1000, 29)
    g1, g2 = estimate_gamma(p1), estimate_gamma(p2)
    # exact up to one rounding in the /(n - m) division
    assert g2.gamma_hat == pytest.approx(g1.gamma_hat + 2.0, abs=1e-12)
    s1 = estimate_sigma2(p1, F(0))
    s2 = estimate_sigma2(p2, F(2))
    assert s1.sigma2_hat == s2.sigma2_hat
    k1 = clt_test(p1, 0.0, s1.sigma)
    k2 = clt_test(p2, 2.0, s2.sigma)
    assert k1.points[0].ks == k2.points[0].ks
    c1 = ldp_rate(p1, 0.0, [0.1, 0.2], max_trials=1000)
    c2 = ldp_rate(p2, 2.0, [0.1, 0.2], max_trials=1000)
    assert [(p.hits, p.value) for p in c1.points] == \
        [(p.hits, p.value) for p in c2.points]


# --- LLT ---------------------------------------------------------------------------

def test_llt_nonlattice_constant_law():
    law = uniform_support_law([const(0.0), const(1.0), const(R2)])
    cert = certify(law.support, 6)
    gamma = (1 + R2) / 3
    sigma = math.sqrt(1 - gamma ** 2)
    plan = plan_for(law, (400,), 20000, 31)
    table = llt_box_estimate(plan, gamma, sigma, cert,
                             [Tent(0, 1.0), Tent(0, 2.0)], [0.0, 3.0])
    for e in table.entries:
        assert abs(e.ratio - 1.0) <= 0.1
    assert table.nu0_g == 1.0


def test_llt_refuses_lattice_law():
    law = bernoulli_law()
    cert = certify(law.support, 4, gamma=F(1, 2))
    with pytest.raises(LatticeRefusedError) as exc:
        llt_box_estimate(plan_for(law, (100,), 100, 3), 0.5, 0.5, cert,
                         [Tent(0, 1.0)], [0.0])
    assert exc.value.lattice == (0, F(1))


def test_llt_degenerate_guard():
    law = uniform_support_law([Z, P])
    cert = certify(law.support, 3, gamma=F(0))
    with pytest.raises(DegenerateInstanceError):
        llt_box_estimate(plan_for(law, (100,), 100, 3), 0.0, 0.0, cert,
                         [Tent(0, 1.0)], [0.0])


def test_llt_with_projective_test_function():
    # g constant 1 as an explicit callable must match the exact nu0(g) = 1
    law = uniform_support_law([const(0.0), const(1.0), const(R2)])
    cert = certify(law.support, 6)
    gamma = (1 + R2) / 3
    sigma = math.sqrt(1 - gamma ** 2)
    plan = plan_for(law, (100,), 2000, 37)
    table = llt_box_estimate(plan, gamma, sigma, cert, [Tent(0, 2.0)], [0.0],
                             g=lambda rep: np.ones(len(rep)),
                             invariant_count=200)
    assert table.nu0_g == 1.0


# --- renewal -----------------------------------------------------------------------

def renewal_fixture(trials=4000, seed=41):
    law = uniform_support_law([const(1.0), const(R2)])
    cert = certify(law.support, 6)
    gamma = (1 + R2) / 2
    plan = plan_for(law, (400,), trials, seed)
    return law, cert, gamma, plan


def test_renewal_two_point_law():
    _, cert, gamma, plan = renewal_fixture()
    table = renewal_sum(plan, gamma, cert, Tent(0, 2.0), [50.0, 100.0, -100.0])
    by_a = {e.a: e for e in table.entries}
    for a in (50.0, 100.0):
        e = by_a[a]
        assert abs(e.value - e.limit) <= 0.1 * e.limit
        assert e.tail_flag == 0.0
    assert by_a[-100.0].value == 0.0


def test_renewal_linearity_in_h():
    _, cert, gamma, plan = renewal_fixture(trials=400)
    t1 = renewal_sum(plan, gamma, cert, Tent(0, 2.0), [30.0])
    t2 = renewal_sum(plan, gamma, cert, Tent(0, 2.0, amplitude=2.0), [30.0])
    assert t2.entries[0].value == pytest.approx(2 * t1.entries[0].value)
    assert t2.entries[0].limit == pytest.approx(2 * t1.entries[0].limit)


def test_renewal_guards():
    law, cert, gamma, plan = renewal_fixture(trials=400)
    with pytest.raises(MaxPlusError):
        renewal_sum(plan, 0.0, cert, Tent(0, 1.0), [10.0])
    lat = bernoulli_law()
    lat_cert = certify(lat.support, 4, gamma=F(1, 2))
    with pytest.raises(LatticeRefusedError):
        renewal_sum(plan_for(lat, (100,), 400, 3), 0.5, lat_cert,
                    Tent(0, 1.0), [10.0])


# --- LDP ---------------------------------------------------------------------------

def test_ldp_matches_exact_binomial_tail():
    plan = plan_for(bernoulli_law(), (100,), 20000, 43)
    curve = ldp_rate(plan, 0.5, [0.1], max_trials=20000)
    p = curve.point(0.1)
    exact = -binom.logsf(60, 100, 0.5) / 100  # P[S > 60] at n = 100
    assert p.value is not None
    assert abs(p.value - exact) <= 2 * p.ci_halfwidth + 1e-3


def test_ldp_monotone_and_censoring():
    plan = plan_for(bernoulli_law(), (400,), 2000, 47)
    curve = ldp_rate(plan, 0.5, [0.0, 0.05, 0.1, 0.3], max_trials=8000)
    assert curve.monotone_ok
    pt = curve.point(0.3)
    assert pt.value is None and pt.lower_bound > 0
    assert curve.point(0.0).value == pytest.approx(
        -math.log(curve.point(0.0).hits / curve.trials) / 400)


def test_ldp_mirrored_negative_eps():
    plan = plan_for(bernoulli_law(), (100,), 4000, 53)
    curve = ldp_rate(plan, 0.5, [-0.1, 0.1], max_trials=4000)
    lo, hi = curve.point(-0.1), curve.point(0.1)
    # symmetric law: both tails comparable
    assert lo.value is not None and hi.value is not None
    assert abs(lo.value - hi.value) <= 0.02


def test_ldp_adaptive_growth():
    plan = plan_for(bernoulli_law(), (100,), 100, 59)
    curve = ldp_rate(plan, 0.5, [0.15], max_trials=51200)
    assert curve.trials > 100  # budget grew to observe the tail
    assert curve.point(0.15).hits >= 5


# --- plan files ---------------------------------------------------------------------

PLAN_TEXT = """
# demo plan
law bern.law
phi max
horizons 25 100
trials 500
seed 9
x0 zero
stat gamma expect=0.5 ci_mult=3
stat clt ks_max=0.05
"""


def test_parse_plan_and_build():
    pf = parse_plan(PLAN_TEXT)
    assert pf.law_path == "bern.law"
    assert pf.horizons == (25, 100)
    assert pf.stats == [("gamma", {"expect": "0.5", "ci_mult": "3"}),
                        ("clt", {"ks_max": "0.05"})]
    plan = build_plan(pf, bernoulli_law())
    assert plan.seed == 9 and plan.trials == 500
    assert plan.x0.vector == (0, 0)
    plan2 = build_plan(pf, bernoulli_law(), seed=77, threads=2)
    assert plan2.seed == 77 and plan2.threads == 2


def test_parse_plan_errors():
    with pytest.raises(MaxPlusError):
        parse_plan("phi max\ntrials 100\n")
    with pytest.raises(MaxPlusError):
        parse_plan("law x\nhorizons 10\n")
    with pytest.raises(MaxPlusError):
        parse_plan("law x\nhorizons 10\ntrials 100\nstat gamma bad\n")
    pf = parse_plan("law x\nhorizons 10\ntrials 100\n")
    with pytest.raises(MaxPlusError):
        build_plan(pf, bernoulli_law())  # no seed anywhere
