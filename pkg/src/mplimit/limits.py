"""Monte Carlo estimators for the limit behavior of the cocycle sums.

Everything runs off one vectorized simulation per plan: growth-rate and
variance estimation, a Kolmogorov-Smirnov CLT check with the projective
spread diagnostic, a log-log convergence-rate fit, local-limit box
estimates against the product-measure formula, truncated renewal sums, and
an empirical large-deviations rate curve.

Conventions: S_n denotes phi(x(n)) - phi(x0) (used for the growth rate,
variance, CLT, and tail rates); local-limit and renewal estimates use the
absolute level phi(x(n)) since their box arguments are x(n) - u 1 and
x(n) - a 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import ndtr

from .core import (
    MaxPlusError,
    PHI_MAX,
    PHI_MIN,
    TopicalFunctional,
    parse_functional,
    parse_scalar,
)
from .engine import (
    X0Spec,
    extend_cocycles,
    invariant_rep_array,
    phi_rows,
    sample_invariant_many,
    simulate_cocycles,
)
from .semigroup import SemigroupCert

Z95 = 1.959963984540054


class DegenerateInstanceError(MaxPlusError):
    """sigma = 0: the instance has no CLT-scale fluctuations to test."""


class LatticeRefusedError(MaxPlusError):
    """The lattice certificate obstructs the local limit / renewal theorems."""

    def __init__(self, lattice, cert: SemigroupCert):
        a, b = lattice if lattice is not None else ("?", "?")
        super().__init__(
            f"instance is not certified non-arithmetic: lattice ({a}, {b}), "
            f"certificate verdict {cert.arithmetic!r}")
        self.lattice = lattice
        self.cert = cert


@dataclass(frozen=True)
class ExperimentPlan:
    """What to simulate: law, functional, horizons, trials, seed, x0."""

    law: object
    phi: TopicalFunctional
    horizons: tuple
    trials: int
    seed: int
    x0: X0Spec
    threads: int = 1

    def __post_init__(self):
        if self.trials < 100:
            raise MaxPlusError("plans need at least 100 trials")
        hs = self.horizons
        if not hs or any(b <= a for a, b in zip(hs, hs[1:])) or hs[0] < 1:
            raise MaxPlusError("horizons must be strictly increasing and >= 1")

    @property
    def n_max(self) -> int:
        return self.horizons[-1]


def _simulate(plan: ExperimentPlan, horizons=None, track_product=False,
              step_hook=None, trials=None):
    return simulate_cocycles(
        plan.law, plan.x0, horizons or plan.horizons,
        trials or plan.trials, plan.seed, threads=plan.threads,
        track_product=track_product, step_hook=step_hook)


def ks_normal(z: np.ndarray) -> float:
    """Exact sup distance between the empirical CDF and the standard normal."""
    zs = np.sort(np.asarray(z, dtype=float))
    n = len(zs)
    cdf = ndtr(zs)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


# ---------------------------------------------------------------------------
# Growth rate.


@dataclass
class GammaEstimate:
    gamma_hat: float
    se: float
    n: int
    burnin: int
    gamma_max: float
    gamma_min: float
    ratio_by_horizon: dict
    trials: int
    seed: int

    @property
    def ci_halfwidth(self) -> float:
        return Z95 * self.se

    def rows(self):
        out = []
        for n, (val, se) in sorted(self.ratio_by_horizon.items()):
            out.append((n, "gamma_ratio", val, val - Z95 * se, val + Z95 * se,
                        self.trials))
        lo, hi = self.gamma_hat - self.ci_halfwidth, self.gamma_hat + self.ci_halfwidth
        out.append((self.n, "gamma", self.gamma_hat, lo, hi, self.trials))
        out.append((self.n, "gamma_max_variant", self.gamma_max, "", "", self.trials))
        out.append((self.n, "gamma_min_variant", self.gamma_min, "", "", self.trials))
        return out


def estimate_gamma(plan: ExperimentPlan) -> GammaEstimate:
    """Burn-in differenced growth-rate estimate.

    The headline estimate is the per-trial increment quotient
    (S_n - S_m) / (n - m) between the last two checkpoints (m = n // 2 when
    the plan has a single horizon), which removes the transient: once the
    orbit couples, increments equal the growth rate exactly on
    deterministic instances. The max/min variants are the plain ratios
    max_i x_i(n)/n and min_i x_i(n)/n, which always satisfy min <= max.
    """
    n = plan.n_max
    if len(plan.horizons) >= 2:
        m = plan.horizons[-2]
        horizons = plan.horizons
    else:
        m = n // 2
        horizons = (m, n) if 0 < m < n else (n,)
    cs = _simulate(plan, horizons=horizons)
    s_n = cs.cocycle_values(plan.phi, n)
    if m and m in cs.shift:
        q = (s_n - cs.cocycle_values(plan.phi, m)) / (n - m)
        burnin = m
    else:
        q = s_n / n
        burnin = 0
    gamma_hat = float(q.mean())
    se = float(q.std(ddof=1) / math.sqrt(len(q))) if len(q) > 1 else 0.0
    ratio = {}
    for h in horizons:
        vals = cs.cocycle_values(plan.phi, h) / h
        ratio[h] = (float(vals.mean()),
                    float(vals.std(ddof=1) / math.sqrt(len(vals))))
    gmax = float((cs.phi_values(PHI_MAX, n) / n).mean())
    gmin = float((cs.phi_values(PHI_MIN, n) / n).mean())
    return GammaEstimate(gamma_hat, se, n, burnin, gmax, gmin, ratio,
                         plan.trials, plan.seed)


# ---------------------------------------------------------------------------
# CLT variance.


@dataclass
class SigmaEstimate:
    sigma2_hat: float
    se: float
    sigma2_batch: float
    sigma2_matrix: float | None
    matrix_matches_exactly: bool | None
    n: int
    trials: int
    seed: int

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.sigma2_hat, 0.0))

    def rows(self):
        lo = self.sigma2_hat - Z95 * self.se
        hi = self.sigma2_hat + Z95 * self.se
        out = [(self.n, "sigma2", self.sigma2_hat, lo, hi, self.trials),
               (self.n, "sigma2_batch_means", self.sigma2_batch, "", "",
                self.trials)]
        if self.sigma2_matrix is not None:
            out.append((self.n, "sigma2_matrix_form", self.sigma2_matrix,
                        "", "", self.trials))
        return out


def estimate_sigma2(plan: ExperimentPlan, gamma) -> SigmaEstimate:
    """(1/n) E (S_n - n gamma)^2 at the largest horizon, plus cross-checks.

    A batch-means variant averages (block sum - L gamma)^2 / L over eight
    blocks. When gamma is exactly zero the matrix-product form
    (1/n) E (max_ij of the running product)^2 is also computed; started at
    x0 = 0 with phi = max it is the same random variable as the cocycle
    form and must agree exactly.
    """
    n = plan.n_max
    nblocks = 8 if n >= 8 else 1
    grid = sorted({n * (k + 1) // nblocks for k in range(nblocks)} | {n})
    g = float(gamma)
    track = (isinstance(gamma, (int, Fraction)) and gamma == 0) or g == 0.0
    cs = _simulate(plan, horizons=tuple(grid), track_product=track)
    s_n = cs.cocycle_values(plan.phi, n)
    sq = (s_n - n * g) ** 2 / n
    sigma2 = float(sq.mean())
    se = float(sq.std(ddof=1) / math.sqrt(len(sq))) if len(sq) > 1 else 0.0
    # batch means over the checkpoint grid
    bm_terms = []
    prev = None
    s_prev = 0.0
    for h in grid:
        s_h = cs.cocycle_values(plan.phi, h)
        if prev is not None:
            length = h - prev
            if length > 0:
                bm_terms.append((s_h - s_prev - length * g) ** 2 / length)
        prev, s_prev = h, s_h
    sigma2_batch = float(np.mean([t.mean() for t in bm_terms])) if bm_terms else sigma2
    sigma2_matrix = None
    matches = None
    if track:
        pm = cs.prod_max[n]
        sigma2_matrix = float((pm ** 2 / n).mean())
        if (plan.phi.kind == "max" and not plan.x0.is_random
                and all(v == 0 for v in plan.x0.vector)):
            matches = bool((cs.cocycle_values(PHI_MAX, n) == pm).all())
    return SigmaEstimate(sigma2, se, sigma2_batch, sigma2_matrix, matches,
                         n, plan.trials, plan.seed)


# ---------------------------------------------------------------------------
# CLT and its convergence rate.


@dataclass
class CltPoint:
    n: int
    ks: float
    spread_q50: float
    spread_q90: float
    spread_q99: float


@dataclass
class CltReport:
    points: list
    gamma: float
    sigma: float
    trials: int
    seed: int

    def ks_by_horizon(self):
        return {p.n: p.ks for p in self.points}

    def rows(self):
        out = []
        for p in self.points:
            out.append((p.n, "clt_ks", p.ks, "", "", self.trials))
            out.append((p.n, "proj_spread_q50", p.spread_q50, "", "", self.trials))
            out.append((p.n, "proj_spread_q90", p.spread_q90, "", "", self.trials))
            out.append((p.n, "proj_spread_q99", p.spread_q99, "", "", self.trials))
        return out


def clt_test(plan: ExperimentPlan, gamma, sigma) -> CltReport:
    """KS distance of (S_n - n gamma)/(sigma sqrt n) to N(0,1) per horizon.

    Also quantifies the collapse of all coordinates: quantiles of the
    projective norm of x(n) divided by sqrt n, which must vanish for the
    full vector (x(n) - n gamma 1)/sqrt n to have equal coordinates in the
    limit.
    """
    if float(sigma) <= 0:
        raise DegenerateInstanceError(
            "sigma = 0; see the degeneracy certificate for this law")
    g, s = float(gamma), float(sigma)
    cs = _simulate(plan)
    points = []
    for n in plan.horizons:
        z = (cs.cocycle_values(plan.phi, n) - n * g) / (s * math.sqrt(n))
        spread = cs.proj_norms(n) / math.sqrt(n)
        q50, q90, q99 = np.quantile(spread, [0.5, 0.9, 0.99])
        points.append(CltPoint(n, ks_normal(z), float(q50), float(q90),
                               float(q99)))
    return CltReport(points, g, s, plan.trials, plan.seed)


@dataclass
class SlopeReport:
    slope: float
    se: float
    intercept: float
    points: list
    scalar_exponent: float
    vector_exponent: float | None
    trials: int
    seed: int

    @property
    def ci_halfwidth(self) -> float:
        return Z95 * self.se

    def rows(self):
        out = [(p.n, "berry_ks", p.ks, "", "", self.trials) for p in self.points]
        out.append((self.points[-1].n, "berry_slope", self.slope,
                    self.slope - self.ci_halfwidth,
                    self.slope + self.ci_halfwidth, self.trials))
        return out


def berry_esseen_fit(plan: ExperimentPlan, gamma, sigma,
                     moment_order: float | None = None) -> SlopeReport:
    """Least-squares slope of log KS(n) against log n over >= 4 horizons.

    The scalar-marginal rate has expected exponent -1/2; the full-vector
    bound carries exponent l/(2(l+1)) for initial conditions with an l-th
    moment, reported alongside for reference.
    """
    if len(plan.horizons) < 4:
        raise MaxPlusError("rate fit needs at least 4 horizons")
    report = clt_test(plan, gamma, sigma)
    x = np.log([p.n for p in report.points])
    y = np.log([p.ks for p in report.points])
    k = len(x)
    xb = x - x.mean()
    slope = float((xb * y).sum() / (xb ** 2).sum())
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    s2 = float((resid ** 2).sum() / max(k - 2, 1))
    se = math.sqrt(s2 / float((xb ** 2).sum()))
    vec = None
    if moment_order:
        vec = moment_order / (2.0 * (moment_order + 1.0))
    return SlopeReport(slope, se, intercept, report.points, -0.5, vec,
                       plan.trials, plan.seed)


# ---------------------------------------------------------------------------
# Test functions for the local limit and renewal estimates.


@dataclass(frozen=True)
class Tent:
    """Piecewise-linear bump: amplitude at center, 0 outside +- halfwidth."""

    center: float = 0.0
    halfwidth: float = 1.0
    amplitude: float = 1.0

    def __call__(self, x):
        return self.amplitude * np.maximum(
            0.0, 1.0 - np.abs(np.asarray(x, dtype=float) - self.center)
            / self.halfwidth)

    @property
    def area(self) -> float:
        return self.amplitude * self.halfwidth

    @property
    def support_radius(self) -> float:
        return self.halfwidth

    def __str__(self):
        return f"tent(c={self.center},w={self.halfwidth},a={self.amplitude})"


def _require_nonarithmetic(cert: SemigroupCert, weak: bool = False):
    """Refuse arithmetic instances.

    The local limit needs the full (shifted-lattice) condition: no a + bZ
    may contain the sandwich shifts. Renewal sums need only the weak
    condition, whose algebraic image is the centered lattice: the shifts
    must avoid every bZ (an eigenvalue-one relation forces a = 0).
    """
    if weak:
        if cert.witness is None or cert.shift_lattice0 is not None:
            raise LatticeRefusedError(cert.shift_lattice0, cert)
        return
    if cert.arithmetic != "nonarithmetic-evidence":
        raise LatticeRefusedError(cert.shift_lattice, cert)


def _nu0_of_g(plan, g, count, depth):
    """Invariant-measure integral of g, exact 1 for g = None (probability)."""
    if g is None:
        return 1.0, 0
    samples = sample_invariant_many(plan.law, count, plan.seed, max_depth=depth)
    reps = invariant_rep_array(samples)
    censored = sum(1 for s in samples if s.censored)
    return float(np.mean(g(reps))), censored


# ---------------------------------------------------------------------------
# Local limit boxes.


@dataclass
class LltRow:
    tent: Tent
    u: float
    estimate: float
    se: float
    limit: float

    @property
    def ratio(self) -> float:
        return self.estimate / self.limit if self.limit else math.inf


@dataclass
class LltTable:
    entries: list
    n: int
    gamma: float
    sigma: float
    nu0_g: float
    trials: int
    seed: int

    def rows(self):
        out = []
        for e in self.entries:
            tag = f"llt@c{e.tent.center}w{e.tent.halfwidth}@u={e.u}"
            out.append((self.n, tag, e.estimate, e.estimate - Z95 * e.se,
                        e.estimate + Z95 * e.se, self.trials))
            out.append((self.n, tag + "_limit", e.limit, "", "", self.trials))
        return out


def llt_box_estimate(plan: ExperimentPlan, gamma, sigma, cert: SemigroupCert,
                     tents, u_grid, g=None, invariant_count: int = 2000,
                     invariant_depth: int | None = None) -> LltTable:
    """sigma sqrt(2 pi n) E[f(phi(x(n)) - n gamma - u) g(class of x(n))].

    Compared against the product-formula limit
    mean(exp(-(u + phi(x0))^2 / (2 n sigma^2))) * nu0(g) * integral of f,
    with nu0(g) estimated from exact backward samples. Requires a
    certificate with non-arithmetic evidence; lattice instances are
    refused.
    """
    if float(sigma) <= 0:
        raise DegenerateInstanceError("sigma = 0; local limit needs sigma > 0")
    _require_nonarithmetic(cert)
    gval, sval = float(gamma), float(sigma)
    n = plan.n_max
    nu_g, _ = _nu0_of_g(plan, g, invariant_count, invariant_depth)
    cs = _simulate(plan, horizons=(n,))
    level = cs.phi_values(plan.phi, n)
    phi0 = phi_rows(plan.phi, cs.x0)
    gvals = g(cs.rep[n]) if g is not None else 1.0
    scale = sval * math.sqrt(2 * math.pi * n)
    entries = []
    for tent in tents:
        for u in u_grid:
            h = tent(level - n * gval - u) * gvals
            est = scale * float(np.mean(h))
            se = scale * float(np.std(h, ddof=1) / math.sqrt(len(h)))
            gauss = float(np.mean(np.exp(-(u + phi0) ** 2 / (2 * n * sval ** 2))))
            entries.append(LltRow(tent, float(u), est, se,
                                  gauss * nu_g * tent.area))
    return LltTable(entries, n, gval, sval, nu_g, plan.trials, plan.seed)


# ---------------------------------------------------------------------------
# Renewal sums.


@dataclass
class RenewalRow:
    a: float
    horizon: int
    value: float
    se: float
    limit: float
    tail_flag: float  # fraction of paths still short of the box at truncation


@dataclass
class RenewalTable:
    entries: list
    gamma: float
    nu0_g: float
    trials: int
    seed: int

    def rows(self):
        out = []
        for e in self.entries:
            tag = f"renewal@a={e.a}"
            out.append((e.horizon, tag, e.value, e.value - Z95 * e.se,
                        e.value + Z95 * e.se, self.trials))
            out.append((e.horizon, tag + "_limit", e.limit, "", "", self.trials))
        return out


def renewal_sum(plan: ExperimentPlan, gamma, cert: SemigroupCert, tent: Tent,
                a_grid, g=None, invariant_count: int = 2000,
                invariant_depth: int | None = None) -> RenewalTable:
    """Truncated sums over n of E[f(phi(x(n)) - a) g(class of x(n))].

    Truncation horizon N(a) = ceil(4 a / gamma): the level concentrates at
    n gamma, so later terms are negligible at desk scale; the fraction of
    paths that could still reach the box at truncation is reported as
    tail_flag. The limit for a -> +inf is nu0(g) * integral(f) / gamma and
    the sum vanishes for a -> -inf.
    """
    gval = float(gamma)
    if gval <= 0:
        raise MaxPlusError("renewal sums need gamma > 0")
    _require_nonarithmetic(cert, weak=True)
    nu_g, _ = _nu0_of_g(plan, g, invariant_count, invariant_depth)
    a_list = [float(a) for a in a_grid]
    horizon = {a: max(1, math.ceil(4 * max(a, 1.0) / gval)) for a in a_list}
    nmax = max(horizon.values())
    acc = np.zeros((len(a_list), plan.trials))
    last_level = np.zeros(plan.trials)

    def hook(nstep, shift, rep, sl):
        level = shift + phi_rows(plan.phi, rep)
        for i, a in enumerate(a_list):
            if nstep <= horizon[a]:
                vals = tent(level - a)
                if g is not None:
                    vals = vals * g(rep)
                acc[i, sl] += vals
        if nstep == nmax:
            last_level[sl] = level

    _simulate(plan, horizons=(nmax,), step_hook=hook)
    entries = []
    for i, a in enumerate(a_list):
        per_trial = acc[i]
        value = float(per_trial.mean())
        se = float(per_trial.std(ddof=1) / math.sqrt(len(per_trial)))
        limit = nu_g * tent.area / gval if a > 0 else 0.0
        cs_h = horizon[a]
        tail = float(np.mean(last_level < a + tent.support_radius)) \
            if cs_h == nmax else 0.0
        entries.append(RenewalRow(a, cs_h, value, se, limit, tail))
    return RenewalTable(entries, gval, nu_g, plan.trials, plan.seed)


# ---------------------------------------------------------------------------
# Large deviations.


@dataclass
class LdpPoint:
    eps: float
    hits: int
    trials: int
    value: float | None  # -(1/n) log empirical tail, None when censored
    lower_bound: float   # implied by the censoring rule when value is None
    ci_halfwidth: float


@dataclass
class LdpCurve:
    points: list
    n: int
    trials: int
    seed: int
    monotone_ok: bool
    convexity_violation: float

    def point(self, eps: float) -> LdpPoint:
        for p in self.points:
            if abs(p.eps - eps) < 1e-12:
                return p
        raise KeyError(eps)

    def rows(self):
        out = []
        for p in self.points:
            tag = f"ldp@eps={p.eps}"
            if p.value is None:
                out.append((self.n, tag + "_censored_lb", p.lower_bound,
                            "", "", p.trials))
            else:
                out.append((self.n, tag, p.value, p.value - p.ci_halfwidth,
                            p.value + p.ci_halfwidth, p.trials))
        return out


def ldp_rate(plan: ExperimentPlan, gamma, eps_grid, target_hits: int = 5,
             max_trials: int | None = None) -> LdpCurve:
    """Empirical rate curve c(eps) = -(1/n) log P[S_n - n gamma > n eps].

    Runs at the largest horizon, mirroring negative grid entries onto the
    lower tail. Trials grow adaptively (doubling, common random numbers)
    until every grid point has target_hits tail observations or the trial
    budget is reached; tails below target_hits / trials are censored and
    reported as a lower bound on c, never as log zero.
    """
    n = plan.n_max
    gval = float(gamma)
    eps_list = sorted({float(e) for e in eps_grid})
    if max_trials is None:
        max_trials = 64 * plan.trials
    cs = _simulate(plan, horizons=(n,))
    trials = plan.trials
    while True:
        dev = cs.cocycle_values(plan.phi, n) - n * gval
        counts = {}
        for e in eps_list:
            if e >= 0:
                counts[e] = int((dev > n * e).sum())
            else:
                counts[e] = int((dev < n * e).sum())
        if all(c >= target_hits for c in counts.values()) or trials >= max_trials:
            break
        trials = min(2 * trials, max_trials)
        cs = extend_cocycles(cs, plan.law, plan.x0, trials,
                             threads=plan.threads)
    points = []
    for e in eps_list:
        hits = counts[e]
        if hits >= target_hits:
            p = hits / trials
            value = -math.log(p) / n
            ci = Z95 * math.sqrt((1 - p) / (hits)) / n
            points.append(LdpPoint(e, hits, trials, value, value, ci))
        else:
            bound = -math.log(target_hits / trials) / n
            points.append(LdpPoint(e, hits, trials, None, bound, 0.0))
    pos = [p for p in points if p.eps >= 0 and p.value is not None]
    mono = all(b.value >= a.value - 1e-12 for a, b in zip(pos, pos[1:]))
    convexity = 0.0
    if len(pos) >= 3:
        vals = [p.value for p in pos]
        second = [vals[i + 1] - 2 * vals[i] + vals[i - 1]
                  for i in range(1, len(vals) - 1)]
        convexity = float(min(second))
    return LdpCurve(points, n, trials, plan.seed, mono, convexity)


# ---------------------------------------------------------------------------
# Plan files.


@dataclass
class PlanFile:
    law_path: str
    phi_label: str
    horizons: tuple
    trials: int
    seed: int | None
    threads: int
    x0_spec: X0Spec | None  # None = zeros of the law dimension
    stats: list = field(default_factory=list)  # (name, {key: raw string})


def parse_plan(text: str) -> PlanFile:
    law_path = None
    phi_label = "max"
    horizons = ()
    trials = None
    seed = None
    threads = 1
    x0_spec = None
    stats = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key == "law":
            law_path = rest
        elif key == "phi":
            phi_label = rest
        elif key == "horizons":
            horizons = tuple(int(t) for t in rest.split())
        elif key == "trials":
            trials = int(rest)
        elif key == "seed":
            seed = int(rest)
        elif key == "threads":
            threads = int(rest)
        elif key == "x0":
            x0_spec = _parse_x0(rest, lineno)
        elif key == "stat":
            parts = rest.split()
            if not parts:
                raise MaxPlusError(f"plan line {lineno}: empty stat")
            params = {}
            for tok in parts[1:]:
                if "=" not in tok:
                    raise MaxPlusError(
                        f"plan line {lineno}: stat parameter {tok!r} "
                        "must be key=value")
                k, v = tok.split("=", 1)
                params[k] = v
            stats.append((parts[0], params))
        else:
            raise MaxPlusError(f"plan line {lineno}: unknown field {key!r}")
    if law_path is None:
        raise MaxPlusError("plan needs a law path")
    if not horizons:
        raise MaxPlusError("plan needs horizons")
    if trials is None:
        raise MaxPlusError("plan needs a trial count")
    return PlanFile(law_path, phi_label, horizons, trials, seed, threads,
                    x0_spec, stats)


def _parse_x0(rest: str, lineno: int) -> X0Spec:
    toks = rest.split()
    if toks[0] == "zero":
        return X0Spec.zero(0)  # dimension resolved against the law later
    if toks[0] in ("uniform", "normal"):
        if len(toks) < 3:
            raise MaxPlusError(f"plan line {lineno}: x0 {toks[0]} needs 2 params")
        moment = float(toks[3]) if len(toks) > 3 else None
        a, b = parse_scalar(toks[1]), parse_scalar(toks[2])
        return (X0Spec.uniform(a, b, moment) if toks[0] == "uniform"
                else X0Spec.normal(a, b, moment))
    return X0Spec.fixed(tuple(parse_scalar(t) for t in toks))


def build_plan(pf: PlanFile, law, seed: int | None = None,
               threads: int | None = None) -> ExperimentPlan:
    """Resolve a parsed plan file against its law and CLI overrides."""
    use_seed = seed if seed is not None else pf.seed
    if use_seed is None:
        raise MaxPlusError("a master seed is required (plan field or --seed)")
    x0 = pf.x0_spec
    if x0 is None or (x0.kind == "fixed" and len(x0.vector) == 0):
        x0 = X0Spec.zero(law.dim)
    elif x0.kind == "fixed" and len(x0.vector) != law.dim:
        raise MaxPlusError("x0 dimension does not match the law")
    return ExperimentPlan(law, parse_functional(pf.phi_label), pf.horizons,
                          pf.trials, use_seed, x0,
                          threads if threads is not None else pf.threads)
