"""Command-line harness: spectral reports, semigroup certificates, and
Monte Carlo experiment plans with CSV + figure output."""

from __future__ import annotations

import os
import sys
from fractions import Fraction

import click
import numpy as np

from . import __version__
from .core import (
    MatrixParseError,
    MaxPlusError,
    PHI_MAX,
    load_matrix,
    parse_scalar,
)
from .engine import (
    LawError,
    X0Spec,
    default_invariant_depth,
    detect_coupling,
    invariant_rep_array,
    load_law,
    sample_invariant_many,
)
from .limits import (
    DegenerateInstanceError,
    ExperimentPlan,
    LatticeRefusedError,
    Tent,
    berry_esseen_fit,
    build_plan,
    clt_test,
    estimate_gamma,
    estimate_sigma2,
    ldp_rate,
    llt_box_estimate,
    parse_plan,
    renewal_sum,
)
from .semigroup import SemigroupCert, cert_text, certify
from .spectral import analyze_matrix, report_text
from . import reporting


@click.group()
@click.version_option(__version__, prog_name="mplimit")
def main():
    """Stochastic max-plus dynamics: analyze, certify, and experiment."""


def _fail(message: str, code: int = 2):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _write_text(outdir, name, text, force):
    if outdir is None:
        return
    reporting.ensure_outdir(outdir, [name], force)
    with open(os.path.join(outdir, name), "w", encoding="utf-8",
              newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------


@main.command()
@click.argument("matrix_file", type=click.Path())
@click.option("--out", type=click.Path(), default=None,
              help="directory for the report file")
@click.option("--horizon", type=int, default=None,
              help="power-periodicity horizon override")
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--force", is_flag=True, help="overwrite existing outputs")
def spectral(matrix_file, out, horizon, tol, force):
    """Cycle means, critical graph, cyclicity, and power periodicity."""
    try:
        matrix = load_matrix(matrix_file)
    except MatrixParseError as exc:
        _fail(f"{matrix_file}:{exc.line}:{exc.col}: {exc}")
    except OSError as exc:
        _fail(str(exc))
    report = analyze_matrix(matrix, horizon=horizon, tol=tol)
    text = report_text(report)
    click.echo(text, nl=False)
    try:
        _write_text(out, "spectral_report.txt", text, force)
    except FileExistsError as exc:
        _fail(str(exc))


# ---------------------------------------------------------------------------


@main.command("certify")
@click.argument("law_file", type=click.Path())
@click.option("--depth", type=int, default=8, show_default=True)
@click.option("--gamma", "gamma_token", default=None,
              help="exact growth rate (token, e.g. 0 or 1/2); estimated "
                   "by Monte Carlo when omitted")
@click.option("--seed", type=int, default=None,
              help="master seed (required when --gamma is omitted)")
@click.option("--cap", type=int, default=10 ** 6, show_default=True,
              help="product-count cap for the exploration")
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
def certify_cmd(law_file, depth, gamma_token, seed, cap, tol, out, force):
    """Explore the support's semigroup and emit the certificate."""
    try:
        law = load_law(law_file)
    except (LawError, MatrixParseError) as exc:
        _fail(f"{law_file}: {exc}")
    except OSError as exc:
        _fail(str(exc))
    if not law.is_finite:
        _fail("certification needs a finite-support law: the semigroup of a "
              "parametric law is not finitely generated")
    if gamma_token is not None:
        gamma = parse_scalar(gamma_token)
        source = "supplied"
    else:
        if seed is None:
            _fail("--seed is required to estimate gamma for the certificate")
        plan = ExperimentPlan(law, PHI_MAX, (200, 400), 400, seed,
                              X0Spec.zero(law.dim))
        gamma = estimate_gamma(plan).gamma_hat
        source = "estimated"
    cert = certify(law.support, depth, gamma=gamma, gamma_source=source,
                   cap=cap, tol=tol)
    text = cert_text(cert)
    click.echo(text, nl=False)
    try:
        _write_text(out, "certificate.txt", text, force)
    except FileExistsError as exc:
        _fail(str(exc))


# ---------------------------------------------------------------------------


@main.command()
@click.argument("law_file", type=click.Path())
@click.option("--max-n", type=int, default=50, show_default=True)
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
@click.option("--no-plots", is_flag=True, help="skip figure rendering")
def coupling(law_file, max_n, trials, seed, tol, out, force, no_plots):
    """Empirical memory-loss detection: coupling-time survival curve."""
    try:
        law = load_law(law_file)
    except (LawError, MatrixParseError) as exc:
        _fail(f"{law_file}: {exc}")
    except OSError as exc:
        _fail(str(exc))
    stats = detect_coupling(law, max_n, trials, seed, tol=tol)
    mean = stats.mean_time()
    click.echo(f"trials {stats.trials}")
    click.echo(f"censored {stats.n_censored}")
    click.echo("mean_coupling_time "
               + ("none" if mean is None else repr(mean)))
    if out is not None:
        files = ["coupling.csv"] + ([] if no_plots else ["coupling.png"])
        try:
            reporting.ensure_outdir(out, files, force)
        except FileExistsError as exc:
            _fail(str(exc))
        rows = []
        for n in range(1, max_n + 1):
            p = stats.non_coupling_prob(n)
            half = 1.96 * np.sqrt(max(p * (1 - p), 0.0) / stats.trials)
            rows.append((n, "non_coupling_prob", p, max(p - half, 0.0),
                         min(p + half, 1.0), stats.trials))
        reporting.write_csv(os.path.join(out, "coupling.csv"), rows, seed)
        if not no_plots:
            reporting.fig_coupling(stats, os.path.join(out, "coupling.png"))


# ---------------------------------------------------------------------------


@main.command("sample-invariant")
@click.argument("law_file", type=click.Path())
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--max-depth", type=int, default=None,
              help="censoring depth; default 64 x mean coupling time")
@click.option("--seed", type=int, required=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
@click.option("--no-plots", is_flag=True)
def sample_invariant_cmd(law_file, samples, max_depth, seed, tol, out, force,
                         no_plots):
    """Exact draws from the stationary projective law (backward scheme)."""
    try:
        law = load_law(law_file)
    except (LawError, MatrixParseError) as exc:
        _fail(f"{law_file}: {exc}")
    except OSError as exc:
        _fail(str(exc))
    if max_depth is None:
        max_depth = default_invariant_depth(law, seed)
    draws = sample_invariant_many(law, samples, seed, max_depth=max_depth,
                                  tol=tol)
    censored = sum(1 for s in draws if s.censored)
    depths = [s.depth for s in draws if not s.censored]
    click.echo(f"samples {samples}")
    click.echo(f"max_depth {max_depth}")
    click.echo(f"censored {censored}")
    if depths:
        click.echo(f"mean_depth {repr(float(np.mean(depths)))}")
    if out is not None:
        files = ["invariant_samples.csv"] + ([] if no_plots else
                                             ["invariant.png"])
        try:
            reporting.ensure_outdir(out, files, force)
        except FileExistsError as exc:
            _fail(str(exc))
        d = law.dim
        header = "index,depth,censored," + ",".join(
            f"rep_{j + 1}" for j in range(d))
        lines = [f"# mplimit {__version__} seed={seed}", header]
        for i, s in enumerate(draws):
            rep = ["" for _ in range(d)] if s.censored else \
                [reporting.fmt_value(float(v)) for v in s.proj.rep]
            lines.append(",".join([str(i), str(s.depth),
                                   str(s.censored).lower()] + rep))
        with open(os.path.join(out, "invariant_samples.csv"), "w",
                  encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
        if not no_plots and censored < samples:
            reporting.fig_invariant(invariant_rep_array(draws),
                                    os.path.join(out, "invariant.png"))
    if censored:
        sys.exit(1)


# ---------------------------------------------------------------------------
# The experiment runner.


def _param_float(params, key, default=None):
    if key not in params:
        return default
    return float(parse_scalar(params[key]))


def _param_list(params, key, default=()):
    if key not in params:
        return list(default)
    return [float(parse_scalar(t)) for t in params[key].split(",") if t]


class _RunState:
    def __init__(self, plan, depth=None, tol=1e-9):
        self.plan = plan
        self.depth = depth
        self.tol = tol
        self.gamma = None
        self.gamma_exact = None  # Fraction when supplied exactly in the plan
        self.sigma = None
        self.cert: SemigroupCert | None = None
        self.checks = []  # (stat, name, ok, detail)

    def need_gamma(self, params):
        if "gamma" in params:
            g = parse_scalar(params["gamma"])
            self.gamma_exact = g if isinstance(g, (int, Fraction)) else None
            self.gamma = float(g)
        if self.gamma is None:
            self.gamma = estimate_gamma(self.plan).gamma_hat
        return self.gamma

    def gamma_for_normalization(self):
        return self.gamma_exact if self.gamma_exact is not None else self.gamma

    def need_sigma(self, params):
        if "sigma" in params:
            self.sigma = float(parse_scalar(params["sigma"]))
        if self.sigma is None:
            est = estimate_sigma2(self.plan, self.gamma_for_normalization())
            self.sigma = est.sigma
        return self.sigma

    def need_cert(self, params, seed):
        if self.cert is not None:
            return self.cert
        law = self.plan.law
        if not law.is_finite:
            raise MaxPlusError(
                "local limit / renewal statistics need a finite-support law "
                "for semigroup certification")
        depth = self.depth or int(_param_float(params, "depth", 8))
        self.cert = certify(law.support, depth,
                            gamma=self.gamma_for_normalization(),
                            gamma_source="plan", tol=self.tol)
        return self.cert

    def check(self, stat, name, ok, detail):
        self.checks.append((stat, name, bool(ok), detail))


def _run_gamma(state, params, outdir, plots):
    est = estimate_gamma(state.plan)
    state.gamma = est.gamma_hat
    reporting.write_csv(os.path.join(outdir, "gamma.csv"), est.rows(),
                        state.plan.seed)
    if plots:
        reporting.fig_gamma(est, os.path.join(outdir, "gamma.png"))
    expect = _param_float(params, "expect")
    if expect is not None:
        atol = _param_float(params, "atol")
        ci_mult = _param_float(params, "ci_mult")
        if atol is None and ci_mult is None:
            atol = 0.0
        tol = max(atol or 0.0, (ci_mult or 0.0) * est.se)
        err = abs(est.gamma_hat - expect)
        state.check("gamma", f"|gamma-{expect}|<={reporting.fmt_value(tol)}",
                    err <= tol, f"gamma_hat={est.gamma_hat!r} err={err!r}")
    state.check("gamma", "min_variant<=max_variant",
                est.gamma_min <= est.gamma_max + 1e-12,
                f"min={est.gamma_min!r} max={est.gamma_max!r}")


def _run_sigma2(state, params, outdir, plots):
    state.need_gamma(params)
    est = estimate_sigma2(state.plan, state.gamma_for_normalization())
    state.sigma = est.sigma
    reporting.write_csv(os.path.join(outdir, "sigma2.csv"), est.rows(),
                        state.plan.seed)
    expect = _param_float(params, "expect")
    if expect is not None:
        atol = _param_float(params, "atol", 0.0)
        err = abs(est.sigma2_hat - expect)
        state.check("sigma2", f"|sigma2-{expect}|<={atol}", err <= atol,
                    f"sigma2_hat={est.sigma2_hat!r}")
    maxv = _param_float(params, "max")
    if maxv is not None:
        state.check("sigma2", f"sigma2<={maxv}", est.sigma2_hat <= maxv,
                    f"sigma2_hat={est.sigma2_hat!r}")
    if est.matrix_matches_exactly is not None:
        state.check("sigma2", "matrix_form_agrees_exactly",
                    est.matrix_matches_exactly,
                    f"matrix={est.sigma2_matrix!r}")


def _run_clt(state, params, outdir, plots):
    state.need_gamma(params)
    state.need_sigma(params)
    rep = clt_test(state.plan, state.gamma, state.sigma)
    reporting.write_csv(os.path.join(outdir, "clt.csv"), rep.rows(),
                        state.plan.seed)
    if plots:
        reporting.fig_clt(rep, os.path.join(outdir, "clt.png"))
    # thresholds apply at the largest horizon, where the limit has set in
    last = rep.points[-1]
    ks_max = _param_float(params, "ks_max")
    if ks_max is not None:
        state.check("clt", f"ks<={ks_max} at n={last.n}", last.ks <= ks_max,
                    f"ks={last.ks!r}")
    q99_max = _param_float(params, "spread_q99_max")
    if q99_max is not None:
        state.check("clt", f"proj_spread_q99<={q99_max} at n={last.n}",
                    last.spread_q99 <= q99_max, f"q99={last.spread_q99!r}")


def _run_berry(state, params, outdir, plots):
    state.need_gamma(params)
    state.need_sigma(params)
    fit = berry_esseen_fit(state.plan, state.gamma, state.sigma,
                           moment_order=_param_float(params, "moment"))
    reporting.write_csv(os.path.join(outdir, "berry.csv"), fit.rows(),
                        state.plan.seed)
    if plots:
        reporting.fig_berry(fit, os.path.join(outdir, "berry.png"))
    lo = _param_float(params, "slope_min")
    hi = _param_float(params, "slope_max")
    if lo is not None and hi is not None:
        state.check("berry", f"slope in [{lo},{hi}]", lo <= fit.slope <= hi,
                    f"slope={fit.slope!r} se={fit.se!r}")


def _run_ldp(state, params, outdir, plots):
    state.need_gamma(params)
    eps = _param_list(params, "eps", (0.0, 0.05, 0.1, 0.2))
    max_trials = _param_float(params, "max_trials")
    curve = ldp_rate(state.plan, state.gamma, eps,
                     max_trials=None if max_trials is None else int(max_trials))
    reporting.write_csv(os.path.join(outdir, "ldp.csv"), curve.rows(),
                        state.plan.seed)
    if plots:
        reporting.fig_ldp(curve, os.path.join(outdir, "ldp.png"))
    state.check("ldp", "rate_nondecreasing_on_positive_grid",
                curve.monotone_ok, f"trials={curve.trials}")
    expect = _param_float(params, "expect")
    if expect is not None:
        at = _param_float(params, "check_eps", eps[-1])
        atol = _param_float(params, "atol", 0.01)
        pt = curve.point(at)
        if pt.value is None:
            state.check("ldp", f"c({at})={expect}+-{atol}", False,
                        f"censored: lower bound {pt.lower_bound!r} from "
                        f"{pt.trials} trials")
        else:
            state.check("ldp", f"c({at})={expect}+-{atol}",
                        abs(pt.value - expect) <= atol,
                        f"value={pt.value!r}")
    zmax = _param_float(params, "zero_max")
    if zmax is not None and any(p.eps == 0.0 for p in curve.points):
        v = curve.point(0.0).value
        state.check("ldp", f"c(0)<={zmax}", v is not None and v <= zmax,
                    f"value={v!r}")


def _run_llt(state, params, outdir, plots, seed):
    state.need_gamma(params)
    state.need_sigma(params)
    cert = state.need_cert(params, seed)
    tents = [Tent(0.0, w) for w in _param_list(params, "tents", (1.0, 2.0))]
    u_grid = _param_list(params, "u", (0.0,))
    table = llt_box_estimate(state.plan, state.gamma, state.sigma, cert,
                             tents, u_grid)
    reporting.write_csv(os.path.join(outdir, "llt.csv"), table.rows(),
                        state.plan.seed)
    if plots:
        reporting.fig_llt(table, os.path.join(outdir, "llt.png"))
    rel = _param_float(params, "rel_tol")
    if rel is not None:
        worst = max(abs(e.ratio - 1.0) for e in table.entries)
        state.check("llt", f"box estimates within {rel} of limit",
                    worst <= rel, f"worst_rel_err={worst!r}")


def _run_renewal(state, params, outdir, plots, seed):
    state.need_gamma(params)
    cert = state.need_cert(params, seed)
    tent = Tent(0.0, _param_float(params, "tent", 2.0))
    a_grid = _param_list(params, "a", (50.0, 100.0))
    table = renewal_sum(state.plan, state.gamma, cert, tent, a_grid)
    reporting.write_csv(os.path.join(outdir, "renewal.csv"), table.rows(),
                        state.plan.seed)
    if plots:
        reporting.fig_renewal(table, os.path.join(outdir, "renewal.png"))
    rel = _param_float(params, "rel_tol")
    neg_max = _param_float(params, "neg_max")
    for e in table.entries:
        if e.a > 0 and rel is not None:
            err = abs(e.value - e.limit) / e.limit if e.limit else float("inf")
            state.check("renewal", f"sum at a={e.a} within {rel} of limit",
                        err <= rel, f"value={e.value!r} limit={e.limit!r}")
        if e.a < 0 and neg_max is not None:
            state.check("renewal", f"sum at a={e.a} <= {neg_max}",
                        e.value <= neg_max, f"value={e.value!r}")


_STAT_RUNNERS = {
    "gamma": lambda st, p, out, plots, seed: _run_gamma(st, p, out, plots),
    "sigma2": lambda st, p, out, plots, seed: _run_sigma2(st, p, out, plots),
    "clt": lambda st, p, out, plots, seed: _run_clt(st, p, out, plots),
    "berry": lambda st, p, out, plots, seed: _run_berry(st, p, out, plots),
    "ldp": lambda st, p, out, plots, seed: _run_ldp(st, p, out, plots),
    "llt": _run_llt,
    "renewal": _run_renewal,
}

_STAT_FILES = {
    "gamma": ["gamma.csv", "gamma.png"],
    "sigma2": ["sigma2.csv"],
    "clt": ["clt.csv", "clt.png"],
    "berry": ["berry.csv", "berry.png"],
    "ldp": ["ldp.csv", "ldp.png"],
    "llt": ["llt.csv", "llt.png"],
    "renewal": ["renewal.csv", "renewal.png"],
}


@main.command()
@click.argument("plan_file", type=click.Path())
@click.option("--out", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None, help="override the plan seed")
@click.option("--threads", type=int, default=None)
@click.option("--depth", type=int, default=None,
              help="override the certificate exploration depth")
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--force", is_flag=True)
@click.option("--no-plots", is_flag=True)
def run(plan_file, out, seed, threads, depth, tol, force, no_plots):
    """Execute an experiment plan: CSV per statistic, figures, summary."""
    try:
        with open(plan_file, "r", encoding="utf-8") as fh:
            pf = parse_plan(fh.read())
        law_path = os.path.join(os.path.dirname(os.path.abspath(plan_file)),
                                pf.law_path)
        if not os.path.exists(law_path):
            law_path = pf.law_path  # absolute or cwd-relative
        law = load_law(law_path)
        plan = build_plan(pf, law, seed=seed, threads=threads)
    except (MaxPlusError, LawError) as exc:
        _fail(str(exc))
    except OSError as exc:
        _fail(str(exc))
    if not pf.stats:
        _fail("plan requests no statistics")
    for name, _ in pf.stats:
        if name not in _STAT_RUNNERS:
            _fail(f"unknown statistic {name!r} "
                  f"(known: {', '.join(sorted(_STAT_RUNNERS))})")
    files = ["summary.txt"]
    for name, _ in pf.stats:
        names = _STAT_FILES[name]
        files.extend(names if not no_plots else
                     [f for f in names if f.endswith(".csv")])
    try:
        reporting.ensure_outdir(out, files, force)
    except FileExistsError as exc:
        _fail(str(exc))

    state = _RunState(plan, depth=depth, tol=tol)
    for name, params in pf.stats:
        try:
            _STAT_RUNNERS[name](state, params, out, not no_plots, plan.seed)
        except (DegenerateInstanceError, LatticeRefusedError,
                MaxPlusError) as exc:
            detail = str(exc)
            if isinstance(exc, DegenerateInstanceError) and state.cert:
                detail += f" [certificate: {state.cert.degenerate}]"
            state.check(name, "completed", False, detail)

    lines = [f"mplimit {__version__} plan={os.path.basename(plan_file)} "
             f"seed={plan.seed} trials={plan.trials} "
             f"horizons={','.join(map(str, plan.horizons))}"]
    all_ok = True
    for stat, name, ok, detail in state.checks:
        all_ok &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {stat}: {name} ({detail})")
    if not state.checks:
        lines.append("no checks requested; artifacts written")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8",
              newline="") as fh:
        fh.write(text)
    click.echo(text, nl=False)
    sys.exit(0 if all_ok else 1)


if __name__ == "__main__":
    main()
