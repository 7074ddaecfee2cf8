"""CSV emission and figure rendering for the CLI report path.

CSV files are the canonical output and are byte-deterministic: fixed column
order, repr-formatted floats, a version/seed header comment, and newline
'\n' regardless of platform. Figures are rendered next to the CSVs with the
Agg backend and are a convenience view of the same numbers.
"""

from __future__ import annotations

import os
from fractions import Fraction

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.stats import norm  # noqa: E402

from . import __version__  # noqa: E402

CSV_HEADER = "n,stat,value,ci_low,ci_high,trials,seed"


def fmt_value(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, rows, seed: int) -> None:
    """rows: iterables (n, stat, value, ci_low, ci_high, trials)."""
    lines = [f"# mplimit {__version__} seed={seed}", CSV_HEADER]
    for (n, stat, value, lo, hi, trials) in rows:
        lines.append(",".join([
            str(int(n)), stat, fmt_value(value), fmt_value(lo), fmt_value(hi),
            str(int(trials)), str(int(seed)),
        ]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_gamma(est, path) -> None:
    ns = sorted(est.ratio_by_horizon)
    vals = [est.ratio_by_horizon[n][0] for n in ns]
    errs = [1.96 * est.ratio_by_horizon[n][1] for n in ns]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.errorbar(ns, vals, yerr=errs, fmt="o-", capsize=3, label="S_n / n")
    ax.axhline(est.gamma_hat, color="tab:red", lw=1,
               label=f"burn-in estimate {est.gamma_hat:.4g}")
    ax.set_xlabel("n")
    ax.set_ylabel("growth rate estimate")
    ax.legend(fontsize=8)
    _save(fig, path)


def fig_clt(report, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.4))
    ns = [p.n for p in report.points]
    axes[0].loglog(ns, [p.ks for p in report.points], "o-")
    axes[0].set_xlabel("n")
    axes[0].set_ylabel("KS distance to N(0,1)")
    axes[1].semilogx(ns, [p.spread_q99 for p in report.points], "s-",
                     label="q99")
    axes[1].semilogx(ns, [p.spread_q50 for p in report.points], "o--",
                     label="median")
    axes[1].set_xlabel("n")
    axes[1].set_ylabel("projective spread / sqrt(n)")
    axes[1].legend(fontsize=8)
    _save(fig, path)


def fig_clt_hist(z, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.hist(z, bins=60, density=True, alpha=0.6, label="normalized S_n")
    grid = np.linspace(-4, 4, 300)
    ax.plot(grid, norm.pdf(grid), "r-", lw=1.5, label="N(0,1)")
    ax.set_xlabel("(S_n - n gamma) / (sigma sqrt n)")
    ax.legend(fontsize=8)
    _save(fig, path)


def fig_berry(fit, path) -> None:
    ns = np.array([p.n for p in fit.points], dtype=float)
    ks = np.array([p.ks for p in fit.points])
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.loglog(ns, ks, "o", label="empirical KS")
    ax.loglog(ns, np.exp(fit.intercept) * ns ** fit.slope, "-",
              label=f"fit slope {fit.slope:.3f}")
    ax.loglog(ns, ks[0] * (ns / ns[0]) ** -0.5, "--", lw=1,
              label="reference slope -1/2")
    ax.set_xlabel("n")
    ax.set_ylabel("KS distance")
    ax.legend(fontsize=8)
    _save(fig, path)


def fig_ldp(curve, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    obs = [(p.eps, p.value, p.ci_halfwidth) for p in curve.points
           if p.value is not None]
    cen = [(p.eps, p.lower_bound) for p in curve.points if p.value is None]
    if obs:
        xs, ys, es = zip(*obs)
        ax.errorbar(xs, ys, yerr=es, fmt="o-", capsize=3, label="rate estimate")
    if cen:
        xs, ys = zip(*cen)
        ax.plot(xs, ys, "^", color="tab:orange", label="censored lower bound")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("empirical rate")
    ax.legend(fontsize=8)
    _save(fig, path)


def fig_llt(table, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    labels = [f"w={e.tent.halfwidth}\nu={e.u}" for e in table.entries]
    x = np.arange(len(labels))
    ax.bar(x - 0.18, [e.estimate for e in table.entries], width=0.36,
           label="scaled box estimate")
    ax.bar(x + 0.18, [e.limit for e in table.entries], width=0.36,
           label="product-formula limit")
    ax.set_xticks(x, labels, fontsize=7)
    ax.legend(fontsize=8)
    _save(fig, path)


def fig_renewal(table, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    entries = sorted(table.entries, key=lambda e: e.a)
    a = [e.a for e in entries]
    ax.errorbar(a, [e.value for e in entries],
                yerr=[1.96 * e.se for e in entries], fmt="o-", capsize=3,
                label="truncated renewal sum")
    ax.plot(a, [e.limit for e in entries], "r--", label="limit")
    ax.set_xlabel("a")
    ax.set_ylabel("sum over n of E h(x(n) - a 1)")
    ax.legend(fontsize=8)
    _save(fig, path)


def fig_coupling(stats, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    depths = np.arange(1, stats.max_n + 1)
    ax.semilogy(depths, np.maximum(stats.survival(), 1e-12), "o-")
    ax.set_xlabel("depth n")
    ax.set_ylabel("P(product not rank one by n)")
    _save(fig, path)


def fig_invariant(reps, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    d = reps.shape[1]
    for j in range(d):
        ax.hist(reps[:, j], bins=50, density=True, alpha=0.5,
                label=f"coordinate {j + 1}")
    ax.set_xlabel("canonical representative coordinate")
    ax.legend(fontsize=8)
    _save(fig, path)


def ensure_outdir(path, files, force: bool) -> None:
    os.makedirs(path, exist_ok=True)
    if force:
        return
    clashes = [f for f in files if os.path.exists(os.path.join(path, f))]
    if clashes:
        raise FileExistsError(
            f"refusing to overwrite {', '.join(clashes)} in {path} "
            "(use --force)")
