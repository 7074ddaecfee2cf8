"""Random operator models and the normalized trajectory recursion.

Reproducibility contract: every trial owns a counter-based stream derived
from (master seed, trial index, lane). Streams are Philox generators keyed
directly by those integers, so the same seed and index give the same draws
bit for bit under any execution schedule, and extending a run with more
trials never changes earlier ones.

Per-trial draw protocol (identical in the scalar and vectorized paths):

1. if the initial condition is random, ``d`` uniforms for x0;
2. finite-support laws then consume one uniform per step, parametric laws a
   (steps, d, d) block, all transformed by inverse CDF.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import ndtri

from .core import (
    NEG_INF,
    MaxPlusError,
    MpMatrix,
    ProjVec,
    TopicalFunctional,
    format_matrix,
    format_scalar,
    is_rank_one,
    mat_mul,
    mat_vec,
    parse_matrix,
    parse_scalar,
    project,
)

LANE_TRAJ = 0
LANE_COUPLING = 1
LANE_INVARIANT = 2
LANE_PROBE = 3

_LANE_BITS = 48


def stream(master_seed: int, index: int, lane: int = LANE_TRAJ) -> np.random.Generator:
    """Counter-based stream for one trial: Philox keyed by (seed, lane, index)."""
    if index < 0 or index >= (1 << _LANE_BITS):
        raise MaxPlusError("stream index out of range")
    key = np.array([master_seed % (1 << 64), (lane << _LANE_BITS) | index],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class LawError(MaxPlusError):
    pass


# ---------------------------------------------------------------------------
# Noise models for parametric laws.


@dataclass(frozen=True)
class NoiseSpec:
    """Per-entry noise: uniform(a,b), normal(mu,sigma), or discrete{v:p,...}.

    Sampling is by inverse CDF on a uniform stream so that law parameters
    can be swept with common random numbers.
    """

    kind: str
    params: tuple

    def transform(self, u):
        """Vectorized inverse CDF on a float array."""
        if self.kind == "uniform":
            a, b = (float(p) for p in self.params)
            return a + (b - a) * u
        if self.kind == "normal":
            mu, sigma = (float(p) for p in self.params)
            return mu + sigma * ndtri(u)
        values, cum = self._discrete_float()
        return values[np.searchsorted(cum, u, side="right")]

    def transform_exact(self, u: float):
        """Scalar inverse CDF; keeps exact values for discrete noise."""
        if self.kind == "discrete":
            _, cum = self._discrete_float()
            idx = int(np.searchsorted(cum, u, side="right"))
            return self.params[idx][0]
        return float(self.transform(np.float64(u)))

    def _discrete_float(self):
        values = np.array([float(v) for v, _ in self.params])
        cum = np.cumsum([float(p) for _, p in self.params])
        cum[-1] = np.inf
        return values, cum

    def __str__(self):
        if self.kind == "discrete":
            body = ",".join(f"{format_scalar(v)}:{format_scalar(p)}"
                            for v, p in self.params)
            return f"discrete{{{body}}}"
        return f"{self.kind}({format_scalar(self.params[0])},{format_scalar(self.params[1])})"


_NOISE_FN_RE = re.compile(r"(uniform|normal)\(\s*([^,\s]+)\s*,\s*([^)\s]+)\s*\)\Z")
_NOISE_DISC_RE = re.compile(r"discrete\{(.*)\}\Z")


def parse_noise(text: str) -> NoiseSpec:
    text = text.strip()
    m = _NOISE_FN_RE.match(text)
    if m:
        return NoiseSpec(m.group(1), (parse_scalar(m.group(2)),
                                      parse_scalar(m.group(3))))
    m = _NOISE_DISC_RE.match(text)
    if m:
        pairs = []
        for part in m.group(1).split(","):
            if not part.strip():
                continue
            v, p = part.split(":")
            pairs.append((parse_scalar(v.strip()), parse_scalar(p.strip())))
        if not pairs:
            raise LawError("empty discrete noise")
        total = sum(p for _, p in pairs)
        if isinstance(total, (int, Fraction)):
            if total != 1:
                raise LawError(f"discrete noise probabilities sum to {total}")
        elif abs(total - 1.0) > 1e-9:
            raise LawError(f"discrete noise probabilities sum to {total}")
        return NoiseSpec("discrete", tuple(pairs))
    raise LawError(f"cannot parse noise spec {text!r}")


# ---------------------------------------------------------------------------
# Operator laws.


@dataclass(frozen=True)
class FiniteSupportLaw:
    """i.i.d. draws from a finite set of operator-valid matrices."""

    support: tuple
    probs: tuple

    def __post_init__(self):
        if not self.support:
            raise LawError("empty support")
        d = self.support[0].dim
        for m in self.support:
            if m.dim != d:
                raise LawError("support matrices have mixed dimensions")
            if not m.is_operator_valid:
                raise LawError("support matrix has a row of -inf")
        if len(self.probs) != len(self.support):
            raise LawError("need one probability per support matrix")
        total = sum(self.probs)
        if all(isinstance(p, (int, Fraction)) for p in self.probs):
            if total != 1:
                raise LawError(f"probabilities sum to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-9:
            raise LawError(f"probabilities sum to {total}, not 1")
        if any(p < 0 for p in self.probs):
            raise LawError("negative probability")

    @property
    def dim(self) -> int:
        return self.support[0].dim

    @property
    def is_finite(self) -> bool:
        return True

    @property
    def is_exact(self) -> bool:
        return all(m.is_exact for m in self.support)

    def uniforms_per_step(self) -> int:
        return 1

    def cum_probs(self) -> np.ndarray:
        cum = np.cumsum([float(p) for p in self.probs])
        cum[-1] = np.inf  # guard the measure-zero top boundary
        return cum

    def float_support(self) -> np.ndarray:
        out = np.full((len(self.support), self.dim, self.dim), -np.inf)
        for k, m in enumerate(self.support):
            for i in range(self.dim):
                for j in range(self.dim):
                    v = m.entry(i, j)
                    if v is not NEG_INF:
                        out[k, i, j] = float(v)
        return out


@dataclass(frozen=True)
class ParametricLaw:
    """Base pattern plus i.i.d. per-entry noise (finite entries only)."""

    pattern: MpMatrix
    noise: NoiseSpec

    def __post_init__(self):
        if not self.pattern.is_operator_valid:
            raise LawError("pattern has a row of -inf")

    @property
    def dim(self) -> int:
        return self.pattern.dim

    @property
    def is_finite(self) -> bool:
        return False

    @property
    def is_exact(self) -> bool:
        return False

    def uniforms_per_step(self) -> int:
        return self.dim * self.dim

    def float_pattern(self) -> np.ndarray:
        d = self.dim
        out = np.full((d, d), -np.inf)
        for i in range(d):
            for j in range(d):
                v = self.pattern.entry(i, j)
                if v is not NEG_INF:
                    out[i, j] = float(v)
        return out


def uniform_support_law(matrices) -> FiniteSupportLaw:
    k = len(matrices)
    return FiniteSupportLaw(tuple(matrices), tuple(Fraction(1, k) for _ in range(k)))


def sample_operator(law, rng: np.random.Generator) -> MpMatrix:
    """One i.i.d. draw; exact entries whenever the law is exact."""
    if law.is_finite:
        u = rng.random()
        idx = int(np.searchsorted(law.cum_probs(), u, side="right"))
        return law.support[idx]
    d = law.dim
    u = rng.random((d, d))
    rows = []
    for i in range(d):
        row = []
        for j in range(d):
            base = law.pattern.entry(i, j)
            if base is NEG_INF:
                row.append(NEG_INF)
            else:
                row.append(base + law.noise.transform_exact(float(u[i, j])))
        rows.append(tuple(row))
    return MpMatrix(d, tuple(rows))


def draw_operators(law, rng: np.random.Generator, n: int):
    """The trial's first n draws, consuming the stream per protocol."""
    if law.is_finite:
        u = rng.random(n)
        idx = np.searchsorted(law.cum_probs(), u, side="right")
        return [law.support[int(k)] for k in idx]
    d = law.dim
    u = rng.random((n, d, d))
    out = []
    for k in range(n):
        rows = []
        for i in range(d):
            row = []
            for j in range(d):
                base = law.pattern.entry(i, j)
                if base is NEG_INF:
                    row.append(NEG_INF)
                else:
                    row.append(base + law.noise.transform_exact(float(u[k, i, j])))
            rows.append(tuple(row))
        out.append(MpMatrix(d, tuple(rows)))
    return out


# ---------------------------------------------------------------------------
# Law file format.


def parse_law(text: str):
    lines = text.splitlines()
    dim = None
    kind = None
    support = []
    probs = []
    pattern = None
    noise = None
    i = 0

    def strip(line):
        return line.split("#", 1)[0].strip()

    def read_matrix(start):
        # matrix block: dimension line plus that many rows
        j = start
        need = None
        got = 0
        while j < len(lines):
            s = strip(lines[j])
            j += 1
            if not s:
                continue
            if need is None:
                need = int(s.split()[0])
            else:
                got += 1
            if need is not None and got == need:
                break
        block = "\n".join(lines[start:j])
        return parse_matrix(block, first_line=start + 1), j

    while i < len(lines):
        s = strip(lines[i])
        if not s:
            i += 1
            continue
        key, _, rest = s.partition(" ")
        if key == "dim":
            dim = int(rest)
            i += 1
        elif key == "type":
            kind = rest.strip()
            i += 1
        elif key == "matrix":
            m, i = read_matrix(i + 1)
            support.append(m)
            probs.append(None)
        elif key == "prob":
            if not support or probs[-1] is not None:
                raise LawError(f"line {i + 1}: prob without a matrix")
            probs[-1] = parse_scalar(rest.strip())
            i += 1
        elif key == "pattern":
            pattern, i = read_matrix(i + 1)
        elif key == "noise":
            noise = parse_noise(rest)
            i += 1
        else:
            raise LawError(f"line {i + 1}: unknown law field {key!r}")

    if kind == "finite":
        if any(p is None for p in probs) or not support:
            raise LawError("finite law needs matrix/prob pairs")
        law = FiniteSupportLaw(tuple(support), tuple(probs))
    elif kind == "parametric":
        if pattern is None or noise is None:
            raise LawError("parametric law needs pattern and noise")
        law = ParametricLaw(pattern, noise)
    else:
        raise LawError(f"law type must be finite or parametric, got {kind!r}")
    if dim is not None and law.dim != dim:
        raise LawError(f"declared dim {dim} != matrix dim {law.dim}")
    return law


def format_law(law) -> str:
    out = [f"dim {law.dim}"]
    if law.is_finite:
        out.append("type finite")
        for m, p in zip(law.support, law.probs):
            out.append("matrix")
            out.append(format_matrix(m).rstrip("\n"))
            out.append(f"prob {format_scalar(p)}")
    else:
        out.append("type parametric")
        out.append("pattern")
        out.append(format_matrix(law.pattern).rstrip("\n"))
        out.append(f"noise {law.noise}")
    return "\n".join(out) + "\n"


def load_law(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_law(fh.read())


# ---------------------------------------------------------------------------
# Initial conditions.


@dataclass(frozen=True)
class X0Spec:
    """Fixed vector, or i.i.d. random coordinates with a moment tag."""

    kind: str = "fixed"
    vector: tuple = ()
    params: tuple = ()
    moment: float | None = None

    @classmethod
    def zero(cls, d: int) -> "X0Spec":
        return cls("fixed", (0,) * d)

    @classmethod
    def fixed(cls, vec) -> "X0Spec":
        return cls("fixed", tuple(vec))

    @classmethod
    def uniform(cls, a, b, moment=None) -> "X0Spec":
        return cls("uniform", (), (a, b), moment)

    @classmethod
    def normal(cls, mu, sigma, moment=None) -> "X0Spec":
        return cls("normal", (), (mu, sigma), moment)

    @property
    def is_random(self) -> bool:
        return self.kind != "fixed"

    def draw_exact(self, rng, d: int) -> tuple:
        if self.kind == "fixed":
            if len(self.vector) != d:
                raise MaxPlusError("x0 dimension mismatch")
            return self.vector
        u = rng.random(d)
        if self.kind == "uniform":
            a, b = (float(p) for p in self.params)
            return tuple(a + (b - a) * v for v in u)
        mu, sigma = (float(p) for p in self.params)
        return tuple(mu + sigma * float(ndtri(v)) for v in u)

    def draw_np(self, rng, d: int) -> np.ndarray:
        return np.array(self.draw_exact(rng, d), dtype=float)


# ---------------------------------------------------------------------------
# Single-trajectory recursion (exact scalars where the law allows).


@dataclass
class Trajectory:
    """Normalized orbit record: class of x(k) and cocycle sums per functional."""

    length: int
    projs: tuple
    cocycles: dict
    seed: int
    stream_index: int

    def cocycle(self, phi: TopicalFunctional):
        return self.cocycles[phi.label]


def iterate(law, x0, n: int, phis, master_seed: int, trial_index: int = 0,
            lane: int = LANE_TRAJ) -> Trajectory:
    """Run x(k) = A(k) x(k-1) for k = 1..n with per-step renormalization.

    The state is stored as (shift, canonical rep): after each step the max
    coordinate is moved into the running shift, so no coordinate grows with
    n. Cocycle sums S_k = phi(x(k)) - phi(x0) are recorded for every
    requested functional, with S_0 = 0.
    """
    if n < 0:
        raise MaxPlusError("negative horizon")
    phis = tuple(phis)
    rng = stream(master_seed, trial_index, lane)
    x0 = X0Spec.fixed(x0) if not isinstance(x0, X0Spec) else x0
    vec = x0.draw_exact(rng, law.dim)
    shift = max(vec)
    rep = tuple(v - shift for v in vec)
    phi0 = {phi.label: phi(vec) for phi in phis}
    projs = [ProjVec(rep)]
    sums = {phi.label: [0] for phi in phis}
    ops = draw_operators(law, rng, n)
    for a in ops:
        y = mat_vec(a, rep)
        m = max(y)
        rep = tuple(v - m for v in y)
        shift = shift + m
        projs.append(ProjVec(rep))
        for phi in phis:
            sums[phi.label].append(shift + phi(rep) - phi0[phi.label])
    return Trajectory(n, tuple(projs),
                      {k: tuple(v) for k, v in sums.items()},
                      master_seed, trial_index)


# ---------------------------------------------------------------------------
# Memory-loss (coupling) detection.


@dataclass
class CouplingStats:
    """First step at which the left product becomes rank one, per trial."""

    max_n: int
    times: tuple  # int, or None when censored at max_n
    seed: int

    @property
    def trials(self) -> int:
        return len(self.times)

    @property
    def n_censored(self) -> int:
        return sum(1 for t in self.times if t is None)

    def mean_time(self):
        obs = [t for t in self.times if t is not None]
        if not obs:
            return None
        return sum(obs) / len(obs)

    def coupled_frequency(self, depth: int) -> float:
        return sum(1 for t in self.times if t is not None and t <= depth) / self.trials

    def non_coupling_prob(self, depth: int) -> float:
        return 1.0 - self.coupled_frequency(depth)

    def survival(self):
        return tuple(self.non_coupling_prob(k) for k in range(1, self.max_n + 1))


def detect_coupling(law, max_n: int, trials: int, master_seed: int,
                    tol: float = 1e-9, lane: int = LANE_COUPLING) -> CouplingStats:
    """Multiply draws left to right and report the first rank-one step.

    Once the running product A(k)...A(1) has rank one it stays rank one (a
    rank-one factor absorbs), so the first hit is the coupling time. Trials
    exceeding max_n are censored, never guessed.
    """
    if trials < 1:
        raise MaxPlusError("need at least one trial")
    times = []
    for t in range(trials):
        rng = stream(master_seed, t, lane)
        ops = draw_operators(law, rng, max_n)
        prod = None
        hit = None
        for k, a in enumerate(ops, start=1):
            prod = a if prod is None else mat_mul(a, prod)
            if is_rank_one(prod, tol):
                hit = k
                break
        times.append(hit)
    return CouplingStats(max_n, tuple(times), master_seed)


# ---------------------------------------------------------------------------
# Exact sampling of the stationary projective law by backward products.


@dataclass(frozen=True)
class InvariantSample:
    proj: ProjVec | None
    depth: int

    @property
    def censored(self) -> bool:
        return self.proj is None


def sample_invariant(law, max_depth: int, master_seed: int, index: int = 0,
                     tol: float = 1e-9, lane: int = LANE_INVARIANT) -> InvariantSample:
    """Backward scheme: grow A(1)...A(m) on the right until it has rank one.

    The projective class of (product) * 1 is then an exact draw from the
    stationary law; if the product never couples within max_depth the
    sample is censored, never truncated silently.
    """
    rng = stream(master_seed, index, lane)
    prod = None
    for m in range(1, max_depth + 1):
        a = _draw_one(law, rng)
        prod = a if prod is None else mat_mul(prod, a)
        if is_rank_one(prod, tol):
            ones = (0,) * law.dim
            return InvariantSample(project(mat_vec(prod, ones)), m)
    return InvariantSample(None, max_depth)


def _draw_one(law, rng) -> MpMatrix:
    if law.is_finite:
        u = rng.random()
        idx = int(np.searchsorted(law.cum_probs(), u, side="right"))
        return law.support[idx]
    d = law.dim
    u = rng.random((d, d))
    rows = []
    for i in range(d):
        row = []
        for j in range(d):
            base = law.pattern.entry(i, j)
            row.append(NEG_INF if base is NEG_INF
                       else base + law.noise.transform_exact(float(u[i, j])))
        rows.append(tuple(row))
    return MpMatrix(d, tuple(rows))


def default_invariant_depth(law, master_seed: int) -> int:
    """64 x empirical mean coupling time, clamped to [64, 4096]."""
    probe = detect_coupling(law, 64, 64, master_seed, lane=LANE_PROBE)
    mean = probe.mean_time()
    if mean is None:
        return 4096
    return int(min(4096, max(64, 64 * mean)))


def sample_invariant_many(law, count: int, master_seed: int,
                          max_depth: int | None = None, tol: float = 1e-9):
    if max_depth is None:
        max_depth = default_invariant_depth(law, master_seed)
    samples = [sample_invariant(law, max_depth, master_seed, i, tol)
               for i in range(count)]
    return samples


def invariant_rep_array(samples) -> np.ndarray:
    reps = [s.proj.rep for s in samples if not s.censored]
    if not reps:
        raise MaxPlusError("all invariant samples censored")
    return np.array([[float(v) for v in rep] for rep in reps])


# ---------------------------------------------------------------------------
# Vectorized Monte Carlo kernel used by the estimator suite.


@dataclass
class CocycleSample:
    """Per-trial state snapshots at checkpoint horizons.

    shift[n] + rep[n][:, i] reconstructs coordinate i of x(n); prod_max[n]
    is max_ij of the running matrix product when tracked.
    """

    horizons: tuple
    trials: int
    seed: int
    lane: int
    d: int
    x0: np.ndarray
    shift: dict
    rep: dict
    prod_max: dict | None

    def phi_values(self, phi: TopicalFunctional, n: int) -> np.ndarray:
        """phi(x(n)) per trial."""
        return self.shift[n] + phi_rows(phi, self.rep[n])

    def cocycle_values(self, phi: TopicalFunctional, n: int) -> np.ndarray:
        """S_n = phi(x(n)) - phi(x0) per trial."""
        return self.phi_values(phi, n) - phi_rows(phi, self.x0)

    def proj_norms(self, n: int) -> np.ndarray:
        return -self.rep[n].min(axis=1)


def phi_rows(phi: TopicalFunctional, arr: np.ndarray) -> np.ndarray:
    if phi.kind == "max":
        return arr.max(axis=1)
    if phi.kind == "min":
        return arr.min(axis=1)
    if phi.index >= arr.shape[1]:
        raise MaxPlusError(f"coordinate index {phi.index} out of range")
    return arr[:, phi.index]


def _chunk_size(law, nmax: int) -> int:
    per_trial = max(1, nmax) * 8 * law.uniforms_per_step()
    budget = 64 << 20
    return int(max(16, min(8192, budget // max(1, per_trial))))


def simulate_cocycles(law, x0_spec: X0Spec, horizons, trials: int, seed: int,
                      threads: int = 1, lane: int = LANE_TRAJ,
                      track_product: bool = False, step_hook=None,
                      trial_range=None, chunk: int | None = None) -> CocycleSample:
    """Run all trials to max(horizons), recording snapshots at checkpoints.

    Trials execute in chunks, vectorized over the chunk; chunk boundaries
    and thread count never affect results because each trial consumes only
    its own stream. ``step_hook(n, shift, rep, trial_slice)`` is invoked
    after every step for streaming statistics (slices are disjoint across
    chunks, so hooks may write to shared per-trial arrays).
    """
    horizons = tuple(sorted(set(int(n) for n in horizons)))
    if not horizons or horizons[0] < 0:
        raise MaxPlusError("need non-negative horizons")
    nmax = horizons[-1]
    d = law.dim
    lo, hi = (0, trials) if trial_range is None else trial_range
    count = hi - lo

    x0_out = np.empty((count, d))
    shift_out = {n: np.empty(count) for n in horizons}
    rep_out = {n: np.empty((count, d)) for n in horizons}
    pmax_out = {n: np.empty(count) for n in horizons} if track_product else None

    sup = law.float_support() if law.is_finite else None
    cum = law.cum_probs() if law.is_finite else None
    pattern = None if law.is_finite else law.float_pattern()

    def run_chunk(t0, t1):
        c = t1 - t0
        X = np.empty((c, d))
        if law.is_finite:
            U = np.empty((c, nmax))
        else:
            U = np.empty((c, nmax, d, d))
        for i in range(c):
            rng = stream(seed, t0 + i, lane)
            if x0_spec.is_random:
                X[i] = x0_spec.draw_np(rng, d)
            if nmax:
                U[i] = rng.random(U.shape[1:])
        if not x0_spec.is_random:
            X[:] = [float(v) for v in x0_spec.vector]
        sl = slice(t0 - lo, t1 - lo)
        x0_out[sl] = X
        shift = X.max(axis=1).astype(float)
        X = X - shift[:, None]
        if track_product:
            prod = np.full((c, d, d), -np.inf)
            prod[:, range(d), range(d)] = 0.0
            pshift = np.zeros(c)
        if law.is_finite and nmax:
            idx = np.searchsorted(cum, U, side="right")

        def record(n):
            shift_out[n][sl] = shift
            rep_out[n][sl] = X
            if track_product:
                pmax_out[n][sl] = pshift

        if 0 in shift_out:
            record(0)
        for k in range(nmax):
            if law.is_finite:
                M = sup[idx[:, k]]
            else:
                M = pattern[None, :, :] + law.noise.transform(U[:, k])
            X = (M + X[:, None, :]).max(axis=2)
            m = X.max(axis=1)
            X -= m[:, None]
            shift = shift + m
            if track_product:
                prod = (M[:, :, :, None] + prod[:, None, :, :]).max(axis=2)
                pm = prod.max(axis=(1, 2))
                prod -= pm[:, None, None]
                pshift = pshift + pm
            n = k + 1
            if step_hook is not None:
                step_hook(n, shift, X, slice(t0, t1))
            if n in shift_out:
                record(n)

    if chunk is None:
        chunk = _chunk_size(law, nmax)
    tasks = [(t0, min(t0 + chunk, hi)) for t0 in range(lo, hi, chunk)]
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda se: run_chunk(*se), tasks))
    else:
        for t0, t1 in tasks:
            run_chunk(t0, t1)

    return CocycleSample(horizons, count, seed, lane, d, x0_out,
                         shift_out, rep_out, pmax_out)


def extend_cocycles(sample: CocycleSample, law, x0_spec: X0Spec,
                    new_trials: int, threads: int = 1,
                    step_hook=None) -> CocycleSample:
    """Add trials [trials, new_trials) to an existing run; old rows unchanged."""
    if new_trials <= sample.trials:
        return sample
    extra = simulate_cocycles(
        law, x0_spec, sample.horizons, new_trials, sample.seed,
        threads=threads, lane=sample.lane,
        track_product=sample.prod_max is not None,
        step_hook=step_hook, trial_range=(sample.trials, new_trials))
    merged_shift = {n: np.concatenate([sample.shift[n], extra.shift[n]])
                    for n in sample.horizons}
    merged_rep = {n: np.concatenate([sample.rep[n], extra.rep[n]])
                  for n in sample.horizons}
    merged_pmax = None
    if sample.prod_max is not None:
        merged_pmax = {n: np.concatenate([sample.prod_max[n], extra.prod_max[n]])
                       for n in sample.horizons}
    return CocycleSample(sample.horizons, new_trials, sample.seed, sample.lane,
                         sample.d, np.concatenate([sample.x0, extra.x0]),
                         merged_shift, merged_rep, merged_pmax)
