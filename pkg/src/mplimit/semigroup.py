"""Exhaustive exploration of the semigroup generated by a finite support.

Products are enumerated breadth-first by word length, deduplicated by exact
entry comparison for rational supports and by a tolerance grid for float
supports. Words are tuples of support indices with the leftmost letter the
*latest* operator applied, matching the product A(n)...A(1).

Three verdicts are produced from an exploration:

- memory loss: is some product rank one (witness word, or none at depth);
- variance degeneracy: after normalizing every support matrix by -gamma,
  do all explored products have max cycle mean zero;
- lattice structure: do the rank-one sandwich shifts (and, separately, the
  cycle means of strongly connected support matrices) fit a lattice a + bZ.

Lattice verdicts are only *claimed* for exact rational supports; for float
supports the certificate reports evidence, since lattice membership is not
robustly decidable in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    NEG_INF,
    MaxPlusError,
    MpMatrix,
    format_scalar,
    is_rank_one,
    mat_mul,
    mat_vec,
)
from .spectral import is_strongly_connected, max_cycle_mean


class NoRankOneError(MaxPlusError):
    """Raised when a test needs a rank-one product and none was found."""


class ExplosionError(MaxPlusError):
    """Exploration exceeded the product-count cap; certificate is partial."""


@dataclass(frozen=True)
class SemigroupElement:
    word: tuple  # support indices, leftmost = latest operator applied
    matrix: MpMatrix

    @property
    def length(self) -> int:
        return len(self.word)


@dataclass
class ExploreResult:
    support: tuple
    depth: int
    shift: object  # per-letter normalization applied to the support
    elements: tuple
    witness: tuple | None  # word of the first rank-one product in BFS order
    capped: bool
    exact: bool

    @property
    def product_count(self) -> int:
        return len(self.elements)

    def witness_matrix(self) -> MpMatrix:
        if self.witness is None:
            raise NoRankOneError("no rank-one product found at this depth")
        for el in self.elements:
            if el.word == self.witness:
                return el.matrix
        raise NoRankOneError("witness word missing from elements")


def _dedup_key(m: MpMatrix, exact: bool, tol: float):
    if exact:
        return m.rows
    grid = tol if tol > 0 else 1e-12
    return tuple(tuple(None if v is NEG_INF else round(float(v) / grid)
                       for v in row) for row in m.rows)


def explore(support, depth: int, shift=0, cap: int = 10 ** 6,
            tol: float = 1e-9, on_cap: str = "partial") -> ExploreResult:
    """All distinct products of word length <= depth, deduplicated.

    ``shift`` subtracts a constant from every finite entry of every support
    matrix before multiplying, so products of word length k are normalized
    by k * shift. Extending only deduplicated representatives is sound
    because a product's extensions depend only on its value.
    """
    support = tuple(support)
    if depth < 1:
        raise MaxPlusError("depth must be >= 1")
    for m in support:
        if not m.is_operator_valid:
            raise MaxPlusError("support matrix has a row of -inf")
    letters = tuple(m.shifted(-shift) if shift != 0 else m for m in support)
    exact = all(m.is_exact for m in letters) and (
        shift == 0 or isinstance(shift, (int, Fraction)))
    seen = {}
    elements = []
    witness = None
    capped = False
    frontier = []
    for idx, m in enumerate(letters):
        key = _dedup_key(m, exact, tol)
        if key in seen:
            continue
        el = SemigroupElement((idx,), m)
        seen[key] = el
        elements.append(el)
        frontier.append(el)
        if witness is None and is_rank_one(m, tol):
            witness = el.word
    level = 1
    while level < depth and frontier and not capped:
        nxt = []
        for idx, letter in enumerate(letters):
            for el in frontier:
                prod = mat_mul(letter, el.matrix)
                key = _dedup_key(prod, exact, tol)
                if key in seen:
                    continue
                if len(elements) >= cap:
                    capped = True
                    break
                new = SemigroupElement((idx,) + el.word, prod)
                seen[key] = new
                elements.append(new)
                nxt.append(new)
                if witness is None and is_rank_one(prod, tol):
                    witness = new.word
            if capped:
                break
        frontier = nxt
        level += 1
    if capped and on_cap == "error":
        raise ExplosionError(f"more than {cap} distinct products")
    return ExploreResult(support, depth, shift, tuple(elements), witness,
                         capped, exact)


def remultiply(result: ExploreResult, word) -> MpMatrix:
    """Recompute a product from its word (letters include the shift)."""
    letters = [m.shifted(-result.shift) if result.shift != 0 else m
               for m in result.support]
    out = letters[word[-1]]
    for idx in reversed(word[:-1]):
        out = mat_mul(letters[idx], out)
    return out


# ---------------------------------------------------------------------------
# Degeneracy of the CLT variance: all normalized products have cycle mean 0.


def degeneracy_test(support, gamma, depth: int, cap: int = 10 ** 6,
                    tol: float = 1e-9):
    """Verdict 'degenerate' | 'nondegenerate' | 'unknown' with evidence.

    Explores products of the support normalized by -gamma per letter and
    checks that every max cycle mean is zero. Returns (verdict, witness)
    where witness is a counterexample element or None.
    """
    result = explore(support, depth, shift=gamma, cap=cap, tol=tol)
    zero = Fraction(0)
    for el in result.elements:
        rho = max_cycle_mean(el.matrix)
        if rho is None:
            continue  # cannot happen for operator-valid support
        bad = rho != zero if result.exact else abs(float(rho)) > tol
        if bad:
            return "nondegenerate", el, result
    return ("unknown" if result.capped else "degenerate"), None, result


# ---------------------------------------------------------------------------
# Rank-one sandwich shifts theta A theta' - theta theta'.


def _rank_one_elements(result: ExploreResult, tol: float):
    return [el for el in result.elements if is_rank_one(el.matrix, tol)]


def collect_shift_values(result: ExploreResult, tol: float = 1e-9):
    """Constants of theta A theta' - theta theta' over the certificate.

    theta is the first rank-one witness; A runs over the support and
    theta' over every explored rank-one product. Each difference is a
    constant vector (rank-one sandwich); the constant is returned once per
    (A, theta') pair. Raises when no rank-one product exists.
    """
    if result.witness is None:
        raise NoRankOneError("no rank-one product found at this depth")
    if result.shift != 0:
        raise MaxPlusError("shift values need an unnormalized exploration")
    theta = result.witness_matrix()
    ones = (0,) * theta.dim
    values = []
    for el in _rank_one_elements(result, tol):
        base = mat_vec(mat_mul(theta, el.matrix), ones)
        for a in result.support:
            sand = mat_vec(mat_mul(theta, mat_mul(a, el.matrix)), ones)
            diffs = [s - b for s, b in zip(sand, base)]
            spread = max(diffs) - min(diffs)
            if result.exact:
                if spread != 0:
                    raise MaxPlusError("sandwich difference not constant")
            elif spread > 4 * tol:
                raise MaxPlusError("sandwich difference not constant")
            values.append(diffs[0])
    return values


def theta_shift_test(result: ExploreResult, gamma, tol: float = 1e-9) -> bool:
    """True iff every sandwich shift equals gamma (the sigma = 0 criterion)."""
    values = collect_shift_values(result, tol)
    if result.exact and isinstance(gamma, (int, Fraction)):
        return all(v == gamma for v in values)
    return all(abs(float(v) - float(gamma)) <= tol for v in values)


# ---------------------------------------------------------------------------
# Smallest-lattice fit a + bZ.


def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(math.gcd(a.numerator * b.denominator,
                             b.numerator * a.denominator),
                    a.denominator * b.denominator)


def _float_gcd(a: float, b: float, tol: float) -> float:
    a, b = abs(a), abs(b)
    while b > tol:
        a, b = b, a % b
    return a


def arithmetic_lattice_test(values, tol: float = 1e-9):
    """Smallest lattice a + bZ containing all values, or None.

    b is the gcd-like generator of pairwise differences (exact rational gcd
    for exact inputs); a is the representative of the values modulo b in
    [0, b). A singleton gives the degenerate lattice (value, 0). None means
    the differences are rationally independent within tol: evidence against
    any lattice structure.
    """
    values = list(values)
    if not values:
        raise MaxPlusError("need at least one value")
    exact = all(isinstance(v, (int, Fraction)) for v in values)
    base = values[0]
    diffs = [v - base for v in values[1:] if v != base]
    if not diffs:
        return (base, Fraction(0) if exact else 0.0)
    if exact:
        g = Fraction(0)
        for d in diffs:
            g = _fraction_gcd(g, Fraction(abs(d))) if g else Fraction(abs(d))
        a = Fraction(base) % g
        return (a, g)
    scale = max(abs(float(v)) for v in values)
    g = 0.0
    for d in diffs:
        g = _float_gcd(g, float(d), tol) if g else abs(float(d))
    if g <= max(tol, tol * scale) * 4:
        return None
    # soundness: every value must actually sit on the lattice
    a = float(base) % g
    for v in values:
        r = (float(v) - a) % g
        if min(r, g - r) > 4 * tol:
            return None
    if min(a, g - a) <= 4 * tol:
        a = 0.0
    return (a, g)


# ---------------------------------------------------------------------------
# The assembled certificate.


@dataclass
class SemigroupCert:
    support: tuple
    depth: int
    product_count: int
    witness: tuple | None
    capped: bool
    exact: bool
    rho_set: tuple = ()
    sc_support_rho_set: tuple = ()
    memory_loss: str = "no-witness-at-depth"
    degenerate: str | None = None
    gamma: object = None
    gamma_source: str = "supplied"
    shift_values: tuple = ()
    shift_lattice: object = None
    shift_lattice0: object = None  # centered fit: smallest bZ holding shifts
    rho_lattice: object = None
    arithmetic: str = "unknown"
    notes: list = field(default_factory=list)


def certify(support, depth: int, gamma=None, gamma_source: str = "supplied",
            cap: int = 10 ** 6, tol: float = 1e-9) -> SemigroupCert:
    """Run the full battery on a finite support and assemble the verdicts."""
    raw = explore(support, depth, cap=cap, tol=tol)
    cert = SemigroupCert(
        support=raw.support, depth=depth, product_count=raw.product_count,
        witness=raw.witness, capped=raw.capped, exact=raw.exact,
        memory_loss="witness" if raw.witness is not None else "no-witness-at-depth",
    )
    rhos = sorted({max_cycle_mean(el.matrix) for el in raw.elements})
    cert.rho_set = tuple(rhos)
    cert.sc_support_rho_set = tuple(sorted(
        {max_cycle_mean(m) for m in raw.support if is_strongly_connected(m)}))
    if raw.capped:
        cert.notes.append(f"exploration capped at {cap} products")

    if gamma is not None:
        cert.gamma = gamma
        cert.gamma_source = gamma_source
        verdict, bad, _ = degeneracy_test(support, gamma, depth, cap, tol)
        cert.degenerate = verdict
        if bad is not None:
            cert.notes.append(
                "degeneracy witness: word "
                + _word_text(bad.word)
                + f" has normalized cycle mean {format_scalar(max_cycle_mean(bad.matrix))}")

    if raw.witness is not None:
        values = collect_shift_values(raw, tol)
        cert.shift_values = tuple(sorted(set(values)))
        cert.shift_lattice = arithmetic_lattice_test(values, tol)
        # centered variant: adding 0 to the value set forces a = 0, so a hit
        # means the shifts sit inside some bZ (the renewal obstruction)
        zero = Fraction(0) if raw.exact else 0.0
        cert.shift_lattice0 = arithmetic_lattice_test([zero] + values, tol)
    if cert.sc_support_rho_set:
        cert.rho_lattice = arithmetic_lattice_test(cert.sc_support_rho_set, tol)

    if raw.witness is None:
        cert.arithmetic = "unknown"
        cert.notes.append("no rank-one product: sandwich shifts unavailable")
    elif cert.shift_lattice is None:
        # no lattice fits the observed shifts; for exact supports this
        # cannot happen (rationals always fit), so it is float evidence
        cert.arithmetic = "nonarithmetic-evidence"
    elif raw.exact:
        cert.arithmetic = "arithmetic"
    else:
        cert.arithmetic = "arithmetic-evidence"
    return cert


def _word_text(word) -> str:
    return ".".join(str(i) for i in word)


def _lattice_text(lat) -> str:
    if lat is None:
        return "none"
    a, b = lat
    return f"({format_scalar(a)}, {format_scalar(b)})"


def cert_text(cert: SemigroupCert) -> str:
    lines = [
        f"support_size {len(cert.support)}",
        f"depth {cert.depth}",
        f"product_count {cert.product_count}",
        f"exact {str(cert.exact).lower()}",
        f"capped {str(cert.capped).lower()}",
        f"memory_loss {cert.memory_loss}",
        "witness_word " + (_word_text(cert.witness) if cert.witness is not None
                           else "none"),
        "rho_set " + " ".join(format_scalar(v) for v in cert.rho_set),
        "sc_support_rho_set " + " ".join(format_scalar(v)
                                         for v in cert.sc_support_rho_set),
    ]
    if cert.degenerate is not None:
        lines.append(f"degenerate {cert.degenerate}")
        lines.append(f"gamma {format_scalar(cert.gamma)} ({cert.gamma_source})")
    if cert.shift_values:
        lines.append("shift_values " + " ".join(format_scalar(v)
                                                for v in cert.shift_values))
    lines.append("shift_lattice " + _lattice_text(cert.shift_lattice))
    lines.append("shift_lattice_centered " + _lattice_text(cert.shift_lattice0))
    lines.append("rho_lattice " + _lattice_text(cert.rho_lattice))
    lines.append(f"arithmetic {cert.arithmetic}")
    for note in cert.notes:
        lines.append(f"note {note}")
    return "\n".join(lines) + "\n"
