"""Exact max-plus scalars, matrices, and the projective quotient.

Values live in R ∪ {-inf} with semiring addition = max and semiring
multiplication = ordinary +. Finite entries are plain Python numbers:
``int`` and ``fractions.Fraction`` entries are exact and every operation on
them stays exact; ``float`` entries follow IEEE arithmetic. The bottom
element is the dedicated sentinel ``NEG_INF`` (absorbing for +, neutral for
max), never a large negative float.

The module is pure stdlib and all values are immutable, so everything here
is safe to share between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


class MaxPlusError(Exception):
    """Base class for errors raised by this package's algebra layer."""


class DimensionMismatchError(MaxPlusError):
    pass


class OperatorInvalidError(MaxPlusError):
    """A row of the matrix has no finite entry, so it defines no operator."""


class MatrixParseError(MaxPlusError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class _NegInf:
    """Singleton bottom element of the semiring."""

    __slots__ = ()

    def __repr__(self):
        return "-inf"

    # Total order against real numbers: NEG_INF is below everything else.
    def __lt__(self, other):
        return other is not self

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return other is self

    def __reduce__(self):
        return (_restore_neg_inf, ())


NEG_INF = _NegInf()


def _restore_neg_inf():
    return NEG_INF


EXACT_TYPES = (int, Fraction)


def is_neg_inf(v) -> bool:
    return v is NEG_INF


def is_exact_scalar(v) -> bool:
    return v is NEG_INF or isinstance(v, EXACT_TYPES)


def mp_add(a, b):
    """Semiring sum a ⊕ b = max(a, b); NEG_INF is neutral."""
    if a is NEG_INF:
        return b
    if b is NEG_INF:
        return a
    return a if a >= b else b


def mp_mul(a, b):
    """Semiring product a ⊗ b = a + b; NEG_INF is absorbing."""
    if a is NEG_INF or b is NEG_INF:
        return NEG_INF
    return a + b


def scalar_eq(a, b, tol=0):
    """Entry comparison: exact when both sides are exact, |a-b| <= tol else."""
    if a is NEG_INF or b is NEG_INF:
        return a is b
    if tol and not (isinstance(a, EXACT_TYPES) and isinstance(b, EXACT_TYPES)):
        return abs(a - b) <= tol
    return a == b


_INT_RE = re.compile(r"[+-]?\d+\Z")
_FRAC_RE = re.compile(r"[+-]?\d+/\d+\Z")


def parse_scalar(token: str):
    """Parse one matrix-file token.

    ``-inf`` is the bottom element; ``p/q`` and bare integers are exact
    rationals; anything else (decimal or scientific notation) is an IEEE
    float. Exact tokens round-trip bit-exactly through :func:`format_scalar`,
    floats round-trip through their shortest repr.
    """
    if token == "-inf":
        return NEG_INF
    if _FRAC_RE.match(token) or _INT_RE.match(token):
        return Fraction(token)
    return float(token)


def format_scalar(v) -> str:
    if v is NEG_INF:
        return "-inf"
    if isinstance(v, (int, Fraction)):
        return str(v)
    return repr(v)


@dataclass(frozen=True)
class MpMatrix:
    """Immutable d x d max-plus matrix.

    ``rows`` is a tuple of d tuples of entries. A matrix is *operator valid*
    when every row contains at least one finite entry; only then does it act
    on R^d.
    """

    dim: int
    rows: tuple

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "MpMatrix":
        tup = tuple(tuple(r) for r in rows)
        d = len(tup)
        if d == 0 or any(len(r) != d for r in tup):
            raise DimensionMismatchError("matrix must be square and non-empty")
        return cls(d, tup)

    @classmethod
    def identity(cls, d: int) -> "MpMatrix":
        return cls(d, tuple(tuple(0 if i == j else NEG_INF for j in range(d))
                            for i in range(d)))

    @classmethod
    def full(cls, d: int, value) -> "MpMatrix":
        return cls(d, tuple((value,) * d for _ in range(d)))

    @property
    def is_operator_valid(self) -> bool:
        return all(any(v is not NEG_INF for v in row) for row in self.rows)

    @property
    def is_exact(self) -> bool:
        return all(is_exact_scalar(v) for row in self.rows for v in row)

    def entry(self, i: int, j: int):
        return self.rows[i][j]

    def shifted(self, c) -> "MpMatrix":
        """Add c to every finite entry (projective shift of the operator)."""
        return MpMatrix(self.dim, tuple(
            tuple(v if v is NEG_INF else v + c for v in row) for row in self.rows))

    def __repr__(self):
        body = "; ".join(" ".join(format_scalar(v) for v in row) for row in self.rows)
        return f"MpMatrix[{body}]"


def mat_mul(a: MpMatrix, b: MpMatrix) -> MpMatrix:
    """Max-plus matrix product: (AB)_ij = max_p (A_ip + B_pj)."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dims {a.dim} and {b.dim} differ")
    d = a.dim
    arows, brows = a.rows, b.rows
    out = []
    for i in range(d):
        ai = arows[i]
        row = []
        for j in range(d):
            best = NEG_INF
            for p in range(d):
                v = ai[p]
                if v is NEG_INF:
                    continue
                w = brows[p][j]
                if w is NEG_INF:
                    continue
                s = v + w
                if best is NEG_INF or s > best:
                    best = s
            row.append(best)
        out.append(tuple(row))
    return MpMatrix(d, tuple(out))


def mat_power(a: MpMatrix, k: int) -> MpMatrix:
    if k < 0:
        raise MaxPlusError("negative matrix power")
    if k == 0:
        return MpMatrix.identity(a.dim)
    out = a
    for _ in range(k - 1):
        out = mat_mul(out, a)
    return out


def mat_vec(a: MpMatrix, x: Sequence) -> tuple:
    """Operator action (Ax)_i = max_j (A_ij + x_j) on a finite vector."""
    if a.dim != len(x):
        raise DimensionMismatchError(f"matrix dim {a.dim}, vector dim {len(x)}")
    out = []
    for i, row in enumerate(a.rows):
        best = NEG_INF
        for j in range(a.dim):
            v = row[j]
            if v is NEG_INF:
                continue
            s = v + x[j]
            if best is NEG_INF or s > best:
                best = s
        if best is NEG_INF:
            raise OperatorInvalidError(f"row {i + 1} has no finite entry")
        out.append(best)
    return tuple(out)


def is_rank_one(a: MpMatrix, tol: float = 1e-9) -> bool:
    """True iff the operator's projective image is a single point.

    Computed test: all entries finite and every column equals column one up
    to an additive constant. The comparison is exact when all entries are
    exact rationals; otherwise the column-difference spread must be <= tol.
    Any -inf entry lets a column escape to projective infinity, so the
    matrix is never rank one in that case.
    """
    rows = a.rows
    for row in rows:
        for v in row:
            if v is NEG_INF:
                return False
    exact = a.is_exact
    d = a.dim
    for j in range(1, d):
        base = rows[0][j] - rows[0][0]
        if exact:
            for i in range(1, d):
                if rows[i][j] - rows[i][0] != base:
                    return False
        else:
            lo = hi = base
            for i in range(1, d):
                diff = rows[i][j] - rows[i][0]
                if diff < lo:
                    lo = diff
                elif diff > hi:
                    hi = diff
            if hi - lo > tol:
                return False
    return True


# ---------------------------------------------------------------------------
# Projective quotient PR^d: R^d modulo the line R*(1,...,1).


@dataclass(frozen=True)
class ProjVec:
    """Canonical class representative: coordinates shifted so max is 0."""

    rep: tuple

    def __post_init__(self):
        if len(self.rep) == 0:
            raise DimensionMismatchError("empty vector")
        if max(self.rep) != 0:
            raise MaxPlusError("canonical representative must have max 0")

    @property
    def dim(self) -> int:
        return len(self.rep)


def project(x: Sequence) -> ProjVec:
    m = max(x)
    return ProjVec(tuple(v - m for v in x))


def _rep_of(p) -> tuple:
    if isinstance(p, ProjVec):
        return p.rep
    return project(p).rep


def proj_metric(p, q):
    """delta(x, y) = max_i (x_i - y_i) + max_i (y_i - x_i).

    Accepts canonical ``ProjVec`` values or raw finite vectors (which are
    projected first; the metric only depends on the class).
    """
    a, b = _rep_of(p), _rep_of(q)
    if len(a) != len(b):
        raise DimensionMismatchError("projective points of different dims")
    return max(x - y for x, y in zip(a, b)) + max(y - x for x, y in zip(a, b))


def proj_norm(x) -> object:
    """|x|_P = delta(x, 0) = max_i x_i - min_i x_i."""
    r = _rep_of(x)
    return max(r) - min(r)


# ---------------------------------------------------------------------------
# Topical functionals and the level/projective splitting.


@dataclass(frozen=True)
class TopicalFunctional:
    """One of the scalar topical functionals: max, min, or a coordinate."""

    kind: str
    index: int | None = None

    def __post_init__(self):
        if self.kind not in ("max", "min", "coord"):
            raise MaxPlusError(f"unknown functional kind {self.kind!r}")
        if self.kind == "coord" and (self.index is None or self.index < 0):
            raise MaxPlusError("coordinate functional needs an index >= 0")

    def __call__(self, x: Sequence):
        if self.kind == "max":
            return max(x)
        if self.kind == "min":
            return min(x)
        if self.index >= len(x):
            raise MaxPlusError(f"coordinate index {self.index} out of range")
        return x[self.index]

    @property
    def label(self) -> str:
        if self.kind == "coord":
            return f"x{self.index + 1}"
        return self.kind


PHI_MAX = TopicalFunctional("max")
PHI_MIN = TopicalFunctional("min")


def phi_coord(i: int) -> TopicalFunctional:
    return TopicalFunctional("coord", i)


def parse_functional(label: str) -> TopicalFunctional:
    if label == "max":
        return PHI_MAX
    if label == "min":
        return PHI_MIN
    m = re.match(r"x(\d+)\Z", label)
    if m:
        return phi_coord(int(m.group(1)) - 1)
    raise MaxPlusError(f"unknown functional {label!r} (use max, min, or x<i>)")


def cocycle_increment(phi: TopicalFunctional, a: MpMatrix, p) -> object:
    """phi(A x) - phi(x); depends only on A and the class of x."""
    rep = _rep_of(p)
    return phi(mat_vec(a, rep)) - phi(rep)


def decompose(x: Sequence, phi: TopicalFunctional):
    """Split x into (phi(x), class of x); a bi-Lipschitz bijection."""
    return phi(x), project(x)


def reconstruct(t, p: ProjVec, phi: TopicalFunctional) -> tuple:
    """Inverse of :func:`decompose`: rep(p) + (t - phi(rep(p))) * 1."""
    off = t - phi(p.rep)
    return tuple(v + off for v in p.rep)


# ---------------------------------------------------------------------------
# Matrix text format: first line d, then d rows of d whitespace-separated
# tokens. `-inf` is the bottom element, `p/q` and integers are exact,
# decimals are IEEE floats.


def parse_matrix(text: str, first_line: int = 1) -> MpMatrix:
    lines = text.splitlines()
    rows = []
    d = None
    lineno = first_line - 1
    for raw in lines:
        lineno += 1
        stripped = raw.split("#", 1)[0]
        if not stripped.strip():
            continue
        if d is None:
            tok = stripped.split()
            if len(tok) != 1 or not _INT_RE.match(tok[0]) or int(tok[0]) < 1:
                raise MatrixParseError("expected the dimension d", lineno, 1)
            d = int(tok[0])
            continue
        row = []
        for m in re.finditer(r"\S+", stripped):
            try:
                row.append(parse_scalar(m.group()))
            except ValueError:
                raise MatrixParseError(f"bad token {m.group()!r}",
                                       lineno, m.start() + 1) from None
        if len(row) != d:
            raise MatrixParseError(f"expected {d} entries, got {len(row)}",
                                   lineno, 1)
        rows.append(tuple(row))
        if len(rows) == d:
            break
    if d is None:
        raise MatrixParseError("empty matrix text", first_line, 1)
    if len(rows) != d:
        raise MatrixParseError(f"expected {d} rows, got {len(rows)}", lineno, 1)
    return MpMatrix(d, tuple(rows))


def format_matrix(a: MpMatrix) -> str:
    lines = [str(a.dim)]
    for row in a.rows:
        lines.append(" ".join(format_scalar(v) for v in row))
    return "\n".join(lines) + "\n"


def load_matrix(path) -> MpMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix(fh.read())
