"""Exact rational and complex-rational arithmetic.

The scalar type is ``fractions.Fraction`` (aliased ``Q``): arbitrary-precision
integers, denominator always positive, gcd-reduced after every operation, so
canonical form is maintained eagerly and comparison is a plain cross
multiplication.  Nothing in this module ever rounds.

Norm logic is kept squared throughout: ``sqrt`` leaves the rationals, but
comparisons of nonnegative norms reduce to comparisons of their squares.
Where a scalar root is genuinely needed downstream, :func:`dyadic_sqrt_lower`
and :func:`dyadic_sqrt_upper` return certified dyadic enclosures.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Iterable, Sequence

Q = Fraction

LT, EQ, GT = -1, 0, 1

_FIELD_OPS = ("add", "sub", "mul", "div")


def rational(num: int, den: int = 1) -> Q:
    """Build a rational in canonical form; ``den == 0`` raises ZeroDivisionError."""
    return Q(num, den)


def field_op(a: Q, b: Q, which: str) -> Q:
    """Apply one of add/sub/mul/div exactly.

    Division by zero is reported as ZeroDivisionError, never a silent value.
    """
    if which == "add":
        return a + b
    if which == "sub":
        return a - b
    if which == "mul":
        return a * b
    if which == "div":
        if b == 0:
            raise ZeroDivisionError("exact division by zero")
        return a / b
    raise ValueError(f"unknown field op {which!r}; expected one of {_FIELD_OPS}")


def rat_cmp(a: Q, b: Q) -> int:
    """Total order on rationals: returns LT (-1), EQ (0) or GT (1).

    Always decides in finitely many steps; this is the decidable comparison
    that the semi-decidable computable-real comparison bottoms out in.
    """
    if a < b:
        return LT
    if a > b:
        return GT
    return EQ


def fmt_rational(q: Q) -> str:
    """Locale-independent "num/den" text (integers render without "/1")."""
    return str(q)


def parse_rational(text: str) -> Q:
    """Parse "num/den" or integer text produced by :func:`fmt_rational`."""
    return Q(text.strip())


def ceil_log2(q: Q) -> int:
    """Smallest integer t with 2**t >= q, for q > 0.  May be negative."""
    if q <= 0:
        raise ValueError("ceil_log2 requires a positive rational")
    num, den = q.numerator, q.denominator
    t = num.bit_length() - den.bit_length()
    # bit-length estimate is within 1; fix up exactly
    while Q(2) ** t < q:
        t += 1
    while t - 1 >= -(10**6) and Q(2) ** (t - 1) >= q:
        t -= 1
    return t


def dyadic_sqrt_lower(q: Q, prec: int) -> Q:
    """Dyadic d with d <= sqrt(q) and sqrt(q) - d <= 2**-prec (q >= 0)."""
    if q < 0:
        raise ValueError("square root of a negative rational")
    if q == 0:
        return Q(0)
    num, den = q.numerator, q.denominator
    t = 1 << prec
    # floor(sqrt(num*den) * t) / (den*t) <= sqrt(q), error < 1/(den*t) <= 2**-prec
    return Q(isqrt(num * den * t * t), den * t)


def dyadic_sqrt_upper(q: Q, prec: int = 40) -> Q:
    """Rational u with u >= sqrt(q), tight to 2**-prec; exact on perfect squares."""
    if q < 0:
        raise ValueError("square root of a negative rational")
    if q == 0:
        return Q(0)
    num, den = q.numerator, q.denominator
    rn, rd = isqrt(num), isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Q(rn, rd)
    t = 1 << prec
    return Q(isqrt(num * den * t * t) + 1, den * t)


@dataclass(frozen=True)
class ComplexQ:
    """Complex number with exact rational real and imaginary parts."""

    re: Q
    im: Q

    @staticmethod
    def from_rational(q: Q | int) -> "ComplexQ":
        return ComplexQ(Q(q), Q(0))

    def __add__(self, other: "ComplexQ") -> "ComplexQ":
        return ComplexQ(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexQ") -> "ComplexQ":
        return ComplexQ(self.re - other.re, self.im - other.im)

    def __mul__(self, other: "ComplexQ") -> "ComplexQ":
        return ComplexQ(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def __truediv__(self, other: "ComplexQ") -> "ComplexQ":
        d = other.abs_sq()
        if d == 0:
            raise ZeroDivisionError("exact complex division by zero")
        return ComplexQ(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def __neg__(self) -> "ComplexQ":
        return ComplexQ(-self.re, -self.im)

    def conj(self) -> "ComplexQ":
        return ComplexQ(self.re, -self.im)

    def abs_sq(self) -> Q:
        return self.re * self.re + self.im * self.im

    def is_real(self) -> bool:
        return self.im == 0

    def scale(self, q: Q) -> "ComplexQ":
        return ComplexQ(self.re * q, self.im * q)


CZERO = ComplexQ(Q(0), Q(0))
CONE = ComplexQ(Q(1), Q(0))


def _as_complex(entry) -> ComplexQ:
    if isinstance(entry, ComplexQ):
        return entry
    return ComplexQ(Q(entry), Q(0))


@dataclass(frozen=True)
class RationalVector:
    """Fixed-length vector of exact complex rationals."""

    entries: tuple[ComplexQ, ...]

    @staticmethod
    def from_items(items: Iterable) -> "RationalVector":
        return RationalVector(tuple(_as_complex(e) for e in items))

    @staticmethod
    def zero(n: int) -> "RationalVector":
        return RationalVector((CZERO,) * n)

    @property
    def n(self) -> int:
        return len(self.entries)

    def __add__(self, other: "RationalVector") -> "RationalVector":
        self._check_dim(other)
        return RationalVector(tuple(a + b for a, b in zip(self.entries, other.entries)))

    def __sub__(self, other: "RationalVector") -> "RationalVector":
        self._check_dim(other)
        return RationalVector(tuple(a - b for a, b in zip(self.entries, other.entries)))

    def scale(self, q: Q) -> "RationalVector":
        return RationalVector(tuple(e.scale(q) for e in self.entries))

    def _check_dim(self, other: "RationalVector") -> None:
        if self.n != other.n:
            raise ValueError(f"vector length mismatch: {self.n} vs {other.n}")

    def is_real(self) -> bool:
        return all(e.im == 0 for e in self.entries)

    def real_parts(self) -> tuple[Q, ...]:
        return tuple(e.re for e in self.entries)


def l2_norm_sq(v: RationalVector) -> Q:
    """Exact squared Euclidean norm: sum of |entry|^2 over all components."""
    total = Q(0)
    for e in v.entries:
        total += e.abs_sq()
    return total


def l1_norm_real(v: RationalVector) -> Q:
    """Exact l1 norm for vectors with purely real entries.

    Complex magnitudes are irrational in general; callers with genuinely
    complex vectors must go through dyadic enclosures instead, so nonzero
    imaginary parts are rejected here.
    """
    total = Q(0)
    for i, e in enumerate(v.entries):
        if e.im != 0:
            raise ValueError(f"entry {i} has nonzero imaginary part {e.im}")
        total += abs(e.re)
    return total


@dataclass(frozen=True)
class RationalMatrix:
    """Dense m-by-n matrix of exact complex rationals, stored row-major."""

    rows: tuple[tuple[ComplexQ, ...], ...]

    def __post_init__(self):
        widths = {len(r) for r in self.rows}
        if len(widths) > 1:
            raise ValueError("ragged matrix rows")

    @staticmethod
    def from_rows(rows: Sequence[Sequence]) -> "RationalMatrix":
        return RationalMatrix(tuple(tuple(_as_complex(e) for e in row) for row in rows))

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def row(self, i: int) -> RationalVector:
        return RationalVector(self.rows[i])

    def entry(self, i: int, j: int) -> ComplexQ:
        return self.rows[i][j]

    def matvec(self, v: RationalVector) -> RationalVector:
        if v.n != self.n:
            raise ValueError(f"matvec dimension mismatch: {self.n} vs {v.n}")
        out = []
        for row in self.rows:
            acc = CZERO
            for a, x in zip(row, v.entries):
                acc = acc + a * x
            out.append(acc)
        return RationalVector(tuple(out))

    def is_real(self) -> bool:
        return all(e.im == 0 for row in self.rows for e in row)

    def frobenius_sq(self) -> Q:
        total = Q(0)
        for row in self.rows:
            for e in row:
                total += e.abs_sq()
        return total


def row_rank(mat: RationalMatrix) -> int:
    """Row rank by exact Gaussian elimination over the complex rationals.

    Float rank tests can misclassify matrices whose rows differ by 2**-n
    perturbations; this one cannot.
    """
    work = [list(row) for row in mat.rows]
    m, n = mat.m, mat.n
    rank = 0
    col = 0
    while rank < m and col < n:
        pivot = None
        for r in range(rank, m):
            if work[r][col].abs_sq() != 0:
                pivot = r
                break
        if pivot is None:
            col += 1
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        p = work[rank][col]
        for r in range(rank + 1, m):
            if work[r][col].abs_sq() == 0:
                continue
            factor = work[r][col] / p
            for c in range(col, n):
                work[r][c] = work[r][c] - factor * work[rank][c]
        rank += 1
        col += 1
    return rank


def operator_norm_sq_upper(mat: RationalMatrix) -> Q:
    """Certified rational upper bound on the squared spectral norm.

    Uses min(Frobenius bound, max-column-sum x max-row-sum bound), both exact
    up to dyadic square-root overestimates of entry magnitudes.  For a single
    row the Frobenius bound is the spectral norm itself, exactly.
    """
    fro = mat.frobenius_sq()
    abs_ub = [[dyadic_sqrt_upper(e.abs_sq()) for e in row] for row in mat.rows]
    row_sums = [sum(r, Q(0)) for r in abs_ub]
    col_sums = [sum(abs_ub[i][j] for i in range(mat.m)) for j in range(mat.n)]
    holder = max(row_sums) * max(col_sums)
    return min(fro, holder)


# --- serialization -----------------------------------------------------------

def complex_to_json(e: ComplexQ) -> dict:
    return {"re": fmt_rational(e.re), "im": fmt_rational(e.im)}


def complex_from_json(obj: dict) -> ComplexQ:
    return ComplexQ(parse_rational(obj["re"]), parse_rational(obj["im"]))


def vector_to_json(v: RationalVector) -> list:
    return [complex_to_json(e) for e in v.entries]


def vector_from_json(items: list) -> RationalVector:
    return RationalVector(tuple(complex_from_json(e) for e in items))


def matrix_to_json(mat: RationalMatrix) -> list:
    return [[complex_to_json(e) for e in row] for row in mat.rows]


def matrix_from_json(rows: list) -> RationalMatrix:
    return RationalMatrix(tuple(tuple(complex_from_json(e) for e in row) for row in rows))
