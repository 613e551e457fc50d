"""Exact rational helpers.

All geometry in the package runs on ``gmpy2.mpq``.  Irrational quantities
(square roots, logarithms) only ever appear through one-sided rational
bounds computed here.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational as _Rational

import gmpy2
from gmpy2 import mpq

DEFAULT_PRECISION_BITS = 80

ZERO = mpq(0)
ONE = mpq(1)


def Q(value) -> mpq:
    """Convert ints, floats, Fractions, mpq and ``"num/den"`` strings to mpq.

    Floats convert exactly (a binary float is a dyadic rational).
    """
    if isinstance(value, type(ZERO)):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, Fraction)):
        return mpq(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return mpq(value)
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            num, den = text.split("/", 1)
            if int(den) == 0:
                raise ZeroDivisionError(f"zero denominator in {value!r}")
            return mpq(int(num), int(den))
        try:
            return mpq(int(text))
        except ValueError:
            return mpq(Fraction(text))
    if isinstance(value, _Rational):
        return mpq(value.numerator, value.denominator)
    if type(value).__name__ == "mpz":
        return mpq(value)
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def fmt(value: mpq) -> str:
    """Serialize as ``num/den`` (integers without a slash)."""
    value = Q(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def sqrt_lower(x, bits: int = DEFAULT_PRECISION_BITS) -> mpq:
    """Largest multiple of 2**-bits not exceeding sqrt(x)."""
    x = Q(x)
    if x < 0:
        raise ValueError("sqrt of a negative number")
    if x == 0:
        return ZERO
    scale = 1 << (2 * bits)
    # floor(sqrt(floor(x * 4**bits))) / 2**bits <= sqrt(x)
    n = gmpy2.isqrt(x.numerator * scale // x.denominator)
    return mpq(int(n), 1 << bits)


def sqrt_upper(x, bits: int = DEFAULT_PRECISION_BITS) -> mpq:
    """Smallest multiple of 2**-bits not below sqrt(x)."""
    x = Q(x)
    if x < 0:
        raise ValueError("sqrt of a negative number")
    if x == 0:
        return ZERO
    lo = sqrt_lower(x, bits)
    if lo * lo == x:
        return lo
    return lo + mpq(1, 1 << bits)


def norm2(v) -> mpq:
    return sum((c * c for c in v), ZERO)


def sub(u, v) -> tuple:
    return tuple(a - b for a, b in zip(u, v))


def add(u, v) -> tuple:
    return tuple(a + b for a, b in zip(u, v))


def scale(s, v) -> tuple:
    return tuple(s * a for a in v)


def dot(u, v) -> mpq:
    return sum((a * b for a, b in zip(u, v)), ZERO)


def matvec(m, v) -> tuple:
    return tuple(dot(row, v) for row in m)


def matmul(a, b) -> tuple:
    cols = list(zip(*b))
    return tuple(tuple(dot(row, col) for col in cols) for row in a)


def identity(d: int) -> tuple:
    return tuple(tuple(ONE if i == j else ZERO for j in range(d)) for i in range(d))


def dist_lower(u, v, bits: int = DEFAULT_PRECISION_BITS) -> mpq:
    if len(u) == 1:
        return abs(u[0] - v[0])
    return sqrt_lower(norm2(sub(u, v)), bits)


def dist_upper(u, v, bits: int = DEFAULT_PRECISION_BITS) -> mpq:
    if len(u) == 1:
        return abs(u[0] - v[0])
    return sqrt_upper(norm2(sub(u, v)), bits)


def floor_log_ratio(p0, p1, n: int) -> int:
    """Largest k with p1**k >= p0**n for 0 < p0 < p1 < 1, by integer comparison."""
    p0, p1 = Q(p0), Q(p1)
    target = p0**n
    # p1**k decreases in k; bracket then bisect
    hi = 1
    while p1**hi >= target:
        hi *= 2
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if p1**mid >= target:
            lo = mid
        else:
            hi = mid
    return lo
