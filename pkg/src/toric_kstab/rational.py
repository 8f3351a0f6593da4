"""Exact rational helpers: parsing, serialization and small dense linear algebra."""
from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

Rational = Fraction
ZERO = Fraction(0)
ONE = Fraction(1)


def as_rational(x) -> Fraction:
    """Coerce ints, Fractions, floats (exactly) and ``"p/q"`` strings."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, (int, float)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot interpret {x!r} as a rational")


def rvec(xs: Iterable) -> tuple[Fraction, ...]:
    return tuple(as_rational(x) for x in xs)


def rational_str(q: Fraction) -> str:
    q = as_rational(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def dot(a: Sequence, b: Sequence):
    return sum((x * y for x, y in zip(a, b)), ZERO)


def lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


def primitive(vec: Sequence) -> tuple[tuple[int, ...], Fraction]:
    """Return ``(u, lam)`` with ``u = lam * vec`` integral and primitive, ``lam > 0``."""
    vec = rvec(vec)
    if all(x == 0 for x in vec):
        raise ValueError("zero vector has no primitive representative")
    den = 1
    for x in vec:
        den = lcm(den, x.denominator)
    ints = [int(x * den) for x in vec]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    u = tuple(x // g for x in ints)
    return u, Fraction(den, g)


def denominator_lcm(vec: Iterable[Fraction]) -> int:
    den = 1
    for x in vec:
        den = lcm(den, as_rational(x).denominator)
    return den


def solve(a: Sequence[Sequence], b: Sequence) -> tuple[Fraction, ...] | None:
    """Solve a square system exactly; ``None`` when singular."""
    n = len(a)
    m = [[as_rational(x) for x in row] + [as_rational(y)] for row, y in zip(a, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        row = m[col]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col] / p
                mr = m[r]
                for k in range(col, n + 1):
                    mr[k] -= f * row[k]
    return tuple(m[i][n] / m[i][i] for i in range(n))


def rank(rows: Sequence[Sequence]) -> int:
    m = [[as_rational(x) for x in row] for row in rows]
    if not m:
        return 0
    ncol = len(m[0])
    r = 0
    for col in range(ncol):
        piv = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        for i in range(r + 1, len(m)):
            if m[i][col] != 0:
                f = m[i][col] / m[r][col]
                for k in range(col, ncol):
                    m[i][k] -= f * m[r][k]
        r += 1
        if r == len(m):
            break
    return r


def affine_rank(points: Sequence[Sequence]) -> int:
    """Dimension of the affine span (``-1`` for the empty set)."""
    if not points:
        return -1
    p0 = points[0]
    return rank([[x - y for x, y in zip(p, p0)] for p in points[1:]])


def det(a: Sequence[Sequence]) -> Fraction:
    n = len(a)
    if n == 0:
        return ONE
    m = [[as_rational(x) for x in row] for row in a]
    sign = 1
    out = ONE
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return ZERO
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            sign = -sign
        p = m[col][col]
        out *= p
        for r in range(col + 1, n):
            if m[r][col] != 0:
                f = m[r][col] / p
                for k in range(col, n):
                    m[r][k] -= f * m[col][k]
    return out * sign


def kernel_vector(rows: Sequence[Sequence], n: int) -> tuple[Fraction, ...] | None:
    """A nonzero vector in the kernel of ``rows`` when it is one-dimensional."""
    m = [[as_rational(x) for x in row] for row in rows]
    pivots = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][col]
        m[r] = [x / p for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    if len(free) != 1:
        return None
    f = free[0]
    vec = [ZERO] * n
    vec[f] = ONE
    for i, c in enumerate(pivots):
        vec[c] = -m[i][f]
    return tuple(vec)


def inverse(a: Sequence[Sequence]) -> list[list[Fraction]] | None:
    n = len(a)
    cols = []
    for j in range(n):
        e = [ONE if i == j else ZERO for i in range(n)]
        x = solve(a, e)
        if x is None:
            return None
        cols.append(x)
    return [[cols[j][i] for j in range(n)] for i in range(n)]
