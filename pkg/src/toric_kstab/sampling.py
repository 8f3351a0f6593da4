"""Random instances for property checks (shared by the self-test and the tests)."""
from __future__ import annotations

import itertools
import random
from fractions import Fraction

from .geometry import GeometryError, HPolytope
from .potentials import PLConcave, PLConvex
from .rational import affine_rank
from .weights import Weight


def random_polytope(rng: random.Random, n: int, spread: int = 3) -> HPolytope:
    """Lattice polytope: hull of a few random integer points (full-dimensional)."""
    if n == 1:
        a = rng.randint(-spread, spread - 1)
        return HPolytope.box([a], [a + rng.randint(1, spread)])
    box = spread if n == 2 else 2
    while True:
        k = rng.randint(n + 1, n + 4)
        pts = {tuple(rng.randint(-box, box) for _ in range(n)) for _ in range(k)}
        if len(pts) > n and affine_rank(list(pts)) == n:
            try:
                return HPolytope.from_vertices(pts)
            except GeometryError:
                continue


def random_rational(rng: random.Random, lo: int = -2, hi: int = 2, dens=(1, 2, 3)) -> Fraction:
    d = rng.choice(dens)
    return Fraction(rng.randint(lo * d, hi * d), d)


def random_concave(rng: random.Random, P: HPolytope, max_pieces: int = 4, slope_range: int = 2) -> PLConcave:
    k = rng.randint(1, max_pieces)
    pieces = [(tuple(rng.randint(-slope_range, slope_range) for _ in range(P.dim)),
               random_rational(rng)) for _ in range(k)]
    return PLConcave(P, pieces)


def random_convex(rng: random.Random, P: HPolytope, max_pieces: int = 4) -> PLConvex:
    k = rng.randint(1, max_pieces)
    pieces = [(tuple(rng.randint(-2, 2) for _ in range(P.dim)), random_rational(rng)) for _ in range(k)]
    return PLConvex(P, pieces)


def random_weight(rng: random.Random, n: int, degree: int = 2, positive: bool = False) -> Weight:
    """Polynomial weight; with ``positive`` it is ``c + sum of squares`` (so ``> 0``)."""
    if positive:
        poly = {(0,) * n: Fraction(rng.randint(1, 4))}
        for i in range(n):
            if degree >= 2 and rng.random() < 0.5:
                e = [0] * n
                e[i] = 2
                poly[tuple(e)] = Fraction(rng.randint(1, 3), 4)
        return Weight(n, poly)
    poly = {}
    for e in itertools.product(range(degree + 1), repeat=n):
        if sum(e) <= degree and rng.random() < 0.6:
            poly[e] = random_rational(rng)
    if not poly:
        poly[(0,) * n] = Fraction(1)
    return Weight(n, poly)
