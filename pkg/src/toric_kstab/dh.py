"""Duistermaat-Heckman measures of toric polarizations.

Convention: the DH measure of the full torus is ``n! * Lebesgue`` on ``P``,
so its total mass is the degree ``(L^n)`` rather than ``vol(P)``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Mapping, Sequence

import numpy as np

from .geometry import EMPTY, HPolytope, clip
from .rational import ONE, ZERO, as_rational, det, dot, inverse, rvec, solve
from .weights import Weight


class WeightPositivityWarning(UserWarning):
    pass


def _scale(x, c):
    return float(x) * float(c) if isinstance(x, float) else x * c


def integrate_weight(P: HPolytope, v: Weight):
    """``deg_v(L) = n! * int_P v``."""
    return _scale(P.integrate(v), factorial(P.dim))


def degree(P: HPolytope) -> Fraction:
    return factorial(P.dim) * P.volume


def facet_weight_integrals(P: HPolytope, v: Weight) -> list:
    return [P.facet_integral(i, v) for i in range(P.nfacets)]


def degree_derivative(P: HPolytope, v: Weight, displacement=None):
    """``-n! * sum_F d_F int_F v dsigma``.

    ``displacement`` maps facet index to ``d_F`` (default all ones, which is the
    derivative in the canonical direction ``K_X``).
    """
    n = P.dim
    if displacement is None:
        displacement = {i: ONE for i in range(P.nfacets)}
    elif not isinstance(displacement, Mapping):
        displacement = dict(enumerate(displacement))
    parts = []
    for i, d in displacement.items():
        d = as_rational(d)
        if d:
            parts.append(_scale(P.facet_integral(i, v), -d * factorial(n)))
    if any(isinstance(x, float) for x in parts):
        return math.fsum(float(x) for x in parts)
    return sum(parts, ZERO)


@dataclass
class PositivityCertificate:
    """Sampled evidence that a weight is positive on ``P`` (not a proof)."""

    min_value: float
    n_samples: int
    positive: bool


def certify_positive(P: HPolytope, v: Weight, grid: int = 10, warn: bool = True) -> PositivityCertificate:
    pts = [tuple(float(x) for x in p) for p in P.vertices]
    lo = [min(float(p[i]) for p in P.vertices) for i in range(P.dim)]
    hi = [max(float(p[i]) for p in P.vertices) for i in range(P.dim)]
    axes = [np.linspace(a, b, grid) for a, b in zip(lo, hi)]
    normals = np.array(P.normals, dtype=float)
    offs = np.array([float(c) for c in P.offsets])
    for combo in itertools.product(*axes):
        x = np.array(combo)
        if np.all(normals @ x + offs >= -1e-12):
            pts.append(tuple(combo))
    vals = v.evaluate_many(np.array(pts))
    mn = float(vals.min())
    cert = PositivityCertificate(mn, len(pts), mn > 0)
    if warn and not cert.positive:
        warnings.warn(f"weight is not positive on P (sampled min {mn:.3g})",
                      WeightPositivityWarning, stacklevel=2)
    return cert


# ----------------------------------------------------------------------
# pushforward along lattice projections

def _hermite_completion(A: Sequence[Sequence[int]]) -> list[list[int]]:
    """Unimodular ``U`` whose first rows are ``A`` (``A`` must be surjective)."""
    k = len(A)
    n = len(A[0])
    # column operations V with A V = [H | 0]
    M = [list(map(int, row)) for row in A]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def colop(j1, j2, q):  # col j2 -= q * col j1
        for r in M:
            r[j2] -= q * r[j1]
        for r in V:
            r[j2] -= q * r[j1]

    def swap(j1, j2):
        for r in M:
            r[j1], r[j2] = r[j2], r[j1]
        for r in V:
            r[j1], r[j2] = r[j2], r[j1]

    for i in range(k):
        while True:
            nz = [j for j in range(i, n) if M[i][j] != 0]
            if not nz:
                raise ValueError("projection is not of full rank")
            jmin = min(nz, key=lambda j: abs(M[i][j]))
            swap(i, jmin)
            done = True
            for j in range(i + 1, n):
                if M[i][j]:
                    colop(i, j, M[i][j] // M[i][i])
                    if M[i][j]:
                        done = False
            if done:
                break
    H = [row[:k] for row in M]
    if abs(det(H)) != 1:
        raise ValueError("projection is not surjective onto the target lattice")
    W = inverse(V)
    Hfull = [[(H[i][j] if i < k and j < k else int(i == j)) for j in range(n)] for i in range(n)]
    U = [[sum(Hfull[i][t] * W[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
    return [[int(x) for x in row] for row in U]


@dataclass
class DHMeasure:
    """Piecewise-polynomial measure on a projected polytope.

    ``chambers`` is a list of ``(HPolytope, density)`` with the density a
    polynomial :class:`Weight`; for a projection to a point ``atom`` holds
    the total mass instead.
    """

    dim: int
    chambers: list = field(default_factory=list)
    atom: Fraction | None = None

    @property
    def total_mass(self):
        if self.dim == 0:
            return self.atom
        return sum((Q.integrate(d) for Q, d in self.chambers), ZERO)

    def integrate(self, w: Weight):
        if self.dim == 0:
            return self.atom * w(())
        return sum((Q.integrate(d * w) for Q, d in self.chambers), ZERO)

    def density_at(self, y: Sequence):
        y = rvec(y)
        for Q, d in self.chambers:
            if Q.contains(y):
                return d(y)
        return ZERO


def _fiber_volume(PU: HPolytope, k: int, y: Sequence) -> Fraction:
    """Lebesgue volume of ``{beta in PU : beta[:k] = y}`` in the last coordinates."""
    n = PU.dim
    m = n - k
    normals, offsets = [], []
    for u, c in PU.facets:
        tail = u[k:]
        const = c + sum((u[i] * y[i] for i in range(k)), ZERO)
        if all(x == 0 for x in tail):
            if const < 0:
                return ZERO
            continue
        normals.append(tail)
        offsets.append(const)
    if m == 0:
        return ONE
    try:
        Q = HPolytope.from_halfspaces(normals, offsets)
    except ValueError:
        return ZERO
    return Q.volume


def _principal_lattice(simplex: Sequence[Sequence[Fraction]], d: int):
    k = len(simplex) - 1
    pts = []
    for comp in itertools.product(range(d + 1), repeat=k):
        if sum(comp) > d:
            continue
        bary = [Fraction(c, d) for c in comp]
        b0 = ONE - sum(bary, ZERO)
        pts.append(tuple(b0 * simplex[0][i] + sum((b * simplex[j + 1][i] for j, b in enumerate(bary)), ZERO)
                         for i in range(k)))
    return pts


def pushforward(P: HPolytope, proj: Sequence[Sequence[int]]) -> DHMeasure:
    """Pushforward of ``DH = n! * Lebesgue`` under an integral surjection ``M -> M'``.

    The image is cut into chambers by the projected codimension-one faces;
    on each chamber the fiber volume is a polynomial of degree ``n - k``,
    recovered exactly by interpolation on a principal lattice.
    """
    n = P.dim
    proj = [list(map(int, row)) for row in proj]
    k = len(proj)
    if k == 0:
        return DHMeasure(0, atom=factorial(n) * P.volume)
    if any(len(r) != n for r in proj):
        raise ValueError("projection has wrong number of columns")
    U = _hermite_completion(proj)
    PU = P.transform(U)
    nf = factorial(n)
    image_pts = [tuple(dot(row, p) for row in proj) for p in P.vertices]
    image = HPolytope.from_vertices(image_pts)
    if k == n:
        return DHMeasure(k, [(image, Weight.constant(k, nf))])
    # walls: affine hulls of projected (k-1)-faces spanned by vertex subsets
    walls = set()
    pts = sorted(set(image_pts))
    from .rational import affine_rank, kernel_vector, primitive
    for combo in itertools.combinations(pts, k):
        if k > 1 and affine_rank(list(combo)) != k - 1:
            continue
        if k == 1:
            walls.add(((1,), -combo[0][0]))
            continue
        rows = [[a - b for a, b in zip(p, combo[0])] for p in combo[1:]]
        normal = kernel_vector(rows, k)
        u, lam = primitive(normal)
        walls.add((u, -dot(u, combo[0])))
    chambers = [image]
    for u, c in sorted(walls):
        nxt = []
        for Q in chambers:
            for sgn in (1, -1):
                part = clip(Q, [(tuple(sgn * x for x in u), sgn * c)])
                if part is not EMPTY:
                    nxt.append(part)
        chambers = nxt
    out = []
    deg = n - k
    exps = [e for e in itertools.product(range(deg + 1), repeat=k) if sum(e) <= deg]
    for Q in chambers:
        verts = list(Q.vertices)
        simplex = [verts[0]]
        for v in verts[1:]:
            from .rational import affine_rank as ar
            if ar(simplex + [v]) == len(simplex):
                simplex.append(v)
            if len(simplex) == k + 1:
                break
        cen = tuple(sum(p[i] for p in simplex) / (k + 1) for i in range(k))
        shrunk = [tuple((a + b) / 2 for a, b in zip(p, cen)) for p in simplex]
        nodes = _principal_lattice(shrunk, max(deg, 1))
        rows = [[math.prod(y[i] ** e[i] for i in range(k)) for e in exps] for y in nodes]
        vals = [_fiber_volume(PU, k, y) * nf for y in nodes]
        coeffs = _least_squares_exact(rows, vals)
        out.append((Q, Weight(k, dict(zip(exps, coeffs)))))
    return DHMeasure(k, out)


def _least_squares_exact(rows, vals):
    """Solve the (possibly overdetermined, consistent) system exactly."""
    # normal equations keep everything rational
    m = len(rows[0])
    ata = [[sum((r[i] * r[j] for r in rows), ZERO) for j in range(m)] for i in range(m)]
    atb = [sum((r[i] * v for r, v in zip(rows, vals)), ZERO) for i in range(m)]
    sol = solve(ata, atb)
    if sol is None:
        raise ArithmeticError("interpolation nodes are not unisolvent")
    return sol
