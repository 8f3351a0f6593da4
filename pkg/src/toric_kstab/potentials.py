"""Piecewise-linear potentials in the toric dictionary.

A concave PL function ``g = min_k (<alpha, xi_k> + c_k)`` on the moment
polytope encodes a toric test configuration.  Its value at the monomial
valuation ``v_xi`` is read off the convex transform

    G_g(eta) = max_{alpha in P} (g(alpha) - <alpha, eta>),

normalized so that ``g = 0`` is the trivial metric:
``phi_g(v_xi) = G_g(xi) - G_0(xi)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .geometry import EMPTY, GeometryError, HPolytope, clip
from .rational import (ONE, ZERO, affine_rank, as_rational, denominator_lcm, dot,
                       rational_str, rvec, solve)

Vector = tuple[Fraction, ...]
Piece = tuple[Vector, Fraction]


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    """Maximal domain of linearity of a PL function.

    ``multiplicity`` is the smallest ``b`` with ``b * slope`` integral, the
    multiplicity of the corresponding central-fiber component.
    """

    polytope: HPolytope
    slope: Vector
    const: Fraction

    @property
    def multiplicity(self) -> int:
        return denominator_lcm(self.slope)

    def value(self, alpha: Sequence) -> Fraction:
        return dot(self.slope, alpha) + self.const


def _piece(slope, const) -> Piece:
    return rvec(slope), as_rational(const)


def _order_halfspaces(fverts, hs):
    """Drop half-spaces that clearly contain ``P``; most violated ones first.

    The float screen only ever drops constraints with a comfortable margin at
    every vertex, so the exact clip that follows is unaffected; the ordering
    shrinks the polytope early and keeps later clips cheap.
    """
    keyed = []
    for u, c in hs:
        fu, fc = [float(x) for x in u], float(c)
        scale = 1.0 + abs(fc) + sum(abs(x) for x in fu)
        low = min(sum(a * b for a, b in zip(fu, p)) + fc for p in fverts)
        if low > 1e-9 * scale:
            continue
        keyed.append((low / scale, len(keyed), (u, c)))
    keyed.sort()
    return [h for _, _, h in keyed]


def _cells_of(P: HPolytope, pieces: Sequence[Piece], maximize: bool = False) -> list[Cell]:
    """Full-dimensional domains where each piece attains the min (or max)."""
    sign = -1 if maximize else 1
    cells = []
    fverts = [[float(x) for x in p] for p in P.vertices]
    for k, (xk, ck) in enumerate(pieces):
        hs = []
        dead = False
        for j, (xj, cj) in enumerate(pieces):
            if j == k:
                continue
            u = tuple(sign * (a - b) for a, b in zip(xj, xk))
            c = sign * (cj - ck)
            if all(x == 0 for x in u):
                if c < 0:
                    dead = True
                    break
                continue
            hs.append((u, c))
        if dead:
            continue
        Q = clip(P, _order_halfspaces(fverts, hs))
        if Q is not EMPTY:
            cells.append(Cell(Q, xk, ck))
    return cells


class PLConcave:
    """``g(alpha) = min_k (<alpha, slope_k> + const_k)`` on the carrier ``P``.

    Pieces are normalized on construction: duplicates and pieces that are
    not minimal on a full-dimensional region are dropped, and the remaining
    ones are sorted lexicographically.
    """

    def __init__(self, P: HPolytope, pieces: Iterable[tuple[Sequence, object]]):
        raw = sorted(set(_piece(s, c) for s, c in pieces))
        if not raw:
            raise PotentialError("a PL function needs at least one piece")
        if any(len(s) != P.dim for s, _ in raw):
            raise PotentialError("piece slope has wrong dimension")
        self.polytope = P
        if len(raw) == 1:
            self._cells = [Cell(P, raw[0][0], raw[0][1])]
        else:
            self._cells = _cells_of(P, raw)
        self.pieces: tuple[Piece, ...] = tuple((c.slope, c.const) for c in self._cells)

    @classmethod
    def zero(cls, P: HPolytope) -> "PLConcave":
        return cls(P, [((0,) * P.dim, 0)])

    @classmethod
    def linear(cls, P: HPolytope, xi: Sequence, const=0) -> "PLConcave":
        return cls(P, [(xi, const)])

    @property
    def dim(self) -> int:
        return self.polytope.dim

    def __call__(self, alpha: Sequence) -> Fraction:
        alpha = rvec(alpha)
        return min(dot(s, alpha) + c for s, c in self.pieces)

    def cells(self) -> list[Cell]:
        return list(self._cells)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PLConcave):
            return NotImplemented
        return self.polytope == other.polytope and self.pieces == other.pieces

    def __hash__(self):
        return hash(self.pieces)

    def __repr__(self):
        ps = ", ".join(f"<a,{[rational_str(x) for x in s]}>+{rational_str(c)}" for s, c in self.pieces)
        return f"PLConcave(min({ps}))"

    def __add__(self, const) -> "PLConcave":
        const = as_rational(const)
        return PLConcave(self.polytope, [(s, c + const) for s, c in self.pieces])

    @cached_property
    def vertex_values(self) -> dict[Vector, Fraction]:
        """Values at all vertices of the cell subdivision."""
        out = {}
        for cell in self._cells:
            for w in cell.polytope.vertices:
                if w not in out:
                    out[w] = cell.value(w)
        return out

    @cached_property
    def maximum(self) -> Fraction:
        return max(self.vertex_values.values())

    @cached_property
    def transform(self) -> "GTransform":
        return g_transform(self)

    def to_json(self) -> dict:
        return {"pieces": [{"slope": [rational_str(x) for x in s], "const": rational_str(c)}
                           for s, c in self.pieces]}

    @classmethod
    def from_json(cls, P: HPolytope, data) -> "PLConcave":
        unknown = set(data) - {"pieces", "combine", "name", "description"}
        if unknown:
            raise PotentialError(f"unknown PL fields: {sorted(unknown)}")
        if data.get("combine", "min") != "min":
            raise PotentialError("concave PL data must use combine='min'")
        return cls(P, [(p["slope"], p["const"]) for p in data["pieces"]])


class PLConvex:
    """``f(alpha) = max_k (<alpha, slope_k> + const_k)``: input to envelopes."""

    def __init__(self, P: HPolytope, pieces: Iterable[tuple[Sequence, object]]):
        raw = sorted(set(_piece(s, c) for s, c in pieces))
        if not raw:
            raise PotentialError("a PL function needs at least one piece")
        self.polytope = P
        if len(raw) == 1:
            self._cells = [Cell(P, raw[0][0], raw[0][1])]
        else:
            self._cells = _cells_of(P, raw, maximize=True)
        self.pieces: tuple[Piece, ...] = tuple((c.slope, c.const) for c in self._cells)

    def __call__(self, alpha: Sequence) -> Fraction:
        alpha = rvec(alpha)
        return max(dot(s, alpha) + c for s, c in self.pieces)

    def cells(self) -> list[Cell]:
        return list(self._cells)

    def vertex_values(self) -> dict[Vector, Fraction]:
        out = {}
        for cell in self._cells:
            for w in cell.polytope.vertices:
                out.setdefault(w, cell.value(w))
        return out

    def to_json(self) -> dict:
        return {"combine": "max",
                "pieces": [{"slope": [rational_str(x) for x in s], "const": rational_str(c)}
                           for s, c in self.pieces]}

    @classmethod
    def from_json(cls, P: HPolytope, data) -> "PLConvex":
        if data.get("combine") != "max":
            raise PotentialError("convex PL data must use combine='max'")
        return cls(P, [(p["slope"], p["const"]) for p in data["pieces"]])


class GTransform:
    """Convex PL function ``G(eta) = max_j (b_j - <alpha_j, eta>)``."""

    def __init__(self, pieces: Iterable[tuple[Sequence, object]]):
        best: dict[Vector, Fraction] = {}
        for a, b in pieces:
            a, b = rvec(a), as_rational(b)
            if a not in best or b > best[a]:
                best[a] = b
        self.pieces: tuple[tuple[Vector, Fraction], ...] = tuple(sorted(best.items()))

    def __call__(self, eta: Sequence) -> Fraction:
        eta = rvec(eta)
        return max(b - dot(a, eta) for a, b in self.pieces)

    def __eq__(self, other):
        return isinstance(other, GTransform) and self.pieces == other.pieces

    def __repr__(self):
        ps = ", ".join(f"{rational_str(b)}-<{[rational_str(x) for x in a]},eta>" for a, b in self.pieces)
        return f"GTransform(max({ps}))"

    def combine(self, other: "GTransform", s) -> "GTransform":
        """Pointwise ``s * self + (1 - s) * other``."""
        s = as_rational(s)
        t = ONE - s
        return GTransform((tuple(s * x + t * y for x, y in zip(a1, a0)), s * b1 + t * b0)
                          for a1, b1 in self.pieces for a0, b0 in other.pieces)


# ----------------------------------------------------------------------

def g_transform(g: PLConcave) -> GTransform:
    """``G(eta) = max over subdivision vertices w of g(w) - <w, eta>``."""
    return GTransform(g.vertex_values.items())


def _upper_hull_exact(points: list[tuple[Vector, Fraction]], n: int) -> list[Piece]:
    """All affine functions through ``n+1`` lifted points lying above every point."""
    out = set()
    for combo in itertools.combinations(points, n + 1):
        pts = [a for a, _ in combo]
        if affine_rank(pts) != n:
            continue
        # b = <a, xi> + c
        sol = solve([list(a) + [ONE] for a in pts], [b for _, b in combo])
        xi, c = sol[:n], sol[n]
        if all(dot(xi, a) + c >= b for a, b in points):
            out.add((tuple(xi), c))
    return sorted(out)


def _upper_hull_1d(points: list[tuple[Vector, Fraction]]) -> list[Piece]:
    pts = sorted((a[0], b) for a, b in points)
    hull: list[tuple[Fraction, Fraction]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop hull[-1] if it lies on or below the chord hull[-2] -> p
            if (y2 - y1) * (p[0] - x1) <= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    pieces = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        slope = (y2 - y1) / (x2 - x1)
        pieces.append(((slope,), y1 - slope * x1))
    return pieces


def _upper_hull_qhull(points: list[tuple[Vector, Fraction]], n: int) -> list[Piece]:
    from scipy.spatial import ConvexHull
    arr = np.array([[float(x) for x in a] + [float(b)] for a, b in points])
    span = np.ptp(arr[:, :n], axis=0).max() or 1.0
    hull = ConvexHull(arr)
    out = set()
    for simplex, eq in zip(hull.simplices, hull.equations):
        if eq[n] <= 1e-9 * span:
            continue
        combo = [points[i] for i in simplex]
        pts = [a for a, _ in combo]
        if affine_rank(pts) != n:
            continue
        sol = solve([list(a) + [ONE] for a in pts], [b for _, b in combo])
        if sol is None:
            continue
        piece = (tuple(sol[:n]), sol[n])
        if piece in out:
            continue
        if all(dot(piece[0], a) + piece[1] >= b for a, b in points):
            out.add(piece)
    return sorted(out)


def concave_hull(P: HPolytope, points: Iterable[tuple[Sequence, object]]) -> PLConcave:
    """Smallest concave function on ``P`` with ``g(alpha_j) >= b_j``.

    The points must include every vertex of ``P``.  Candidate facets come
    from qhull and are then certified exactly; on failure an exhaustive
    exact search is used.
    """
    best: dict[Vector, Fraction] = {}
    for a, b in points:
        a, b = rvec(a), as_rational(b)
        if a not in best or b > best[a]:
            best[a] = b
    missing = [w for w in P.vertices if w not in best]
    if missing:
        raise PotentialError(f"carrier vertices {missing} are not covered; gradients must fill -P")
    for a in best:
        if not P.contains(a):
            raise PotentialError(f"gradient {a} lies outside -P")
    pts = sorted(best.items())
    n = P.dim
    lifted = [list(a) + [b] for a, b in pts]
    if affine_rank(lifted) <= n:
        sol = solve([list(a) + [ONE] for a, _ in _spanning(pts, n)],
                    [b for _, b in _spanning(pts, n)])
        return PLConcave(P, [(sol[:n], sol[n])])
    if n == 1:
        return PLConcave(P, _upper_hull_1d(pts))
    try:
        cand = _upper_hull_qhull(pts, n)
    except Exception:
        cand = []
    if cand:
        g = PLConcave(P, cand)
        if _certify_hull(g, best):
            return g
    g = PLConcave(P, _upper_hull_exact(pts, n))
    if not _certify_hull(g, best):
        raise PotentialError("concave hull certification failed")
    return g


def _spanning(pts, n):
    chosen = [pts[0]]
    for p in pts[1:]:
        if affine_rank([a for a, _ in chosen] + [p[0]]) == len(chosen):
            chosen.append(p)
        if len(chosen) == n + 1:
            break
    return chosen


def _certify_hull(g: PLConcave, lifted: dict[Vector, Fraction]) -> bool:
    """Every cell vertex must be a lifted point lying on the graph."""
    if any(g(a) < b for a, b in lifted.items()):
        return False
    for w, val in g.vertex_values.items():
        if lifted.get(w) != val:
            return False
    return True


def inv_g_transform(G: GTransform, P: HPolytope) -> PLConcave:
    """Concave conjugate ``g(alpha) = inf_eta (G(eta) + <alpha, eta>)`` on ``P``."""
    return concave_hull(P, G.pieces)


def zero_transform(P: HPolytope) -> GTransform:
    return GTransform((w, ZERO) for w in P.vertices)


def support_offset(P: HPolytope, xi: Sequence) -> Fraction:
    """``G_0(xi) = -min_P <., xi>``."""
    return -P.min_linear(rvec(xi))


def evaluate_potential(g: PLConcave, xi: Sequence) -> Fraction:
    """``phi_g(v_xi) = G_g(xi) - G_0(xi)``."""
    xi = rvec(xi)
    return g.transform(xi) - support_offset(g.polytope, xi)


def evaluate_convex(f: PLConvex, xi: Sequence) -> Fraction:
    """Same evaluation for max-form data: ``sup_P (f - <., xi>) - G_0(xi)``."""
    xi = rvec(xi)
    P = f.polytope
    top = max(c + P.max_linear(tuple(a - b for a, b in zip(s, xi))) for s, c in f.pieces)
    return top - support_offset(P, xi)


def subdivision(g: PLConcave) -> list[Cell]:
    return g.cells()


def linear_path(g0: PLConcave, g1: PLConcave, s) -> PLConcave:
    """PL function whose potential is ``s * phi_{g1} + (1 - s) * phi_{g0}``."""
    s = as_rational(s)
    if g0.polytope != g1.polytope:
        raise PotentialError("linear path needs a shared carrier")
    if s == 0:
        return g0
    if s == 1:
        return g1
    return inv_g_transform(g1.transform.combine(g0.transform, s), g0.polytope)


class LinearPath:
    """Precomputed linear path ``s -> linear_path(g0, g1, s)`` for ``0 < s < 1``.

    On the open interval the slopes of the path are fixed (they are the
    vertices of the common refinement of the two transforms' linearity
    complexes); only the constants move, linearly in ``s``.
    """

    def __init__(self, g0: PLConcave, g1: PLConcave):
        if g0.polytope != g1.polytope:
            raise PotentialError("linear path needs a shared carrier")
        self.g0, self.g1 = g0, g1
        mid = linear_path(g0, g1, Fraction(1, 2))
        self.slopes: tuple[Vector, ...] = tuple(s for s, _ in mid.pieces)
        G0, G1 = g0.transform, g1.transform
        self._ends = [(G1(s), G0(s)) for s in self.slopes]

    def at(self, s) -> PLConcave:
        s = as_rational(s)
        if s == 0:
            return self.g0
        if s == 1:
            return self.g1
        if not 0 < s < 1:
            raise ValueError("path parameter outside [0, 1]")
        t = ONE - s
        return PLConcave(self.g0.polytope,
                         [(xi, s * a + t * b) for xi, (a, b) in zip(self.slopes, self._ends)])


def scale_action(g: PLConcave, c) -> PLConcave:
    """Pointwise ``c * g``; realises ``phi -> c * phi(c^{-1} .)`` on potentials."""
    c = as_rational(c)
    if c <= 0:
        raise ValueError("scaling factor must be positive")
    return PLConcave(g.polytope, [(tuple(c * x for x in s), c * k) for s, k in g.pieces])


@dataclass
class Envelope:
    """Concave envelope of max-form data with its contact locus."""

    envelope: PLConcave
    contact_points: list[Vector]
    contact_cells: list[int]


def concave_envelope(f: PLConvex) -> Envelope:
    """Smallest concave PL majorant of ``f`` on ``P`` (upper hull of its graph)."""
    P = f.polytope
    vals = f.vertex_values()
    for w in P.vertices:
        vals.setdefault(w, f(w))
    env = concave_hull(P, vals.items())
    contact_pts = sorted(w for w, val in env.vertex_values.items() if f(w) == val)
    cells = []
    for k, cell in enumerate(env.cells()):
        cen = cell.polytope.centroid_of_vertices
        if f(cen) == cell.value(cen):
            cells.append(k)
    return Envelope(env, contact_pts, cells)
