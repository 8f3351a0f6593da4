"""Exact rational polytopes in half-space form.

A polytope is ``{alpha : <alpha, u_F> >= -c_F for all facets F}`` with
primitive integral normals ``u_F``.  Everything here is exact: vertices are
enumerated with :class:`fractions.Fraction`, volumes and polynomial integrals
come from a pulling triangulation built on the face lattice.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from functools import cached_property
from math import factorial
from typing import Iterable, Sequence

from .rational import (ONE, ZERO, affine_rank, as_rational, det, dot, kernel_vector,
                       primitive, rank, rational_str, rvec, solve)
from .weights import Weight, integrate_simplex

Vector = tuple[Fraction, ...]


class GeometryError(ValueError):
    """Invalid polytope input (unbounded, empty or lower-dimensional)."""


class DegeneratePolytope(GeometryError):
    pass


def normalize_halfspace(normal: Sequence, offset) -> tuple[tuple[int, ...], Fraction]:
    """Rescale ``<alpha, normal> >= -offset`` to a primitive integral normal."""
    u, lam = primitive(normal)
    return u, as_rational(offset) * lam


class HPolytope:
    """Bounded, full-dimensional rational polytope with irredundant facets.

    Use :meth:`from_halfspaces` or :meth:`from_vertices` to build one; the
    raw constructor trusts its arguments.
    """

    def __init__(self, normals, offsets, vertices, tight):
        self.normals: tuple[tuple[int, ...], ...] = tuple(tuple(u) for u in normals)
        self.offsets: tuple[Fraction, ...] = tuple(offsets)
        self.vertices: tuple[Vector, ...] = tuple(vertices)
        self._tight: tuple[frozenset[int], ...] = tuple(tight)
        self.dim = len(self.vertices[0])

    # construction -----------------------------------------------------
    @classmethod
    def from_halfspaces(cls, normals: Iterable[Sequence], offsets: Iterable) -> "HPolytope":
        """Exhaustive vertex enumeration over facet subsets, then pruning."""
        hs = _dedupe([normalize_halfspace(u, c) for u, c in zip(normals, offsets)])
        if not hs:
            raise GeometryError("no half-spaces given")
        n = len(hs[0][0])
        if any(len(u) != n for u, _ in hs):
            raise GeometryError("half-spaces of mixed dimension")
        if rank([u for u, _ in hs]) < n or _has_recession_ray([u for u, _ in hs], n):
            raise GeometryError("half-spaces define an unbounded region")
        verts: dict[Vector, set[int]] = {}
        for idx in itertools.combinations(range(len(hs)), n):
            sol = solve([hs[i][0] for i in idx], [-hs[i][1] for i in idx])
            if sol is None or sol in verts:
                continue
            vals = [dot(u, sol) + c for u, c in hs]
            if all(x >= 0 for x in vals):
                verts[sol] = {i for i, x in enumerate(vals) if x == 0}
        if not verts:
            raise GeometryError("empty polytope")
        return cls._finish(hs, verts)

    @classmethod
    def _finish(cls, hs, verts: dict) -> "HPolytope":
        pts = sorted(verts)
        n = len(pts[0])
        if affine_rank(pts) < n:
            raise DegeneratePolytope("polytope is not full-dimensional")
        keep = []
        for i in range(len(hs)):
            on = [p for p in pts if i in verts[p]]
            if len(on) >= n and affine_rank(on) == n - 1:
                keep.append(i)
        remap = {old: new for new, old in enumerate(keep)}
        tight = [frozenset(remap[i] for i in verts[p] if i in remap) for p in pts]
        return cls([hs[i][0] for i in keep], [hs[i][1] for i in keep], pts, tight)

    @classmethod
    def from_vertices(cls, points: Iterable[Sequence]) -> "HPolytope":
        """Convex hull of a finite rational point set (brute-force facets)."""
        pts = sorted(set(rvec(p) for p in points))
        if not pts:
            raise GeometryError("no points")
        n = len(pts[0])
        if affine_rank(pts) < n:
            raise DegeneratePolytope("points do not span a full-dimensional polytope")
        if n == 1:
            return cls.from_halfspaces([(1,), (-1,)], [-pts[0][0], pts[-1][0]])
        hs = []
        for combo in itertools.combinations(pts, n):
            if affine_rank(list(combo)) != n - 1:
                continue
            rows = [[a - b for a, b in zip(p, combo[0])] for p in combo[1:]]
            normal = kernel_vector(rows, n)
            vals = [dot(normal, p) for p in pts]
            base = dot(normal, combo[0])
            if all(v >= base for v in vals):
                hs.append((normal, -base))
            elif all(v <= base for v in vals):
                hs.append((tuple(-x for x in normal), base))
        return cls.from_halfspaces([u for u, _ in hs], [c for _, c in hs])

    @classmethod
    def box(cls, lo: Sequence, hi: Sequence) -> "HPolytope":
        n = len(lo)
        normals, offsets = [], []
        for i in range(n):
            e = [0] * n
            e[i] = 1
            normals.append(tuple(e))
            offsets.append(-as_rational(lo[i]))
            normals.append(tuple(-x for x in e))
            offsets.append(as_rational(hi[i]))
        return cls.from_halfspaces(normals, offsets)

    # basic queries ----------------------------------------------------
    @property
    def facets(self) -> list[tuple[tuple[int, ...], Fraction]]:
        return list(zip(self.normals, self.offsets))

    @property
    def nfacets(self) -> int:
        return len(self.normals)

    def facet_vertices(self, i: int) -> list[Vector]:
        return [p for p, t in zip(self.vertices, self._tight) if i in t]

    @cached_property
    def _facet_vids(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(j for j, t in enumerate(self._tight) if i in t)
                     for i in range(self.nfacets))

    def contains(self, point: Sequence, strict: bool = False) -> bool:
        point = rvec(point)
        if strict:
            return all(dot(u, point) + c > 0 for u, c in self.facets)
        return all(dot(u, point) + c >= 0 for u, c in self.facets)

    def slack(self, point: Sequence) -> list[Fraction]:
        return [dot(u, point) + c for u, c in self.facets]

    @cached_property
    def centroid_of_vertices(self) -> Vector:
        m = len(self.vertices)
        return tuple(sum(p[i] for p in self.vertices) / m for i in range(self.dim))

    def vertex_facet_incidence(self) -> dict[Vector, frozenset[int]]:
        return dict(zip(self.vertices, self._tight))

    def canonical_key(self):
        return tuple(sorted(zip(self.normals, self.offsets))), self.vertices

    def __eq__(self, other):
        if not isinstance(other, HPolytope):
            return NotImplemented
        return self.canonical_key() == other.canonical_key()

    def __hash__(self):
        return hash(self.canonical_key())

    def __repr__(self):
        fs = ", ".join(f"<a,{list(u)}> >= {rational_str(-c)}" for u, c in self.facets)
        return f"HPolytope(dim={self.dim}, {fs})"

    # faces and triangulation -----------------------------------------
    def _affine_dim(self, vids: frozenset[int]) -> int:
        cache = self.__dict__.setdefault("_adim_cache", {})
        if vids not in cache:
            cache[vids] = affine_rank([self.vertices[i] for i in vids])
        return cache[vids]

    def _subfaces(self, vids: frozenset[int], dim: int) -> set[frozenset[int]]:
        out = set()
        for fv in self._facet_vids:
            s = vids & fv
            if s != vids and len(s) >= dim and self._affine_dim(s) == dim - 1:
                out.add(s)
        return out

    def _triangulate_face(self, vids: frozenset[int], dim: int) -> list[tuple[int, ...]]:
        if dim == 0:
            return [(min(vids),)]
        v0 = min(vids)
        simplices = []
        for sub in sorted(self._subfaces(vids, dim), key=sorted):
            if v0 in sub:
                continue
            for simp in self._triangulate_face(sub, dim - 1):
                simplices.append((v0,) + simp)
        return simplices

    @cached_property
    def triangulation(self) -> list[tuple[Vector, ...]]:
        """Pulling triangulation: full-dimensional simplices covering ``P``."""
        simps = self._triangulate_face(frozenset(range(len(self.vertices))), self.dim)
        return [tuple(self.vertices[i] for i in s) for s in simps]

    def facet_triangulation(self, i: int) -> list[tuple[Vector, ...]]:
        cache = self.__dict__.setdefault("_facet_tri", {})
        if i not in cache:
            simps = self._triangulate_face(self._facet_vids[i], self.dim - 1)
            cache[i] = [tuple(self.vertices[j] for j in s) for s in simps]
        return cache[i]

    # measures ---------------------------------------------------------
    @cached_property
    def volume(self) -> Fraction:
        """Exact Euclidean volume (equal to the lattice-normalized volume)."""
        n = self.dim
        total = ZERO
        for s in self.triangulation:
            total += abs(det([[a - b for a, b in zip(p, s[0])] for p in s[1:]]))
        return total / factorial(n)

    def integrate(self, w: Weight):
        """Lebesgue integral of ``w`` over the polytope."""
        if w.nvars != self.dim:
            raise ValueError("weight dimension does not match polytope")
        parts = [integrate_simplex(w, s) for s in self.triangulation]
        return _sum(parts)

    def facet_integral(self, i: int, w: Weight):
        """``int_F w dsigma`` with the lattice measure of facet ``i``.

        ``dsigma`` is Euclidean area divided by ``|u_F|``; for a primitive
        normal it gives each lattice simplex of the facet its lattice volume.
        """
        return face_integral(self.facet_triangulation(i), self.normals[i], w)

    @cached_property
    def facet_sigma(self) -> tuple[Fraction, ...]:
        one = Weight.constant(self.dim)
        return tuple(self.facet_integral(i, one) for i in range(self.nfacets))

    # linear programming -----------------------------------------------
    def lp_support(self, eta: Sequence):
        """``(max, min, argmax face vertices, argmin face vertices)`` of ``<., eta>``."""
        eta = rvec(eta)
        vals = [dot(p, eta) for p in self.vertices]
        hi, lo = max(vals), min(vals)
        return (hi, lo, [p for p, v in zip(self.vertices, vals) if v == hi],
                [p for p, v in zip(self.vertices, vals) if v == lo])

    def min_linear(self, eta: Sequence) -> Fraction:
        return min(dot(p, eta) for p in self.vertices)

    def max_linear(self, eta: Sequence) -> Fraction:
        return max(dot(p, eta) for p in self.vertices)

    # transformations --------------------------------------------------
    def shifted_offsets(self, deltas: Sequence) -> "HPolytope":
        """Same normals, offsets ``c_F + delta_F``; raises if degenerate."""
        return HPolytope.from_halfspaces(self.normals,
                                         [c + as_rational(d) for c, d in zip(self.offsets, deltas)])

    def transform(self, mat: Sequence[Sequence[int]], shift: Sequence = None) -> "HPolytope":
        """Image under ``alpha -> mat @ alpha + shift`` for unimodular ``mat``."""
        n = self.dim
        from .rational import inverse
        inv = inverse(mat)
        if inv is None or abs(det(mat)) != 1:
            raise GeometryError("transformation is not unimodular")
        shift = rvec(shift) if shift is not None else (ZERO,) * n
        normals, offsets = [], []
        for u, c in self.facets:
            # <alpha, u> >= -c  with alpha = inv @ (beta - shift)
            nu = tuple(sum(u[i] * inv[i][j] for i in range(n)) for j in range(n))
            normals.append(nu)
            offsets.append(c + dot(nu, shift))
        return HPolytope.from_halfspaces(normals, offsets)

    # serialization ----------------------------------------------------
    def to_json(self) -> dict:
        return {"dim": self.dim,
                "facets": [{"normal": list(u), "offset": rational_str(c)} for u, c in self.facets]}

    @classmethod
    def from_json(cls, data) -> "HPolytope":
        unknown = set(data) - {"dim", "facets", "name", "description"}
        if unknown:
            raise GeometryError(f"unknown polytope fields: {sorted(unknown)}")
        facets = data["facets"]
        normals = [f["normal"] for f in facets]
        for u in normals:
            if any(not isinstance(x, int) for x in u):
                raise GeometryError("facet normals must be integers")
        p = cls.from_halfspaces(normals, [as_rational(f["offset"]) for f in facets])
        if "dim" in data and data["dim"] != p.dim:
            raise GeometryError("declared dim does not match facet normals")
        return p


def _sum(parts):
    if any(isinstance(x, float) for x in parts):
        import math
        return math.fsum(float(x) for x in parts)
    return sum(parts, ZERO)


def _dedupe(hs):
    seen = set()
    out = []
    for h in hs:
        if h not in seen:
            seen.add(h)
            out.append(h)
    return out


def _has_recession_ray(normals, n: int) -> bool:
    """True when ``{d : <u, d> >= 0 for all u}`` contains a nonzero vector."""
    if n == 1:
        signs = {u[0] > 0 for u in normals}
        return len(signs) < 2
    for idx in itertools.combinations(range(len(normals)), n - 1):
        d = kernel_vector([normals[i] for i in idx], n)
        if d is None:
            continue
        for cand in (d, tuple(-x for x in d)):
            if all(dot(u, cand) >= 0 for u in normals):
                return True
    return False


def face_integral(simplices, normal: Sequence, w: Weight):
    """Integral of ``w`` over a codimension-one face, measure ``dA / |normal|``.

    ``simplices`` triangulate the face; the face is projected along the
    coordinate where ``normal`` is largest, which turns ``dA/|normal|`` into
    projected Lebesgue measure divided by ``|normal_i|``.
    """
    normal = rvec(normal)
    drop = max(range(len(normal)), key=lambda i: abs(normal[i]))
    scale = ONE / abs(normal[drop])
    if len(normal) == 1:
        return _sum([w(s[0]) * scale if w.is_polynomial else float(w(s[0])) * float(scale)
                     for s in simplices])
    return _sum([integrate_simplex(w, s, drop=drop, scale=scale) for s in simplices])


# ----------------------------------------------------------------------
# intersection by exact clipping

class Empty:
    """The empty intersection result (a value, not an error)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Empty"

    def __bool__(self):
        return False

    @property
    def volume(self):
        return ZERO


EMPTY = Empty()


def clip(P: HPolytope, halfspaces: Iterable[tuple[Sequence, object]]):
    """Intersect ``P`` with half-spaces ``<alpha, u> >= -c``.

    Returns an :class:`HPolytope`, or :data:`EMPTY` when the intersection has
    empty interior.  Vertices are tracked with their tight constraint sets so
    that edges are recognised exactly.
    """
    n = P.dim
    hs = list(P.facets)
    verts: dict[Vector, set[int]] = {p: set(t) for p, t in zip(P.vertices, P._tight)}
    for normal, off in halfspaces:
        normal = rvec(normal)
        if all(x == 0 for x in normal):
            if as_rational(off) >= 0:
                continue
            return EMPTY
        # cheap float screen: a constraint with a clear margin at every vertex is redundant
        fu, fc = [float(x) for x in normal], float(off)
        scale = 1.0 + abs(fc) + sum(abs(x) for x in fu)
        if all(sum(a * float(b) for a, b in zip(fu, p)) + fc > 1e-9 * scale for p in verts):
            continue
        u, c = normalize_halfspace(normal, off)
        if (u, c) in hs:
            continue
        m = len(hs)
        hs.append((u, c))
        vals = {p: dot(u, p) + c for p in verts}
        pos = [p for p, v in vals.items() if v > 0]
        neg = [p for p, v in vals.items() if v < 0]
        if not neg:
            for p, v in vals.items():
                if v == 0:
                    verts[p].add(m)
            continue
        if not pos:
            return EMPTY
        new: dict[Vector, set[int]] = {}
        for p in pos:
            tp = verts[p]
            for q in neg:
                common = tp & verts[q]
                if len(common) < n - 1:
                    continue
                if n > 1 and rank([hs[i][0] for i in common]) != n - 1:
                    continue
                sp, sq = vals[p], vals[q]
                lam = sp / (sp - sq)
                x = tuple(a + lam * (b - a) for a, b in zip(p, q))
                new[x] = set(common) | {m}
        out = {p: verts[p] for p, v in vals.items() if v >= 0}
        for p, v in vals.items():
            if v == 0:
                out[p].add(m)
        out.update(new)
        verts = out
        if len(verts) < n + 1:
            return EMPTY
    if affine_rank(list(verts)) < n:
        return EMPTY
    return HPolytope._finish(hs, verts)


def intersect(P: HPolytope, halfspaces: Iterable[tuple[Sequence, object]]):
    """Public alias of :func:`clip` with ``(covector, offset)`` pairs."""
    return clip(P, halfspaces)


def volume(P) -> Fraction:
    return P.volume if P else ZERO


def facet_sigma(P: HPolytope) -> dict[int, Fraction]:
    return dict(enumerate(P.facet_sigma))


def lp_support(P: HPolytope, eta: Sequence):
    return P.lp_support(eta)
