"""Normal fan, log discrepancies and the canonical deformation ``P -> P_s``."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .geometry import GeometryError, HPolytope
from .rational import ZERO, as_rational, det, dot, rank, rvec, solve


class CombinatorialCollapse(GeometryError):
    """``P_s`` changed combinatorial type or degenerated."""


class SingularToricWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FanData:
    """Inner normal fan of a polytope.

    ``cones`` maps each vertex index to the facet indices whose rays span the
    maximal cone dual to that vertex.
    """

    rays: tuple[tuple[int, ...], ...]
    cones: tuple[frozenset[int], ...]
    polytope: HPolytope

    @classmethod
    def from_polytope(cls, P: HPolytope) -> "FanData":
        return cls(P.normals, tuple(P._tight), P)

    @property
    def dim(self) -> int:
        return self.polytope.dim

    def cone_is_smooth(self, k: int) -> bool:
        rays = [self.rays[i] for i in sorted(self.cones[k])]
        return len(rays) == self.dim and abs(det(rays)) == 1

    @property
    def is_smooth(self) -> bool:
        return all(self.cone_is_smooth(k) for k in range(len(self.cones)))

    def singular_cones(self) -> list[int]:
        return [k for k in range(len(self.cones)) if not self.cone_is_smooth(k)]

    def containing_cone(self, xi: Sequence) -> int:
        """Index of a maximal cone containing ``xi`` (a vertex minimizing ``<., xi>``)."""
        xi = rvec(xi)
        P = self.polytope
        vals = [dot(p, xi) for p in P.vertices]
        lo = min(vals)
        return vals.index(lo)

    def to_json(self) -> dict:
        return {"rays": [list(r) for r in self.rays],
                "cones": [sorted(c) for c in self.cones]}


def fan_of(P: HPolytope, warn: bool = True) -> FanData:
    fan = FanData.from_polytope(P)
    if warn and not fan.is_smooth:
        warnings.warn("normal fan has non-smooth maximal cones; X is singular "
                      f"(cones {fan.singular_cones()})", SingularToricWarning, stacklevel=2)
    return fan


def log_discrepancy(fan: FanData, xi: Sequence) -> Fraction:
    """``A_X(v_xi)``: the fan-piecewise-linear function equal to 1 on primitive rays.

    On a non-simplicial cone the value is ``min sum c_rho`` over nonnegative
    representations ``xi = sum c_rho u_rho`` by the cone's rays.
    """
    xi = rvec(xi)
    if len(xi) != fan.dim:
        raise ValueError("valuation has wrong dimension")
    if all(x == 0 for x in xi):
        return ZERO
    k = fan.containing_cone(xi)
    rays = [fan.rays[i] for i in sorted(fan.cones[k])]
    n = fan.dim
    best = None
    for sub in itertools.combinations(rays, n):
        if rank(sub) < n:
            continue
        # columns are the rays: sum_j c_j sub[j] = xi
        coeffs = solve([[sub[j][i] for j in range(n)] for i in range(n)], xi)
        if coeffs is None or any(c < 0 for c in coeffs):
            continue
        total = sum(coeffs, ZERO)
        if best is None or total < best:
            best = total
    if best is None:
        raise GeometryError(f"valuation {xi} lies outside the fan support")
    return best


def combinatorial_type(P: HPolytope):
    return P.nfacets, sorted(sorted(t) for t in P._tight)


def deform_canonical(P: HPolytope, s, strict: bool = True) -> HPolytope:
    """Moment polytope of ``L + s K_X``: every facet offset ``c_F -> c_F - s``.

    With ``strict=False`` only the facet set must survive; vertices of a
    non-simple polytope may then split (its strict deformation radius is 0,
    but volumes and integrals stay polynomial on one-sided windows).
    """
    s = as_rational(s)
    try:
        Ps = HPolytope.from_halfspaces(P.normals, [c - s for c in P.offsets])
    except GeometryError as exc:
        raise CombinatorialCollapse(f"P_s degenerates at s={s}: {exc}") from None
    if Ps.normals != P.normals:
        raise CombinatorialCollapse(f"a facet disappears at s={s}")
    if strict and combinatorial_type(Ps) != combinatorial_type(P):
        raise CombinatorialCollapse(f"combinatorial type changes at s={s}")
    return Ps


def deformation_step(P: HPolytope, start=Fraction(1, 64), floor=Fraction(1, 2 ** 40),
                      strict: bool = True) -> Fraction:
    """A rational ``h > 0`` with ``P_{+-h}`` of the same combinatorial type."""
    h = as_rational(start)
    while h >= floor:
        try:
            deform_canonical(P, h, strict)
            deform_canonical(P, -h, strict)
            return h
        except CombinatorialCollapse:
            h /= 2
    raise CombinatorialCollapse("no positive deformation radius found")
