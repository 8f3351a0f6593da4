"""Worked toric varieties and weight presets used as regression fixtures."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .dh import integrate_weight
from .functionals import scalar_mean
from .geometry import HPolytope
from .weights import Weight


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    normals: tuple
    offsets: tuple
    expected: str  # qualitative verdict

    def polytope(self) -> HPolytope:
        return HPolytope.from_halfspaces(self.normals, self.offsets)


PRESETS = {
    p.name: p for p in [
        Preset("p1_o1", "P^1 with L = O(1): P = [0, 1]", ((1,), (-1,)), (0, 1), "stable"),
        Preset("p1_o2", "P^1 with L = O(2) = -K: P = [0, 2]", ((1,), (-1,)), (0, 2), "stable"),
        Preset("p2", "P^2 anticanonical: conv{(-1,-1), (2,-1), (-1,2)}",
               ((1, 0), (0, 1), (-1, -1)), (1, 1, 1), "stable"),
        Preset("p1xp1", "P^1 x P^1 anticanonical: [-1, 1]^2",
               ((1, 0), (0, 1), (-1, 0), (0, -1)), (1, 1, 1, 1), "stable"),
        Preset("f1", "Hirzebruch F_1 with a non-Kahler-Einstein polarization",
               ((0, 1), (1, 0), (0, -1), (-1, -1)), (0, 0, 1, 2),
               "unstable: nonzero Futaki character"),
        Preset("blp2", "Bl_1 P^2 anticanonical",
               ((1, 0), (0, 1), (-1, -1), (1, 1)), (1, 1, 1, 1),
               "unstable: nonzero Futaki character"),
    ]
}


def polytope(name: str) -> HPolytope:
    try:
        return PRESETS[name].polytope()
    except KeyError:
        raise KeyError(f"unknown polytope preset {name!r}; known: {sorted(PRESETS)}") from None


WEIGHT_PRESETS = ("unweighted", "normalized", "trivial")


def weight_pair(name: str, P: HPolytope) -> tuple[Weight, Weight]:
    """``(v, w)`` for a named preset.

    ``unweighted``: ``v = 1``, ``w = S``; ``normalized``: ``v = 1/(L^n)``,
    ``w = S`` (probability-normalized functionals); ``trivial``: ``v = w = 1``.
    """
    n = P.dim
    if name == "unweighted":
        return Weight.constant(n, label="1"), Weight.constant(n, scalar_mean(P), label="S")
    if name == "normalized":
        deg = integrate_weight(P, Weight.constant(n))
        return Weight.constant(n, Fraction(1) / deg, label="1/L^n"), Weight.constant(n, scalar_mean(P), label="S")
    if name == "trivial":
        return Weight.constant(n), Weight.constant(n)
    raise KeyError(f"unknown weight preset {name!r}; known: {list(WEIGHT_PRESETS)}")
