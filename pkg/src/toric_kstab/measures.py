"""Non-Archimedean Monge-Ampere measures of PL potentials.

Measures are finite sums of atoms at monomial valuations ``v_xi``.  Masses
are unnormalized: ``MA_v(phi)`` has total mass ``deg_v(L)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dh import integrate_weight, degree_derivative
from .geometry import EMPTY, HPolytope, clip
from .potentials import Cell, PLConcave, _cells_of, evaluate_potential
from .rational import ONE, ZERO, as_rational, dot, rational_str, rvec, solve
from .toric import FanData, deform_canonical, deformation_step, fan_of, log_discrepancy
from .weights import Weight

Vector = tuple[Fraction, ...]


class MassMismatch(ValueError):
    pass


class NonConvergence(ArithmeticError):
    def __init__(self, message: str, best=None, residual: float = math.inf):
        super().__init__(message)
        self.best = best
        self.residual = residual


def _add(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return float(a) + float(b)
    return a + b


def _mul(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return float(a) * float(b)
    return a * b


def _fsum(xs):
    xs = list(xs)
    if any(isinstance(x, float) for x in xs):
        return math.fsum(float(x) for x in xs)
    return sum(xs, ZERO)


class AtomicMeasure:
    """Finite atomic measure ``sum_i m_i delta_{v_{xi_i}}``.

    Atoms at the same valuation are merged.  ``multiplicities`` optionally
    records the cell multiplicity ``b`` per atom for audit; it never
    rescales masses.
    """

    def __init__(self, atoms: Iterable[tuple[Sequence, object]] = (), multiplicities=None):
        merged: dict[Vector, object] = {}
        for xi, m in atoms:
            xi = rvec(xi)
            m = m if isinstance(m, float) else as_rational(m)
            merged[xi] = _add(merged[xi], m) if xi in merged else m
        self.atoms: dict[Vector, object] = dict(sorted(merged.items()))
        self.multiplicities: dict[Vector, int] = dict(multiplicities or {})

    def __iter__(self):
        return iter(self.atoms.items())

    def __len__(self):
        return len(self.atoms)

    def __getitem__(self, xi):
        return self.atoms.get(rvec(xi), ZERO)

    def __eq__(self, other):
        return isinstance(other, AtomicMeasure) and self.atoms == other.atoms

    def __repr__(self):
        body = ", ".join(f"{[rational_str(x) for x in xi]}: {rational_str(m) if isinstance(m, Fraction) else m}"
                         for xi, m in self.atoms.items())
        return f"AtomicMeasure({{{body}}})"

    @property
    def dim(self) -> int:
        return len(next(iter(self.atoms))) if self.atoms else 0

    @property
    def total(self):
        return _fsum(self.atoms.values())

    def support(self) -> list[Vector]:
        return [xi for xi, m in self.atoms.items() if m != 0]

    def scaled(self, c) -> "AtomicMeasure":
        return AtomicMeasure((xi, _mul(m, c)) for xi, m in self.atoms.items())

    def normalized(self) -> "AtomicMeasure":
        tot = self.total
        return AtomicMeasure((xi, m / tot) for xi, m in self.atoms.items())

    def twist(self, xi) -> "AtomicMeasure":
        """Toric twist: every atom ``v_eta`` moves to ``v_{eta + xi}``."""
        xi = rvec(xi)
        return AtomicMeasure((tuple(a + b for a, b in zip(eta, xi)), m) for eta, m in self.atoms.items())

    def dropping_zeros(self) -> "AtomicMeasure":
        return AtomicMeasure((xi, m) for xi, m in self.atoms.items() if m != 0)

    def pair(self, f) -> object:
        """``sum_i m_i f(xi_i)``."""
        return _fsum(_mul(m, f(xi)) for xi, m in self.atoms.items())

    def to_json(self) -> dict:
        def enc(m):
            return rational_str(m) if isinstance(m, Fraction) else float(m)
        return {"atoms": [{"xi": [rational_str(x) for x in xi], "mass": enc(m)}
                          for xi, m in self.atoms.items()]}

    @classmethod
    def from_json(cls, data: Mapping) -> "AtomicMeasure":
        unknown = set(data) - {"atoms", "name", "description"}
        if unknown:
            raise ValueError(f"unknown measure fields: {sorted(unknown)}")
        atoms = []
        for a in data["atoms"]:
            extra = set(a) - {"xi", "mass"}
            if extra:
                raise ValueError(f"unknown atom fields: {sorted(extra)}")
            m = a["mass"]
            atoms.append((a["xi"], m if isinstance(m, float) else as_rational(m)))
        return cls(atoms)


# ----------------------------------------------------------------------
# cell boundaries

@dataclass
class Face:
    """A facet of a cell: either on the boundary of ``P`` or a wall to ``neighbor``.

    ``integral`` is ``int_face v dA / |u|`` with ``u`` the primitive inward
    normal; ``ratio`` is ``lam`` with ``xi_neighbor - xi_cell = lam * u``.
    """

    index: int
    neighbor: int | None
    ratio: Fraction | None


def cell_faces(P: HPolytope, cells: Sequence[Cell], k: int) -> list[Face]:
    """Classify the facets of ``cells[k]`` as boundary facets or walls."""
    pfacets = set(P.facets)
    cell = cells[k]
    Q = cell.polytope
    out = []
    for i, (u, off) in enumerate(Q.facets):
        if (u, off) in pfacets:
            out.append(Face(i, None, None))
            continue
        verts = Q.facet_vertices(i)
        best, best_val = None, None
        for j, other in enumerate(cells):
            if j == k:
                continue
            if all(other.value(w) == cell.value(w) for w in verts):
                eta = tuple(a - b for a, b in zip(other.slope, cell.slope))
                val = dot(eta, u)
                if val > 0 and (best_val is None or val > best_val):
                    best, best_val = j, val
        if best is None:
            raise ArithmeticError("cell facet has neither a boundary nor a neighbouring cell")
        out.append(Face(i, best, best_val / dot(u, u)))
    return out


# ----------------------------------------------------------------------
# measures

def _resolve_fan(P, fan):
    return fan if fan is not None else fan_of(P, warn=False)


def ma_weighted(P: HPolytope, fan: FanData | None, v: Weight, g: PLConcave) -> AtomicMeasure:
    """``MA_v(phi_g)``: one atom per cell, mass ``n! int_{Q_k} v``."""
    if g.polytope != P:
        raise ValueError("potential lives on a different polytope")
    cells = g.cells()
    return AtomicMeasure(((c.slope, integrate_weight(c.polytope, v)) for c in cells),
                         {c.slope: c.multiplicity for c in cells})


def _twisted_flux(P: HPolytope, fan: FanData, v: Weight, g: PLConcave) -> AtomicMeasure:
    n = P.dim
    nf = factorial(n)
    cells = g.cells()
    A = [log_discrepancy(fan, c.slope) for c in cells]
    atoms = []
    for k, cell in enumerate(cells):
        parts = []
        for face in cell_faces(P, cells, k):
            integral = cell.polytope.facet_integral(face.index, v)
            if face.neighbor is None:
                parts.append(_mul(integral, -nf))
            else:
                speed = (A[face.neighbor] - A[k]) / face.ratio
                if speed:
                    parts.append(_mul(integral, -nf * speed))
        atoms.append((cell.slope, _fsum(parts)))
    return AtomicMeasure(atoms, {c.slope: c.multiplicity for c in cells})


def _interp_derivative_at_zero(nodes: Sequence[Fraction], values: Sequence) -> object:
    """Derivative at 0 of the interpolating polynomial (Lagrange form)."""
    total = []
    for i, si in enumerate(nodes):
        # l_i'(0) = sum_{j != i} (1/(si - sj)) prod_{k != i, j} (0 - sk)/(si - sk)
        d = ZERO
        for j, sj in enumerate(nodes):
            if j == i:
                continue
            term = ONE / (si - sj)
            for k, sk in enumerate(nodes):
                if k not in (i, j):
                    term *= (-sk) / (si - sk)
            d += term
        total.append(_mul(values[i], d))
    return _fsum(total)


def _interp_value(nodes, values, x):
    out = []
    for i, si in enumerate(nodes):
        li = ONE
        for j, sj in enumerate(nodes):
            if j != i:
                li *= (x - sj) / (si - sj)
        out.append(_mul(values[i], li))
    return _fsum(out)


def _deformed_potential(P: HPolytope, fan: FanData, g: PLConcave, s: Fraction) -> PLConcave:
    Ps = deform_canonical(P, s, strict=False)
    return PLConcave(Ps, [(xi, c - s * log_discrepancy(fan, xi)) for xi, c in g.pieces])


def _mass_series(P, fan, v, g, slopes, nodes):
    series = {xi: [] for xi in slopes}
    for s in nodes:
        gs = _deformed_potential(P, fan, g, s)
        masses = {c.slope: integrate_weight(c.polytope, v) for c in gs.cells()}
        for xi in slopes:
            series[xi].append(masses.get(xi, ZERO))
    return series


def _certified_derivative(P, fan, v, g, slopes, nodes):
    """Derivatives at ``0`` if every mass is polynomial on ``nodes`` (else ``None``)."""
    try:
        series = _mass_series(P, fan, v, g, slopes, nodes)
    except Exception:
        return None
    if v.is_polynomial and not all(_interp_value(nodes[:-1], vals[:-1], nodes[-1]) == vals[-1]
                                   for vals in series.values()):
        return None
    return {xi: _interp_derivative_at_zero(nodes, vals) for xi, vals in series.items()}


def _twisted_interpolated(P: HPolytope, fan: FanData, v: Weight, g: PLConcave) -> AtomicMeasure:
    deg = v.degree if v.is_polynomial else 4
    npts = P.dim + deg + 1
    h = deformation_step(P, strict=False)
    slopes = [xi for xi, _ in g.pieces]
    for _ in range(30):
        # the extra node in each window certifies polynomiality
        both = [h * Fraction(j, npts) for j in range(-npts, npts + 1) if j != 0]
        d = _certified_derivative(P, fan, v, g, slopes, both)
        if d is None:
            # a wall meeting a vertex of P makes the masses only piecewise
            # polynomial across s = 0; the one-sided derivatives must then agree
            right = [h * Fraction(j, npts) for j in range(npts + 2)]
            left = [-x for x in right]
            dr = _certified_derivative(P, fan, v, g, slopes, right)
            dl = _certified_derivative(P, fan, v, g, slopes, left)
            if dr is not None and dl is not None:
                if dr != dl:
                    raise ArithmeticError("twisted masses have different one-sided derivatives")
                d = dr
        if d is not None:
            return AtomicMeasure(d.items())
        h /= 2
    raise ArithmeticError("cell masses are not polynomial on any tested deformation window")


def ma_twisted_canonical(P: HPolytope, fan: FanData | None, v: Weight, g: PLConcave,
                         method: str = "flux") -> AtomicMeasure:
    """``MA^{K_X}_v(phi_g)``: derivative of cell masses under ``L -> L + s K_X``.

    The default evaluates the derivative as a boundary flux: every facet of
    ``P`` moves inward at unit lattice speed, and the wall between cells
    ``k`` and ``j`` moves with speed ``A(xi_j) - A(xi_k)``.  ``method="interpolate"``
    instead differentiates cell masses interpolated at rational ``s``.
    """
    fan = _resolve_fan(P, fan)
    if g.polytope != P:
        raise ValueError("potential lives on a different polytope")
    if method == "flux":
        return _twisted_flux(P, fan, v, g)
    if method == "interpolate":
        return _twisted_interpolated(P, fan, v, g)
    raise ValueError(f"unknown method {method!r}")


def i_functional(P: HPolytope, fan: FanData | None, v: Weight, g: PLConcave, h: PLConcave):
    """``I_v(phi_g, phi_h) = int (phi_g - phi_h)(MA_v(h) - MA_v(g))``."""
    mg = ma_weighted(P, fan, v, g)
    mh = ma_weighted(P, fan, v, h)
    atoms = set(mg.atoms) | set(mh.atoms)
    parts = []
    for xi in sorted(atoms):
        diff = evaluate_potential(g, xi) - evaluate_potential(h, xi)
        parts.append(_mul(diff, _add(mh[xi], -mg[xi] if not isinstance(mg[xi], float) else -mg[xi])))
    return _fsum(parts)


def d1_product(P: HPolytope, xi: Sequence, xi2: Sequence, v: Weight | None = None):
    """Distance of product configurations: mean of ``|<xi - xi2, alpha>|`` over ``P``.

    The mean is for ``n! Lebesgue``, or for ``v dDH`` if a weight is given.
    """
    eta = tuple(a - b for a, b in zip(rvec(xi), rvec(xi2)))
    if all(x == 0 for x in eta):
        return ZERO
    n = P.dim
    v = v if v is not None else Weight.constant(n)
    lin = Weight.affine(eta)
    parts = []
    for sign in (1, -1):
        half = clip(P, [(tuple(sign * x for x in eta), 0)])
        if half is not EMPTY:
            parts.append(_mul(half.integrate(lin * v), sign))
    return _fsum(parts) / P.integrate(v) if not any(isinstance(p, float) for p in parts) \
        else _fsum(parts) / float(P.integrate(v))


# ----------------------------------------------------------------------
# Monge-Ampere inversion

@dataclass
class MASolution:
    potential: PLConcave
    t: tuple
    residual: float
    iterations: int
    exact: bool


def _laguerre_cells(P: HPolytope, slopes: Sequence[Vector], consts: Sequence[Fraction]):
    """Cells of ``min_i (<alpha, xi_i> + c_i)`` indexed like ``slopes`` (``None`` if empty)."""
    cells = _cells_of(P, list(zip(slopes, consts)))
    by_slope = {c.slope: c for c in cells}
    return [by_slope.get(xi) for xi in slopes], cells


def _masses_and_hessian(P, v, slopes, consts, need_hessian=True):
    r = len(slopes)
    indexed, cells = _laguerre_cells(P, slopes, consts)
    nf = factorial(P.dim)
    masses = [integrate_weight(c.polytope, v) if c is not None else ZERO for c in indexed]
    if not need_hessian:
        return masses, None
    pos = {id(c): i for i, c in enumerate(indexed) if c is not None}
    H = np.zeros((r, r))
    for k, cell in enumerate(cells):
        i = pos[id(cell)]
        for face in cell_faces(P, cells, k):
            if face.neighbor is None:
                continue
            j = pos[id(cells[face.neighbor])]
            val = float(cell.polytope.facet_integral(face.index, v)) * nf / float(face.ratio)
            H[i, j] += val
    H = (H + H.T) / 2
    H[np.diag_indices(r)] = -H.sum(axis=1)
    return masses, H


def _snap(x: float, den: int) -> Fraction:
    return Fraction(x).limit_denominator(den)


def solve_ma(P: HPolytope, fan: FanData | None, v: Weight, mu: AtomicMeasure,
             tol: float = 1e-6, budget: int = 200, full: bool = False):
    """Find ``g`` with ``MA_v(phi_g) = mu`` (normalized by ``max_P g = 0``).

    Maximizes the concave function ``t -> int g_t v dDH - sum m_i t_i`` over
    ``g_t = min_i(<alpha, xi_i> - min_P <., xi_i> + t_i)`` by damped Newton
    steps; the Hessian entries are wall integrals between adjacent cells.
    """
    total = integrate_weight(P, v)
    mu = mu.dropping_zeros()
    if len(mu) == 0:
        raise MassMismatch("measure has no atoms")
    if any(m < 0 for _, m in mu):
        raise MassMismatch("measure has negative atoms")
    if abs(float(mu.total) - float(total)) > 1e-9 * abs(float(total)):
        raise MassMismatch(f"measure mass {float(mu.total)} differs from deg_v(L) = {float(total)}")
    slopes = list(mu.atoms)
    target = [mu.atoms[xi] for xi in slopes]
    r = len(slopes)
    base = [-P.min_linear(xi) for xi in slopes]
    scale = float(total)

    def consts(t):
        return [b + ti for b, ti in zip(base, t)]

    if r == 1:
        t = (ZERO,)
        res, iters = 0.0, 0
    else:
        t = _initial_t(P, slopes, base)
        masses, H = _masses_and_hessian(P, v, slopes, consts(t))
        grad = np.array([float(m) - float(a) for m, a in zip(masses, target)])
        eps0 = 0.5 * min(min(float(a) for a in target), min(float(m) for m in masses))
        res = float(np.abs(grad).max())
        iters = 0
        while res > 1e-13 * scale and iters < budget:
            iters += 1
            step, *_ = np.linalg.lstsq(H, -grad, rcond=None)
            step -= step.mean()
            tau = 1.0
            while True:
                cand = tuple(_snap(float(ti) + tau * d, 10 ** 12) for ti, d in zip(t, step))
                m2, H2 = _masses_and_hessian(P, v, slopes, consts(cand))
                g2 = np.array([float(m) - float(a) for m, a in zip(m2, target)])
                r2 = float(np.abs(g2).max())
                if (min(float(m) for m in m2) >= eps0 and
                        np.linalg.norm(g2) <= (1 - tau / 2) * np.linalg.norm(grad)) or tau < 1e-10:
                    break
                tau /= 2
            if tau < 1e-10:
                break
            t, masses, H, grad, res = cand, m2, H2, g2, r2
        # try to land on the exact rational solution
        for den in (10 ** 3, 10 ** 6, 10 ** 9):
            cand = tuple(_snap(float(ti - t[0]), den) for ti in t)
            m2, _ = _masses_and_hessian(P, v, slopes, consts(cand), need_hessian=False)
            if all(a == b for a, b in zip(m2, target)):
                t, res = cand, 0.0
                break
        if res > tol * max(1.0, scale):
            g = PLConcave(P, zip(slopes, consts(t)))
            raise NonConvergence(f"MA inversion stalled with residual {res:.3g}", best=g, residual=res)
    g = PLConcave(P, zip(slopes, consts(t)))
    g = g + (-g.maximum)
    if full:
        return MASolution(g, tuple(t), res, iters, res == 0.0)
    return g


def _initial_t(P: HPolytope, slopes, base):
    """Offsets making every cell nonempty: a power diagram with sites ``xi_i``.

    ``min_i <alpha - b, xi_i> + |xi_i|^2 / (2 eps)`` picks the site nearest to
    ``-eps (alpha - b)``; with ``eps`` large every site lies inside that image
    of ``P`` and owns a full-dimensional cell.
    """
    n = P.dim
    b = P.centroid_of_vertices
    inner = min(dot(u, b) + c for u, c in P.facets)  # positive slack of b
    radius = max((math.sqrt(sum(float(x) ** 2 for x in xi)) for xi in slopes), default=0.0)
    unorm = max(math.sqrt(sum(x * x for x in u)) for u in P.normals)
    eps = Fraction(max(1.0, 2 * radius * unorm / float(inner))).limit_denominator(1000) + 1
    t = []
    for xi, bs in zip(slopes, base):
        c = -dot(b, xi) + sum(x * x for x in xi) / (2 * eps)
        t.append(c - bs)
    return tuple(ti - t[0] for ti in t)
