"""Energy functionals, the weighted Mabuchi functional and Futaki characters.

Energies are Euler-Lagrange integrals along the linear path from the trivial
potential: ``E(phi) = int_0^1 int phi d MA(phi_s) ds``.  Along such a path
the slopes of ``g_s`` are frozen and cell masses are polynomial in ``s`` for
polynomial weights, so the ``s``-integral is done exactly by interpolation
at rational nodes.  Exponential weights fall back to Gauss-Legendre.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable, Sequence

import numpy as np

from .dh import degree_derivative, integrate_weight
from .geometry import HPolytope
from .measures import (AtomicMeasure, _fsum, _mul, _resolve_fan, ma_twisted_canonical,
                       ma_weighted)
from .potentials import LinearPath, PLConcave, evaluate_potential
from .rational import ONE, ZERO, as_rational, kernel_vector, rational_str, rvec, solve
from .toric import FanData, log_discrepancy
from .weights import QuadratureError, Weight


class SingularSystem(np.linalg.LinAlgError):
    def __init__(self, message: str, kernel=None):
        super().__init__(message)
        self.kernel = kernel


# ----------------------------------------------------------------------
# integration in the path parameter

def _integrate_poly_samples(nodes: Sequence[Fraction], values: Sequence) -> object:
    """Exact integral over [0, 1] of the polynomial interpolating the samples."""
    m = len(nodes)
    rows = [[s ** k for k in range(m)] for s in nodes]
    if any(isinstance(x, float) for x in values):
        coef = np.linalg.solve(np.array(rows, dtype=float), np.array(values, dtype=float))
        return float(sum(c / (k + 1) for k, c in enumerate(coef)))
    coef = solve(rows, list(values))
    return sum((c / (k + 1) for k, c in enumerate(coef)), ZERO)


def _interp_at(nodes, values, x):
    out = []
    for i, si in enumerate(nodes):
        li = ONE
        for j, sj in enumerate(nodes):
            if j != i:
                li *= (x - sj) / (si - sj)
        out.append(_mul(values[i], li))
    return _fsum(out)


def _gauss_legendre(f: Callable[[Fraction], list], k: int, rtol: float, max_order: int = 64):
    """Adaptive-order Gauss-Legendre on [0, 1] for a vector of integrands."""
    prev = None
    q = 4
    while True:
        x, w = np.polynomial.legendre.leggauss(q)
        x, w = (x + 1) / 2, w / 2
        acc = np.zeros(k)
        for xi, wi in zip(x, w):
            acc += wi * np.array([float(y) for y in f(Fraction(float(xi)).limit_denominator(10 ** 12))])
        if prev is not None:
            err = float(np.max(np.abs(acc - prev)))
            if err <= rtol * max(1.0, float(np.max(np.abs(acc)))):
                return [float(a) for a in acc], err
        if q >= max_order:
            raise QuadratureError("path quadrature did not converge", float(acc[0]), err)
        prev = acc
        q *= 2


def path_integrals(path: LinearPath, integrands: Sequence[Callable[[PLConcave], object]],
                   degree: int | None, rtol: float = 1e-9) -> tuple[list, float]:
    """``int_0^1 F(g_s) ds`` for each integrand; returns values and an error bound.

    ``degree`` bounds the polynomial degree of the integrands in ``s``
    (``None`` when unknown).  With a bound, ``degree + 1`` rational nodes
    give the exact integral and one more node certifies the bound.
    """
    k = len(integrands)

    def sample(s):
        gs = path.at(s)
        return [F(gs) for F in integrands]

    if degree is not None:
        m = degree + 1
        nodes = [Fraction(2 * j + 1, 2 * m) for j in range(m)]
        check = Fraction(1, 3 * m + 1)
        samples = [sample(s) for s in nodes]
        extra = sample(check)
        exact = all(_interp_at(nodes, [row[i] for row in samples], check) == extra[i] for i in range(k)
                    if not isinstance(extra[i], float))
        if exact:
            return [_integrate_poly_samples(nodes, [row[i] for row in samples]) for i in range(k)], 0.0
    vals, err = _gauss_legendre(sample, k, rtol)
    return vals, err


def _path_degree(P: HPolytope, *weights: Weight) -> int | None:
    if not all(w.is_polynomial for w in weights):
        return None
    return P.dim + max(w.degree for w in weights)


# ----------------------------------------------------------------------

def integrate_potential(g: PLConcave, v: Weight):
    """``n! int_P g v``."""
    nf = factorial(g.dim)
    return _fsum(_mul(c.polytope.integrate(Weight.affine(c.slope, c.const) * v), nf) for c in g.cells())


def boundary_integral(g: PLConcave, v: Weight):
    """``n! int_{dP} g v dsigma``."""
    P = g.polytope
    pf = set(P.facets)
    nf = factorial(g.dim)
    parts = []
    for c in g.cells():
        w = Weight.affine(c.slope, c.const) * v
        for i, f in enumerate(c.polytope.facets):
            if f in pf:
                parts.append(_mul(c.polytope.facet_integral(i, w), nf))
    return _fsum(parts)


def _pairing(g: PLConcave) -> Callable[[AtomicMeasure], object]:
    cache: dict = {}

    def phi(xi):
        if xi not in cache:
            cache[xi] = evaluate_potential(g, xi)
        return cache[xi]

    return lambda mu: mu.pair(phi)


def energy_weighted(P: HPolytope, fan: FanData | None, v: Weight, g: PLConcave, rtol: float = 1e-9,
                    with_error: bool = False):
    """``E_v(phi_g) = int_0^1 int phi_g dMA_v(phi_{g_s}) ds``."""
    if len(g.pieces) == 1 and g.pieces[0][0] == (ZERO,) * P.dim and g.pieces[0][1] == 0:
        return (ZERO, 0.0) if with_error else ZERO
    path = LinearPath(PLConcave.zero(P), g)
    pair = _pairing(g)
    (val,), err = path_integrals(path, [lambda gs: pair(ma_weighted(P, fan, v, gs))],
                                 _path_degree(P, v), rtol)
    return (val, err) if with_error else val


def ricci_energy(P: HPolytope, fan: FanData | None, v: Weight, g: PLConcave, rtol: float = 1e-9,
                 with_error: bool = False):
    """``R_v(phi_g) = E^{K_X}_v(phi_g)``, integrating against the twisted measure."""
    fan = _resolve_fan(P, fan)
    path = LinearPath(PLConcave.zero(P), g)
    pair = _pairing(g)
    (val,), err = path_integrals(path, [lambda gs: pair(ma_twisted_canonical(P, fan, v, gs))],
                                 _path_degree(P, v), rtol)
    return (val, err) if with_error else val


def entropy_weighted(P: HPolytope, fan: FanData | None, v: Weight, g: PLConcave):
    """``H_v(phi_g) = sum_k m_k A_X(v_{xi_k})`` over ``MA_v(phi_g)``."""
    fan = _resolve_fan(P, fan)
    return ma_weighted(P, fan, v, g).pair(lambda xi: log_discrepancy(fan, xi))


def _num(x):
    if isinstance(x, Fraction):
        return rational_str(x)
    return float(x)


@dataclass
class FunctionalReport:
    H_v: object
    R_v: object
    E_v: object
    E_vw: object
    M_vw: object
    errors: dict
    deg_v: object
    deg_v_prime_K: object
    deg_vw: object
    weights: dict
    translation_invariant: bool
    donaldson: object = None
    donaldson_gap: float | None = None
    notes: list = field(default_factory=list)

    @property
    def mass_balance(self):
        return self.deg_vw + self.deg_v_prime_K

    def to_json(self) -> dict:
        out = {"H": _num(self.H_v), "R": _num(self.R_v), "E_v": _num(self.E_v),
               "E_vw": _num(self.E_vw), "M": _num(self.M_vw),
               "errors": {k: float(e) for k, e in sorted(self.errors.items())},
               "deg_v": _num(self.deg_v), "deg_v_prime_K": _num(self.deg_v_prime_K),
               "deg_vw": _num(self.deg_vw), "mass_balance": _num(self.mass_balance),
               "translation_invariant": self.translation_invariant,
               "weights": self.weights, "notes": list(self.notes)}
        if self.donaldson is not None:
            out["donaldson_oracle"] = _num(self.donaldson)
            out["donaldson_gap"] = self.donaldson_gap
        return out


def scalar_mean(P: HPolytope) -> Fraction:
    """``S = -deg'_1(L; K_X) / deg_1(L)``, the constant of the unweighted preset."""
    one = Weight.constant(P.dim)
    return -degree_derivative(P, one) / integrate_weight(P, one)


def donaldson_oracle(P: HPolytope, g: PLConcave):
    """``S n! int_P g - n! int_{dP} g dsigma`` (unweighted Mabuchi of ``phi_g``)."""
    one = Weight.constant(P.dim)
    return scalar_mean(P) * integrate_potential(g, one) - boundary_integral(g, one)


def is_unweighted_pair(P: HPolytope, v: Weight, w: Weight) -> bool:
    n = P.dim
    return v == Weight.constant(n) and w == Weight.constant(n, scalar_mean(P))


def mabuchi(P: HPolytope, fan: FanData | None, v: Weight, w: Weight, g: PLConcave,
            rtol: float = 1e-9) -> FunctionalReport:
    """Chen-Tian assembly ``M_{v,w} = H_v + R_v + E_{vw}``."""
    fan = _resolve_fan(P, fan)
    vw = v * w
    pair = _pairing(g)
    trivial = len(g.pieces) == 1 and g.pieces[0] == ((ZERO,) * P.dim, ZERO)
    if trivial:
        E_v = R_v = E_vw = ZERO
        errs = {"E_v": 0.0, "R_v": 0.0, "E_vw": 0.0}
    else:
        path = LinearPath(PLConcave.zero(P), g)
        # one pass over the path serves all three energies
        (E_v, R_v, E_vw), err = path_integrals(
            path,
            [lambda gs: pair(ma_weighted(P, fan, v, gs)),
             lambda gs: pair(ma_twisted_canonical(P, fan, v, gs)),
             lambda gs: pair(ma_weighted(P, fan, vw, gs))],
            _path_degree(P, v, vw), rtol)
        errs = {"E_v": err, "R_v": err, "E_vw": err}
    H_v = entropy_weighted(P, fan, v, g)
    M = _fsum([H_v, R_v, E_vw])
    errs["H_v"] = 0.0
    errs["M_vw"] = sum(errs.values())
    deg_v = integrate_weight(P, v)
    dK = degree_derivative(P, v)
    deg_vw = integrate_weight(P, vw)
    balance = _fsum([deg_vw, dK])
    report = FunctionalReport(H_v, R_v, E_v, E_vw, M, errs, deg_v, dK, deg_vw,
                              {"v": v.to_json(), "w": w.to_json()},
                              translation_invariant=(balance == 0 if not isinstance(balance, float)
                                                     else abs(balance) < 1e-12))
    if not report.translation_invariant:
        report.notes.append("deg_vw + deg'_v(K) != 0: M is not translation invariant")
    if is_unweighted_pair(P, v, w):
        d = donaldson_oracle(P, g)
        report.donaldson = d
        report.donaldson_gap = abs(float(d) - float(M))
    return report


def futaki(P: HPolytope, fan: FanData | None, v: Weight, w: Weight, xi: Sequence, rtol: float = 1e-9):
    """``Fut_{v,w}(xi) = M_{v,w}(phi_{<., xi>})``."""
    return mabuchi(P, fan, v, w, PLConcave.linear(P, rvec(xi)), rtol).M_vw


# ----------------------------------------------------------------------

@dataclass
class ExtremalResult:
    slope: tuple
    const: object
    residual: float
    condition: float
    matrix: list
    rhs: list

    def weight(self, n: int) -> Weight:
        return Weight.affine(self.slope, self.const)

    def __call__(self, alpha):
        return sum((a * b for a, b in zip(rvec(alpha), self.slope)), ZERO) + self.const

    def to_json(self) -> dict:
        return {"slope": [_num(x) for x in self.slope], "const": _num(self.const),
                "residual": self.residual, "condition": self.condition}


def extremal_function(P: HPolytope, fan: FanData | None, v: Weight, w: Weight) -> ExtremalResult:
    """Affine ``l(alpha) = <alpha, lam> + c`` killing translations and torus Futaki.

    Unknowns ``(lam, c)``; rows are the mass balance
    ``deg_{v w l} + deg'_v(K) = 0`` and ``Fut_{v, w l}(e_i) = 0``.  Only the
    ``E_{v w l}`` part depends on ``l``, and it is linear in ``(lam, c)``.
    """
    fan = _resolve_fan(P, fan)
    n = P.dim
    basis = [w * Weight.coordinate(n, j) for j in range(n)] + [w]
    rows = [[integrate_weight(P, v * b) for b in basis]]
    rhs = [-degree_derivative(P, v)]
    for i in range(n):
        e = tuple(int(k == i) for k in range(n))
        g = PLConcave.linear(P, e)
        HR = _fsum([entropy_weighted(P, fan, v, g), ricci_energy(P, fan, v, g)])
        rows.append([energy_weighted(P, fan, v * b, g) for b in basis])
        rhs.append(-HR)
    A = np.array([[float(x) for x in r] for r in rows])
    cond = float(np.linalg.cond(A))
    exact = not any(isinstance(x, float) for r in rows for x in r) and not any(isinstance(x, float) for x in rhs)
    sol = solve(rows, rhs) if exact else None
    if sol is None:
        if not np.isfinite(cond) or cond > 1e14:
            _, s, vt = np.linalg.svd(A)
            kernel = vt[s < 1e-12 * max(s.max(), 1.0)]
            raise SingularSystem("extremal system is singular", kernel=kernel.tolist())
        sol = list(np.linalg.solve(A, np.array([float(x) for x in rhs])))
    res = float(np.max(np.abs(A @ np.array([float(x) for x in sol]) - np.array([float(x) for x in rhs]))))
    if exact:
        res = float(max(abs(sum((a * b for a, b in zip(r, sol)), ZERO) - y) for r, y in zip(rows, rhs)))
    return ExtremalResult(tuple(sol[:n]), sol[n], res, cond, rows, rhs)
