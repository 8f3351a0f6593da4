"""Divisorial-measure energies, beta-invariants and stability reports.

For a divisorial measure ``mu = sum a_i delta_{v_{xi_i}}`` on a toric
variety, ``J(mu) = sup_t (S(t) - a.t)`` where ``S(t)`` is the normalized
integral over ``P`` of ``g_t = min_i(<alpha, xi_i> - min_P <., xi_i> + t_i)``.
The optimal ``t`` is a Monge-Ampere inversion with ``v = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Sequence

import numpy as np

from .dh import integrate_weight
from .functionals import FunctionalReport, _integrate_poly_samples, _num, futaki, mabuchi
from .geometry import EMPTY, HPolytope, clip
from .measures import (AtomicMeasure, NonConvergence, _fsum, _interp_derivative_at_zero,
                       _interp_value, _resolve_fan, solve_ma)
from .potentials import PLConcave
from .rational import ONE, ZERO, as_rational, dot, rational_str, rvec
from .toric import (CombinatorialCollapse, FanData, deform_canonical, deformation_step,
                    log_discrepancy)
from .weights import Weight


class DerivativeMismatch(ArithmeticError):
    def __init__(self, message: str, danskin, finite_difference):
        super().__init__(message)
        self.danskin = danskin
        self.finite_difference = finite_difference


SIGMA_THRESHOLD = 1e-6
NEGATIVE_THRESHOLD = 1e-6

CAVEAT = ("A finite suite certifies only necessary conditions for stability. "
          "It can certify INSTABILITY definitively (some beta or M below -1e-6). "
          "sigma_hat is an empirical estimate over the suite, never a certificate "
          "of uniform polystability; being a minimum over finitely many measures "
          "it bounds the best uniform constant from above.")


def _probability(mu: AtomicMeasure) -> AtomicMeasure:
    mu = mu.dropping_zeros()
    if any(m < 0 for _, m in mu):
        raise ValueError("divisorial measures have nonnegative masses")
    tot = mu.total
    if isinstance(tot, float):
        if abs(tot - 1) > 1e-12:
            raise ValueError(f"divisorial measure must have mass 1, got {tot}")
    elif tot != 1:
        raise ValueError(f"divisorial measure must have mass 1, got {tot}")
    return mu


def _pieces(P: HPolytope, xis, t):
    return [(xi, -P.min_linear(xi) + ti) for xi, ti in zip(xis, t)]


def filtration_volume(P: HPolytope, valuations: Sequence[Sequence], t: Sequence) -> Fraction:
    """``S(t) = vol(P)^{-1} int_0^inf vol{alpha in P : g_t(alpha) >= lam} dlam``.

    The superlevel volume is a polynomial of degree ``n`` between consecutive
    values of ``g_t`` at vertices of its subdivision; each piece is
    integrated exactly from ``n + 1`` samples.
    """
    xis = [rvec(x) for x in valuations]
    t = [as_rational(x) for x in t]
    if len(xis) != len(t):
        raise ValueError("one offset per valuation")
    if any(x < 0 for x in t):
        raise ValueError("offsets must be nonnegative")
    pieces = _pieces(P, xis, t)
    g = PLConcave(P, pieces)
    n = P.dim
    vol = P.volume
    lo = min(g.vertex_values.values())
    breaks = sorted(set([ZERO, lo] + [x for x in g.vertex_values.values() if x >= lo]))
    # below min g the whole polytope survives
    total = lo * vol
    for a, b in zip(breaks, breaks[1:]):
        if b <= lo:
            continue
        a = max(a, lo)
        nodes = [Fraction(j, n) for j in range(n + 1)] if n else [ZERO]
        vals = []
        for u in nodes:
            lam = a + (b - a) * u
            cut = clip(P, [(xi, c - lam) for xi, c in pieces])
            vals.append(cut.volume if cut is not EMPTY else ZERO)
        total += (b - a) * _integrate_poly_samples(nodes, vals)
    return total / vol


def _s_cells(P: HPolytope, xis, t) -> Fraction:
    """``S(t)`` from the cell decomposition of ``g_t`` (for ``g_t >= 0``)."""
    g = PLConcave(P, _pieces(P, xis, t))
    one = Weight.constant(P.dim)
    return sum((c.polytope.integrate(Weight.affine(c.slope, c.const)) for c in g.cells()), ZERO) / P.volume


@dataclass
class JResult:
    value: object
    t: tuple
    valuations: tuple
    exact: bool
    residual: float

    def __iter__(self):
        return iter((self.value, self.t))


def j_energy(P: HPolytope, mu: AtomicMeasure, budget: int = 200) -> JResult:
    """``J(mu) = sup_{t >= 0} (S(t) - a.t)`` with its optimizer (``min t = 0``)."""
    mu = _probability(mu)
    xis = list(mu.atoms)
    a = [mu.atoms[x] for x in xis]
    if len(xis) == 1:
        t = (ZERO,)
        exact, res = True, 0.0
    else:
        vol = integrate_weight(P, Weight.constant(P.dim))
        sol = solve_ma(P, None, Weight.constant(P.dim), mu.scaled(vol), budget=budget, full=True)
        raw = sol.t
        m = min(raw)
        t = tuple(x - m for x in raw)
        exact, res = sol.exact, sol.residual
    S = _s_cells(P, xis, t)
    val = S - sum((ai * ti for ai, ti in zip(a, t)), ZERO)
    return JResult(val, t, tuple(xis), exact, res)


# ----------------------------------------------------------------------

@dataclass
class BetaResult:
    value: object
    entropy_term: object
    derivative: object
    derivative_fd: float | None
    j_value: object
    t: tuple

    def to_json(self) -> dict:
        return {"beta": _num(self.value), "entropy_term": _num(self.entropy_term),
                "dJ_ds": _num(self.derivative),
                "dJ_ds_finite_difference": self.derivative_fd,
                "J": _num(self.j_value), "t": [_num(x) for x in self.t]}


def _deformed_s(P: HPolytope, xis, t, s) -> tuple[Fraction, Fraction]:
    Ps = deform_canonical(P, s, strict=False)
    g = PLConcave(Ps, _pieces(Ps, xis, t))
    num = sum((c.polytope.integrate(Weight.affine(c.slope, c.const)) for c in g.cells()), ZERO)
    return num, Ps.volume


def danskin_derivative(P: HPolytope, xis, t) -> Fraction:
    """``d/ds|_0 S_{P_s}(t)`` at fixed ``t`` by exact interpolation in ``s``.

    Numerator and volume are polynomials of degree ``n + 1`` and ``n`` on a
    one-sided window ``[0, h]``; an extra node certifies the window.
    """
    n = P.dim
    m = n + 2
    h = deformation_step(P, strict=False)
    for _ in range(30):
        nodes = [h * Fraction(j, m) for j in range(m + 1)]
        try:
            samples = [_deformed_s(P, xis, t, s) for s in nodes]
        except CombinatorialCollapse:
            h /= 2
            continue
        nums = [x for x, _ in samples]
        vols = [y for _, y in samples]
        if _interp_value(nodes[:-1], nums[:-1], nodes[-1]) == nums[-1] and \
                _interp_value(nodes[:-1], vols[:-1], nodes[-1]) == vols[-1]:
            dn = _interp_derivative_at_zero(nodes[:-1], nums[:-1])
            dv = _interp_derivative_at_zero(nodes[:-1], vols[:-1])
            return (dn * vols[0] - nums[0] * dv) / vols[0] ** 2
        h /= 2
    raise CombinatorialCollapse("S_{P_s}(t) is not polynomial on any tested window")


def beta(P: HPolytope, fan: FanData | None, mu: AtomicMeasure, check: bool = True,
         fd_step=Fraction(1, 1000), tol: float = 1e-4) -> BetaResult:
    """``beta(mu) = sum a_i A_X(v_i) + d/ds|_0 J_{L + s K_X}(mu)``.

    The derivative uses Danskin's rule at the optimizer of the undeformed
    problem; with ``check`` it is compared with a symmetric difference of
    re-optimized ``J`` at ``s = +-fd_step``.
    """
    fan = _resolve_fan(P, fan)
    mu = _probability(mu)
    jr = j_energy(P, mu)
    xis = list(jr.valuations)
    a = [mu.atoms[x] for x in xis]
    ent = sum((ai * log_discrepancy(fan, xi) for ai, xi in zip(a, xis)), ZERO)
    if all(all(c == 0 for c in xi) for xi in xis):
        return BetaResult(ZERO, ZERO, ZERO, 0.0 if check else None, jr.value, jr.t)
    dj = danskin_derivative(P, xis, jr.t)
    fd = None
    if check:
        step = as_rational(fd_step)
        while True:
            try:
                jp = j_energy(deform_canonical(P, step, strict=False), mu).value
                jm = j_energy(deform_canonical(P, -step, strict=False), mu).value
                break
            except CombinatorialCollapse:
                step /= 2
                if step < Fraction(1, 2 ** 40):
                    raise
        fd = float(jp - jm) / (2 * float(step))
        if abs(fd - float(dj)) > tol:
            raise DerivativeMismatch(f"Danskin derivative {float(dj):.8g} and finite difference "
                                     f"{fd:.8g} disagree", dj, fd)
    return BetaResult(ent + dj, ent, dj, fd, jr.value, jr.t)


# ----------------------------------------------------------------------

def barycenter(P: HPolytope) -> tuple[Fraction, ...]:
    vol = P.volume
    return tuple(P.integrate(Weight.coordinate(P.dim, i)) / vol for i in range(P.dim))


def twist_shift(P: HPolytope, mu: AtomicMeasure, xi: Sequence) -> Fraction:
    """``J(xi * mu) - J(mu)``.

    Twisting replaces ``g_t`` by ``g_t + <., xi>`` after re-centering each
    piece, so the difference is ``<bary_P, xi> - sum a_i (min_P <., xi_i + xi> - min_P <., xi_i>)``.
    """
    xi = rvec(xi)
    out = dot(barycenter(P), xi)
    for eta, a in mu:
        out -= a * (P.min_linear(tuple(x + y for x, y in zip(eta, xi))) - P.min_linear(eta))
    return out


def twist_infimum(P: HPolytope, mu: AtomicMeasure, j_value=None) -> tuple[object, tuple]:
    """``inf_xi J(xi * mu)`` and a minimizer.

    The objective is ``J(mu)`` plus a convex piecewise-linear function of
    ``xi``, so the infimum is a linear program (one MA solve in total).
    """
    from scipy.optimize import linprog
    mu = _probability(mu)
    if j_value is None:
        j_value = j_energy(P, mu).value
    n = P.dim
    xis = list(mu.atoms)
    a = [float(mu.atoms[x]) for x in xis]
    r = len(xis)
    bary = [float(x) for x in barycenter(P)]
    c = np.array(bary + a)
    A, b = [], []
    for i, eta in enumerate(xis):
        for w in P.vertices:
            row = [-float(x) for x in w] + [0.0] * r
            row[n + i] = -1.0
            A.append(row)
            b.append(float(dot(w, eta)))
    bounds = [(None, None)] * (n + r)
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), bounds=bounds, method="highs")
    if res.status != 0:
        raise NonConvergence(f"twist LP failed: {res.message}")
    lp_val = float(j_value) + res.fun + sum(ai * float(P.min_linear(eta)) for ai, eta in zip(a, xis))
    best = None
    for den in (1, 10, 10 ** 3, 10 ** 6):
        xi = tuple(Fraction(float(x)).limit_denominator(den) for x in res.x[:n])
        val = j_value + twist_shift(P, mu, xi)
        if best is None or val < best[0]:
            best = (val, xi)
        if float(val) <= lp_val + 1e-12:
            break
    return best


def j_twisted(P: HPolytope, mu: AtomicMeasure, xi: Sequence):
    """``J(xi * mu)`` by a fresh inversion (reference for :func:`twist_infimum`)."""
    return j_energy(P, _probability(mu).twist(xi)).value


# ----------------------------------------------------------------------

@dataclass
class StabilityReport:
    futaki: list
    mabuchi: list
    betas: list
    twists: list
    sigma_hat: object
    sigma_excluded: list
    unstable: bool
    witnesses: list
    futaki_nonzero: bool
    caveat: str = CAVEAT
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "futaki": [{"xi": [rational_str(x) for x in xi], "value": _num(val)} for xi, val in self.futaki],
            "mabuchi": [rep.to_json() for rep in self.mabuchi],
            "beta": [b.to_json() for b in self.betas],
            "twist_infimum": [{"value": _num(v), "xi": [rational_str(x) for x in xi]} for v, xi in self.twists],
            "sigma_hat": None if self.sigma_hat is None else _num(self.sigma_hat),
            "sigma_excluded": self.sigma_excluded,
            "verdict": {"unstable": self.unstable, "futaki_nonzero": self.futaki_nonzero,
                        "witnesses": self.witnesses},
            "caveat": self.caveat,
            "notes": list(self.notes),
        }


def verdict(P: HPolytope, fan: FanData | None, v: Weight, w: Weight, suite: dict,
            check: bool = True) -> StabilityReport:
    """Evaluate a finite suite of directions, configurations and measures."""
    fan = _resolve_fan(P, fan)
    directions = [rvec(x) for x in suite.get("directions", [])]
    configs = list(suite.get("configs", []))
    measures = list(suite.get("measures", []))
    if not (directions or configs or measures):
        raise ValueError("stability suite is empty")
    futs = [(xi, futaki(P, fan, v, w, xi)) for xi in directions]
    reps = [mabuchi(P, fan, v, w, g) for g in configs]
    betas, twists = [], []
    for mu in measures:
        b = beta(P, fan, mu, check=check)
        betas.append(b)
        twists.append(twist_infimum(P, mu, j_value=b.j_value))
    witnesses = []
    for k, rep in enumerate(reps):
        if float(rep.M_vw) < -NEGATIVE_THRESHOLD:
            witnesses.append({"kind": "config", "index": k, "M": _num(rep.M_vw)})
    for k, b in enumerate(betas):
        if float(b.value) < -NEGATIVE_THRESHOLD:
            witnesses.append({"kind": "measure", "index": k, "beta": _num(b.value)})
    fut_nonzero = False
    for xi, val in futs:
        if abs(float(val)) > 1e-9:
            fut_nonzero = True
            witnesses.append({"kind": "direction", "xi": [rational_str(x) for x in xi], "futaki": _num(val)})
    ratios, excluded = [], []
    for k, (b, (jv, _)) in enumerate(zip(betas, twists)):
        if float(jv) > SIGMA_THRESHOLD:
            ratios.append(b.value / jv if not isinstance(jv, float) else float(b.value) / jv)
        else:
            excluded.append(k)
    sigma = min(ratios, key=float) if ratios else None
    rep = StabilityReport(futs, reps, betas, twists, sigma, excluded,
                          unstable=bool(witnesses) and any(wt["kind"] != "direction" for wt in witnesses)
                          or fut_nonzero,
                          witnesses=witnesses, futaki_nonzero=fut_nonzero)
    if excluded:
        rep.notes.append(f"measures {excluded} have twisted J below {SIGMA_THRESHOLD} (product-degenerate) "
                         "and are excluded from sigma_hat")
    return rep
