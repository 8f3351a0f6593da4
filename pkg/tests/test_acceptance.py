"""Acceptance criteria 1-11, one test per criterion.

Each test records a PASS/FAIL line that the terminal summary prints (see
conftest.py); ``python3 tests/test_acceptance.py`` prints the same lines
without pytest.
"""
import math
import random
from fractions import Fraction as F

import pytest

from toric_kstab.dh import degree_derivative, integrate_weight
from toric_kstab.functionals import (donaldson_oracle, energy_weighted, extremal_function, futaki,
                                     mabuchi, scalar_mean)
from toric_kstab.geometry import HPolytope
from toric_kstab.measures import (AtomicMeasure, d1_product, ma_twisted_canonical, ma_weighted,
                                  solve_ma)
from toric_kstab.potentials import (LinearPath, PLConcave, concave_envelope, evaluate_convex,
                                    evaluate_potential, scale_action)
from toric_kstab.presets import polytope
from toric_kstab.sampling import (random_concave, random_convex, random_polytope, random_rational,
                                  random_weight)
from toric_kstab.stability import beta, j_energy
from toric_kstab.weights import Weight

RESULTS: dict[int, tuple[bool, str]] = {}
half = F(1, 2)
ONE1 = Weight.constant(1)


def record(k, ok, detail):
    RESULTS[k] = (bool(ok), detail)
    return ok


def report_lines():
    return [f"ACCEPTANCE {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}" for k, (ok, detail) in sorted(RESULTS.items())]


def rng_for(k):
    return random.Random(1000 + k)


# 1 ---------------------------------------------------------------------------

def test_01_mass_conservation():
    rng = rng_for(1)
    bad = 0
    for _ in range(200):
        n = rng.choice([1, 2, 2, 3])
        P = random_polytope(rng, n)
        g = random_concave(rng, P, max_pieces=8)
        v = random_weight(rng, n, degree=2)
        if ma_weighted(P, None, v, g).total != integrate_weight(P, v):
            bad += 1
        elif ma_twisted_canonical(P, None, v, g).total != degree_derivative(P, v):
            bad += 1
    assert record(1, bad == 0, f"exact totals on 200 instances, {bad} mismatches")


# 2 ---------------------------------------------------------------------------

def test_02_p1_ledger():
    P = HPolytope.box([0], [2])
    a = mabuchi(P, None, ONE1, ONE1, PLConcave.linear(P, (1,)))
    b = mabuchi(P, None, ONE1, ONE1, PLConcave(P, [((1,), 0), ((0,), 1)]))
    got = [a.H_v, a.R_v, a.E_vw, a.M_vw, b.H_v, b.R_v, b.E_vw, b.M_vw]
    want = [2, -4, 2, 0, 1, -2, F(3, 2), F(1, 2)]
    err = max(abs(float(x - y)) for x, y in zip(got, want))
    assert record(2, err <= 1e-9, f"max deviation {err:.1e} (values {', '.join(map(str, got))})")


# 3 ---------------------------------------------------------------------------

def test_03_donaldson_oracle():
    rng = rng_for(3)
    worst = 0.0
    for _ in range(100):
        P = random_polytope(rng, 2)
        g = random_concave(rng, P)
        rep = mabuchi(P, None, Weight.constant(2), Weight.constant(2, scalar_mean(P)), g)
        worst = max(worst, abs(float(rep.M_vw - donaldson_oracle(P, g))))
    assert record(3, worst < 1e-8, f"max |M - oracle| = {worst:.1e} on 100 surfaces")


# 4 ---------------------------------------------------------------------------

def test_04_futaki_character():
    rng = rng_for(4)
    worst = 0.0
    for _ in range(20):
        n = rng.choice([1, 2])
        P = random_polytope(rng, n)
        v = random_weight(rng, n, positive=True)
        w = random_weight(rng, n, degree=1)
        a = tuple(rng.randint(-2, 2) for _ in range(n))
        b = tuple(rng.randint(-2, 2) for _ in range(n))
        fa, fb = futaki(P, None, v, w, a), futaki(P, None, v, w, b)
        fab = futaki(P, None, v, w, tuple(x + y for x, y in zip(a, b)))
        worst = max(worst, abs(float(fab - fa - fb)))
    sym = 0.0
    for lo, hi in (([-1], [1]), ([-1, -2], [1, 2]), ([-1, -1, -1], [1, 1, 1])):
        P = HPolytope.box(lo, hi)
        n = P.dim
        v = Weight(n, {(0,) * n: 2, tuple(2 if i == 0 else 0 for i in range(n)): F(1, 3)})
        w = Weight(n, {(0,) * n: 1, tuple(2 if i == n - 1 else 0 for i in range(n)): F(1, 5)})
        for i in range(n):
            e = tuple(int(j == i) for j in range(n))
            sym = max(sym, abs(float(futaki(P, None, v, w, e))))
    ok = worst < 1e-8 and sym < 1e-10
    assert record(4, ok, f"additivity defect {worst:.1e} on 20 instances, symmetric |Fut| {sym:.1e}")


# 5 ---------------------------------------------------------------------------

def test_05_scaling():
    rng = rng_for(5)
    worst, h_exact = 0.0, True
    for _ in range(8):
        n = rng.choice([1, 2])
        P = random_polytope(rng, n)
        g = random_concave(rng, P, max_pieces=3)
        v = random_weight(rng, n, positive=True)
        w = random_weight(rng, n, degree=1)
        a = mabuchi(P, None, v, w, g)
        for c in (F(1, 3), 2, 5):
            b = mabuchi(P, None, v, w, scale_action(g, c))
            for x, y in ((a.E_v, b.E_v), (a.R_v, b.R_v), (a.M_vw, b.M_vw)):
                worst = max(worst, abs(float(y - c * x)) / max(1.0, abs(float(c * x))))
            h_exact &= b.H_v == c * a.H_v
    ok = worst <= 1e-9 and h_exact
    assert record(5, ok, f"max relative defect {worst:.1e} for E, R, M; H exact: {h_exact}")


# 6 ---------------------------------------------------------------------------

def el_order(P, v, g, h, s, steps=(F(1, 64), F(1, 128))):
    path = LinearPath(g, h)
    mu = ma_weighted(P, None, v, path.at(s))
    exact = mu.pair(lambda xi: evaluate_potential(h, xi) - evaluate_potential(g, xi))
    errs = []
    for k in steps:
        d = (energy_weighted(P, None, v, path.at(s + k)) - energy_weighted(P, None, v, path.at(s - k))) / (2 * k)
        errs.append(abs(d - exact))
    if errs[1] == 0:
        return math.inf if errs[0] == 0 else -math.inf
    return math.log2(errs[0] / errs[1])


def test_06_euler_lagrange():
    rng = rng_for(6)
    orders = []
    svals = (F(1, 4), F(1, 2), F(3, 4))
    for i in range(50):
        n = rng.choice([1, 2])
        P = random_polytope(rng, n)
        g = random_concave(rng, P, max_pieces=3)
        h = random_concave(rng, P, max_pieces=3)
        v = random_weight(rng, n, positive=True)
        orders.append(el_order(P, v, g, h, svals[i % 3]))
    worst = min(orders)
    exact = sum(1 for o in orders if o == math.inf)
    assert record(6, worst >= 1.9, f"min Richardson order {worst:.3f} on 50 instances "
                                   f"({exact} with zero difference error)")


# 7 ---------------------------------------------------------------------------

def legendre_beta_fixtures():
    I = HPolytope.box([0], [1])
    j0 = j_energy(I, AtomicMeasure([((0,), 1)])).value
    j1 = j_energy(I, AtomicMeasure([((1,), 1)])).value
    b1 = beta(HPolytope.box([0], [2]), None, AtomicMeasure([((1,), 1)]))
    T = polytope("p2")
    rays = [beta(T, None, AtomicMeasure([(r, 1)])) for r in ((1, 0), (0, 1), (-1, -1))]
    return j0, j1, b1, rays


def test_07_legendre_beta_attainable_parts():
    j0, j1, b1, rays = legendre_beta_fixtures()
    assert j0 == 0
    assert abs(float(j1) - 0.5) <= 1e-6
    assert abs(float(b1.value)) <= 1e-5
    assert all(abs(r.derivative_fd - float(r.derivative)) < 1e-4 for r in rays)


@pytest.mark.xfail(strict=True, reason="beta of a toric ray valuation on P^2 is its Futaki invariant, "
                                       "which vanishes; the required strict bound 1e-3 cannot hold")
def test_07_legendre_beta():
    j0, j1, b1, rays = legendre_beta_fixtures()
    agree = max(abs(r.derivative_fd - float(r.derivative)) for r in rays)
    ok = (j0 == 0 and abs(float(j1) - 0.5) <= 1e-6 and abs(float(b1.value)) <= 1e-5
          and all(float(r.value) > 1e-3 for r in rays) and agree < 1e-4)
    record(7, ok, f"J(triv) = {j0}, J(v1) = {j1}, beta(P1) = {b1.value}, "
                  f"P2 ray betas = {[str(r.value) for r in rays]} (need > 1e-3), "
                  f"Danskin vs difference {agree:.1e}")
    assert ok


# 8 ---------------------------------------------------------------------------

def test_08_ma_inversion():
    rng = rng_for(8)
    worst, support_ok = 0.0, True
    for _ in range(50):
        n = rng.choice([1, 2, 2])
        P = random_polytope(rng, n)
        g = random_concave(rng, P, max_pieces=5)
        one = Weight.constant(n)
        mu = ma_weighted(P, None, one, g)
        nu = ma_weighted(P, None, one, solve_ma(P, None, one, mu))
        support_ok &= set(nu.atoms) == set(mu.atoms)
        worst = max([worst] + [abs(float(nu[x] - mu[x])) for x in mu.atoms])
    ok = worst < 1e-6 and support_ok
    assert record(8, ok, f"max atom residual {worst:.1e}, exact support match: {support_ok}")


# 9 ---------------------------------------------------------------------------

def test_09_envelope_orthogonality():
    rng = rng_for(9)
    nonzero = 0
    for _ in range(50):
        n = rng.choice([1, 2, 2])
        P = random_polytope(rng, n)
        f = random_convex(rng, P)
        env = concave_envelope(f).envelope
        mu = ma_weighted(P, None, Weight.constant(n), env)
        pairing = mu.pair(lambda xi: evaluate_convex(f, xi) - evaluate_potential(env, xi))
        nonzero += not (isinstance(pairing, F) and pairing == 0)
    assert record(9, nonzero == 0, f"{50 - nonzero}/50 pairings are an exact rational zero")


# 10 --------------------------------------------------------------------------

def test_10_product_distance():
    rng = rng_for(10)
    sym_ok, worst = True, -math.inf
    for _ in range(100):
        n = rng.choice([1, 2])
        P = random_polytope(rng, n)
        a, b, c = (tuple(random_rational(rng) for _ in range(n)) for _ in range(3))
        dab, dba = d1_product(P, a, b), d1_product(P, b, a)
        sym_ok &= dab == dba
        worst = max(worst, float(d1_product(P, a, c) - dab - d1_product(P, b, c)))
    w1 = d1_product(HPolytope.box([0], [1]), (1,), (0,))
    w2 = d1_product(HPolytope.box([0, 0], [1, 1]), (1, 0), (0, 1))
    ok = sym_ok and worst <= 1e-12 and w1 == half and w2 == F(1, 3)
    assert record(10, ok, f"symmetric: {sym_ok}, max triangle excess {worst:.1e}, worked values {w1}, {w2}")


# 11 --------------------------------------------------------------------------

def test_11_extremal():
    rng = rng_for(11)
    cases = [(polytope(p), None, None) for p in ("p1_o1", "p1_o2", "p2", "p1xp1", "f1", "blp2")]
    for _ in range(4):
        P = random_polytope(rng, 2)
        cases.append((P, random_weight(rng, 2, positive=True), random_weight(rng, 2, degree=1, positive=True)))
    res_worst, fut_worst, presets_ok = 0.0, 0.0, True
    for P, v, w in cases:
        n = P.dim
        v = v or Weight.constant(n)
        w = w or Weight.constant(n)
        r = extremal_function(P, None, v, w)
        res_worst = max(res_worst, r.residual)
        wl = w * r.weight(n)
        for i in range(n):
            e = tuple(int(j == i) for j in range(n))
            fut_worst = max(fut_worst, abs(float(futaki(P, None, v, wl, e))))
    # symmetric data reproduce the constant presets
    for name, want in (("p1_o1", 2), ("p1_o2", 1), ("p2", 2), ("p1xp1", 2)):
        P = polytope(name)
        one = Weight.constant(P.dim)
        r = extremal_function(P, None, one, one)
        presets_ok &= all(x == 0 for x in r.slope) and r.const == want == scalar_mean(P)
    ok = res_worst < 1e-8 and fut_worst < 1e-7 and presets_ok
    assert record(11, ok, f"max residual {res_worst:.1e}, max |Fut| after substitution {fut_worst:.1e}, "
                          f"constant presets reproduced: {presets_ok}")


if __name__ == "__main__":
    import sys
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_") and not k.endswith("attainable_parts")]
    for t in tests:
        try:
            t()
        except AssertionError:
            pass
    print("\n".join(report_lines()))
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
