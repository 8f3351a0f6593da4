import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from toric_kstab.dh import degree_derivative, integrate_weight
from toric_kstab.functionals import (boundary_integral, donaldson_oracle, energy_weighted,
                                     entropy_weighted, extremal_function, futaki,
                                     integrate_potential, mabuchi, ricci_energy, scalar_mean)
from toric_kstab.geometry import HPolytope
from toric_kstab.measures import ma_weighted
from toric_kstab.potentials import LinearPath, PLConcave, evaluate_potential, scale_action
from toric_kstab.presets import polytope
from toric_kstab.sampling import random_concave, random_polytope, random_weight
from toric_kstab.weights import Weight

half = F(1, 2)
ONE1 = Weight.constant(1)


def test_energy_examples(unit_interval):
    P = unit_interval
    assert energy_weighted(P, None, ONE1, PLConcave.zero(P)) == 0
    assert energy_weighted(P, None, ONE1, PLConcave.linear(P, (1,))) == half
    assert energy_weighted(P, None, Weight.coordinate(1, 0), PLConcave.linear(P, (1,))) == F(1, 3)


def test_p1_ledger(interval2):
    P = interval2
    lin, crease = PLConcave.linear(P, (1,)), PLConcave(P, [((1,), 0), ((0,), 1)])
    assert ricci_energy(P, None, ONE1, PLConcave.zero(P)) == 0
    assert ricci_energy(P, None, ONE1, lin) == -4
    assert ricci_energy(P, None, ONE1, crease) == -2
    assert entropy_weighted(P, None, ONE1, PLConcave.zero(P)) == 0
    assert entropy_weighted(P, None, ONE1, lin) == 2
    assert entropy_weighted(P, None, ONE1, crease) == 1
    a = mabuchi(P, None, ONE1, ONE1, lin)
    assert (a.H_v, a.R_v, a.E_vw, a.M_vw) == (2, -4, 2, 0)
    b = mabuchi(P, None, ONE1, ONE1, crease)
    assert (b.H_v, b.R_v, b.E_vw, b.M_vw) == (1, -2, F(3, 2), half)
    assert b.translation_invariant and b.donaldson == half
    assert mabuchi(P, None, ONE1, ONE1, PLConcave.zero(P)).M_vw == 0
    assert futaki(P, None, ONE1, ONE1, (1,)) == 0


def test_extremal_examples(unit_interval, interval2):
    r = extremal_function(unit_interval, None, ONE1, ONE1)
    assert r.slope == (0,) and r.const == 2 and r.residual < 1e-12
    r = extremal_function(interval2, None, ONE1, ONE1)
    assert r.slope == (0,) and r.const == 1


def test_extremal_symmetric_square():
    P = HPolytope.box([-1, -1], [1, 1])
    v = Weight(2, {(0, 0): 1, (2, 0): F(1, 2), (0, 2): F(1, 3)})
    r = extremal_function(P, None, v, Weight.constant(2))
    assert r.slope == (0, 0)
    # the constant part restores mass balance on its own
    assert r.const * integrate_weight(P, v) == -degree_derivative(P, v)


def test_extremal_kills_futaki():
    P = polytope("f1")
    one = Weight.constant(2)
    r = extremal_function(P, None, one, one)
    assert r.residual < 1e-8
    wl = r.weight(2)
    for e in ((1, 0), (0, 1)):
        assert abs(float(futaki(P, None, one, wl, e))) < 1e-7


def test_preset_futaki_values():
    for name, want in [("p2", [0, 0]), ("p1xp1", [0, 0]), ("f1", [F(-2, 9), F(4, 9)]),
                       ("blp2", [F(-2, 3), F(-2, 3)])]:
        P = polytope(name)
        v, w = Weight.constant(2), Weight.constant(2, scalar_mean(P))
        assert [futaki(P, None, v, w, e) for e in ((1, 0), (0, 1))] == want


def _case(seed, dims=(1, 2), pieces=3):
    rng = random.Random(seed)
    n = rng.choice(dims)
    P = random_polytope(rng, n)
    return rng, P, random_concave(rng, P, max_pieces=pieces)


@given(st.integers(0, 10 ** 6))
def test_energy_matches_integral_oracle(seed):
    rng, P, g = _case(seed)
    v = random_weight(rng, P.dim)
    assert energy_weighted(P, None, v, g) == integrate_potential(g, v)


@given(st.integers(0, 10 ** 6))
def test_entropy_plus_ricci_is_boundary_term(seed):
    # with v = 1 the twisted energy R and the entropy H combine to minus the boundary integral
    _, P, g = _case(seed)
    one = Weight.constant(P.dim)
    H = entropy_weighted(P, None, one, g)
    R = ricci_energy(P, None, one, g)
    assert H + R == -boundary_integral(g, one)


@given(st.integers(0, 10 ** 6), st.sampled_from([F(1, 3), 2, 5]))
def test_scaling_homogeneity(seed, c):
    rng, P, g = _case(seed)
    v = random_weight(rng, P.dim, positive=True)
    w = random_weight(rng, P.dim, degree=1)
    a = mabuchi(P, None, v, w, g)
    b = mabuchi(P, None, v, w, scale_action(g, c))
    for x, y in ((a.E_v, b.E_v), (a.R_v, b.R_v), (a.H_v, b.H_v), (a.M_vw, b.M_vw)):
        assert y == c * x


@given(st.integers(0, 10 ** 6), st.integers(-3, 3))
def test_translation_defect(seed, k):
    rng, P, g = _case(seed)
    v = random_weight(rng, P.dim, positive=True)
    w = random_weight(rng, P.dim, degree=1)
    a = mabuchi(P, None, v, w, g)
    b = mabuchi(P, None, v, w, g + k)
    assert b.M_vw - a.M_vw == k * (a.deg_vw + a.deg_v_prime_K)


@given(st.integers(0, 10 ** 6))
def test_donaldson_oracle(seed):
    rng = random.Random(seed)
    P = random_polytope(rng, 2)
    g = random_concave(rng, P)
    one = Weight.constant(2)
    rep = mabuchi(P, None, one, Weight.constant(2, scalar_mean(P)), g)
    assert rep.M_vw == donaldson_oracle(P, g) == rep.donaldson


@given(st.integers(0, 10 ** 6))
def test_futaki_linearity(seed):
    rng = random.Random(seed)
    n = rng.choice([1, 2])
    P = random_polytope(rng, n)
    v = random_weight(rng, n, positive=True)
    w = random_weight(rng, n, degree=1)
    a = tuple(rng.randint(-2, 2) for _ in range(n))
    b = tuple(rng.randint(-2, 2) for _ in range(n))
    ab = tuple(x + y for x, y in zip(a, b))
    fa, fb, fab = (futaki(P, None, v, w, x) for x in (a, b, ab))
    assert abs(float(fab - fa - fb)) < 1e-8
    assert futaki(P, None, v, w, tuple(-x for x in a)) == -fa


def test_futaki_symmetric_vanishes():
    P = HPolytope.box([-1, -2], [1, 2])
    v = Weight(2, {(0, 0): 2, (2, 0): 1, (1, 1): F(1, 3)})
    w = Weight(2, {(0, 0): 1, (0, 2): F(1, 5)})
    for e in ((1, 0), (0, 1), (1, -1)):
        assert futaki(P, None, v, w, e) == 0


def el_orders(P, v, g, h, s, steps=(F(1, 64), F(1, 128))):
    """Richardson orders of the central difference of E along the path from g to h."""
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


@settings(max_examples=6)
@given(st.integers(0, 10 ** 6), st.sampled_from([F(1, 4), F(1, 2), F(3, 4)]))
def test_euler_lagrange_richardson(seed, s):
    rng, P, g = _case(seed, pieces=2)
    h = random_concave(rng, P, max_pieces=2)
    v = random_weight(rng, P.dim, positive=True)
    assert el_orders(P, v, g, h, s) >= 1.9
