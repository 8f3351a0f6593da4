import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from toric_kstab.dh import degree_derivative, integrate_weight
from toric_kstab.geometry import HPolytope
from toric_kstab.measures import (AtomicMeasure, MassMismatch, d1_product, i_functional,
                                  ma_twisted_canonical, ma_weighted, solve_ma)
from toric_kstab.potentials import (PLConcave, concave_envelope, evaluate_convex,
                                    evaluate_potential, g_transform, scale_action)
from toric_kstab.sampling import (random_concave, random_convex, random_polytope,
                                  random_rational, random_weight)
from toric_kstab.weights import Weight

half = F(1, 2)
ONE1 = Weight.constant(1)


def crease(P, c=half):
    return PLConcave(P, [((1,), 0), ((0,), c)])


def test_ma_weighted_examples(unit_interval, unit_square):
    P = unit_interval
    assert ma_weighted(P, None, ONE1, PLConcave.zero(P)) == AtomicMeasure([((0,), 1)])
    assert ma_weighted(unit_square, None, Weight.constant(2), PLConcave.zero(unit_square)) == \
        AtomicMeasure([((0, 0), 2)])
    assert ma_weighted(P, None, ONE1, crease(P)) == AtomicMeasure([((1,), half), ((0,), half)])
    mu = ma_weighted(P, None, Weight.coordinate(1, 0), crease(P))
    assert mu == AtomicMeasure([((1,), F(1, 8)), ((0,), F(3, 8))])


def test_ma_weighted_kink_jump_oracle(unit_interval):
    # in one variable the mass at v_xi is the length of the interval where g' = xi
    g = PLConcave(unit_interval, [((2,), 0), ((1,), F(1, 4)), ((-1,), 1)])
    mu = ma_weighted(unit_interval, None, ONE1, g)
    G = g_transform(g)
    # G(eta) = max_w (g(w) - w eta) has kinks at eta = slope of g; mass = jump of -G'
    pts = sorted(G.pieces)
    want = {}
    for (a, ga), (b, gb) in zip(pts, pts[1:]):
        kink = ((gb - ga) / (b[0] - a[0]),)
        want[kink] = want.get(kink, 0) + (b[0] - a[0])
    assert want == {k: mu[k] for k in mu.atoms}


def test_twisted_examples(interval2, unit_square):
    Q = interval2
    for c in (half, 1, F(3, 2)):
        assert ma_twisted_canonical(Q, None, ONE1, crease(Q, c)) == AtomicMeasure([((1,), 0), ((0,), -2)])
    assert ma_twisted_canonical(Q, None, ONE1, PLConcave.linear(Q, (1,))).total == -2
    sq = ma_twisted_canonical(unit_square, None, Weight.constant(2), PLConcave.zero(unit_square))
    assert sq == AtomicMeasure([((0, 0), -8)])
    assert sq.total == degree_derivative(unit_square, Weight.constant(2))


def test_i_functional_examples(unit_interval):
    P = unit_interval
    h = PLConcave.linear(P, (1,))
    assert i_functional(P, None, ONE1, PLConcave.zero(P), h) == 1
    assert i_functional(P, None, ONE1, PLConcave.zero(P), scale_action(h, 2)) == 2


def test_d1_examples(unit_interval, unit_square):
    assert d1_product(unit_interval, (1,), (1,)) == 0
    assert d1_product(unit_interval, (1,), (0,)) == half
    assert d1_product(unit_square, (1, 0), (0, 1)) == F(1, 3)


def test_solve_ma_examples(unit_interval):
    P = unit_interval
    assert solve_ma(P, None, ONE1, AtomicMeasure([((0,), 1)])) == PLConcave.zero(P)
    got = solve_ma(P, None, ONE1, AtomicMeasure([((1,), half), ((0,), half)]))
    assert got == crease(P) + (-half)
    assert solve_ma(P, None, ONE1, AtomicMeasure([((1,), 1)])) == PLConcave.linear(P, (1,)) + (-1)


def test_solve_ma_rejects_bad_mass(unit_interval):
    with pytest.raises(MassMismatch):
        solve_ma(unit_interval, None, ONE1, AtomicMeasure([((1,), 2)]))
    with pytest.raises(MassMismatch):
        solve_ma(unit_interval, None, ONE1, AtomicMeasure([((1,), 2), ((0,), -1)]))


def test_measure_json_round_trip():
    mu = AtomicMeasure([((1, F(-1, 3)), F(2, 7)), ((0, 0), F(5, 7))])
    assert AtomicMeasure.from_json(mu.to_json()) == mu


def _case(seed, dims=(1, 2, 3), positive=False):
    rng = random.Random(seed)
    n = rng.choice(dims)
    P = random_polytope(rng, n)
    return rng, P, random_concave(rng, P, max_pieces=5), random_weight(rng, n, positive=positive)


@given(st.integers(0, 10 ** 6))
def test_mass_conservation(seed):
    _, P, g, v = _case(seed)
    assert ma_weighted(P, None, v, g).total == integrate_weight(P, v)
    assert ma_twisted_canonical(P, None, v, g).total == degree_derivative(P, v)


@given(st.integers(0, 10 ** 6))
def test_flux_matches_interpolation(seed):
    _, P, g, v = _case(seed, dims=(1, 2))
    a = ma_twisted_canonical(P, None, v, g, method="flux")
    b = ma_twisted_canonical(P, None, v, g, method="interpolate")
    assert a.dropping_zeros() == b.dropping_zeros()


@given(st.integers(0, 10 ** 6))
def test_comparison_bounds(seed):
    _, P, g, v = _case(seed, dims=(1, 2), positive=True)
    # v = c + sum of squares is bounded by its values at the vertices and below by c
    lo = v.poly[(0,) * P.dim]
    hi = max(v(w) for w in P.vertices)
    base = ma_weighted(P, None, Weight.constant(P.dim), g)
    mu = ma_weighted(P, None, v, g)
    for xi in base.atoms:
        assert lo * base[xi] <= mu[xi] <= hi * base[xi]


@given(st.integers(0, 10 ** 6))
def test_solve_ma_round_trip(seed):
    _, P, g, _ = _case(seed, dims=(1, 2))
    one = Weight.constant(P.dim)
    mu = ma_weighted(P, None, one, g)
    h = solve_ma(P, None, one, mu)
    nu = ma_weighted(P, None, one, h)
    assert set(nu.atoms) == set(mu.atoms)
    assert max(abs(float(nu[x] - mu[x])) for x in mu.atoms) < 1e-6


@given(st.integers(0, 10 ** 6))
def test_envelope_orthogonality(seed):
    rng = random.Random(seed)
    P = random_polytope(rng, rng.choice([1, 2]))
    f = random_convex(rng, P)
    env = concave_envelope(f).envelope
    mu = ma_weighted(P, None, Weight.constant(P.dim), env)
    assert mu.pair(lambda xi: evaluate_convex(f, xi) - evaluate_potential(env, xi)) == 0


@given(st.integers(0, 10 ** 6))
def test_i_functional_nonnegative(seed):
    rng, P, g, _ = _case(seed, dims=(1, 2))
    h = random_concave(rng, P)
    assert i_functional(P, None, Weight.constant(P.dim), g, h) >= 0


@given(st.integers(0, 10 ** 6))
def test_d1_axioms(seed):
    rng = random.Random(seed)
    n = rng.choice([1, 2])
    P = random_polytope(rng, n)
    a, b, c, s = (tuple(random_rational(rng) for _ in range(n)) for _ in range(4))
    assert d1_product(P, a, b) == d1_product(P, b, a) >= 0
    assert d1_product(P, a, c) <= d1_product(P, a, b) + d1_product(P, b, c)
    shift = lambda x: tuple(p + q for p, q in zip(x, s))
    assert d1_product(P, shift(a), shift(b)) == d1_product(P, a, b)
