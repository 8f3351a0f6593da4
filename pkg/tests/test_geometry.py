import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from toric_kstab.geometry import (EMPTY, GeometryError, HPolytope, facet_sigma, intersect,
                                  lp_support, volume)
from toric_kstab.sampling import random_polytope
from toric_kstab.toric import deform_canonical


def test_intersect_examples(unit_interval, unit_square):
    assert intersect(unit_interval, [((1,), F(-1, 2))]) == HPolytope.box([F(1, 2)], [1])
    assert intersect(unit_square, [((1, 1), -3)]) is EMPTY
    tri = intersect(unit_square, [((-1, -1), 1)])
    assert sorted(tri.vertices) == [(0, 0), (0, 1), (1, 0)]


def test_volume_examples(unit_interval, unit_square):
    assert volume(unit_interval) == 1
    assert volume(unit_square) == 1
    assert volume(HPolytope.from_vertices([(0, 0), (2, 0), (0, 2)])) == 2


def test_facet_sigma_examples(unit_interval, unit_square):
    assert set(facet_sigma(unit_interval).values()) == {1}
    assert set(facet_sigma(unit_square).values()) == {1}
    tri = HPolytope.from_vertices([(0, 0), (1, 0), (0, 1)])
    hyp = tri.normals.index((-1, -1))
    assert tri.facet_sigma[hyp] == 1


def test_lp_support_examples(unit_interval, unit_square):
    assert lp_support(unit_interval, (1,))[:2] == (1, 0)
    assert lp_support(unit_square, (1, 1))[:2] == (2, 0)
    tri = HPolytope.from_vertices([(0, 0), (2, 0), (0, 2)])
    hi, lo, argmax, argmin = lp_support(tri, (1, -1))
    assert (hi, lo) == (2, -2)
    assert argmax == [(2, 0)] and argmin == [(0, 2)]


def test_rejects_bad_input():
    with pytest.raises(GeometryError):
        HPolytope.from_halfspaces([(1, 0)], [0])  # unbounded
    with pytest.raises(GeometryError):
        HPolytope.from_halfspaces([(1,), (-1,)], [0, 0])  # a point
    with pytest.raises(GeometryError):
        HPolytope.from_json({"dim": 1, "facets": [{"normal": [0.5], "offset": "0"}]})
    with pytest.raises(GeometryError):
        HPolytope.from_json({"dim": 1, "facets": [], "colour": 1})


def test_redundant_facets_removed():
    P = HPolytope.from_halfspaces([(1,), (-1,), (1,)], [0, 1, 5])
    assert P.nfacets == 2


def test_json_round_trip(p2_triangle):
    assert HPolytope.from_json(p2_triangle.to_json()) == p2_triangle


@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2, 3]))
def test_hyperplane_split_preserves_volume(seed, n):
    rng = random.Random(seed)
    P = random_polytope(rng, n)
    u = tuple(rng.randint(-2, 2) for _ in range(n))
    if not any(u):
        u = (1,) + (0,) * (n - 1)
    c = F(rng.randint(-6, 6), rng.randint(1, 3))
    parts = [intersect(P, [(u, c)]), intersect(P, [(tuple(-x for x in u), -c)])]
    assert sum(volume(p) for p in parts) == volume(P)


@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3]))
def test_unimodular_invariance(seed, n):
    rng = random.Random(seed)
    P = random_polytope(rng, n)
    # elementary shear plus translation
    mat = [[int(i == j) for j in range(n)] for i in range(n)]
    mat[0][n - 1] = rng.randint(-3, 3)
    Q = P.transform(mat, [rng.randint(-2, 2) for _ in range(n)])
    assert volume(Q) == volume(P)
    assert sorted(Q.facet_sigma) == sorted(P.facet_sigma)


@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2, 3]))
def test_facet_sigma_is_volume_derivative(seed, n):
    rng = random.Random(seed)
    P = random_polytope(rng, n)
    # vol(P_s) is a polynomial of degree n near 0; recover its derivative from samples
    hs = [F(k, 1000) for k in range(1, n + 2)]
    vals = [deform_canonical(P, h, strict=False).volume for h in hs]
    nodes = [F(0)] + hs
    vals = [P.volume] + vals
    deriv = F(0)
    for i, si in enumerate(nodes):
        d = F(0)
        for j, sj in enumerate(nodes):
            if j == i:
                continue
            term = 1 / (si - sj)
            for k, sk in enumerate(nodes):
                if k not in (i, j):
                    term *= (-sk) / (si - sk)
            d += term
        deriv += vals[i] * d
    assert deriv == -sum(P.facet_sigma)
