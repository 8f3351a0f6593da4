"""Quick invariant suite behind ``toric-kstab selftest``."""
from __future__ import annotations

import random
from fractions import Fraction

from .dh import degree_derivative, integrate_weight
from .functionals import donaldson_oracle, mabuchi, scalar_mean
from .geometry import HPolytope
from .measures import AtomicMeasure, ma_twisted_canonical, ma_weighted, solve_ma
from .potentials import PLConcave, concave_envelope, evaluate_convex, g_transform, inv_g_transform
from .sampling import random_concave, random_convex, random_polytope, random_weight
from .stability import j_energy
from .weights import Weight


def _check(name, fn):
    try:
        ok, detail = fn()
    except Exception as exc:  # reported, not raised
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"name": name, "ok": bool(ok), "detail": str(detail)}


def run_selftest(seed: int = 0, instances: int = 8) -> list[dict]:
    rng = random.Random(seed)
    out = []

    def ledger():
        P = HPolytope.box([0], [2])
        one = Weight.constant(1)
        a = mabuchi(P, None, one, one, PLConcave.linear(P, (1,)))
        b = mabuchi(P, None, one, one, PLConcave(P, [((1,), 0), ((0,), 1)]))
        got = [a.H_v, a.R_v, a.E_vw, a.M_vw, b.H_v, b.R_v, b.E_vw, b.M_vw]
        want = [2, -4, 2, 0, 1, -2, Fraction(3, 2), Fraction(1, 2)]
        return got == want, [str(x) for x in got]

    out.append(_check("P1 ledger", ledger))

    cases = []
    for _ in range(instances):
        n = rng.choice([1, 2, 2])
        P = random_polytope(rng, n)
        cases.append((P, random_concave(rng, P), random_weight(rng, n)))

    def conservation():
        for P, g, v in cases:
            if ma_weighted(P, None, v, g).total != integrate_weight(P, v):
                return False, g
            if ma_twisted_canonical(P, None, v, g).total != degree_derivative(P, v):
                return False, g
        return True, f"{len(cases)} instances"

    out.append(_check("mass conservation", conservation))

    def roundtrip():
        for P, g, _ in cases:
            if inv_g_transform(g_transform(g), P) != g:
                return False, g
        return True, f"{len(cases)} instances"

    out.append(_check("g-transform round trip", roundtrip))

    def donaldson():
        for P, g, _ in cases:
            n = P.dim
            rep = mabuchi(P, None, Weight.constant(n), Weight.constant(n, scalar_mean(P)), g)
            if rep.M_vw != donaldson_oracle(P, g):
                return False, g
        return True, f"{len(cases)} instances"

    out.append(_check("Donaldson oracle", donaldson))

    def inversion():
        for P, g, _ in cases:
            one = Weight.constant(P.dim)
            mu = ma_weighted(P, None, one, g)
            h = solve_ma(P, None, one, mu)
            nu = ma_weighted(P, None, one, h)
            if set(nu.atoms) != set(mu.atoms) or max(abs(float(nu[x] - mu[x])) for x in mu.atoms) > 1e-6:
                return False, g
        return True, f"{len(cases)} instances"

    out.append(_check("MA inversion", inversion))

    def orthogonality():
        for P, _, _ in cases:
            f = random_convex(rng, P)
            env = concave_envelope(f).envelope
            from .potentials import evaluate_potential
            mu = ma_weighted(P, None, Weight.constant(P.dim), env)
            if mu.pair(lambda xi: evaluate_convex(f, xi) - evaluate_potential(env, xi)) != 0:
                return False, f
        return True, f"{len(cases)} instances"

    out.append(_check("envelope orthogonality", orthogonality))

    def legendre():
        P = HPolytope.box([0], [1])
        j0 = j_energy(P, AtomicMeasure([((0,), 1)])).value
        j1 = j_energy(P, AtomicMeasure([((1,), 1)])).value
        return j0 == 0 and j1 == Fraction(1, 2), (j0, j1)

    out.append(_check("Legendre fixtures", legendre))
    return out
