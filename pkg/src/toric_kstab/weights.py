"""Weight functions on the moment polytope.

A :class:`Weight` is ``poly(alpha) * exp(<c, alpha> + c0)`` where ``poly`` has
rational coefficients.  Pure polynomials (``c = None``) evaluate and integrate
exactly; the exponential factor covers soliton-type weights and is integrated
by Gauss-Legendre quadrature on collapsed simplex coordinates.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .rational import ONE, ZERO, as_rational, rational_str, rvec

Exps = tuple[int, ...]


class QuadratureError(ArithmeticError):
    """Raised when adaptive quadrature misses its tolerance."""

    def __init__(self, message: str, value: float, error: float):
        super().__init__(f"{message} (value={value!r}, achieved error={error:.3e})")
        self.value = value
        self.error = error


def _clean(poly: Mapping[Exps, Fraction]) -> dict[Exps, Fraction]:
    return {e: c for e, c in poly.items() if c != 0}


def _poly_mul(a: Mapping[Exps, Fraction], b: Mapping[Exps, Fraction]) -> dict[Exps, Fraction]:
    out: dict[Exps, Fraction] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, ZERO) + ca * cb
    return _clean(out)


class Weight:
    """``poly * exp(<exp_coeffs, alpha> + exp_offset)`` in ``nvars`` variables."""

    __slots__ = ("nvars", "poly", "exp_coeffs", "exp_offset", "claimed_positive",
                 "claimed_log_concave", "label")

    def __init__(self, nvars: int, poly: Mapping[Exps, object], exp_coeffs=None,
                 exp_offset=0, *, claimed_positive: bool | None = None,
                 claimed_log_concave: bool | None = None, label: str | None = None):
        self.nvars = nvars
        p = {}
        for e, c in poly.items():
            e = tuple(int(x) for x in e)
            if len(e) != nvars or any(x < 0 for x in e):
                raise ValueError(f"bad exponent vector {e} for {nvars} variables")
            p[e] = p.get(e, ZERO) + as_rational(c)
        self.poly = _clean(p)
        if exp_coeffs is not None:
            exp_coeffs = rvec(exp_coeffs)
            if len(exp_coeffs) != nvars:
                raise ValueError("exponential direction has wrong length")
            if all(x == 0 for x in exp_coeffs):
                exp_coeffs = None
        self.exp_coeffs = exp_coeffs
        self.exp_offset = as_rational(exp_offset)
        self.claimed_positive = claimed_positive
        self.claimed_log_concave = claimed_log_concave
        self.label = label

    # constructors -----------------------------------------------------
    @classmethod
    def constant(cls, nvars: int, c=1, **kw) -> "Weight":
        return cls(nvars, {(0,) * nvars: c}, **kw)

    @classmethod
    def coordinate(cls, nvars: int, i: int) -> "Weight":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def affine(cls, slope: Sequence, const=0) -> "Weight":
        n = len(slope)
        poly = {(0,) * n: const}
        for i, s in enumerate(slope):
            e = [0] * n
            e[i] = 1
            poly[tuple(e)] = s
        return cls(n, poly)

    @classmethod
    def explinear(cls, xi0: Sequence, scale=1) -> "Weight":
        """``exp(scale * <xi0, alpha>)``."""
        scale = as_rational(scale)
        xi0 = rvec(xi0)
        return cls(len(xi0), {(0,) * len(xi0): 1}, [scale * x for x in xi0],
                   claimed_positive=True, claimed_log_concave=True)

    # algebra ----------------------------------------------------------
    @property
    def is_polynomial(self) -> bool:
        return self.exp_coeffs is None

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.poly), default=0)

    def is_zero(self) -> bool:
        return not self.poly

    def __mul__(self, other) -> "Weight":
        if not isinstance(other, Weight):
            c = as_rational(other)
            return Weight(self.nvars, {e: c * v for e, v in self.poly.items()},
                          self.exp_coeffs, self.exp_offset)
        if other.nvars != self.nvars:
            raise ValueError("weights live in different dimensions")
        if self.exp_coeffs is None:
            ec = other.exp_coeffs
        elif other.exp_coeffs is None:
            ec = self.exp_coeffs
        else:
            ec = tuple(x + y for x, y in zip(self.exp_coeffs, other.exp_coeffs))
        return Weight(self.nvars, _poly_mul(self.poly, other.poly), ec,
                      self.exp_offset + other.exp_offset)

    __rmul__ = __mul__

    def __add__(self, other: "Weight") -> "Weight":
        if (self.exp_coeffs, self.exp_offset) != (other.exp_coeffs, other.exp_offset):
            raise ValueError("can only add weights sharing the exponential factor")
        p = dict(self.poly)
        for e, c in other.poly.items():
            p[e] = p.get(e, ZERO) + c
        return Weight(self.nvars, p, self.exp_coeffs, self.exp_offset)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Weight):
            return NotImplemented
        return (self.nvars, self.poly, self.exp_coeffs, self.exp_offset) == (
            other.nvars, other.poly, other.exp_coeffs, other.exp_offset)

    def __hash__(self):
        return hash((self.nvars, tuple(sorted(self.poly.items())), self.exp_coeffs,
                     self.exp_offset))

    def __repr__(self):
        if self.label:
            return f"Weight<{self.label}>"
        return f"Weight({self.nvars}, {self.poly!r}, exp={self.exp_coeffs!r})"

    # evaluation -------------------------------------------------------
    def poly_value(self, point: Sequence) -> Fraction:
        total = ZERO
        for e, c in self.poly.items():
            term = c
            for x, k in zip(point, e):
                if k:
                    term *= x ** k
            total += term
        return total

    def __call__(self, point: Sequence):
        """Exact rational value for polynomials, float otherwise."""
        val = self.poly_value(point)
        if self.exp_coeffs is None:
            return val
        arg = sum((c * x for c, x in zip(self.exp_coeffs, point)), self.exp_offset)
        return float(val) * math.exp(float(arg))

    def evaluate_many(self, pts: np.ndarray) -> np.ndarray:
        """Float evaluation at the rows of ``pts``."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[0])
        for e, c in self.poly.items():
            term = np.full(pts.shape[0], float(c))
            for i, k in enumerate(e):
                if k:
                    term = term * pts[:, i] ** k
            out += term
        if self.exp_coeffs is not None:
            arg = pts @ np.array([float(c) for c in self.exp_coeffs]) + float(self.exp_offset)
            out = out * np.exp(arg)
        return out

    def pullback(self, base: Sequence, mat: Sequence[Sequence]) -> "Weight":
        """Compose with ``alpha = base + mat @ t`` (``mat`` is ``nvars x k``)."""
        k = len(mat[0]) if mat and len(mat[0]) else 0
        if mat and len(mat) != self.nvars:
            raise ValueError("pullback matrix has wrong number of rows")
        linear = []
        for i in range(self.nvars):
            form = {(0,) * k: as_rational(base[i])}
            for j in range(k):
                if mat[i][j] != 0:
                    e = [0] * k
                    e[j] = 1
                    form[tuple(e)] = as_rational(mat[i][j])
            linear.append(_clean(form))
        powers: dict[tuple[int, int], dict] = {}

        def power(i, p):
            key = (i, p)
            if key not in powers:
                if p == 0:
                    powers[key] = {(0,) * k: ONE}
                else:
                    powers[key] = _poly_mul(power(i, p - 1), linear[i])
            return powers[key]

        out: dict[Exps, Fraction] = {}
        for e, c in self.poly.items():
            term = {(0,) * k: c}
            for i, p in enumerate(e):
                if p:
                    term = _poly_mul(term, power(i, p))
            for ee, cc in term.items():
                out[ee] = out.get(ee, ZERO) + cc
        ec = None
        off = self.exp_offset
        if self.exp_coeffs is not None:
            off += sum((c * as_rational(b) for c, b in zip(self.exp_coeffs, base)), ZERO)
            ec = [sum((self.exp_coeffs[i] * as_rational(mat[i][j]) for i in range(self.nvars)),
                      ZERO) for j in range(k)]
        return Weight(k, out, ec, off)

    # serialization ----------------------------------------------------
    def to_json(self) -> dict:
        terms = [{"coef": rational_str(c), "exps": list(e)} for e, c in sorted(self.poly.items())]
        if self.exp_coeffs is None:
            return {"type": "poly", "terms": terms}
        out = {"type": "explin", "xi0": [rational_str(c) for c in self.exp_coeffs],
               "scale": "1"}
        if terms != [{"coef": "1", "exps": [0] * self.nvars}] or self.exp_offset:
            out = {"type": "product", "terms": terms,
                   "xi0": [rational_str(c) for c in self.exp_coeffs],
                   "scale": "1", "offset": rational_str(self.exp_offset)}
        return out

    @classmethod
    def from_json(cls, data: Mapping, nvars: int | None = None) -> "Weight":
        kind = data.get("type")
        if kind == "poly":
            terms = data["terms"]
            if not terms:
                if nvars is None:
                    raise ValueError("empty polynomial needs an explicit dimension")
                return cls(nvars, {})
            n = len(terms[0]["exps"])
            if nvars is not None and n != nvars:
                raise ValueError(f"weight has {n} variables, polytope has {nvars}")
            return cls(n, {tuple(t["exps"]): as_rational(t["coef"]) for t in terms})
        if kind in ("explin", "product"):
            xi0 = rvec(data["xi0"])
            scale = as_rational(data.get("scale", 1))
            n = len(xi0)
            if nvars is not None and n != nvars:
                raise ValueError(f"weight has {n} variables, polytope has {nvars}")
            poly = {(0,) * n: 1}
            if kind == "product":
                poly = {tuple(t["exps"]): as_rational(t["coef"]) for t in data["terms"]}
            return cls(n, poly, [scale * x for x in xi0], data.get("offset", 0))
        raise ValueError(f"unknown weight type {kind!r}")


# ----------------------------------------------------------------------
# integration over the standard simplex {t >= 0, sum t <= 1}

def _monomial_simplex_moment(e: Exps) -> Fraction:
    k = len(e)
    num = 1
    for a in e:
        num *= math.factorial(a)
    return Fraction(num, math.factorial(sum(e) + k))


@lru_cache(maxsize=None)
def _gauss_legendre01(q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def _collapsed_rule(k: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre rule on the unit cube pushed to the k-simplex."""
    x, w = _gauss_legendre01(q)
    grids = np.meshgrid(*([x] * k), indexing="ij")
    wgrids = np.meshgrid(*([w] * k), indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=1)
    wt = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    t = np.empty_like(u)
    rest = np.ones(u.shape[0])
    for i in range(k):
        t[:, i] = rest * u[:, i]
        if i < k - 1:
            wt = wt * (1 - u[:, i]) ** (k - 1 - i)
        rest = rest * (1 - u[:, i])
    return t, wt


def integrate_standard_simplex(w: Weight, rtol: float = 1e-12, max_order: int = 128):
    """Integral of ``w`` over the standard ``w.nvars``-simplex."""
    k = w.nvars
    if w.is_polynomial:
        return sum((c * _monomial_simplex_moment(e) for e, c in w.poly.items()), ZERO)
    if k == 0:
        return w(())
    q = max(4, w.degree + 2)
    prev = None
    while q <= max_order:
        t, wt = _collapsed_rule(k, q)
        vals = w.evaluate_many(t) * wt
        val = math.fsum(vals.tolist())
        if prev is not None:
            err = abs(val - prev)
            if err <= rtol * max(abs(val), 1e-300) or err < 1e-300:
                return val
        prev = val
        q *= 2
    raise QuadratureError("simplex quadrature did not converge", prev, abs(val - prev))


def integrate_simplex(w: Weight, vertices: Sequence[Sequence], drop: int | None = None,
                      scale: Fraction = ONE):
    """Integrate ``w`` over the simplex with the given vertices.

    Full-dimensional simplices use Lebesgue measure.  For a ``k``-simplex in
    ``R^n`` with ``k < n`` pass ``drop`` = the coordinate omitted when
    projecting; the measure is then the projected Lebesgue measure times
    ``scale``.
    """
    v0 = vertices[0]
    n = len(v0)
    k = len(vertices) - 1
    mat = [[as_rational(vertices[j + 1][i]) - as_rational(v0[i]) for j in range(k)]
           for i in range(n)]
    if drop is None:
        if k != n:
            raise ValueError("lower-dimensional simplex needs a projection")
        jac_rows = mat
    else:
        jac_rows = [row for i, row in enumerate(mat) if i != drop]
    from .rational import det
    jac = abs(det(jac_rows)) * scale
    if jac == 0:
        return ZERO if w.is_polynomial else 0.0
    pulled = w.pullback(v0, mat) if n else w
    val = integrate_standard_simplex(pulled)
    if isinstance(val, float):
        return val * float(jac)
    return val * jac
