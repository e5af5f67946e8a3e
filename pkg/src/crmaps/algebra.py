"""Complex polynomial / rational-germ arithmetic and truncated power series.

Two layers live here:

* ``CPoly`` / ``RationalGerm`` / ``RationalMapGerm`` -- sparse exact
  representations of the explicit maps (coefficients are complex doubles).
* ``Jet`` -- a dense truncated Taylor expansion at the origin, stored as a
  flat coefficient vector over all monomials of total degree <= order.  The
  coefficient array may carry leading batch axes, which lets the same code
  evaluate thousands of parameter choices at once.

Rational maps act on jets by substitution (``RationalMapGerm.on_jets``); this
is exact up to the truncation order, also when the inner jets have a nonzero
constant term, because the outer map is a finite rational expression.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DenominatorVanishes, EvaluationFailed, OrderExceeded

Exp = tuple  # exponent tuple


# --------------------------------------------------------------------------
# Truncated power series
# --------------------------------------------------------------------------

class JetBasis:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        exps = [e for e in product(range(order + 1), repeat=nvars) if sum(e) <= order]
        exps.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
        self.exps = exps
        self.size = len(exps)
        self.index = {e: k for k, e in enumerate(exps)}
        self.degree = np.array([sum(e) for e in exps])
        self.factorial = np.array([math.prod(math.factorial(x) for x in e) for e in exps], dtype=float)

        pairs = []
        for a, ea in enumerate(exps):
            for b, eb in enumerate(exps):
                s = tuple(x + y for x, y in zip(ea, eb))
                if sum(s) <= order:
                    pairs.append((self.index[s], a, b))
        pairs.sort()
        out = np.array([p[0] for p in pairs])
        self._left = np.array([p[1] for p in pairs])
        self._right = np.array([p[2] for p in pairs])
        self._starts = np.searchsorted(out, np.arange(self.size))

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod_ = a[..., self._left] * b[..., self._right]
        return np.add.reduceat(prod_, self._starts, axis=-1)


@functools.lru_cache(maxsize=None)
def jet_basis(nvars: int, order: int) -> JetBasis:
    return JetBasis(nvars, order)


def _as_scalar_array(x) -> np.ndarray:
    return np.asarray(x, dtype=complex)[..., None]


class Jet:
    """Truncated Taylor expansion sum c_a Z^a over |a| <= order.

    ``c`` has shape ``batch + (basis.size,)``.  Arithmetic with plain numbers
    or arrays of batch shape treats them as constants.
    """

    __slots__ = ("basis", "c")
    __array_priority__ = 1000

    def __init__(self, basis: JetBasis, c):
        self.basis = basis
        self.c = np.asarray(c, dtype=complex)

    # constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, value, nvars: int = 2, order: int = 4) -> "Jet":
        basis = jet_basis(nvars, order)
        value = np.asarray(value, dtype=complex)
        c = np.zeros(value.shape + (basis.size,), dtype=complex)
        c[..., 0] = value
        return cls(basis, c)

    @classmethod
    def variable(cls, i: int, nvars: int = 2, order: int = 4) -> "Jet":
        basis = jet_basis(nvars, order)
        c = np.zeros(basis.size, dtype=complex)
        if order >= 1:
            e = tuple(1 if k == i else 0 for k in range(nvars))
            c[basis.index[e]] = 1.0
        return cls(basis, c)

    @classmethod
    def identity(cls, nvars: int = 2, order: int = 4) -> list["Jet"]:
        return [cls.variable(i, nvars, order) for i in range(nvars)]

    @classmethod
    def from_coeffs(cls, coeffs: dict, nvars: int = 2, order: int = 4) -> "Jet":
        basis = jet_basis(nvars, order)
        c = np.zeros(basis.size, dtype=complex)
        for e, v in coeffs.items():
            if sum(e) <= order:
                c[basis.index[tuple(e)]] += v
        return cls(basis, c)

    # properties -----------------------------------------------------------
    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def nvars(self) -> int:
        return self.basis.nvars

    @property
    def batch_shape(self) -> tuple:
        return self.c.shape[:-1]

    def coeff(self, exp: Sequence[int]):
        exp = tuple(exp)
        if sum(exp) > self.order:
            raise OrderExceeded(f"exponent {exp} exceeds jet order {self.order}")
        return self.c[..., self.basis.index[exp]]

    def derivative(self, exp: Sequence[int]):
        """Partial derivative at 0, i.e. a! * coeff(a)."""
        exp = tuple(exp)
        return self.coeff(exp) * math.prod(math.factorial(x) for x in exp)

    def coeffs(self) -> dict:
        """Nonzero coefficients as {exponent: value} (unbatched jets only)."""
        return {e: complex(v) for e, v in zip(self.basis.exps, self.c) if v != 0}

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderExceeded(f"cannot raise jet order {self.order} to {order}")
        basis = jet_basis(self.nvars, order)
        idx = [self.basis.index[e] for e in basis.exps]
        return Jet(basis, self.c[..., idx])

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other) -> "Jet | None":
        if isinstance(other, Jet):
            if other.basis is not self.basis:
                raise OrderExceeded("jets with different bases cannot be combined")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is not None:
            return Jet(self.basis, self.c + o.c)
        c = np.array(np.broadcast_to(self.c, np.broadcast_shapes(self.c.shape, np.shape(other) + (1,))))
        c[..., 0] += np.asarray(other, dtype=complex)
        return Jet(self.basis, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.basis, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is not None:
            return Jet(self.basis, self.basis.mul(self.c, o.c))
        return Jet(self.basis, self.c * _as_scalar_array(other))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            return self.reciprocal() ** (-n)
        result = Jet.constant(np.ones(self.batch_shape), self.nvars, self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def reciprocal(self) -> "Jet":
        c0 = self.c[..., 0]
        if np.any(c0 == 0):
            raise DenominatorVanishes("jet has zero constant term; reciprocal undefined")
        e = self * (1.0 / c0) - 1.0          # normalized nonconstant part
        r = Jet.constant(np.ones(self.batch_shape), self.nvars, self.order)
        for _ in range(self.order):          # finite geometric series (1+e)^-1
            r = 1.0 - e * r
        return r * (1.0 / c0)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is not None:
            return self * o.reciprocal()
        return Jet(self.basis, self.c / _as_scalar_array(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def conj_coeffs(self) -> "Jet":
        return Jet(self.basis, np.conj(self.c))

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, order={self.order}, batch={self.batch_shape})"


def jet_derivative(j: Jet, i: int, k: int) -> complex:
    """h_{z^i w^k}(0) of a two-variable jet."""
    if i + k > j.order:
        raise OrderExceeded(f"derivative of order {i + k} requested from jet of order {j.order}")
    return j.derivative((i, k))


# --------------------------------------------------------------------------
# Sparse polynomials
# --------------------------------------------------------------------------

class CPoly:
    """Sparse complex polynomial in ``nvars`` variables.

    Zero coefficients are never stored (pruning threshold is exactly 0).
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, terms: dict | None = None, nvars: int = 2):
        self.nvars = nvars
        clean = {}
        for e, v in (terms or {}).items():
            e = tuple(int(x) for x in e)
            if len(e) != nvars:
                raise ValueError(f"exponent {e} does not match nvars={nvars}")
            v = complex(v)
            if v != 0:
                clean[e] = clean.get(e, 0) + v
        self.terms = {e: v for e, v in clean.items() if v != 0}

    @classmethod
    def constant(cls, value, nvars: int = 2) -> "CPoly":
        return cls({(0,) * nvars: value}, nvars)

    @classmethod
    def variable(cls, i: int, nvars: int = 2) -> "CPoly":
        return cls({tuple(1 if k == i else 0 for k in range(nvars)): 1.0}, nvars)

    @classmethod
    def variables(cls, nvars: int) -> list["CPoly"]:
        return [cls.variable(i, nvars) for i in range(nvars)]

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self.terms), default=0)

    def constant_term(self) -> complex:
        return self.terms.get((0,) * self.nvars, 0j)

    def is_zero(self) -> bool:
        return not self.terms

    # arithmetic -----------------------------------------------------------
    def _lift(self, other) -> "CPoly":
        if isinstance(other, CPoly):
            if other.nvars != self.nvars:
                raise ValueError("polynomials in different numbers of variables")
            return other
        return CPoly.constant(other, self.nvars)

    def __add__(self, other):
        o = self._lift(other)
        terms = dict(self.terms)
        for e, v in o.terms.items():
            terms[e] = terms.get(e, 0) + v
        return CPoly(terms, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return CPoly({e: -v for e, v in self.terms.items()}, self.nvars)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, CPoly):
            other = complex(other)
            return CPoly({e: v * other for e, v in self.terms.items()}, self.nvars)
        o = self._lift(other)
        terms: dict = {}
        for ea, va in self.terms.items():
            for eb, vb in o.terms.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                terms[e] = terms.get(e, 0) + va * vb
        return CPoly(terms, self.nvars)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        result = CPoly.constant(1, self.nvars)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other):
        return isinstance(other, CPoly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def allclose(self, other: "CPoly", tol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) <= tol for k in keys)

    def conj(self) -> "CPoly":
        """Polynomial with conjugated coefficients."""
        return CPoly({e: v.conjugate() for e, v in self.terms.items()}, self.nvars)

    # evaluation -----------------------------------------------------------
    def __call__(self, *args):
        if len(args) != self.nvars:
            raise ValueError(f"expected {self.nvars} arguments")
        args = [np.asarray(a, dtype=complex) for a in args]
        out = np.zeros(np.broadcast_shapes(*(a.shape for a in args)), dtype=complex)
        for e, v in self.terms.items():
            term = v
            for a, k in zip(args, e):
                if k:
                    term = term * a ** k
            out = out + term
        return out if out.shape else complex(out)

    def on_jets(self, inputs: Sequence[Jet]) -> Jet:
        """Substitute jets for the variables (exact to the jet order)."""
        if len(inputs) != self.nvars:
            raise ValueError(f"expected {self.nvars} input jets")
        ref = inputs[0]
        batch = np.broadcast_shapes(*(j.batch_shape for j in inputs))
        one = Jet.constant(np.ones(batch), ref.nvars, ref.order)
        memo = {(0,) * self.nvars: one}

        def mono(e):
            if e in memo:
                return memo[e]
            i = max(k for k, x in enumerate(e) if x)
            prev = e[:i] + (e[i] - 1,) + e[i + 1:]
            memo[e] = mono(prev) * inputs[i]
            return memo[e]

        acc = Jet(ref.basis, np.zeros(batch + (ref.basis.size,), dtype=complex))
        for e in sorted(self.terms, key=sum):
            acc = acc + mono(e) * self.terms[e]
        return acc

    def substitute(self, inner: Sequence["CPoly"]) -> "CPoly":
        """Polynomial composition self(inner_1, ..., inner_m)."""
        if len(inner) != self.nvars:
            raise ValueError("substitution arity mismatch")
        nv = inner[0].nvars
        result = CPoly({}, nv)
        powers = [[CPoly.constant(1, nv)] for _ in inner]
        for e, v in self.terms.items():
            term = CPoly.constant(v, nv)
            for i, k in enumerate(e):
                while len(powers[i]) <= k:
                    powers[i].append(powers[i][-1] * inner[i])
                if k:
                    term = term * powers[i][k]
            result = result + term
        return result

    # serialization --------------------------------------------------------
    def to_json(self) -> list:
        return [[*e, v.real, v.imag] for e, v in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, data: list, nvars: int | None = None) -> "CPoly":
        if nvars is None:
            nvars = len(data[0]) - 2 if data else 2
        return cls({tuple(int(x) for x in row[:-2]): complex(row[-2], row[-1]) for row in data}, nvars)

    def __repr__(self):
        if not self.terms:
            return "0"
        names = "zw" if self.nvars == 2 else [f"x{i}" for i in range(self.nvars)]
        parts = []
        for e, v in sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0])):
            mon = "*".join(f"{names[i]}^{k}" if k > 1 else names[i] for i, k in enumerate(e) if k)
            parts.append(f"({v:.6g})" + (f"*{mon}" if mon else ""))
        return " + ".join(parts)


CPoly2 = CPoly


def poly_eval(p: CPoly, z, w):
    return p(z, w)


def poly_mul(a: CPoly, b: CPoly) -> CPoly:
    return a * b


# --------------------------------------------------------------------------
# Rational germs and maps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalGerm:
    num: CPoly
    den: CPoly

    @property
    def nvars(self) -> int:
        return self.num.nvars

    def holomorphic_at_origin(self) -> bool:
        return abs(self.den.constant_term()) > 0

    def __call__(self, *args):
        return self.num(*args) / self.den(*args)

    def on_jets(self, inputs: Sequence[Jet]) -> Jet:
        return self.num.on_jets(inputs) / self.den.on_jets(inputs)


def expand(r: RationalGerm, K: int = 4) -> Jet:
    """Taylor expansion of a rational germ to total order K."""
    if not r.holomorphic_at_origin():
        raise DenominatorVanishes("denominator vanishes at the origin")
    return r.on_jets(Jet.identity(r.nvars, K))


class RationalMapGerm:
    """Ordered tuple of rational components in a common set of variables.

    With ``check=True`` (the default) every denominator must be nonzero at the
    origin.  Intermediate maps that are only used away from the origin (e.g.
    Cayley conjugates before recentering) are built with ``check=False``.
    """

    __slots__ = ("components", "nvars")

    def __init__(self, components: Sequence[RationalGerm], check: bool = True):
        self.components = tuple(components)
        self.nvars = self.components[0].nvars
        if any(c.nvars != self.nvars for c in self.components):
            raise ValueError("components live in different numbers of variables")
        if check and not self.holomorphic_at_origin():
            raise DenominatorVanishes("a component denominator vanishes at the origin")

    @classmethod
    def from_polys(cls, nums: Sequence[CPoly], den: CPoly | Sequence[CPoly], check: bool = True):
        dens = [den] * len(nums) if isinstance(den, CPoly) else list(den)
        return cls([RationalGerm(n, d) for n, d in zip(nums, dens)], check=check)

    @classmethod
    def identity(cls, nvars: int) -> "RationalMapGerm":
        one = CPoly.constant(1, nvars)
        return cls.from_polys(CPoly.variables(nvars), one)

    def __len__(self):
        return len(self.components)

    def holomorphic_at_origin(self) -> bool:
        return all(c.holomorphic_at_origin() for c in self.components)

    def __call__(self, *args):
        return tuple(c(*args) for c in self.components)

    def on_jets(self, inputs: Sequence[Jet]) -> list[Jet]:
        return [c.on_jets(inputs) for c in self.components]

    def jets(self, order: int = 4) -> list[Jet]:
        if not self.holomorphic_at_origin():
            raise DenominatorVanishes("map is not holomorphic at the origin")
        return self.on_jets(Jet.identity(self.nvars, order))

    def to_json(self) -> dict:
        return {"nvars": self.nvars,
                "components": [{"num": c.num.to_json(), "den": c.den.to_json()} for c in self.components]}

    @classmethod
    def from_json(cls, data: dict, check: bool = True) -> "RationalMapGerm":
        comps = data["components"]
        nvars = data.get("nvars")
        if nvars is None:
            first = comps[0]["num"] or comps[0]["den"]
            nvars = len(first[0]) - 2
        return cls([RationalGerm(CPoly.from_json(c["num"], nvars), CPoly.from_json(c["den"], nvars))
                    for c in comps], check=check)

    def __repr__(self):
        return f"RationalMapGerm(C^{self.nvars} -> C^{len(self)})"


def rational_compose(outer: RationalMapGerm, inner: RationalMapGerm, check: bool = True) -> RationalMapGerm:
    """Exact composition outer o inner with denominators cleared per component."""
    if len(inner) != outer.nvars:
        raise ValueError(f"outer map expects {outer.nvars} inputs, inner has {len(inner)} components")
    nums = [c.num for c in inner.components]
    dens = [c.den for c in inner.components]
    shared = all(d == dens[0] for d in dens)
    nv = inner.nvars
    d_pows: dict = {}

    def dpow(i, k):
        key = (0 if shared else i, k)
        if key not in d_pows:
            d_pows[key] = dens[0 if shared else i] ** k
        return d_pows[key]

    n_pows = [[CPoly.constant(1, nv)] for _ in nums]

    def npow(i, k):
        while len(n_pows[i]) <= k:
            n_pows[i].append(n_pows[i][-1] * nums[i])
        return n_pows[i][k]

    comps = []
    for c in outer.components:
        if shared:
            E = max(c.num.degree, c.den.degree)

            def homog(p, E=E):
                acc = CPoly({}, nv)
                for e, v in p.terms.items():
                    t = CPoly.constant(v, nv)
                    for i, k in enumerate(e):
                        if k:
                            t = t * npow(i, k)
                    if E - sum(e):
                        t = t * dpow(0, E - sum(e))
                    acc = acc + t
                return acc
        else:
            Es = [max(c.num.degree_in(i), c.den.degree_in(i)) for i in range(outer.nvars)]

            def homog(p, Es=Es):
                acc = CPoly({}, nv)
                for e, v in p.terms.items():
                    t = CPoly.constant(v, nv)
                    for i, k in enumerate(e):
                        if k:
                            t = t * npow(i, k)
                        if Es[i] - k:
                            t = t * dpow(i, Es[i] - k)
                    acc = acc + t
                return acc

        comps.append(RationalGerm(homog(c.num), homog(c.den)))
    return RationalMapGerm(comps, check=check)


def compose_jet(outer: Jet, inner: list[Jet]) -> Jet:
    """Truncated composition outer(inner) for inner jets vanishing at 0."""
    terms = dict(zip(outer.basis.exps, np.moveaxis(outer.c, -1, 0)))
    ref = inner[0]
    batch = np.broadcast_shapes(outer.batch_shape, *(j.batch_shape for j in inner))
    acc = Jet(ref.basis, np.zeros(batch + (ref.basis.size,), dtype=complex))
    memo = {(0,) * outer.nvars: Jet.constant(np.ones(batch), ref.nvars, ref.order)}

    def mono(e):
        if e not in memo:
            i = max(k for k, x in enumerate(e) if x)
            memo[e] = mono(e[:i] + (e[i] - 1,) + e[i + 1:]) * inner[i]
        return memo[e]

    for e, v in terms.items():
        if np.any(v != 0):
            acc = acc + mono(e) * v
    return acc


# --------------------------------------------------------------------------
# Numerical Jacobian
# --------------------------------------------------------------------------

def real_jacobian(f: Callable[[np.ndarray], np.ndarray], x0, h: float = 1e-6,
                  richardson: bool = True, vectorized: bool = False) -> np.ndarray:
    """Central finite-difference Jacobian, optionally with one Richardson step.

    With ``vectorized=True``, ``f`` maps an (m, n) stack of points to an
    (m, k) stack of values and all perturbations are evaluated in one call.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    steps = [h, h / 2] if richardson else [h]

    def call(x):
        try:
            return np.asarray(f(x), dtype=float)
        except EvaluationFailed:
            raise
        except Exception as exc:  # noqa: BLE001 - surfaced as a domain error
            raise EvaluationFailed(str(exc)) from exc

    eye = np.eye(n)
    pts = np.concatenate([np.concatenate([x0 + st * eye, x0 - st * eye]) for st in steps])
    vals = call(pts) if vectorized else np.stack([call(x) for x in pts])
    cols = []
    for k, st in enumerate(steps):
        block = vals[2 * n * k: 2 * n * (k + 1)]
        # divide by the step realized in floating point, not the nominal one
        span = (x0 + st) - (x0 - st)
        cols.append(((block[:n] - block[n:]) / span[:, None]).T)
    if not richardson:
        return cols[0]
    return (4 * cols[1] - cols[0]) / 3
