"""Finite Laurent polynomials and truncated power series in one variable.

Used for local-coordinate work: rational-function expansions at marked
points, coordinate transforms, Schwarzian derivatives, vector fields.
A Laurent object stores finitely many terms; an optional upper order
bound makes it a truncated power series (terms above the bound are
dropped by multiplication, mirroring weight truncation)."""

from __future__ import annotations

from fractions import Fraction

from . import scalars
from .scalars import EXACT, QQi


class Laurent:
    """Finite sum of c_k z^k with an optional truncation order."""

    __slots__ = ("coeffs", "hi", "mode")

    def __init__(self, coeffs=None, hi=None, mode=EXACT):
        scalars.check_mode(mode)
        self.mode = mode
        self.hi = hi if hi is None else int(hi)
        self.coeffs = {}
        for k, c in (coeffs or {}).items():
            k = int(k)
            if self.hi is not None and k > self.hi:
                continue
            c = scalars.as_scalar(c, mode)
            if not scalars.is_zero(c):
                self.coeffs[k] = c

    @classmethod
    def zero(cls, hi=None, mode=EXACT):
        return cls({}, hi, mode)

    @classmethod
    def monomial(cls, k, coeff=1, hi=None, mode=EXACT):
        return cls({k: coeff}, hi, mode)

    @classmethod
    def var(cls, hi=None, mode=EXACT):
        return cls({1: 1}, hi, mode)

    def is_zero(self):
        return not self.coeffs

    def __eq__(self, other):
        return (isinstance(other, Laurent) and self.coeffs == other.coeffs
                and self.mode == other.mode)

    def __getitem__(self, k):
        return self.coeffs.get(k, scalars.zero(self.mode))

    def valuation(self):
        if not self.coeffs:
            return None
        return min(self.coeffs)

    def degree(self):
        if not self.coeffs:
            return None
        return max(self.coeffs)

    @staticmethod
    def _min_hi(a, b):
        if a is None:
            return b
        if b is None:
            return a
        return min(a, b)

    def __add__(self, other):
        if isinstance(other, (int, Fraction, QQi, complex, float)):
            other = Laurent({0: other}, None, self.mode)
        scalars.join_modes(self.mode, other.mode)
        hi = self._min_hi(self.hi, other.hi)
        coeffs = dict(self.coeffs)
        for k, c in other.coeffs.items():
            s = coeffs.get(k, scalars.zero(self.mode)) + c
            if scalars.is_zero(s):
                coeffs.pop(k, None)
            else:
                coeffs[k] = s
        return Laurent(coeffs, hi, self.mode)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, QQi, complex, float)):
            other = Laurent({0: other}, None, self.mode)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = scalars.as_scalar(c, self.mode)
        return Laurent({k: v * c for k, v in self.coeffs.items()},
                       self.hi, self.mode)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, QQi, complex, float)):
            return self.scale(other)
        scalars.join_modes(self.mode, other.mode)
        hi = self._min_hi(self.hi, other.hi)
        coeffs = {}
        for ka, ca in self.coeffs.items():
            for kb, cb in other.coeffs.items():
                k = ka + kb
                if hi is not None and k > hi:
                    continue
                s = coeffs.get(k, scalars.zero(self.mode)) + ca * cb
                if scalars.is_zero(s):
                    coeffs.pop(k, None)
                else:
                    coeffs[k] = s
        return Laurent(coeffs, hi, self.mode)

    __rmul__ = __mul__

    def shift(self, d):
        """Multiply by z^d."""
        hi = None if self.hi is None else self.hi
        return Laurent({k + d: c for k, c in self.coeffs.items()}, hi, self.mode)

    def derivative(self):
        return Laurent({k - 1: c * k for k, c in self.coeffs.items() if k != 0},
                       None if self.hi is None else self.hi - 1, self.mode)

    def compose(self, g):
        """Substitute z -> g(z); needs valuation(self) >= 0 and
        valuation(g) >= 1 so the result is a well defined series."""
        if self.coeffs and min(self.coeffs) < 0:
            raise ValueError("cannot compose a series with poles")
        if not g.is_zero() and g.valuation() < 1:
            raise ValueError("inner series must vanish at 0")
        hi = self._min_hi(self.hi, g.hi)
        out = Laurent.zero(hi, self.mode)
        power = Laurent({0: 1}, hi, self.mode)
        for k in range(0, (max(self.coeffs) if self.coeffs else 0) + 1):
            c = self.coeffs.get(k)
            if c is not None:
                out = out + power.scale(c)
            power = power * g
            if power.is_zero():
                break
        return out

    def invert(self, hi=None):
        """Multiplicative inverse as a truncated Laurent series.

        Factor z^v * unit, invert the unit by recursion up to the
        requested order."""
        if self.is_zero():
            raise ZeroDivisionError("cannot invert the zero series")
        v = self.valuation()
        hi = self._min_hi(hi, self.hi)
        if hi is None:
            raise ValueError("an inversion order is required")
        unit = self.shift(-v)
        u0 = unit[0]
        inv0 = scalars.one(self.mode) / u0 if self.mode == EXACT else 1.0 / u0
        order = hi + v  # output has exponents -v .. hi
        out = {0: inv0}
        for k in range(1, order + 1):
            acc = scalars.zero(self.mode)
            for j in range(1, k + 1):
                uj = unit[j]
                ok = out.get(k - j)
                if ok is None or scalars.is_zero(uj):
                    continue
                acc = acc + uj * ok
            val = -(inv0 * acc)
            if not scalars.is_zero(val):
                out[k] = val
        return Laurent({k - v: c for k, c in out.items()}, hi, self.mode)

    def truncate(self, hi):
        return Laurent({k: c for k, c in self.coeffs.items() if k <= hi},
                       hi, self.mode)

    def residue(self):
        """Coefficient of z^{-1}."""
        return self[-1]

    def eval(self, z):
        total = 0j
        for k, c in sorted(self.coeffs.items()):
            total += complex(c) * complex(z) ** k
        return total

    def to_float(self):
        if self.mode == scalars.FLOAT:
            return self
        return Laurent({k: complex(c) for k, c in self.coeffs.items()},
                       self.hi, scalars.FLOAT)

    def sorted_items(self):
        return sorted(self.coeffs.items())

    def __repr__(self):
        if not self.coeffs:
            return "<Laurent 0>"
        bits = [f"({c})z^{k}" for k, c in self.sorted_items()]
        return f"<Laurent {' + '.join(bits)}>"


def binomial_shift_expansion(exponent, base, order, mode=EXACT):
    """Expansion of (base + t)^exponent in t up to t^order, for integer
    exponent (negative allowed); base may be zero only for exponent >= 0."""
    base = scalars.as_scalar(base, mode)
    if scalars.is_zero(base):
        if exponent < 0:
            raise ZeroDivisionError("pole at the expansion point")
        return Laurent.monomial(exponent, 1, order, mode)
    inv = scalars.one(mode) / base if mode == EXACT else 1.0 / base
    coeff = _int_power(base, exponent) if mode == EXACT else base ** exponent
    out = {0: coeff}
    for t in range(1, order + 1):
        coeff = coeff * scalars.as_scalar(Fraction(exponent - t + 1, t), mode) * inv
        if scalars.is_zero(coeff):
            break
        out[t] = coeff
    return Laurent(out, order, mode)


def _int_power(x, e):
    if e >= 0:
        return x ** e
    return (scalars.one(EXACT) / x) ** (-e)


# -- V-valued Laurent series ------------------------------------------------

class VLaurent:
    """A vector-valued Laurent series: basis key -> Laurent coefficient."""

    __slots__ = ("space", "parts", "mode")

    def __init__(self, space, parts=None, mode=EXACT):
        self.space = space
        self.mode = mode
        self.parts = {}
        for key, f in (parts or {}).items():
            if not f.is_zero():
                self.parts[key] = f

    @classmethod
    def from_pairs(cls, pairs, mode=EXACT):
        """pairs: iterable of (Vector, Laurent)."""
        space = None
        parts = {}
        for vec, f in pairs:
            space = vec.space if space is None else space
            for key, c in vec.entries.items():
                term = f.scale(c)
                if key in parts:
                    term = parts[key] + term
                parts[key] = term
        return cls(space, parts, mode)

    def __add__(self, other):
        parts = dict(self.parts)
        for key, f in other.parts.items():
            parts[key] = parts[key] + f if key in parts else f
        return VLaurent(self.space, parts, self.mode)

    def __neg__(self):
        return VLaurent(self.space,
                        {k: -f for k, f in self.parts.items()}, self.mode)

    def __sub__(self, other):
        return self + (-other)

    def scale_series(self, f):
        return VLaurent(self.space,
                        {k: g * f for k, g in self.parts.items()}, self.mode)

    def derivative(self):
        return VLaurent(self.space,
                        {k: f.derivative() for k, f in self.parts.items()},
                        self.mode)

    def apply_map(self, gmap):
        """Apply a GradedMap to the vector part."""
        from .graded import Vector
        out = {}
        for key, f in self.parts.items():
            img = gmap.apply(Vector(self.space, {key: scalars.one(self.mode)},
                                    self.mode))
            for ikey, c in img.entries.items():
                term = f.scale(c)
                out[ikey] = out[ikey] + term if ikey in out else term
        return VLaurent(self.space, out, self.mode)

    def is_zero(self):
        return all(f.is_zero() for f in self.parts.values())

    def max_abs(self):
        return max((scalars.magnitude(c) for f in self.parts.values()
                    for c in f.coeffs.values()), default=0.0)

    def __eq__(self, other):
        return (isinstance(other, VLaurent) and self.space == other.space
                and {k: f for k, f in self.parts.items() if not f.is_zero()}
                == {k: f for k, f in other.parts.items() if not f.is_zero()})
