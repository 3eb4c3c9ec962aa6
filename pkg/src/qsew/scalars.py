"""Exact Gaussian-rational scalars and the exact/float computation modes.

Every algebraic object in this package carries a scalar mode: ``"exact"``
(coefficients are :class:`QQi`, arithmetic is exact) or ``"float"``
(coefficients are Python complex).  Identity checks run exact; evaluation
and convergence diagnostics run float.  Mixing modes is an error.
"""

from __future__ import annotations

from fractions import Fraction

EXACT = "exact"
FLOAT = "float"


class ModeError(TypeError):
    """Raised when exact and float data are mixed in one computation."""


class QQi:
    """A complex number with exact rational real and imaginary parts.

    Closed under +, -, *, and / (nonzero divisor).  Used both for
    coefficients and for exponents of the formal variables.
    """

    __slots__ = ("re", "im", "_hash")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)
        self._hash = None

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if not self.im and not other.im:
            return QQi(self.re + other.re)
        return QQi(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return QQi(-self.re, -self.im)

    def __sub__(self, other):
        other = _coerce(other)
        return QQi(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        if not self.im and not other.im:
            return QQi(self.re * other.re)
        return QQi(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        d = other.re * other.re + other.im * other.im
        if d == 0:
            raise ZeroDivisionError("division by zero QQi")
        return QQi(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("QQi powers must be integers")
        if n < 0:
            return QQi(1) / self ** (-n)
        out = QQi(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self):
        return QQi(self.re, -self.im)

    # -- comparisons and conversions ----------------------------------

    def __eq__(self, other):
        try:
            other = _coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.re, self.im))
        return self._hash

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return f"QQi({self.re})"
        return f"QQi({self.re}, {self.im})"

    def to_json(self):
        return [
            self.re.numerator, self.re.denominator,
            self.im.numerator, self.im.denominator,
        ]

    @classmethod
    def from_json(cls, data):
        return cls(Fraction(data[0], data[1]), Fraction(data[2], data[3]))


def _coerce(x):
    if isinstance(x, QQi):
        return x
    if isinstance(x, (int, Fraction)):
        return QQi(x)
    raise TypeError(f"cannot coerce {type(x).__name__} to QQi")


def zero(mode):
    return QQi(0) if mode == EXACT else 0j


def one(mode):
    return QQi(1) if mode == EXACT else 1 + 0j


def as_scalar(x, mode):
    """Coerce x into the scalar type of the given mode."""
    if mode == EXACT:
        if isinstance(x, QQi):
            return x
        if isinstance(x, (int, Fraction)):
            return QQi(x)
        raise ModeError(f"exact mode cannot hold {type(x).__name__}")
    if isinstance(x, QQi):
        return complex(x)
    return complex(x)


def check_mode(mode):
    if mode not in (EXACT, FLOAT):
        raise ModeError(f"unknown scalar mode {mode!r}")


def join_modes(a, b):
    if a != b:
        raise ModeError(f"mixed scalar modes {a!r} and {b!r}")
    return a


def is_zero(x):
    if isinstance(x, QQi):
        return not x
    return x == 0


def abs2(x):
    """|x|^2 as a float, for either scalar type."""
    z = complex(x)
    return z.real * z.real + z.imag * z.imag


def magnitude(x):
    return abs(complex(x))
