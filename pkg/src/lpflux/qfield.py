"""
Exact arithmetic in the real quadratic field Q(sqrt(15)).

Every number is stored as ``a + b*sqrt(15)`` with rational ``a`` and ``b``
(:class:`fractions.Fraction`, arbitrary precision).  The representation is
unique, so equality and hashing are structural.  Sign, floor and rounding to
binary floating point are decided with integer arithmetic only.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Iterator, NamedTuple, Union

import mpmath

__all__ = [
    "Rat",
    "QF15",
    "Vec3X",
    "SQRT15",
    "qf_add",
    "qf_mul",
    "qf_neg",
    "qf_sign",
    "qf_floor",
    "qf_ceil",
    "qf_to_float",
    "as_qf",
]

Rat = Fraction

_D = 15  # the radicand

Scalar = Union["QF15", int, Fraction]


def _rat(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


class QF15:
    """The number ``a + b*sqrt(15)`` with rational ``a``, ``b``."""

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        object.__setattr__(self, "a", _rat(a))
        object.__setattr__(self, "b", _rat(b))

    def __setattr__(self, name, value):
        raise AttributeError("QF15 is immutable")

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        o = as_qf(other)
        if o is NotImplemented:
            return NotImplemented
        return QF15(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, other):
        o = as_qf(other)
        if o is NotImplemented:
            return NotImplemented
        return QF15(self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        o = as_qf(other)
        if o is NotImplemented:
            return NotImplemented
        return QF15(o.a - self.a, o.b - self.b)

    def __mul__(self, other):
        o = as_qf(other)
        if o is NotImplemented:
            return NotImplemented
        return QF15(self.a * o.a + _D * self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def __neg__(self):
        return QF15(-self.a, -self.b)

    def __pos__(self):
        return self

    def conjugate_root(self) -> "QF15":
        """Galois conjugate ``a - b*sqrt(15)``."""
        return QF15(self.a, -self.b)

    def norm(self) -> Fraction:
        """Field norm ``a**2 - 15*b**2``."""
        return self.a * self.a - _D * self.b * self.b

    def inverse(self) -> "QF15":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("QF15 division by zero")
        return QF15(self.a / n, -self.b / n)

    def __truediv__(self, other):
        o = as_qf(other)
        if o is NotImplemented:
            return NotImplemented
        if o.b == 0:
            if o.a == 0:
                raise ZeroDivisionError("QF15 division by zero")
            return QF15(self.a / o.a, self.b / o.a)
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = as_qf(other)
        if o is NotImplemented:
            return NotImplemented
        return o / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return (self.inverse()) ** (-n)
        out, base = QF15(1), self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- comparisons -----------------------------------------------------
    def __eq__(self, other):
        o = as_qf(other)
        if o is NotImplemented:
            return NotImplemented
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b))

    def _cmp(self, other) -> int:
        o = as_qf(other)
        if o is NotImplemented:
            return NotImplemented
        return qf_sign(self - o)

    def __lt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c >= 0

    def __bool__(self):
        return self.a != 0 or self.b != 0

    # -- conversions -----------------------------------------------------
    def is_rational(self) -> bool:
        return self.b == 0

    def to_rat(self) -> Fraction:
        if self.b != 0:
            raise ValueError(f"{self} is irrational")
        return self.a

    def __float__(self):
        return qf_to_float(self)

    def __floor__(self):
        return qf_floor(self)

    def __ceil__(self):
        return qf_ceil(self)

    def __repr__(self):
        return f"QF15({self.a}, {self.b})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        if self.a == 0:
            return f"{self.b}*sqrt15"
        sgn = "+" if self.b > 0 else "-"
        return f"{self.a} {sgn} {abs(self.b)}*sqrt15"

    def __reduce__(self):
        return (QF15, (self.a, self.b))


SQRT15 = QF15(0, 1)


def as_qf(x) -> QF15:
    if isinstance(x, QF15):
        return x
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        return QF15(x, 0)
    if isinstance(x, Rational):
        return QF15(Fraction(x), 0)
    return NotImplemented


def qf_add(u: QF15, v: QF15) -> QF15:
    return as_qf(u) + as_qf(v)


def qf_mul(u: QF15, v: QF15) -> QF15:
    return as_qf(u) * as_qf(v)


def qf_neg(u: QF15) -> QF15:
    return -as_qf(u)


def _sgn(x) -> int:
    return (x > 0) - (x < 0)


def qf_sign(u: QF15) -> int:
    """Sign of ``a + b*sqrt(15)`` by integer case analysis."""
    u = as_qf(u)
    sa, sb = _sgn(u.a), _sgn(u.b)
    if sb == 0:
        return sa
    if sa == 0 or sa == sb:
        return sb
    # opposite signs: compare a**2 with 15*b**2
    return sa * _sgn(u.a * u.a - _D * u.b * u.b)


def _common(u: QF15) -> tuple[int, int, int]:
    """Integers ``(A, B, D)`` with ``u = (A + B*sqrt15)/D`` and ``D > 0``."""
    d = math.lcm(u.a.denominator, u.b.denominator)
    return u.a.numerator * (d // u.a.denominator), u.b.numerator * (d // u.b.denominator), d


def qf_floor(u: QF15) -> int:
    """Greatest integer ``n`` with ``n <= u``."""
    u = as_qf(u)
    A, B, D = _common(u)
    if B == 0:
        return A // D
    s = math.isqrt(_D * B * B)  # sqrt(15 B^2) is irrational, so s < |B|*sqrt15 < s + 1
    if B > 0:
        return (A + s) // D
    return (A - s - 1) // D


def qf_ceil(u: QF15) -> int:
    return -qf_floor(-as_qf(u))


def qf_to_float(u: QF15, precision: int = 53):
    """
    Round ``u`` to binary floating point.

    Returns a Python ``float`` for ``precision <= 53`` and an
    :class:`mpmath.mpf` carrying ``precision`` bits otherwise.  The value is
    obtained from the exact floor of ``u * 2**s`` and is within one unit in
    the last place; the map is monotone in ``u``.
    """
    if precision < 53:
        raise ValueError("precision must be at least 53 bits")
    u = as_qf(u)
    if not u:
        return 0.0 if precision == 53 else mpmath.mpf(0)
    A, B, D = _common(u)
    # crude magnitude estimate, only used to pick the scale
    approx = abs(A) + abs(B) * 4
    e = approx.bit_length() - D.bit_length()
    s = precision + 8 - e
    n = qf_floor(u * (Fraction(2) ** s))
    while abs(n).bit_length() < precision + 4:  # cancellation in a + b*sqrt15
        s += precision + 8 - abs(n).bit_length()
        n = qf_floor(u * (Fraction(2) ** s))
    if precision == 53:
        return float(Fraction(n) / (Fraction(2) ** s))
    with mpmath.workprec(precision):
        return mpmath.ldexp(mpmath.mpf(n), -s)


class Vec3X(NamedTuple):
    """A 3-vector with entries in Q(sqrt(15))."""

    x: QF15
    y: QF15
    z: QF15

    @classmethod
    def of(cls, *comps) -> "Vec3X":
        if len(comps) == 1:
            comps = tuple(comps[0])
        return cls(*(as_qf(c) for c in comps))

    def __add__(self, other: "Vec3X") -> "Vec3X":  # type: ignore[override]
        return Vec3X(self.x + other[0], self.y + other[1], self.z + other[2])

    def __sub__(self, other: "Vec3X") -> "Vec3X":
        return Vec3X(self.x - other[0], self.y - other[1], self.z - other[2])

    def __neg__(self) -> "Vec3X":
        return Vec3X(-self.x, -self.y, -self.z)

    def scale(self, c: Scalar) -> "Vec3X":
        c = as_qf(c)
        return Vec3X(c * self.x, c * self.y, c * self.z)

    def dot(self, other) -> QF15:
        return self.x * other[0] + self.y * other[1] + self.z * other[2]

    def norm2(self) -> QF15:
        return self.dot(self)

    def is_zero(self) -> bool:
        return not (self.x or self.y or self.z)

    def to_floats(self) -> tuple[float, float, float]:
        return (float(self.x), float(self.y), float(self.z))

    def int_form(self) -> tuple[tuple[int, int, int], tuple[int, int, int], int]:
        """Integers ``(P, Q, D)`` with ``self = (P + sqrt15*Q) / D``."""
        d = 1
        for c in self:
            d = math.lcm(d, c.a.denominator, c.b.denominator)
        P = tuple(int(c.a * d) for c in self)
        Q = tuple(int(c.b * d) for c in self)
        return P, Q, d

    @classmethod
    def from_int_form(cls, P, Q, D) -> "Vec3X":
        return cls(*(QF15(Fraction(int(p), int(D)), Fraction(int(r), int(D))) for p, r in zip(P, Q)))

    def __iter__(self) -> Iterator[QF15]:  # type: ignore[override]
        return iter((self.x, self.y, self.z))


def matvec(M, v) -> Vec3X:
    """Exact product of a 3x3 matrix (rows of QF15) with a vector."""
    return Vec3X(*(sum((as_qf(m) * as_qf(c) for m, c in zip(row, v)), QF15()) for row in M))


def matmul(M, N):
    return tuple(
        tuple(sum((as_qf(M[r][k]) * as_qf(N[k][c]) for k in range(3)), QF15()) for c in range(3))
        for r in range(3)
    )
