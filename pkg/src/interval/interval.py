"""Scalar interval arithmetic with outward rounding"""

from dataclasses import dataclass
from typing import Tuple, Union
import math

from src.exceptions import DomainError

Number = Union[int, float]

# Dekker splitting constant for binary64: 2**27 + 1
_SPLITTER = 134217729.0
# Above this magnitude the splitting may overflow; below the lower bound the error term underflows
_SPLIT_LIMIT = 1e290
_TINY = 1e-290


def _two_sum(a: float, b: float) -> Tuple[float, float]:
    """Return (s, e) with s = fl(a + b) and a + b = s + e exactly"""
    s = a + b
    if not math.isfinite(s):
        return s, 0.0
    bv = s - a
    av = s - bv
    return s, (a - av) + (b - bv)


def _split(a: float) -> Tuple[float, float]:
    t = _SPLITTER * a
    high = t - (t - a)
    return high, a - high


def _two_prod(a: float, b: float) -> Tuple[float, float, bool]:
    """Return (p, e, exact_known) with a * b = p + e whenever exact_known is True"""
    p = a * b
    if a == 0.0 or b == 0.0:
        return p, 0.0, True
    if not math.isfinite(p) or abs(a) > _SPLIT_LIMIT or abs(b) > _SPLIT_LIMIT or abs(p) < _TINY:
        return p, 0.0, False
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e, True


def add_down(a: float, b: float) -> float:
    s, e = _two_sum(a, b)
    return math.nextafter(s, -math.inf) if e < 0.0 else s


def add_up(a: float, b: float) -> float:
    s, e = _two_sum(a, b)
    return math.nextafter(s, math.inf) if e > 0.0 else s


def mul_down(a: float, b: float) -> float:
    p, e, known = _two_prod(a, b)
    if not known or e < 0.0:
        return math.nextafter(p, -math.inf)
    return p


def mul_up(a: float, b: float) -> float:
    p, e, known = _two_prod(a, b)
    if not known or e > 0.0:
        return math.nextafter(p, math.inf)
    return p


def _div_direction(a: float, b: float) -> Tuple[float, int]:
    """Quotient and sign of (exact - computed); 2 means unknown"""
    q = a / b
    p, e, known = _two_prod(q, b)
    if not known or not math.isfinite(q):
        return q, 2
    # a - p is exact since p is within a factor two of a
    r = (a - p) - e
    if r == 0.0:
        return q, 0
    direction = 1 if (r > 0.0) == (b > 0.0) else -1
    return q, direction


def div_down(a: float, b: float) -> float:
    q, direction = _div_direction(a, b)
    return math.nextafter(q, -math.inf) if direction in (-1, 2) else q


def div_up(a: float, b: float) -> float:
    q, direction = _div_direction(a, b)
    return math.nextafter(q, math.inf) if direction in (1, 2) else q


def _pow_down(x: float, k: int) -> float:
    """Lower bound of x**k for x >= 0"""
    result = 1.0
    for _ in range(k):
        result = mul_down(result, x)
    return result


def _pow_up(x: float, k: int) -> float:
    """Upper bound of x**k for x >= 0"""
    result = 1.0
    for _ in range(k):
        result = mul_up(result, x)
    return result


@dataclass(frozen=True)
class Interval:
    """Closed real interval [lo, hi] whose arithmetic encloses the exact result set"""

    lo: float
    hi: float

    def __post_init__(self):
        lo = float(self.lo)
        hi = float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise DomainError(f"Interval endpoints must not be NaN: [{lo}, {hi}]")
        if lo > hi:
            raise DomainError(f"Invalid interval: lower endpoint {lo} exceeds upper endpoint {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, value: Number) -> "Interval":
        """Degenerate interval [value, value]"""
        v = float(value)
        return cls(v, v)

    @classmethod
    def symmetric(cls, radius: Number) -> "Interval":
        """Interval [-radius, radius]"""
        r = abs(float(radius))
        return cls(-r, r)

    # Arithmetic

    def __add__(self, other: Union["Interval", Number]) -> "Interval":
        b = _coerce(other)
        return Interval(add_down(self.lo, b.lo), add_up(self.hi, b.hi))

    __radd__ = __add__

    def __sub__(self, other: Union["Interval", Number]) -> "Interval":
        b = _coerce(other)
        return Interval(add_down(self.lo, -b.hi), add_up(self.hi, -b.lo))

    def __rsub__(self, other: Number) -> "Interval":
        return _coerce(other) - self

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other: Union["Interval", Number]) -> "Interval":
        b = _coerce(other)
        pairs = ((self.lo, b.lo), (self.lo, b.hi), (self.hi, b.lo), (self.hi, b.hi))
        return Interval(
            min(mul_down(x, y) for x, y in pairs),
            max(mul_up(x, y) for x, y in pairs),
        )

    __rmul__ = __mul__

    def __truediv__(self, other: Union["Interval", Number]) -> "Interval":
        b = _coerce(other)
        if b.lo <= 0.0 <= b.hi:
            raise DomainError(f"Division by interval containing zero: {b}")
        pairs = ((self.lo, b.lo), (self.lo, b.hi), (self.hi, b.lo), (self.hi, b.hi))
        return Interval(
            min(div_down(x, y) for x, y in pairs),
            max(div_up(x, y) for x, y in pairs),
        )

    def __rtruediv__(self, other: Number) -> "Interval":
        return _coerce(other) / self

    def __pow__(self, k: int) -> "Interval":
        if not isinstance(k, int) or k < 0:
            raise DomainError(f"Interval power requires a nonnegative integer exponent, got {k}")
        if k == 0:
            return Interval(1.0, 1.0)
        if k == 1:
            return self
        lo, hi = self.lo, self.hi
        even = k % 2 == 0
        if lo >= 0.0:
            return Interval(_pow_down(lo, k), _pow_up(hi, k))
        if hi <= 0.0:
            if even:
                return Interval(_pow_down(-hi, k), _pow_up(-lo, k))
            return Interval(-_pow_up(-lo, k), -_pow_down(-hi, k))
        if even:
            return Interval(0.0, max(_pow_up(-lo, k), _pow_up(hi, k)))
        return Interval(-_pow_up(-lo, k), _pow_up(hi, k))

    # Set operations

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def contains(self, value: Union["Interval", Number]) -> bool:
        if isinstance(value, Interval):
            return self.lo <= value.lo and value.hi <= self.hi
        return self.lo <= float(value) <= self.hi

    def subset_of(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        if self.lo == self.hi:
            return self.lo
        return 0.5 * self.lo + 0.5 * self.hi

    @property
    def mag(self) -> float:
        """Largest absolute value in the interval"""
        return max(abs(self.lo), abs(self.hi))

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"


def _coerce(value: Union[Interval, Number]) -> Interval:
    if isinstance(value, Interval):
        return value
    return Interval.point(value)


def hull(a: Interval, b: Interval) -> Interval:
    """Smallest interval containing both arguments"""
    return a.hull(b)


def interval_sum(items) -> Interval:
    """Outward-rounded sum of an iterable of intervals"""
    total = Interval(0.0, 0.0)
    for item in items:
        total = total + item
    return total
