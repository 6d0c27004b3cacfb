"""Interval vectors and matrices backed by numpy endpoint arrays"""

from typing import Iterable, Iterator, Sequence, Tuple, Union
import numpy as np

from src.exceptions import DomainError
from src.interval.interval import Interval, interval_sum

ArrayLike = Union[Sequence[float], np.ndarray]

# 2 * unit roundoff; used as the per-term slack of floating-point summation
_SUM_SLACK = 2.0 ** -52


def round_down(values: np.ndarray) -> np.ndarray:
    return np.nextafter(values, -np.inf)


def round_up(values: np.ndarray) -> np.ndarray:
    return np.nextafter(values, np.inf)


_SPLITTER = 134217729.0
_SPLIT_LIMIT = 1e290
_TINY = 1e-290


def directed_product(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Elementwise lower and upper bounds of a * b; exact products are not widened"""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    with np.errstate(over="ignore", invalid="ignore"):
        p = a * b
        ta = _SPLITTER * a
        a_high = ta - (ta - a)
        a_low = a - a_high
        tb = _SPLITTER * b
        b_high = tb - (tb - b)
        b_low = b - b_high
        err = ((a_high * b_high - p) + a_high * b_low + a_low * b_high) + a_low * b_low
    zero = (a == 0.0) | (b == 0.0)
    unknown = (
        ~np.isfinite(err)
        | (np.abs(a) > _SPLIT_LIMIT)
        | (np.abs(b) > _SPLIT_LIMIT)
        | (np.abs(p) < _TINY)
    ) & ~zero
    down = np.where(zero | (~unknown & (err >= 0.0)), p, round_down(p))
    up = np.where(zero | (~unknown & (err <= 0.0)), p, round_up(p))
    return down, up


def mul_bounds(
    alo: np.ndarray, ahi: np.ndarray, blo: np.ndarray, bhi: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Elementwise outward-rounded interval product, broadcasting like numpy"""
    corners = [directed_product(x, y) for x, y in ((alo, blo), (alo, bhi), (ahi, blo), (ahi, bhi))]
    lows = np.stack(np.broadcast_arrays(*(c[0] for c in corners)))
    highs = np.stack(np.broadcast_arrays(*(c[1] for c in corners)))
    return lows.min(axis=0), highs.max(axis=0)


def _rounded_sum(total: np.ndarray, err: np.ndarray, direction: float) -> np.ndarray:
    # err == 0 only for sums with at most one nonzero term, which are exact
    return np.where(err == 0.0, total, np.nextafter(total + direction * err, direction * np.inf))


def sum_bounds(lo: np.ndarray, hi: np.ndarray, axis: int = -1) -> Tuple[np.ndarray, np.ndarray]:
    """Outward-rounded interval sum along an axis"""
    nonzero = ((lo != 0.0) | (hi != 0.0)).sum(axis=axis)
    slack = np.maximum(nonzero - 1, 0) * _SUM_SLACK
    lo_err = slack * np.abs(lo).sum(axis=axis)
    hi_err = slack * np.abs(hi).sum(axis=axis)
    return (
        _rounded_sum(lo.sum(axis=axis), lo_err, -1.0),
        _rounded_sum(hi.sum(axis=axis), hi_err, 1.0),
    )


def grouped_sum_bounds(
    lo: np.ndarray, hi: np.ndarray, selector: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Outward-rounded sums of term groups.

    Args:
        lo, hi: term bounds with terms on the last axis (..., P)
        selector: 0/1 matrix (P, K) assigning terms to K groups

    Returns:
        Group bounds of shape (..., K)
    """
    nonzero = ((lo != 0.0) | (hi != 0.0)).astype(float) @ selector
    slack = np.maximum(nonzero - 1, 0) * _SUM_SLACK
    lo_err = slack * (np.abs(lo) @ selector)
    hi_err = slack * (np.abs(hi) @ selector)
    return _rounded_sum(lo @ selector, lo_err, -1.0), _rounded_sum(hi @ selector, hi_err, 1.0)


def _frozen(values: ArrayLike, ndim: int) -> np.ndarray:
    array = np.array(values, dtype=float)
    if ndim == 1:
        array = array.reshape(-1)
    array.setflags(write=False)
    return array


class IntervalVector:
    """Box in R^n stored as lower and upper endpoint arrays"""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: ArrayLike, hi: ArrayLike):
        """Initialize from endpoint arrays"""
        lo_arr = _frozen(lo, 1)
        hi_arr = _frozen(hi, 1)
        if lo_arr.shape != hi_arr.shape:
            raise DomainError(f"Endpoint dimension mismatch: {lo_arr.shape} vs {hi_arr.shape}")
        if lo_arr.size == 0:
            raise DomainError("Interval vectors must have positive dimension")
        if np.isnan(lo_arr).any() or np.isnan(hi_arr).any():
            raise DomainError("Interval vector endpoints must not be NaN")
        if (lo_arr > hi_arr).any():
            raise DomainError("Invalid interval vector: lower endpoints exceed upper endpoints")
        self.lo = lo_arr
        self.hi = hi_arr

    @classmethod
    def from_intervals(cls, items: Iterable[Interval]) -> "IntervalVector":
        items = list(items)
        return cls([i.lo for i in items], [i.hi for i in items])

    @classmethod
    def point(cls, values: ArrayLike) -> "IntervalVector":
        return cls(values, values)

    @classmethod
    def from_center_radius(cls, center: ArrayLike, radius: ArrayLike) -> "IntervalVector":
        c = np.asarray(center, dtype=float).reshape(-1)
        r = np.abs(np.asarray(radius, dtype=float).reshape(-1))
        r = np.broadcast_to(r, c.shape)
        lo = np.where(r == 0.0, c, round_down(c - r))
        hi = np.where(r == 0.0, c, round_up(c + r))
        return cls(lo, hi)

    @classmethod
    def ball_enclosure(cls, center: ArrayLike, radius: float) -> "IntervalVector":
        """Bounding box of the closed 2-norm ball of the given radius"""
        c = np.asarray(center, dtype=float).reshape(-1)
        return cls.from_center_radius(c, np.full(c.shape, float(radius)))

    @property
    def dim(self) -> int:
        return int(self.lo.size)

    def __len__(self) -> int:
        return self.dim

    def __getitem__(self, index):
        if isinstance(index, slice):
            return IntervalVector(self.lo[index], self.hi[index])
        return Interval(self.lo[index], self.hi[index])

    def __iter__(self) -> Iterator[Interval]:
        for lo, hi in zip(self.lo, self.hi):
            yield Interval(lo, hi)

    def _check_dim(self, other: "IntervalVector") -> None:
        if other.dim != self.dim:
            raise DomainError(f"Dimension mismatch: {self.dim} vs {other.dim}")

    def midpoint(self) -> np.ndarray:
        return np.where(self.lo == self.hi, self.lo, 0.5 * self.lo + 0.5 * self.hi)

    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def radius(self) -> np.ndarray:
        """Upper bound of the distance from the midpoint to either endpoint"""
        mid = self.midpoint()
        return np.maximum(round_up(self.hi - mid), round_up(mid - self.lo)) * (self.lo != self.hi)

    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, point: ArrayLike, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.size != self.dim:
            raise DomainError(f"Dimension mismatch: {self.dim} vs {p.size}")
        return bool(np.all(self.lo - tol <= p) and np.all(p <= self.hi + tol))

    def subset_of(self, other: "IntervalVector") -> bool:
        self._check_dim(other)
        return bool(np.all(other.lo <= self.lo) and np.all(self.hi <= other.hi))

    def hull(self, other: "IntervalVector") -> "IntervalVector":
        self._check_dim(other)
        return IntervalVector(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def product(self, other: "IntervalVector") -> "IntervalVector":
        """Cartesian product self x other"""
        return IntervalVector(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))

    def bloat(self, radius: ArrayLike) -> "IntervalVector":
        r = np.broadcast_to(np.abs(np.asarray(radius, dtype=float)), self.lo.shape)
        return IntervalVector(round_down(self.lo - r), round_up(self.hi + r))

    def split(self, axis: int) -> Tuple["IntervalVector", "IntervalVector"]:
        """Bisect along one coordinate"""
        mid = self[axis].midpoint
        left_hi = self.hi.copy()
        left_hi[axis] = mid
        right_lo = self.lo.copy()
        right_lo[axis] = mid
        return IntervalVector(self.lo, left_hi), IntervalVector(right_lo, self.hi)

    def __add__(self, other: Union["IntervalVector", ArrayLike]) -> "IntervalVector":
        other = _as_vector(other)
        self._check_dim(other)
        return IntervalVector(_exact_or_down(self.lo, other.lo), _exact_or_up(self.hi, other.hi))

    def __sub__(self, other: Union["IntervalVector", ArrayLike]) -> "IntervalVector":
        other = _as_vector(other)
        self._check_dim(other)
        return IntervalVector(_exact_or_down(self.lo, -other.hi), _exact_or_up(self.hi, -other.lo))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntervalVector):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self) -> int:
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def to_list(self) -> list:
        return [[float(lo), float(hi)] for lo, hi in zip(self.lo, self.hi)]

    def __repr__(self) -> str:
        body = ", ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in zip(self.lo, self.hi))
        return f"IntervalVector({body})"


def _as_vector(value: Union[IntervalVector, ArrayLike]) -> IntervalVector:
    if isinstance(value, IntervalVector):
        return value
    return IntervalVector.point(value)


def _sum_error(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Float sum and its exact rounding error (TwoSum); NaN error when overflowed"""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    with np.errstate(invalid="ignore", over="ignore"):
        s = a + b
        bb = s - a
        err = (a - (s - bb)) + (b - bb)
    return s, err


def _exact_or_down(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s, err = _sum_error(a, b)
    # s is a lower bound when the true sum is at least s
    return np.where(err >= 0.0, s, round_down(s))


def _exact_or_up(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s, err = _sum_error(a, b)
    return np.where(err <= 0.0, s, round_up(s))


class IntervalMatrix:
    """Matrix of intervals stored as lower and upper endpoint grids"""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: ArrayLike, hi: ArrayLike):
        """Initialize from endpoint grids"""
        lo_arr = _frozen(lo, 2)
        hi_arr = _frozen(hi, 2)
        if lo_arr.ndim != 2 or lo_arr.shape != hi_arr.shape:
            raise DomainError(f"Interval matrix endpoints must be equal-shape grids: {lo_arr.shape} vs {hi_arr.shape}")
        if (lo_arr > hi_arr).any():
            raise DomainError("Invalid interval matrix: lower endpoints exceed upper endpoints")
        self.lo = lo_arr
        self.hi = hi_arr

    @classmethod
    def point(cls, matrix: ArrayLike) -> "IntervalMatrix":
        return cls(matrix, matrix)

    @classmethod
    def symmetric(cls, radius: ArrayLike) -> "IntervalMatrix":
        """Entrywise [-radius, radius]"""
        r = np.abs(np.asarray(radius, dtype=float))
        return cls(-r, r)

    @classmethod
    def from_intervals(cls, rows: Sequence[Sequence[Interval]]) -> "IntervalMatrix":
        return cls([[i.lo for i in row] for row in rows], [[i.hi for i in row] for row in rows])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.lo.shape

    @property
    def rows(self) -> int:
        return self.lo.shape[0]

    @property
    def cols(self) -> int:
        return self.lo.shape[1]

    def __getitem__(self, index: Tuple[int, int]) -> Interval:
        return Interval(self.lo[index], self.hi[index])

    def is_zero(self) -> bool:
        return not (self.lo.any() or self.hi.any())

    def __add__(self, other: "IntervalMatrix") -> "IntervalMatrix":
        if other.shape != self.shape:
            raise DomainError(f"Shape mismatch: {self.shape} vs {other.shape}")
        return IntervalMatrix(_exact_or_down(self.lo, other.lo), _exact_or_up(self.hi, other.hi))

    def __matmul__(self, other: Union["IntervalMatrix", IntervalVector]):
        """Enclosure of all products of contained point matrices"""
        if isinstance(other, IntervalVector):
            column = IntervalMatrix(other.lo[:, None], other.hi[:, None])
            product = self @ column
            return IntervalVector(product.lo[:, 0], product.hi[:, 0])
        if self.cols != other.rows:
            raise DomainError(f"Shape mismatch for product: {self.shape} @ {other.shape}")
        term_lo, term_hi = mul_bounds(
            self.lo[:, :, None], self.hi[:, :, None], other.lo[None, :, :], other.hi[None, :, :]
        )
        lo, hi = sum_bounds(term_lo, term_hi, axis=1)
        return IntervalMatrix(lo, hi)

    def quadratic_form(self, d: IntervalVector) -> Interval:
        """Enclosure of d^T M d with squares on the diagonal"""
        if self.rows != self.cols or self.rows != d.dim:
            raise DomainError(f"Quadratic form needs a square matrix of size {d.dim}, got {self.shape}")
        terms = []
        for j in range(self.rows):
            if self.lo[j, j] != 0.0 or self.hi[j, j] != 0.0:
                terms.append(self[j, j] * d[j] ** 2)
            for k in range(j + 1, self.cols):
                coupling = self[j, k] + self[k, j]
                if coupling.lo != 0.0 or coupling.hi != 0.0:
                    terms.append(coupling * (d[j] * d[k]))
        return interval_sum(terms)

    def __repr__(self) -> str:
        return f"IntervalMatrix(lo={self.lo.tolist()}, hi={self.hi.tolist()})"
