"""Zonotopes: center plus generator matrix"""

from typing import Optional, Sequence, Tuple
import logging
import numpy as np

from src.config.settings import settings
from src.exceptions import DomainError
from src.interval.arrays import IntervalMatrix, IntervalVector, round_up, sum_bounds

logger = logging.getLogger(__name__)


def _mid_rad(lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Float midpoint and an upper bound of the distance to either endpoint"""
    mid = np.where(lo == hi, lo, 0.5 * lo + 0.5 * hi)
    rad = np.maximum(round_up(hi - mid), round_up(mid - lo)) * (lo != hi)
    return mid, rad


def _row_total(values: np.ndarray) -> np.ndarray:
    """Upper bound of the row sums of a nonnegative (n, k) array"""
    if values.shape[1] == 0:
        return np.zeros(values.shape[0])
    return sum_bounds(values, values, axis=1)[1]


def _rounding_generators(error: np.ndarray) -> np.ndarray:
    """Axis-aligned generators covering a per-coordinate rounding error"""
    nonzero = np.flatnonzero(error)
    generators = np.zeros((error.size, nonzero.size))
    generators[nonzero, np.arange(nonzero.size)] = error[nonzero]
    return generators


class Zonotope:
    """Set {center + G beta : beta in [-1, 1]^k}"""

    __slots__ = ("center", "generators")

    def __init__(self, center: Sequence[float], generators: Optional[np.ndarray] = None):
        """Initialize from a center and an (n, k) generator matrix"""
        c = np.array(center, dtype=float).reshape(-1)
        if c.size == 0:
            raise DomainError("Zonotopes must have positive dimension")
        if generators is None:
            g = np.zeros((c.size, 0))
        else:
            g = np.array(generators, dtype=float)
            if g.ndim == 1:
                g = g.reshape(-1, 1)
        if g.ndim != 2 or g.shape[0] != c.size:
            raise DomainError(f"Generators have {g.shape[0]} rows, center has {c.size}")
        if not (np.isfinite(c).all() and np.isfinite(g).all()):
            raise DomainError("Zonotope data must be finite")
        # Zero generators carry no volume
        if g.shape[1]:
            g = g[:, np.any(g != 0.0, axis=0)]
        c.setflags(write=False)
        g.setflags(write=False)
        self.center = c
        self.generators = g

    @classmethod
    def point(cls, x: Sequence[float]) -> "Zonotope":
        return cls(x)

    @classmethod
    def from_box(cls, box: IntervalVector) -> "Zonotope":
        """Zonotope of a box, rounding absorbed into the radii"""
        return cls(box.midpoint(), np.diag(box.radius()))

    @classmethod
    def _with_error(cls, center: np.ndarray, generators: np.ndarray, error: np.ndarray) -> "Zonotope":
        return cls(center, np.hstack([generators, _rounding_generators(error)]))

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def n_generators(self) -> int:
        return self.generators.shape[1]

    def _image(self, M: np.ndarray) -> Tuple[IntervalVector, Optional[IntervalMatrix]]:
        """Rigorous enclosures of M c and M G"""
        Mi = IntervalMatrix.point(M)
        center = Mi @ IntervalVector.point(self.center)
        generators = Mi @ IntervalMatrix.point(self.generators) if self.n_generators else None
        return center, generators

    def linear_map(self, matrix: np.ndarray) -> "Zonotope":
        """Image under x -> M x; inexact products add an axis-aligned error generator"""
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[1] != self.dim:
            raise DomainError(f"Matrix of shape {M.shape} cannot map a zonotope of dimension {self.dim}")
        center_iv, gen_iv = self._image(M)
        center, error = _mid_rad(center_iv.lo, center_iv.hi)
        if gen_iv is None:
            return Zonotope._with_error(center, np.zeros((M.shape[0], 0)), error)
        generators, gen_rad = _mid_rad(gen_iv.lo, gen_iv.hi)
        total = _row_total(np.hstack([error[:, None], gen_rad]))
        return Zonotope._with_error(center, generators, total)

    def minkowski_sum(self, other: "Zonotope") -> "Zonotope":
        if other.dim != self.dim:
            raise DomainError(f"Dimension mismatch: {self.dim} vs {other.dim}")
        total = IntervalVector.point(self.center) + IntervalVector.point(other.center)
        center, error = _mid_rad(total.lo, total.hi)
        return Zonotope._with_error(center, np.hstack([self.generators, other.generators]), error)

    def __add__(self, other: "Zonotope") -> "Zonotope":
        return self.minkowski_sum(other)

    def translate(self, offset: Sequence[float]) -> "Zonotope":
        return self.minkowski_sum(Zonotope(offset))

    def interval_hull(self) -> IntervalVector:
        """Smallest box containing the zonotope, rounded outward"""
        radius = _row_total(np.abs(self.generators))
        return IntervalVector.point(self.center) + IntervalVector(-radius, radius)

    def reduce(self, max_generators: Optional[int] = None) -> "Zonotope":
        """Replace all generators by the interval hull when over the cap"""
        cap = settings.max_generators if max_generators is None else max_generators
        if self.n_generators <= cap:
            return self
        logger.debug(f"Reducing zonotope with {self.n_generators} generators to its interval hull")
        return Zonotope.from_box(self.interval_hull())

    def convex_hull_with_image(self, matrix: np.ndarray) -> "Zonotope":
        """
        Zonotope enclosing the convex hull of Z and M Z

        Args:
            matrix: Square map M

        Returns:
            Zonotope with center (c + Mc)/2 and generators (G + MG)/2, (c - Mc)/2, (G - MG)/2
        """
        M = np.asarray(matrix, dtype=float)
        if M.shape != (self.dim, self.dim):
            raise DomainError(f"Convex hull with image needs a square map of size {self.dim}")
        center_iv, gen_iv = self._image(M)
        c = IntervalVector.point(self.center)
        neg_center = IntervalVector(-center_iv.hi, -center_iv.lo)
        plus_c = c + center_iv
        minus_c = c + neg_center
        # Halving is exact
        center, err_center = _mid_rad(0.5 * plus_c.lo, 0.5 * plus_c.hi)
        diff, err_diff = _mid_rad(0.5 * minus_c.lo, 0.5 * minus_c.hi)
        columns = [diff[:, None]]
        errors = [err_center[:, None], err_diff[:, None]]
        if gen_iv is not None:
            G = IntervalMatrix.point(self.generators)
            plus_g = G + gen_iv
            minus_g = G + IntervalMatrix(-gen_iv.hi, -gen_iv.lo)
            sum_mid, sum_rad = _mid_rad(0.5 * plus_g.lo, 0.5 * plus_g.hi)
            diff_mid, diff_rad = _mid_rad(0.5 * minus_g.lo, 0.5 * minus_g.hi)
            columns = [sum_mid] + columns + [diff_mid]
            errors += [sum_rad, diff_rad]
        return Zonotope._with_error(center, np.hstack(columns), _row_total(np.hstack(errors)))

    def contains_samples(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Per-sample membership in the interval hull"""
        hull = self.interval_hull()
        pts = np.atleast_2d(points)
        return np.all((pts >= hull.lo - tol) & (pts <= hull.hi + tol), axis=1)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Random points of the set"""
        beta = rng.uniform(-1.0, 1.0, size=(count, self.n_generators))
        return self.center + beta @ self.generators.T

    def __repr__(self) -> str:
        return f"Zonotope(dim={self.dim}, generators={self.n_generators})"


def zono_linear_map(matrix: np.ndarray, zonotope: Zonotope) -> Zonotope:
    return zonotope.linear_map(matrix)


def zono_minkowski(first: Zonotope, second: Zonotope) -> Zonotope:
    return first.minkowski_sum(second)


def zono_interval_hull(zonotope: Zonotope) -> IntervalVector:
    return zonotope.interval_hull()
