"""Interval Taylor models of polynomials over a box"""

from dataclasses import dataclass, field
from typing import Sequence
import numpy as np

from src.exceptions import DomainError
from src.interval.arrays import IntervalVector
from src.interval.interval import Interval, interval_sum
from src.poly.multipoly import MultiPoly
from src.poly.recenter import ShiftPlan


@dataclass(frozen=True)
class TaylorModel:
    """
    Pair (P, I) anchored at `center` over `domain`.

    For every z in the domain: p(z) lies in poly(z - center) + remainder + rounding.
    `remainder` encloses the discarded higher-degree part; `rounding` encloses the
    round-off of the recentered coefficients.
    """

    center: np.ndarray
    domain: IntervalVector
    poly: MultiPoly
    remainder: Interval
    rounding: Interval = field(default_factory=lambda: Interval(0.0, 0.0))

    @property
    def enclosure(self) -> Interval:
        """Total interval part I"""
        return self.remainder + self.rounding

    @property
    def offsets(self) -> IntervalVector:
        """Domain shifted to the expansion point"""
        return self.domain - self.center

    def bounds_at(self, z: Sequence[float]) -> Interval:
        """Enclosure of p(z) predicted by the model at one point"""
        w = np.asarray(z, dtype=float) - self.center
        return self.enclosure + self.poly.evaluate(w)


def _monomial_range(exponent, offsets: IntervalVector) -> Interval:
    result = Interval(1.0, 1.0)
    for i, power in enumerate(exponent):
        if power:
            result = result * offsets[i] ** int(power)
    return result


def build_taylor_model(p: MultiPoly, z_star: Sequence[float], domain: IntervalVector, order: int) -> TaylorModel:
    """
    Build an order-n Taylor model of a polynomial

    Args:
        p: Polynomial over the joint space
        z_star: Expansion point, must lie in the domain
        domain: Box the model is valid on
        order: Total degree kept in the polynomial part

    Returns:
        Taylor model whose remainder encloses the truncated tail over the domain
    """
    center = np.asarray(z_star, dtype=float).reshape(-1)
    if center.size != p.space.dim or domain.dim != p.space.dim:
        raise DomainError(f"Expansion point and domain must have dimension {p.space.dim}")
    if order < 0:
        raise DomainError(f"Taylor order must be nonnegative, got {order}")
    if not domain.contains(center):
        raise DomainError(f"Expansion point {center.tolist()} lies outside the model domain")

    plan = ShiftPlan.from_poly(p)
    lo, hi = plan.coefficient_bounds(center[None, :])
    offsets = domain - center

    kept = {}
    tail_terms = []
    rounding_terms = []
    for exponent, c_lo, c_hi in zip(plan.targets, lo[0], hi[0]):
        coef = Interval(c_lo, c_hi)
        if int(exponent.sum()) <= order:
            mid = coef.midpoint
            kept[tuple(int(e) for e in exponent)] = mid
            if not coef.is_degenerate:
                rounding_terms.append((coef - mid) * _monomial_range(exponent, offsets))
        else:
            tail_terms.append(coef * _monomial_range(exponent, offsets))

    return TaylorModel(
        center=center,
        domain=domain,
        poly=MultiPoly(p.space, kept),
        remainder=interval_sum(tail_terms),
        rounding=interval_sum(rounding_terms),
    )
