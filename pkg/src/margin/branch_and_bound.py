"""Sound lower bounds of polynomials over boxes by interval branch-and-bound"""

from dataclasses import dataclass
from typing import List, Optional, Tuple
import heapq
import logging
import time
import numpy as np

from src.config.settings import settings
from src.exceptions import DomainError
from src.interval.arrays import IntervalVector, directed_product, round_up, sum_bounds
from src.poly.multipoly import MultiPoly
from src.poly.recenter import ShiftPlan

logger = logging.getLogger(__name__)

_EPS = 2.0 ** -52


@dataclass(frozen=True)
class PolynomialBound:
    """Outcome of a branch-and-bound run: lower <= min p <= upper"""

    lower: float
    upper: float
    nodes: int
    converged: bool
    elapsed: float

    @property
    def gap(self) -> float:
        return self.upper - self.lower


class CenteredFormBounder:
    """Vectorised centred-form enclosures of one polynomial over many boxes"""

    def __init__(self, p: MultiPoly):
        """Initialize with the recentering plan of p"""
        self.plan = ShiftPlan.from_poly(p)
        targets = self.plan.targets
        self.constant = np.flatnonzero(targets.sum(axis=1) == 0)
        self.even = np.all(targets % 2 == 0, axis=1)
        self.degrees = targets.sum(axis=1)

    def bounds(self, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Lower bounds over each box and rigorous upper bounds of p at each box center

        Args:
            lo, hi: Box endpoints, shape (N, d)

        Returns:
            (lower, upper) arrays of shape (N,)
        """
        centers = np.where(lo == hi, lo, 0.5 * lo + 0.5 * hi)
        radius = np.maximum(round_up(hi - centers), round_up(centers - lo)) * (lo != hi)
        coef_lo, coef_hi = self.plan.coefficient_bounds(centers)

        # |w^beta| <= r^beta over [-r, r]; w^beta >= 0 when every exponent is even
        targets = self.plan.targets.astype(float)
        with np.errstate(under="ignore"):
            ranges = np.prod(radius[:, None, :] ** targets[None, :, :], axis=-1)
        ranges = round_up(ranges * (1.0 + 4.0 * (self.degrees + 1) * _EPS))
        magnitude = np.maximum(np.abs(coef_lo), np.abs(coef_hi))
        factor = np.where(self.even, np.minimum(coef_lo, 0.0), -magnitude)
        term_lo = directed_product(factor, ranges)[0]
        term_lo[:, self.constant] = coef_lo[:, self.constant]
        lower = sum_bounds(term_lo, term_lo, axis=1)[0]
        upper = coef_hi[:, self.constant].sum(axis=1) if self.constant.size else np.zeros(lo.shape[0])
        return lower, upper


def lower_bound_poly(
    p: MultiPoly,
    box: IntervalVector,
    tol: Optional[float] = None,
    budget: Optional[int] = None,
    time_budget: Optional[float] = None,
    batch_size: Optional[int] = None,
) -> PolynomialBound:
    """
    Lower bound of a polynomial over a box

    Args:
        p: Polynomial over the joint space
        box: Finite box of the same dimension
        tol: Stop once the gap between incumbent and least open bound is at most tol
        budget: Maximum number of bounded boxes
        time_budget: Optional wall-clock limit in seconds
        batch_size: Boxes split per iteration

    Returns:
        Bound whose lower value never exceeds the minimum of p over the box
    """
    tol = settings.pop_tolerance if tol is None else tol
    budget = settings.pop_node_budget if budget is None else budget
    batch_size = settings.pop_batch_size if batch_size is None else batch_size
    if tol <= 0.0:
        raise DomainError(f"Tolerance must be positive, got {tol}")
    if box.dim != p.space.dim:
        raise DomainError(f"Box has dimension {box.dim}, expected {p.space.dim}")
    if not (np.isfinite(box.lo).all() and np.isfinite(box.hi).all()):
        raise DomainError("Branch-and-bound needs a finite box")

    start = time.perf_counter()
    if p.degree == 0:
        value = p.coefficient((0,) * p.space.dim)
        return PolynomialBound(value, value, 0, True, time.perf_counter() - start)

    bounder = CenteredFormBounder(p)
    lower, upper = bounder.bounds(box.lo[None, :], box.hi[None, :])
    incumbent = float(upper[0])
    nodes = 1
    counter = 0
    heap: List[Tuple[float, int, np.ndarray, np.ndarray]] = [(float(lower[0]), counter, box.lo, box.hi)]
    settled: List[float] = []

    while heap:
        least = min(heap[0][0], min(settled)) if settled else heap[0][0]
        if incumbent - least <= tol:
            break
        if nodes >= budget:
            break
        if time_budget is not None and time.perf_counter() - start >= time_budget:
            break

        parents = []
        while heap and len(parents) < batch_size:
            bound, _, lo, hi = heapq.heappop(heap)
            if bound > incumbent:
                continue
            width = hi - lo
            if not width.any():
                settled.append(bound)
                continue
            parents.append((lo, hi, int(np.argmax(width))))
        if not parents:
            continue

        child_lo, child_hi = [], []
        for lo, hi, axis in parents:
            mid = 0.5 * lo[axis] + 0.5 * hi[axis]
            left_hi = hi.copy()
            left_hi[axis] = mid
            right_lo = lo.copy()
            right_lo[axis] = mid
            child_lo += [lo, right_lo]
            child_hi += [left_hi, hi]
        child_lo = np.array(child_lo)
        child_hi = np.array(child_hi)
        lower, upper = bounder.bounds(child_lo, child_hi)
        nodes += len(child_lo)
        incumbent = min(incumbent, float(upper.min()))
        for bound, lo, hi in zip(lower, child_lo, child_hi):
            if bound <= incumbent:
                counter += 1
                heapq.heappush(heap, (float(bound), counter, lo, hi))

    open_bounds = [entry[0] for entry in heap] + settled
    result = min(open_bounds) if open_bounds else incumbent
    result = min(result, incumbent)
    converged = incumbent - result <= tol
    elapsed = time.perf_counter() - start
    if not converged:
        logger.warning(
            f"Branch-and-bound stopped with gap {incumbent - result:.3g} after {nodes} boxes "
            f"({elapsed * 1e3:.1f} ms); returning the sound bound"
        )
    return PolynomialBound(result, incumbent, nodes, converged, elapsed)
