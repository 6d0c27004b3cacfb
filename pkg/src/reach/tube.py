"""One-interval reachable tube of a linearized system with interval remainder"""

from dataclasses import dataclass
from math import factorial
from typing import Optional, Sequence
import logging
import numpy as np

from src.config.settings import settings
from src.exceptions import ConvergenceError, DomainError
from src.interval.arrays import IntervalMatrix, IntervalVector, round_up
from src.poly.multipoly import MultiPoly
from src.reach.linearize import LinearizedSystem, Linearizer
from src.reach.zonotope import Zonotope

logger = logging.getLogger(__name__)

_EPS = 2.0 ** -52


@dataclass(frozen=True)
class ExponentialSeries:
    """Truncated series of e^{A dt} and its integral with entrywise error bounds"""

    phi: np.ndarray          # sum_{k<=p} (A dt)^k / k!
    phi_error: np.ndarray    # entrywise bound on |e^{A dt} - phi| incl. rounding
    gamma: np.ndarray        # sum_{k<=p} A^k dt^{k+1} / (k+1)!
    gamma_error: np.ndarray
    gamma_abs: np.ndarray    # entrywise bound on int_0^dt |e^{A s}| ds
    terms: list              # (A dt)^k / k! for k = 0..p
    dt: float
    order: int


def _bound(values: np.ndarray, slack: float) -> np.ndarray:
    """Round a nonnegative estimate up after a relative slack; zeros stay exact"""
    values = np.asarray(values, dtype=float)
    return np.where(values > 0.0, round_up(values * (1.0 + slack)), 0.0)


def exponential_series(A: np.ndarray, dt: float, order: Optional[int] = None) -> ExponentialSeries:
    """
    Truncated matrix exponential with rigorous remainders

    Args:
        A: Square system matrix
        dt: Interval length, positive
        order: Truncation order p

    Returns:
        Series data; raises ConvergenceError when ||A|| dt is too large for the order
    """
    p = settings.expm_order if order is None else order
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if dt <= 0.0:
        raise DomainError(f"Interval length must be positive, got {dt}")
    if p < 1:
        raise DomainError(f"Series order must be at least 1, got {p}")
    norm = float(round_up(np.abs(A).sum(axis=1).max())) if n else 0.0
    ratio = norm * dt / (p + 2)
    if ratio >= 1.0:
        raise ConvergenceError(
            f"Matrix exponential remainder does not converge (||A|| dt = {norm * dt:.4g} for order {p}); "
            f"use a smaller sampling interval"
        )

    Adt = A * dt
    absAdt = np.abs(A) * dt
    terms = [np.eye(n)]
    abs_terms = [np.eye(n)]
    for k in range(1, p + 1):
        terms.append(terms[-1] @ Adt / k)
        abs_terms.append(abs_terms[-1] @ absAdt / k)
    phi = np.sum(terms, axis=0)
    gamma = dt * np.sum([t / (k + 1) for k, t in enumerate(terms)], axis=0)
    abs_phi = np.sum(abs_terms, axis=0)
    abs_gamma = dt * np.sum([t / (k + 1) for k, t in enumerate(abs_terms)], axis=0)

    scaled = norm * dt
    tail_phi = scaled ** (p + 1) / factorial(p + 1) / (1.0 - ratio)
    tail_gamma = dt * scaled ** (p + 1) / factorial(p + 2) / (1.0 - scaled / (p + 3))
    # Products and sums of p terms of size n; entries with no higher-order term are exact
    slack = 4.0 * (n + p + 2) * _EPS
    inexact = np.sum(abs_terms[1:], axis=0) != 0.0
    phi_error = _bound(tail_phi + slack * abs_phi * inexact, slack)
    gamma_error = _bound(tail_gamma + slack * abs_gamma * inexact, slack)
    return ExponentialSeries(
        phi=phi,
        phi_error=phi_error,
        gamma=gamma,
        gamma_error=gamma_error,
        gamma_abs=_bound(abs_gamma + gamma_error, slack),
        terms=terms,
        dt=dt,
        order=p,
    )


def _segment_matrix(matrices: Sequence[np.ndarray], error: np.ndarray, slack: float) -> IntervalMatrix:
    """Entrywise sum of segments [min(0, M), max(0, M)] widened by +-error"""
    low = np.sum([np.minimum(M, 0.0) for M in matrices], axis=0) if matrices else 0.0
    high = np.sum([np.maximum(M, 0.0) for M in matrices], axis=0) if matrices else 0.0
    lo = -_bound(-low + error, slack)
    hi = _bound(high + error, slack)
    return IntervalMatrix(lo, hi)


def curvature_matrix(series: ExponentialSeries) -> IntervalMatrix:
    """Interval matrix F with e^{At} x in (1 - t/dt) x + (t/dt) e^{A dt} x + F x over [0, dt]"""
    p = series.order
    slack = 4.0 * (p + 2) * _EPS
    segments = []
    for k in range(2, p + 1):
        beta = k ** (-k / (k - 1)) - k ** (-1.0 / (k - 1))
        segments.append(beta * (1.0 + slack) * series.terms[k])
    return _segment_matrix(segments, series.phi_error, slack)


def input_correction_matrix(series: ExponentialSeries) -> IntervalMatrix:
    """Interval matrix covering sum_{k>=1} A^k t^{k+1}/(k+1)! for t in [0, dt]"""
    p = series.order
    slack = 4.0 * (p + 2) * _EPS
    segments = [series.dt * series.terms[k] / (k + 1) for k in range(1, p + 1)]
    return _segment_matrix(segments, series.gamma_error, slack)


@dataclass(frozen=True)
class ReachResult:
    """Tube over one sampling interval, endpoint set, and the box enclosing both"""

    tube: Zonotope
    endpoint: Zonotope
    hull: IntervalVector
    linearization: Optional[LinearizedSystem] = None
    seed: Optional[IntervalVector] = None
    rounds: int = 1


def _box(vector: IntervalVector) -> Zonotope:
    return Zonotope.from_box(vector)


def reach_tube(
    sys: LinearizedSystem,
    X0: Zonotope,
    U_box: IntervalVector,
    dt: float,
    order: Optional[int] = None,
    max_generators: Optional[int] = None,
) -> ReachResult:
    """
    Enclose every solution of dx/dt in A(x - x*) + B(u - u*) + c + L over [0, dt]

    Args:
        sys: Linearized system
        X0: Initial set
        U_box: Admissible inputs, held constant over the interval
        dt: Interval length
        order: Matrix-exponential truncation order
        max_generators: Generator cap before hull reduction

    Returns:
        Tube, endpoint set and their joint interval hull
    """
    n = sys.n
    if X0.dim != n or U_box.dim != sys.B.shape[1]:
        raise DomainError(f"Initial set and input box must have dimensions {n} and {sys.B.shape[1]}")
    if not (np.isfinite(sys.L.lo).all() and np.isfinite(sys.L.hi).all()):
        raise DomainError("Linearization remainder must be finite")

    series = exponential_series(sys.A, dt, order)
    Y0 = X0.translate(-sys.x_star)
    Y0_hull = Y0.interval_hull()

    # Constant-input set V = B (U - u*) + c + mid(L); the rest of L is a radius
    remainder_mid = sys.L.midpoint()
    remainder_rad = sys.L.radius()
    V = (Zonotope.from_box(U_box).translate(-sys.u_star).linear_map(sys.B)
         .translate(sys.c).translate(remainder_mid))
    V_hull = V.interval_hull()

    error_box = IntervalMatrix.point(series.gamma_abs) @ IntervalVector.point(remainder_rad)
    remainder_part = _box(IntervalVector(-error_box.hi, error_box.hi))

    # Homogeneous solution
    homogeneous_tube = Y0.convex_hull_with_image(series.phi) + _box(curvature_matrix(series) @ Y0_hull)
    homogeneous_end = Y0.linear_map(series.phi) + _box(IntervalMatrix.symmetric(series.phi_error) @ Y0_hull)

    # Forced solution: t V over [0, dt] is the convex hull of {0} and dt V
    half = 0.5 * dt
    first_order = Zonotope(
        half * V.center,
        np.hstack([(half * V.center)[:, None], dt * V.generators]),
    )
    # Scaling by dt and dt/2 rounds; cover it
    first_order = first_order + _box(IntervalVector.from_center_radius(
        np.zeros(n), 4.0 * _EPS * dt * (np.abs(V.center) + np.abs(V.generators).sum(axis=1)),
    ))
    forced_tube = first_order + _box(input_correction_matrix(series) @ V_hull)
    forced_end = V.linear_map(series.gamma) + _box(IntervalMatrix.symmetric(series.gamma_error) @ V_hull)

    tube = (homogeneous_tube + forced_tube + remainder_part).translate(sys.x_star).reduce(max_generators)
    endpoint = (homogeneous_end + forced_end + remainder_part).translate(sys.x_star).reduce(max_generators)
    hull = tube.interval_hull().hull(endpoint.interval_hull())
    return ReachResult(tube=tube, endpoint=endpoint, hull=hull, linearization=sys)


class ReachabilityAnalyzer:
    """Reachable tube of a nonlinear polynomial system with a verified linearization domain"""

    def __init__(
        self,
        field: Sequence[MultiPoly],
        order: Optional[int] = None,
        max_generators: Optional[int] = None,
        seed_inflation: Optional[float] = None,
        max_seed_rounds: Optional[int] = None,
    ):
        """
        Initialize the analyzer

        Args:
            field: Joint-space vector field F(x, u)
            order: Matrix-exponential truncation order
            max_generators: Generator cap per zonotope
            seed_inflation: Growth factor of the linearization domain between rounds
            max_seed_rounds: Rounds before giving up
        """
        self.linearizer = Linearizer(field)
        self.space = self.linearizer.space
        self.order = settings.expm_order if order is None else order
        self.max_generators = settings.max_generators if max_generators is None else max_generators
        self.seed_inflation = settings.seed_inflation if seed_inflation is None else seed_inflation
        self.max_seed_rounds = settings.max_seed_rounds if max_seed_rounds is None else max_seed_rounds

    def _drift_radius(self, start: IntervalVector, U_box: IntervalVector, dt: float) -> np.ndarray:
        """A-priori displacement bound |F| dt over the starting box, inflated"""
        joint = start.product(U_box)
        speed = np.array([F.evaluate_interval(joint).mag for F in self.linearizer.field])
        return round_up(self.seed_inflation * speed * dt)

    def compute(
        self,
        X0: Zonotope,
        U_box: IntervalVector,
        dt: float,
        x_star: Optional[Sequence[float]] = None,
        u_star: Optional[Sequence[float]] = None,
    ) -> ReachResult:
        """
        Tube over [0, dt] from X0 under constant inputs in U_box

        Args:
            X0: Initial set
            U_box: Admissible inputs
            dt: Interval length
            x_star: State expansion point, defaults to the center of X0
            u_star: Input expansion point, defaults to the center of U_box

        Returns:
            Reach result whose tube lies inside the linearization domain it was computed on
        """
        x_star = X0.center if x_star is None else np.asarray(x_star, dtype=float)
        u_star = U_box.midpoint() if u_star is None else np.asarray(u_star, dtype=float)
        start = X0.interval_hull()

        if not self.linearizer.nonlinear:
            sys = self.linearizer.linearize(x_star, u_star, start, U_box)
            return reach_tube(sys, X0, U_box, dt, self.order, self.max_generators)

        radius = self._drift_radius(start, U_box, dt)
        for round_index in range(1, self.max_seed_rounds + 1):
            seed = start.bloat(radius)
            sys = self.linearizer.linearize(x_star, u_star, seed, U_box)
            result = reach_tube(sys, X0, U_box, dt, self.order, self.max_generators)
            if result.hull.subset_of(seed):
                return ReachResult(
                    tube=result.tube,
                    endpoint=result.endpoint,
                    hull=result.hull,
                    linearization=sys,
                    seed=seed,
                    rounds=round_index,
                )
            needed = np.maximum(
                np.maximum(start.lo - result.hull.lo, result.hull.hi - start.hi), 0.0
            )
            logger.debug(f"Linearization domain round {round_index} too small; inflating")
            radius = round_up(self.seed_inflation * np.maximum(radius, needed))

        raise ConvergenceError(
            f"Linearization domain did not contain the tube after {self.max_seed_rounds} rounds; "
            f"use a smaller sampling interval"
        )


def guaranteed_reach(
    field: Sequence[MultiPoly],
    X0: Zonotope,
    U_box: IntervalVector,
    dt: float,
    order: Optional[int] = None,
) -> ReachResult:
    """One-shot reachable tube with a verified linearization domain"""
    return ReachabilityAnalyzer(field, order=order).compute(X0, U_box, dt)
