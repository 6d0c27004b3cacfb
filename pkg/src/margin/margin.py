"""Sampled-data margin of a barrier inequality over one sampling interval"""

from dataclasses import dataclass
from typing import Optional, Sequence
import logging
import numpy as np

from src.config.settings import settings
from src.exceptions import DomainError
from src.interval.arrays import IntervalVector
from src.interval.interval import add_down
from src.margin.branch_and_bound import lower_bound_poly
from src.poly.multipoly import MultiPoly
from src.poly.taylor_model import build_taylor_model
from src.reach.tube import ReachResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarginRequest:
    """Inputs of one margin computation"""

    xi: MultiPoly
    x_anchor: np.ndarray
    u_center: np.ndarray
    dt: float
    eps_x: float = 0.0
    order: Optional[int] = None

    def __post_init__(self):
        if self.dt <= 0.0:
            raise DomainError(f"Sampling interval must be positive, got {self.dt}")
        if self.eps_x < 0.0:
            raise DomainError(f"Measurement radius must be nonnegative, got {self.eps_x}")
        object.__setattr__(self, "x_anchor", np.asarray(self.x_anchor, dtype=float).reshape(-1))
        object.__setattr__(self, "u_center", np.asarray(self.u_center, dtype=float).reshape(-1))
        if self.x_anchor.size != self.xi.space.n or self.u_center.size != self.xi.space.m:
            raise DomainError("Anchor and input center must match the state and input dimensions")

    @property
    def z_star(self) -> np.ndarray:
        return self.xi.space.join(self.x_anchor, self.u_center)


@dataclass(frozen=True)
class MarginResult:
    """Margin phi = remainder_lo + poly_lo rounded downward, with diagnostics"""

    phi: float
    remainder_lo: float
    poly_lo: float
    zk_hull: IntervalVector
    nodes: int = 0
    elapsed: float = 0.0
    converged: bool = True
    affine: bool = False


def delta_xi(xi: MultiPoly, x_anchor: Sequence[float]) -> MultiPoly:
    """xi(x, u) - xi(x_anchor, u), a polynomial vanishing at x = x_anchor"""
    return xi - xi.substitute_state(x_anchor)


def assemble_zk(reach: ReachResult, U_box: IntervalVector) -> IntervalVector:
    """Joint box hull(tube) x U"""
    return reach.hull.product(U_box)


def compute_margin(
    req: MarginRequest,
    reach: ReachResult,
    U_box: IntervalVector,
    tol: Optional[float] = None,
    budget: Optional[int] = None,
    time_budget: Optional[float] = None,
) -> MarginResult:
    """
    Margin of the sampled barrier condition at one step

    Args:
        req: Barrier expression, anchor and sampling data
        reach: Tube over the sampling interval from the anchor set
        U_box: Full admissible input box
        tol: Branch-and-bound tolerance
        budget: Branch-and-bound node budget
        time_budget: Optional wall-clock limit for the bound

    Returns:
        Margin result; phi never exceeds delta_xi over the joint box
    """
    zk = assemble_zk(reach, U_box)
    change = delta_xi(req.xi, req.x_anchor)
    if change.is_zero():
        return MarginResult(phi=0.0, remainder_lo=0.0, poly_lo=0.0, zk_hull=zk, affine=True)

    if change.is_affine():
        # Linear program over a box: interval evaluation is exact up to rounding
        poly_lo = change.evaluate_interval(zk).lo
        return MarginResult(phi=poly_lo, remainder_lo=0.0, poly_lo=poly_lo, zk_hull=zk, affine=True)

    order = settings.taylor_order if req.order is None else req.order
    model = build_taylor_model(change, req.z_star, zk, order)
    bound = lower_bound_poly(model.poly, model.offsets, tol=tol, budget=budget, time_budget=time_budget)
    remainder_lo = model.enclosure.lo
    phi = add_down(remainder_lo, bound.lower)
    logger.debug(
        f"Margin phi={phi:.6g} (remainder {remainder_lo:.3g}, polynomial {bound.lower:.6g}, "
        f"{bound.nodes} boxes)"
    )
    return MarginResult(
        phi=phi,
        remainder_lo=remainder_lo,
        poly_lo=bound.lower,
        zk_hull=zk,
        nodes=bound.nodes,
        elapsed=bound.elapsed,
        converged=bound.converged,
    )


def check_initial_condition(
    s_chain: Sequence[MultiPoly],
    x0_hat: Sequence[float],
    eps_x: float,
    tol: Optional[float] = None,
    budget: Optional[int] = None,
) -> bool:
    """
    Certify s_k >= 0 on the box enclosing the measurement ball around x0_hat

    Args:
        s_chain: State-only functions s_0 = h, s_1, ..., s_{r-1}
        x0_hat: Measured initial state
        eps_x: Measurement radius
        tol: Branch-and-bound tolerance
        budget: Branch-and-bound node budget

    Returns:
        True when every lower bound is nonnegative
    """
    if eps_x < 0.0:
        raise DomainError(f"Measurement radius must be nonnegative, got {eps_x}")
    x0_hat = np.asarray(x0_hat, dtype=float).reshape(-1)
    ball = IntervalVector.ball_enclosure(x0_hat, eps_x)
    for k, s in enumerate(s_chain):
        space = s.space
        if s.depends_on_inputs():
            raise DomainError(f"s_{k} depends on the inputs")
        # Inputs do not appear; pin them to zero width
        box = ball.product(IntervalVector.point(np.zeros(space.m))) if space.m else ball
        bound = lower_bound_poly(s, box, tol=tol, budget=budget)
        if bound.lower < 0.0:
            logger.info(f"Initial condition fails for s_{k}: lower bound {bound.lower:.6g}")
            return False
    return True
