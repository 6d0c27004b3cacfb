"""Per-step safety filter: reachable tube, margins, constraints and the QP"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple
import logging
import time
import numpy as np

from src.config.settings import settings
from src.controller.cbf import (
    CBFSpec,
    build_s_chain,
    build_xi,
    make_constraint,
    relative_degree,
    shrink_input_box,
)
from src.controller.qp import QPResult, solve_safety_qp
from src.controller.system import ControlAffineSystem
from src.interval.arrays import IntervalVector
from src.margin.margin import MarginRequest, MarginResult, check_initial_condition, compute_margin
from src.poly.multipoly import MultiPoly
from src.reach.tube import ReachabilityAnalyzer, ReachResult
from src.reach.zonotope import Zonotope

logger = logging.getLogger(__name__)


class ControllerKind(str, Enum):
    """Safety filter variants"""

    NAIVE = "naive"
    SDCBF = "sdcbf"
    USDCBF = "usdcbf"


@dataclass(frozen=True)
class PreparedBarrier:
    """Barrier with its relative degree, xi polynomial and s-chain"""

    spec: CBFSpec
    degree: int
    xi: MultiPoly
    s_chain: Tuple[MultiPoly, ...]
    gain: Tuple[MultiPoly, ...]   # L_g L_f^{r-1} h, one entry per input

    def input_row(self, x: Sequence[float]) -> np.ndarray:
        space = self.spec.h.space
        z = space.join(x, np.zeros(space.m))
        return np.array([p.evaluate(z) for p in self.gain])


@dataclass(frozen=True)
class StepDecision:
    """Everything the filter decided at one sampling instant"""

    u_nominal: np.ndarray
    qp: QPResult
    constraints: Tuple[Tuple[np.ndarray, float], ...]
    margins: Tuple[Optional[MarginResult], ...]
    reach: Optional[ReachResult]
    elapsed: float

    @property
    def u_desired(self) -> np.ndarray:
        return self.qp.u_star

    @property
    def phis(self) -> Tuple[float, ...]:
        return tuple(0.0 if m is None else m.phi for m in self.margins)


class SafetyFilter:
    """Filters nominal inputs through the naive, sampled-data or uncertainty-aware CBF-QP"""

    def __init__(
        self,
        system: ControlAffineSystem,
        barriers: Sequence[CBFSpec],
        kind: ControllerKind = ControllerKind.USDCBF,
        eps_x: float = 0.0,
        taylor_order: Optional[int] = None,
        pop_tolerance: Optional[float] = None,
        pop_budget: Optional[int] = None,
        sample_states: Optional[Iterable[Sequence[float]]] = None,
    ):
        """
        Initialize the filter and prepare every barrier

        Args:
            system: Control-affine system with input box and actuation radius
            barriers: Barrier specifications
            kind: Filter variant
            eps_x: Measurement radius, used by the uncertainty-aware variant
            taylor_order: Taylor order of the margin models
            pop_tolerance: Branch-and-bound tolerance
            pop_budget: Branch-and-bound node budget
            sample_states: States used to cross-check relative degrees
        """
        if not barriers:
            raise ValueError("At least one barrier is required")
        self.system = system
        self.kind = ControllerKind(kind)
        self.eps_x = float(eps_x) if self.kind == ControllerKind.USDCBF else 0.0
        self.taylor_order = settings.taylor_order if taylor_order is None else taylor_order
        self.pop_tolerance = settings.pop_tolerance if pop_tolerance is None else pop_tolerance
        self.pop_budget = settings.pop_node_budget if pop_budget is None else pop_budget
        sample_states = list(sample_states or [])

        self.barriers: List[PreparedBarrier] = []
        for spec in barriers:
            r = relative_degree(spec.h, system, sample_states)
            chain = [spec.h]
            for _ in range(r - 1):
                chain.append(system.lie_f(chain[-1]))
            self.barriers.append(PreparedBarrier(
                spec=spec,
                degree=r,
                xi=build_xi(spec, system, r),
                s_chain=tuple(build_s_chain(spec, system, r)),
                gain=tuple(system.lie_g(chain[-1])),
            ))
            logger.debug(f"Barrier {spec.name}: relative degree {r}")

        self.U_box = system.U_box
        self.U_qp = shrink_input_box(system.U_box, system.eps_u) if self.kind == ControllerKind.USDCBF else system.U_box
        self.analyzer = ReachabilityAnalyzer(system.vector_field) if self.kind != ControllerKind.NAIVE else None

    def barrier_values(self, x: Sequence[float]) -> np.ndarray:
        """h_i(x) for every barrier"""
        z = self.system.space.join(x, np.zeros(self.system.m))
        return np.array([b.spec.h.evaluate(z) for b in self.barriers])

    def critical_barrier(self, x: Sequence[float]) -> PreparedBarrier:
        """Barrier with the smallest value at x"""
        return self.barriers[int(np.argmin(self.barrier_values(x)))]

    def initial_condition_holds(self, x0_hat: Sequence[float]) -> bool:
        """Every s-chain is nonnegative on the measurement box around x0_hat"""
        return all(
            check_initial_condition(b.s_chain, x0_hat, self.eps_x, tol=self.pop_tolerance, budget=self.pop_budget)
            for b in self.barriers
        )

    def initial_set(self, x_anchor: np.ndarray) -> Zonotope:
        if self.eps_x == 0.0:
            return Zonotope.point(x_anchor)
        return Zonotope.from_box(IntervalVector.ball_enclosure(x_anchor, self.eps_x))

    def step(self, x_anchor: Sequence[float], u_nominal: Sequence[float], dt: float) -> StepDecision:
        """
        Filter one nominal input

        Args:
            x_anchor: State the constraints are imposed at (true or estimated)
            u_nominal: Nominal input
            dt: Sampling interval

        Returns:
            Decision with the QP result and per-barrier margins
        """
        start = time.perf_counter()
        x_anchor = np.asarray(x_anchor, dtype=float).reshape(-1)
        u_nominal = np.asarray(u_nominal, dtype=float).reshape(-1)

        reach = None
        margins: List[Optional[MarginResult]] = [None] * len(self.barriers)
        if self.kind != ControllerKind.NAIVE:
            # One tube serves every barrier
            reach = self.analyzer.compute(self.initial_set(x_anchor), self.U_box, dt, x_star=x_anchor)
            time_budget = settings.pop_time_budget(dt)
            u_center = self.U_box.midpoint()
            for i, barrier in enumerate(self.barriers):
                request = MarginRequest(
                    xi=barrier.xi,
                    x_anchor=x_anchor,
                    u_center=u_center,
                    dt=dt,
                    eps_x=self.eps_x,
                    order=self.taylor_order,
                )
                margins[i] = compute_margin(
                    request, reach, self.U_box,
                    tol=self.pop_tolerance, budget=self.pop_budget, time_budget=time_budget,
                )

        constraints = tuple(
            make_constraint(b.xi, x_anchor, 0.0 if m is None else m.phi)
            for b, m in zip(self.barriers, margins)
        )
        qp = solve_safety_qp(u_nominal, constraints, self.U_qp)
        if not qp.feasible:
            logger.warning(f"Safety QP infeasible at x={x_anchor.tolist()}")
        return StepDecision(
            u_nominal=u_nominal,
            qp=qp,
            constraints=constraints,
            margins=tuple(margins),
            reach=reach,
            elapsed=time.perf_counter() - start,
        )
