"""Closed-loop sampled-data episodes"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
import logging
import time
import numpy as np

from src.config.settings import settings
from src.controller.cbf import CBFSpec
from src.controller.safety_filter import ControllerKind, SafetyFilter
from src.controller.system import ControlAffineSystem
from src.exceptions import DivergenceError, InitialConditionError
from src.interval.arrays import IntervalVector
from src.poly.multipoly import MultiPoly
from src.sim.audit import StepAuditor
from src.sim.integrator import integrate_step
from src.sim.noise import NoiseMode, NoiseModel
from src.sim.sim_log import SimLogBuilder, SimLog

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Reference:
    """Parametric position reference; the desired state stacks position and velocity"""

    kind: str = "constant"
    center: Tuple[float, ...] = (0.0, 0.0, 0.0)
    amplitude: Tuple[float, ...] = (0.0, 0.0, 0.0)
    period: float = 10.0

    def __post_init__(self):
        if self.kind not in ("constant", "lemniscate"):
            raise ValueError(f"Unknown reference '{self.kind}'")
        if self.kind == "lemniscate" and len(self.center) < 2:
            raise ValueError("A lemniscate needs at least two coordinates")
        if self.period <= 0.0:
            raise ValueError(f"Reference period must be positive, got {self.period}")

    def position_velocity(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        a = np.asarray(self.amplitude, dtype=float)
        if self.kind == "constant":
            return c.copy(), np.zeros_like(c)
        w = 2.0 * np.pi / self.period
        s, co = np.sin(w * t), np.cos(w * t)
        pos = c.copy()
        vel = np.zeros_like(c)
        # Figure-eight in the first two coordinates, the rest follow sin
        pos[0] += a[0] * s
        vel[0] = a[0] * w * co
        pos[1] += a[1] * s * co
        vel[1] = a[1] * w * (co * co - s * s)
        pos[2:] += a[2:] * s
        vel[2:] = a[2:] * w * co
        return pos, vel

    def state(self, t: float, n: int) -> np.ndarray:
        pos, vel = self.position_velocity(t)
        full = np.concatenate([pos, vel])
        out = np.zeros(n)
        k = min(n, full.size)
        out[:k] = full[:k]
        return out


class PolynomialFeedback:
    """u_j = p_j(x), saturated to the input box"""

    def __init__(self, laws: Sequence[MultiPoly], U_box: IntervalVector):
        """Initialize with one polynomial per input"""
        self.laws = list(laws)
        if len(self.laws) != U_box.dim:
            raise ValueError(f"Expected {U_box.dim} nominal laws, got {len(self.laws)}")
        self.U_box = U_box

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        space = self.laws[0].space
        z = space.join(x, np.zeros(space.m))
        u = np.array([p.evaluate(z) for p in self.laws])
        return np.clip(u, self.U_box.lo, self.U_box.hi)


class GainTracking:
    """u = K (x_ref(t) - x), saturated to the input box"""

    def __init__(self, gain: np.ndarray, reference: Reference, U_box: IntervalVector):
        """Initialize with an (m, n) gain matrix and a reference"""
        self.gain = np.asarray(gain, dtype=float)
        if self.gain.ndim != 2 or self.gain.shape[0] != U_box.dim:
            raise ValueError(f"Gain must have {U_box.dim} rows, got shape {self.gain.shape}")
        self.reference = reference
        self.U_box = U_box

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        target = self.reference.state(t, self.gain.shape[1])
        u = self.gain @ (target - x)
        return np.clip(u, self.U_box.lo, self.U_box.hi)


@dataclass
class Scenario:
    """Runtime description of one experiment"""

    name: str
    system: ControlAffineSystem
    barriers: List[CBFSpec]
    nominal: object
    x0: np.ndarray
    dt: float
    horizon: float
    substeps: int = field(default_factory=lambda: settings.substeps)
    eps_x: float = 0.0
    noise_mode: NoiseMode = NoiseMode.UNIFORM_BALL
    seed: int = 0
    taylor_order: Optional[int] = None
    pop_tolerance: Optional[float] = None
    pop_budget: Optional[int] = None

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def noise_model(self) -> NoiseModel:
        return NoiseModel(eps_x=self.eps_x, eps_u=self.system.eps_u, mode=self.noise_mode, seed=self.seed)


def _barrier_gradient(barrier_h: MultiPoly, x: np.ndarray) -> np.ndarray:
    space = barrier_h.space
    z = space.join(x, np.zeros(space.m))
    return np.array([p.evaluate(z) for p in barrier_h.gradient()])


def run_episode(
    scenario: Scenario,
    controller_kind: ControllerKind,
    noise: Optional[NoiseModel] = None,
    audit_samples: int = 0,
) -> SimLog:
    """
    Simulate the sampled-data closed loop

    Args:
        scenario: Experiment description
        controller_kind: naive, sdcbf or usdcbf
        noise: Disturbance source; sdcbf always runs noise-free
        audit_samples: Monte Carlo samples per step for soundness audits, 0 to skip

    Returns:
        Episode log; failures are recorded in its status
    """
    kind = ControllerKind(controller_kind)
    if kind == ControllerKind.SDCBF:
        noise = NoiseModel.disabled(scenario.seed)
    elif noise is None:
        noise = scenario.noise_model()
    system = scenario.system
    filt = SafetyFilter(
        system,
        scenario.barriers,
        kind=kind,
        eps_x=scenario.eps_x,
        taylor_order=scenario.taylor_order,
        pop_tolerance=scenario.pop_tolerance,
        pop_budget=scenario.pop_budget,
        sample_states=[scenario.x0],
    )
    auditor = StepAuditor(system, samples=audit_samples, seed=noise.seed) if audit_samples > 0 else None
    names = [b.spec.name for b in filt.barriers]
    builder = SimLogBuilder(scenario.name, kind.value, names, system.n, system.m)

    x = np.asarray(scenario.x0, dtype=float).reshape(-1).copy()
    d = noise.measurement(_barrier_gradient(filt.critical_barrier(x).spec.h, x), system.n)
    x_hat = x - d.value
    if kind != ControllerKind.NAIVE and not filt.initial_condition_holds(x_hat):
        raise InitialConditionError(
            f"Scenario {scenario.name}: barrier chain is not certified nonnegative around x0_hat={x_hat.tolist()}"
        )

    logger.info(f"Episode {scenario.name}/{kind.value}: {scenario.steps} steps of {scenario.dt} s")
    builder.add_fine(0.0, x, filt.barrier_values(x))
    status = "completed"
    t = 0.0
    for k in range(scenario.steps):
        if k > 0:
            d = noise.measurement(_barrier_gradient(filt.critical_barrier(x).spec.h, x), system.n)
            x_hat = x - d.value
        u_nom = scenario.nominal(t, x_hat)

        started = time.perf_counter()
        decision = filt.step(x_hat, u_nom, scenario.dt)
        wall = time.perf_counter() - started
        if not decision.qp.feasible:
            builder.add_step(k, t, x, x_hat, d, u_nom, decision, None, wall)
            status = "infeasible"
            logger.warning(f"Episode {scenario.name}/{kind.value}: QP infeasible at step {k}, t={t:.3f}")
            break

        row = filt.critical_barrier(x_hat).input_row(x_hat)
        e = noise.actuation(row, system.m)
        u_applied = decision.u_desired + e.value
        builder.add_step(k, t, x, x_hat, d, u_nom, decision, e, wall)

        try:
            path = integrate_step(system, x, u_applied, scenario.dt, scenario.substeps)
        except DivergenceError as exc:
            status = "diverged"
            logger.warning(f"Episode {scenario.name}/{kind.value}: {exc}")
            break
        for tau, state in path[1:]:
            builder.add_fine(t + tau, state, filt.barrier_values(state))

        if auditor is not None and decision.reach is not None:
            builder.add_audit(auditor.audit_step(filt, decision, x_hat, scenario.dt, scenario.substeps))

        x = path[-1][1]
        t = (k + 1) * scenario.dt

    log = builder.finish(
        status=status,
        seed=noise.seed,
        noise_mode=noise.mode.value,
        eps_x=noise.eps_x,
        eps_u=noise.eps_u,
        dt=scenario.dt,
        slack=settings.integration_slack,
    )
    logger.info(
        f"Episode {scenario.name}/{kind.value} {status}: min h = {log.summary.min_h_overall:.6g}, "
        f"violated = {log.summary.violated}"
    )
    return log
