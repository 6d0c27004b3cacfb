"""Monte Carlo soundness audits of tubes, margins and Taylor models"""

from dataclasses import dataclass
from typing import Tuple
import logging
import numpy as np

from src.controller.system import ControlAffineSystem
from src.interval.arrays import IntervalVector
from src.margin.margin import delta_xi
from src.poly.multipoly import CompiledField, MultiPoly
from src.poly.taylor_model import build_taylor_model
from src.reach.tube import ReachResult
from src.reach.zonotope import Zonotope
from src.sim.integrator import rk4_step

logger = logging.getLogger(__name__)

# Float evaluation noise allowed when comparing against rigorous bounds
_EVAL_TOL = 1e-9


@dataclass(frozen=True)
class AuditCounts:
    samples: int
    tube_violations: int = 0
    margin_violations: int = 0
    taylor_violations: int = 0


def sample_box(box: IntervalVector, rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.uniform(box.lo, box.hi, size=(count, box.dim))


def simulate_samples(
    system: ControlAffineSystem,
    X0: Zonotope,
    U_box: IntervalVector,
    dt: float,
    substeps: int,
    rng: np.random.Generator,
    count: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Trajectories from random initial states under random constant inputs

    Returns:
        States of shape (substeps + 1, count, n) and inputs of shape (count, m)
    """
    states = X0.sample(rng, count)
    inputs = sample_box(U_box, rng, count)
    def field(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return system.compiled(np.concatenate([x, u], axis=-1))

    h = dt / substeps
    path = [states]
    for _ in range(substeps):
        states = rk4_step(field, states, inputs, h)
        path.append(states)
    return np.stack(path), inputs


def audit_tube(reach: ReachResult, paths: np.ndarray) -> int:
    """Number of trajectories leaving the interval hull of the tube"""
    inside = np.all((paths >= reach.hull.lo) & (paths <= reach.hull.hi), axis=-1)
    return int(np.sum(~inside.all(axis=0)))


def audit_margin(
    xi: MultiPoly,
    x_anchor: np.ndarray,
    phi: float,
    zk: IntervalVector,
    points: np.ndarray,
    rng: np.random.Generator,
    count: int,
) -> int:
    """Number of joint points, given and sampled from Z_k, where delta_xi falls below phi"""
    change = CompiledField([delta_xi(xi, x_anchor)])
    sampled = sample_box(zk, rng, count)
    values = change(np.concatenate([points, sampled], axis=0))[:, 0]
    return int(np.sum(values < phi - _EVAL_TOL * (1.0 + np.abs(values))))


def audit_taylor(
    p: MultiPoly,
    z_star: np.ndarray,
    domain: IntervalVector,
    order: int,
    rng: np.random.Generator,
    count: int,
) -> int:
    """Number of sampled points where p escapes its Taylor model enclosure"""
    model = build_taylor_model(p, z_star, domain, order)
    compiled_p = CompiledField([p])
    compiled_model = CompiledField([model.poly])
    points = sample_box(domain, rng, count)
    exact = compiled_p(points)[:, 0]
    predicted = compiled_model(points - model.center)[:, 0]
    slack = _EVAL_TOL * (1.0 + np.abs(exact))
    low = predicted + model.enclosure.lo - slack
    high = predicted + model.enclosure.hi + slack
    return int(np.sum((exact < low) | (exact > high)))


class StepAuditor:
    """Runs every audit on one filter decision"""

    def __init__(self, system: ControlAffineSystem, samples: int, seed: int = 0):
        """Initialize with a sample count per audit and a dedicated random stream"""
        self.system = system
        self.samples = samples
        self.rng = np.random.default_rng(seed + 1)

    def audit_step(self, filt, decision, x_anchor: np.ndarray, dt: float, substeps: int) -> AuditCounts:
        reach = decision.reach
        X0 = filt.initial_set(x_anchor)
        paths, inputs = simulate_samples(self.system, X0, filt.U_box, dt, substeps, self.rng, self.samples)
        tube_violations = audit_tube(reach, paths)

        # Joint points (x(t), u) along the sampled trajectories
        joint = np.concatenate(
            [paths.reshape(-1, self.system.n), np.tile(inputs, (paths.shape[0], 1))], axis=1
        )
        margin_violations = 0
        taylor_violations = 0
        z_star = self.system.space.join(x_anchor, filt.U_box.midpoint())
        for barrier, margin in zip(filt.barriers, decision.margins):
            if margin is None:
                continue
            margin_violations += audit_margin(
                barrier.xi, x_anchor, margin.phi, margin.zk_hull, joint, self.rng, self.samples
            )
            if not margin.affine:
                taylor_violations += audit_taylor(
                    delta_xi(barrier.xi, x_anchor), z_star, margin.zk_hull, filt.taylor_order, self.rng, self.samples
                )
        if tube_violations or margin_violations or taylor_violations:
            logger.warning(
                f"Audit violations: tube {tube_violations}, margin {margin_violations}, Taylor {taylor_violations}"
            )
        return AuditCounts(
            samples=self.samples,
            tube_violations=tube_violations,
            margin_violations=margin_violations,
            taylor_violations=taylor_violations,
        )
