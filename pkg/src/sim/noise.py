"""Bounded measurement and actuation disturbances"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence
import logging
import numpy as np

logger = logging.getLogger(__name__)


class NoiseMode(str, Enum):
    UNIFORM_BALL = "uniform-ball"
    ADVERSARIAL = "adversarial"
    NONE = "none"


@dataclass(frozen=True)
class Disturbance:
    """Injected vector, norm at most the radius, with its norm before clamping"""

    value: np.ndarray
    raw_norm: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.value))


def clamp_to_ball(vector: np.ndarray, radius: float) -> np.ndarray:
    """Scale a vector down until its 2-norm is at most radius"""
    norm = float(np.linalg.norm(vector))
    if norm <= radius:
        return vector
    if radius == 0.0:
        return np.zeros_like(vector)
    scale = radius / norm
    clamped = vector * scale
    while np.linalg.norm(clamped) > radius:
        scale = np.nextafter(scale, 0.0)
        clamped = vector * scale
    return clamped


@dataclass
class NoiseModel:
    """Seeded source of measurement noise (radius eps_x) and actuation noise (radius eps_u)"""

    eps_x: float = 0.0
    eps_u: float = 0.0
    mode: NoiseMode = NoiseMode.UNIFORM_BALL
    seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.mode = NoiseMode(self.mode)
        if self.eps_x < 0.0 or self.eps_u < 0.0:
            raise ValueError("Noise radii must be nonnegative")
        self.rng = np.random.default_rng(self.seed)

    @classmethod
    def disabled(cls, seed: int = 0) -> "NoiseModel":
        return cls(mode=NoiseMode.NONE, seed=seed)

    def _finish(self, vector: np.ndarray, radius: float, kind: str) -> Disturbance:
        raw = float(np.linalg.norm(vector))
        if raw > radius:
            logger.debug(f"Clamping {kind} disturbance of norm {raw!r} to {radius}")
        return Disturbance(clamp_to_ball(vector, radius), raw)

    def uniform_ball(self, radius: float, dim: int) -> np.ndarray:
        """Uniform draw from the closed 2-norm ball"""
        direction = self.rng.standard_normal(dim)
        norm = np.linalg.norm(direction)
        while norm == 0.0:
            direction = self.rng.standard_normal(dim)
            norm = np.linalg.norm(direction)
        return direction / norm * (radius * self.rng.random() ** (1.0 / dim))

    def _directed(self, direction: Optional[Sequence[float]], radius: float, dim: int, kind: str) -> Disturbance:
        if self.mode == NoiseMode.NONE or radius == 0.0:
            return Disturbance(np.zeros(dim), 0.0)
        if self.mode == NoiseMode.ADVERSARIAL:
            g = np.zeros(dim) if direction is None else np.asarray(direction, dtype=float).reshape(-1)
            norm = float(np.linalg.norm(g))
            if norm > 0.0:
                return self._finish(-radius * g / norm, radius, kind)
            logger.warning(f"Adversarial {kind} direction vanishes; drawing uniformly this step")
        return self._finish(self.uniform_ball(radius, dim), radius, kind)

    def measurement(self, grad_h: Optional[Sequence[float]], dim: int) -> Disturbance:
        """
        Measurement disturbance d with estimate x_hat = x - d

        Args:
            grad_h: Barrier gradient at the true state, used by the adversarial mode
            dim: State dimension

        Returns:
            Disturbance of norm at most eps_x
        """
        return self._directed(grad_h, self.eps_x, dim, "measurement")

    def actuation(self, input_row: Optional[Sequence[float]], dim: int) -> Disturbance:
        """Actuation disturbance e with applied input u_d + e; adversarial opposes the barrier's input gain"""
        return self._directed(input_row, self.eps_u, dim, "actuation")


def sample_measurement_noise(noise: NoiseModel, grad_h: Sequence[float]) -> np.ndarray:
    """Measurement disturbance for a state of the gradient's dimension"""
    grad = np.asarray(grad_h, dtype=float).reshape(-1)
    return noise.measurement(grad, grad.size).value
