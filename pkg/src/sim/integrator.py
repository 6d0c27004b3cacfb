"""Fixed-step integration of the closed loop under a zero-order-hold input"""

from typing import List, Optional, Sequence, Tuple
import numpy as np

from src.config.settings import settings
from src.controller.system import ControlAffineSystem
from src.exceptions import DivergenceError


def rk4_step(field, x: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of dx/dt = field(x, u)"""
    k1 = field(x, u)
    k2 = field(x + 0.5 * h * k1, u)
    k3 = field(x + 0.5 * h * k2, u)
    k4 = field(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(
    sys: ControlAffineSystem,
    x: Sequence[float],
    u_const: Sequence[float],
    dt: float,
    substeps: Optional[int] = None,
) -> List[Tuple[float, np.ndarray]]:
    """
    Integrate over one sampling interval with the input held constant

    Args:
        sys: Control-affine system
        x: State at the start of the interval
        u_const: Input applied over the whole interval
        dt: Interval length
        substeps: Number of equal RK4 steps

    Returns:
        (t, x) pairs from t = 0 to t = dt, substeps + 1 entries
    """
    substeps = settings.substeps if substeps is None else substeps
    if substeps < 1:
        raise ValueError(f"substeps must be at least 1, got {substeps}")
    if dt <= 0.0:
        raise ValueError(f"Interval length must be positive, got {dt}")
    state = np.asarray(x, dtype=float).reshape(-1).copy()
    u = np.asarray(u_const, dtype=float).reshape(-1)
    h = dt / substeps
    path = [(0.0, state)]
    for i in range(1, substeps + 1):
        state = rk4_step(sys.evaluate, state, u, h)
        if not np.isfinite(state).all():
            raise DivergenceError(f"State became non-finite after {i} substeps: {state.tolist()}")
        path.append((i * h, state))
    return path
