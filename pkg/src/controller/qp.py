"""Minimum-distance safety QP solved with a dual active-set method"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple
import logging
import numpy as np

from src.exceptions import DomainError
from src.interval.arrays import IntervalVector

logger = logging.getLogger(__name__)

_VIOLATION_TOL = 1e-12
_MAX_ITERATIONS = 200
_LEAST_VIOLATION_ITERATIONS = 20000
_STATIONARY_TOL = 1e-13


@dataclass(frozen=True)
class QPResult:
    """Filtered input with its active set and optimality diagnostics"""

    u_star: np.ndarray
    active_set: Tuple[int, ...]
    kkt_residual: float
    feasible: bool
    iterations: int = 0
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _stack(constraints: Sequence[Tuple[np.ndarray, float]], U_eff: IntervalVector) -> Tuple[np.ndarray, np.ndarray]:
    """All rows as N u + b >= 0; box rows follow the linear ones, lower then upper per input"""
    m = U_eff.dim
    rows, offsets = [], []
    for row, rhs in constraints:
        row = np.asarray(row, dtype=float).reshape(-1)
        if row.size != m:
            raise DomainError(f"Constraint row has {row.size} entries, expected {m}")
        rows.append(row)
        offsets.append(float(rhs))
    for j in range(m):
        unit = np.zeros(m)
        unit[j] = 1.0
        rows += [unit, -unit]
        offsets += [-float(U_eff.lo[j]), float(U_eff.hi[j])]
    return np.array(rows), np.array(offsets)


def kkt_residual(
    u: np.ndarray, u_nom: np.ndarray, N: np.ndarray, b: np.ndarray, multipliers: np.ndarray
) -> float:
    """Largest of stationarity, complementarity, primal and dual infeasibility"""
    slack = N @ u + b
    stationarity = np.abs((u - u_nom) - N.T @ multipliers).max(initial=0.0)
    complementarity = np.abs(multipliers * slack).max(initial=0.0)
    primal = np.maximum(-slack, 0.0).max(initial=0.0)
    dual = np.maximum(-multipliers, 0.0).max(initial=0.0)
    return float(max(stationarity, complementarity, primal, dual))


def _least_violation(u_nom: np.ndarray, N: np.ndarray, b: np.ndarray, U_eff: IntervalVector) -> np.ndarray:
    """Box point minimizing the squared constraint violation, by projected gradient until it stops moving"""
    u = np.clip(u_nom, U_eff.lo, U_eff.hi)
    scale = float(np.sum(N * N))
    if scale == 0.0:
        return u
    # 1/||N||_F^2 is below the inverse Lipschitz constant of the gradient
    step = 1.0 / scale
    for _ in range(_LEAST_VIOLATION_ITERATIONS):
        violation = np.minimum(N @ u + b, 0.0)
        moved = np.clip(u - step * (N.T @ violation), U_eff.lo, U_eff.hi)
        if np.abs(moved - u).max(initial=0.0) <= _STATIONARY_TOL * (1.0 + np.abs(u).max(initial=0.0)):
            return moved
        u = moved
    logger.warning(
        f"Least-violation point not converged after {_LEAST_VIOLATION_ITERATIONS} iterations, using u={u.tolist()}"
    )
    return u


def solve_safety_qp(
    u_nom: Sequence[float],
    constraints: Sequence[Tuple[np.ndarray, float]],
    U_eff: IntervalVector,
) -> QPResult:
    """
    Minimize ||u - u_nom||^2 subject to row . u + rhs >= 0 and u in U_eff

    Args:
        u_nom: Nominal input
        constraints: (row, rhs) pairs
        U_eff: Input box

    Returns:
        QP result; infeasible problems are flagged, not raised
    """
    u_nom = np.asarray(u_nom, dtype=float).reshape(-1)
    if u_nom.size != U_eff.dim:
        raise DomainError(f"Nominal input has {u_nom.size} entries, expected {U_eff.dim}")
    N, b = _stack(constraints, U_eff)
    total = N.shape[0]
    scale = 1.0 + np.abs(b) + np.abs(N).sum(axis=1) * (1.0 + np.abs(u_nom).max(initial=0.0))

    u = u_nom.copy()
    multipliers = np.zeros(total)
    active: List[int] = []
    iterations = 0

    while iterations < _MAX_ITERATIONS:
        slack = N @ u + b
        violation = slack / scale
        # Most violated enters; np.argmin keeps the lowest index on ties
        candidate = int(np.argmin(violation))
        if violation[candidate] >= -_VIOLATION_TOL:
            break
        p = candidate
        added = False
        while not added:
            iterations += 1
            if iterations > _MAX_ITERATIONS:
                break
            normal = N[p]
            if active:
                A = N[active].T
                gram = A.T @ A
                r = np.linalg.solve(gram, A.T @ normal)
                z = normal - A @ r
            else:
                r = np.zeros(0)
                z = normal.copy()
            slack_p = float(normal @ u + b[p])

            # Partial step bound from multipliers that would turn negative
            partial, drop = np.inf, -1
            for idx, (k, coef) in enumerate(zip(active, r)):
                if coef > 0.0:
                    ratio = multipliers[k] / coef
                    if ratio < partial:
                        partial, drop = ratio, idx

            curvature = float(z @ normal)
            if curvature <= 1e-14 * max(1.0, float(normal @ normal)):
                if drop < 0:
                    # Normal is spanned by active normals with no way to relax: infeasible
                    fallback = _least_violation(u_nom, N, b, U_eff)
                    logger.debug(f"Safety QP infeasible on constraint {p}")
                    return QPResult(
                        u_star=fallback,
                        active_set=tuple(active),
                        kkt_residual=kkt_residual(fallback, u_nom, N, b, np.zeros(total)),
                        feasible=False,
                        iterations=iterations,
                        multipliers=np.zeros(total),
                    )
                for k, coef in zip(active, r):
                    multipliers[k] -= partial * coef
                multipliers[p] += partial
                multipliers[active[drop]] = 0.0
                active.pop(drop)
                continue

            full = -slack_p / curvature
            step = min(full, partial)
            u = u + step * z
            for k, coef in zip(active, r):
                multipliers[k] -= step * coef
            multipliers[p] += step
            if step >= full:
                active.append(p)
                added = True
            else:
                multipliers[active[drop]] = 0.0
                active.pop(drop)

    residual = kkt_residual(u, u_nom, N, b, multipliers)
    feasible = bool(np.all((N @ u + b) / scale >= -1e-9))
    if iterations >= _MAX_ITERATIONS:
        logger.warning(f"Safety QP stopped after {iterations} iterations with KKT residual {residual:.3g}")
    if not feasible:
        u = _least_violation(u_nom, N, b, U_eff)
    return QPResult(
        u_star=u,
        active_set=tuple(active),
        kkt_residual=residual,
        feasible=feasible,
        iterations=iterations,
        multipliers=multipliers.copy(),
    )
