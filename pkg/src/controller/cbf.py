"""Control barrier functions: relative degree, the xi polynomial and the s-chain"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple
import logging
import numpy as np

from src.exceptions import DomainError, InfeasibleInputSet, RelativeDegreeError
from src.interval.arrays import IntervalVector
from src.interval.interval import add_down, add_up
from src.poly.multipoly import MultiPoly
from src.controller.system import ControlAffineSystem

logger = logging.getLogger(__name__)

_ROOT_IMAG_TOL = 1e-6
_CONSISTENCY_TOL = 1e-9


def coefficients_from_lambdas(lambdas: Sequence[float]) -> Tuple[float, ...]:
    """a with lambda^r + a_1 lambda^{r-1} + ... + a_r = prod (lambda + lambda_i)"""
    return tuple(float(c) for c in np.poly(-np.asarray(lambdas, dtype=float))[1:])


def lambdas_from_coefficients(a_vec: Sequence[float]) -> Tuple[float, ...]:
    """
    Positive lambda_i whose negatives are the roots of lambda^r + a_1 lambda^{r-1} + ... + a_r

    Args:
        a_vec: Coefficients a_1..a_r

    Returns:
        lambdas sorted in descending order
    """
    roots = np.roots(np.concatenate([[1.0], np.asarray(a_vec, dtype=float)]))
    lambdas = []
    for root in roots:
        if abs(root.imag) > _ROOT_IMAG_TOL * max(1.0, abs(root)):
            raise DomainError(f"Coefficients {list(a_vec)} have a complex root {root}; all roots must be negative reals")
        if root.real >= 0.0:
            raise DomainError(f"Coefficients {list(a_vec)} have a nonnegative root {root.real}")
        lambdas.append(-float(root.real))
    return tuple(sorted(lambdas, reverse=True))


@dataclass(frozen=True)
class CBFSpec:
    """Barrier h with either a class-K gain gamma or the characteristic coefficients a"""

    h: MultiPoly
    gamma: Optional[float] = None
    a_vec: Optional[Tuple[float, ...]] = None
    lambdas: Optional[Tuple[float, ...]] = None
    name: str = "h"

    def __post_init__(self):
        if self.h.depends_on_inputs():
            raise DomainError(f"Barrier {self.name} must be state-only")
        if self.gamma is not None and self.gamma <= 0.0:
            raise DomainError(f"Barrier {self.name}: gamma must be positive, got {self.gamma}")
        a_vec = tuple(float(a) for a in self.a_vec) if self.a_vec is not None else None
        lambdas = tuple(float(v) for v in self.lambdas) if self.lambdas is not None else None
        if a_vec is None and lambdas is not None:
            if any(v < 0.0 for v in lambdas):
                raise DomainError(f"Barrier {self.name}: lambdas must be nonnegative")
            a_vec = coefficients_from_lambdas(lambdas)
        elif a_vec is not None and lambdas is None:
            lambdas = lambdas_from_coefficients(a_vec)
        if a_vec is not None:
            expanded = coefficients_from_lambdas(lambdas)
            if len(expanded) != len(a_vec) or not np.allclose(expanded, a_vec, rtol=_CONSISTENCY_TOL, atol=_CONSISTENCY_TOL):
                raise DomainError(f"Barrier {self.name}: coefficients {a_vec} do not match lambdas {lambdas}")
        if self.gamma is None and a_vec is None:
            raise DomainError(f"Barrier {self.name} needs gamma, coefficients or lambdas")
        object.__setattr__(self, "a_vec", a_vec)
        object.__setattr__(self, "lambdas", lambdas)

    @property
    def order(self) -> int:
        """Relative degree the gains are configured for"""
        return len(self.a_vec) if self.a_vec is not None else 1


def relative_degree(h: MultiPoly, sys: ControlAffineSystem, x_samples: Optional[Iterable[Sequence[float]]] = None) -> int:
    """
    Smallest r with L_g L_f^{r-1} h not identically zero

    Args:
        h: State-only barrier
        sys: Control-affine system
        x_samples: States where the input gain is cross-checked

    Returns:
        Relative degree in 1..n
    """
    sample_states = [np.asarray(x, dtype=float) for x in (x_samples or [])]
    current = h
    for r in range(1, sys.n + 1):
        gains = sys.lie_g(current)
        if any(not p.is_zero() for p in gains):
            if sample_states:
                values = [p.evaluate(sys.space.join(x, np.zeros(sys.m))) for x in sample_states for p in gains]
                if not any(values):
                    logger.warning(
                        f"Input gain of {h} vanishes at every sample state; relative degree {r} is not regular there"
                    )
            return r
        current = sys.lie_f(current)
    raise RelativeDegreeError(f"Barrier {h} has no relative degree up to {sys.n}")


def _lie_f_chain(h: MultiPoly, sys: ControlAffineSystem, depth: int) -> List[MultiPoly]:
    """[h, L_f h, ..., L_f^depth h]"""
    chain = [h]
    for _ in range(depth):
        chain.append(sys.lie_f(chain[-1]))
    return chain


def build_xi(spec: CBFSpec, sys: ControlAffineSystem, r: int) -> MultiPoly:
    """
    Joint polynomial xi(x, u) whose nonnegativity is the barrier condition

    Args:
        spec: Barrier and gains
        sys: Control-affine system
        r: Relative degree of the barrier

    Returns:
        L_F h + gamma h for r = 1, L_F L_f^{r-1} h + a . [L_f^{r-1} h, ..., h] otherwise
    """
    if r < 1:
        raise RelativeDegreeError(f"Relative degree must be positive, got {r}")
    if r == 1:
        gain = spec.gamma if spec.gamma is not None else spec.a_vec[0]
        if spec.gamma is None and len(spec.a_vec) != 1:
            raise RelativeDegreeError(f"Barrier {spec.name} has relative degree 1 but {len(spec.a_vec)} coefficients")
        return sys.lie_F(spec.h) + spec.h * gain
    if spec.a_vec is None or len(spec.a_vec) != r:
        raise RelativeDegreeError(f"Barrier {spec.name} has relative degree {r}; it needs {r} coefficients")
    chain = _lie_f_chain(spec.h, sys, r - 1)
    xi = sys.lie_F(chain[-1])
    # eta = [L_f^{r-1} h, ..., h] pairs with a_1..a_r
    for a, eta in zip(spec.a_vec, reversed(chain)):
        if a != 0.0:
            xi = xi + eta * a
    return xi


def build_s_chain(spec: CBFSpec, sys: ControlAffineSystem, r: int) -> List[MultiPoly]:
    """s_0 = h and s_k = L_F s_{k-1} + lambda_k s_{k-1} for k < r"""
    if r < 2:
        return [spec.h]
    if spec.lambdas is None or len(spec.lambdas) != r:
        raise RelativeDegreeError(f"Barrier {spec.name} needs {r} lambdas for its s-chain")
    chain = [spec.h]
    for k in range(1, r):
        derivative = sys.lie_F(chain[-1])
        if derivative.depends_on_inputs():
            raise RelativeDegreeError(f"s_{k} of barrier {spec.name} depends on the inputs")
        chain.append(derivative + chain[-1] * spec.lambdas[k - 1])
    return chain


def shrink_input_box(U_box: IntervalVector, eps_u: float) -> IntervalVector:
    """U minus the eps_u ball, rounded inward"""
    if eps_u < 0.0:
        raise DomainError(f"Actuation radius must be nonnegative, got {eps_u}")
    if eps_u == 0.0:
        return U_box
    lo = np.array([add_up(float(v), eps_u) for v in U_box.lo])
    hi = np.array([add_down(float(v), -eps_u) for v in U_box.hi])
    if np.any(lo > hi):
        raise InfeasibleInputSet(f"Input box {U_box.to_list()} is empty after shrinking by {eps_u}")
    return IntervalVector(lo, hi)


def make_constraint(xi: MultiPoly, anchor: Sequence[float], phi: float) -> Tuple[np.ndarray, float]:
    """
    Linear constraint row . u + rhs >= 0 at the anchor state

    Args:
        xi: Joint polynomial, affine in u
        anchor: State the condition is imposed at
        phi: Margin added to the constant term

    Returns:
        (row, rhs)
    """
    space = xi.space
    reduced = xi.substitute_state(anchor)
    if reduced.degree > 1:
        raise DomainError(f"Barrier expression is not affine in the inputs: {reduced}")
    row = np.zeros(space.m)
    for j in range(space.m):
        exponent = [0] * space.dim
        exponent[space.n + j] = 1
        row[j] = reduced.coefficient(tuple(exponent))
    rhs = reduced.coefficient((0,) * space.dim) + phi
    return row, rhs
