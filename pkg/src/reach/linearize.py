"""Linearization of control-affine polynomial dynamics with a Lagrange remainder"""

from dataclasses import dataclass
from typing import List, Sequence
import logging
import numpy as np

from src.exceptions import DomainError
from src.interval.arrays import IntervalMatrix, IntervalVector
from src.interval.interval import Interval
from src.poly.multipoly import MultiPoly

logger = logging.getLogger(__name__)


def control_affine_field(f: Sequence[MultiPoly], g: Sequence[Sequence[MultiPoly]]) -> List[MultiPoly]:
    """Joint-space vector field F(x, u) = f(x) + g(x) u"""
    if not f:
        raise DomainError("Drift must have at least one component")
    space = f[0].space
    if len(f) != space.n or len(g) != space.n:
        raise DomainError(f"Drift and input matrix must have {space.n} rows")
    field = []
    for i in range(space.n):
        if len(g[i]) != space.m:
            raise DomainError(f"Input matrix row {i} must have {space.m} entries")
        component = f[i]
        for j in range(space.m):
            if not g[i][j].is_zero():
                component = component + g[i][j] * MultiPoly.variable(space, space.n + j)
        field.append(component)
    return field


@dataclass(frozen=True)
class LinearizedSystem:
    """Differential inclusion dx/dt in A(x - x*) + B(u - u*) + c + L"""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    L: IntervalVector
    x_star: np.ndarray
    u_star: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]


class Linearizer:
    """First-order expansion of a polynomial vector field with interval Hessian remainder"""

    def __init__(self, field: Sequence[MultiPoly]):
        """Initialize and precompute Jacobian and Hessian polynomials"""
        if not field:
            raise DomainError("Vector field must have at least one component")
        self.field = list(field)
        self.space = self.field[0].space
        if len(self.field) != self.space.n:
            raise DomainError(f"Vector field has {len(self.field)} components, expected {self.space.n}")
        dim = self.space.dim
        self.jacobian = [[F.diff(j) for j in range(dim)] for F in self.field]
        self.hessians = [[[row[j].diff(k) for k in range(dim)] for j in range(dim)] for row in self.jacobian]
        self.nonlinear = any(not h.is_zero() for H in self.hessians for row in H for h in row)
        logger.debug(f"Linearizer ready: {self.space.n} states, {self.space.m} inputs, nonlinear={self.nonlinear}")

    def remainder(self, z_star: np.ndarray, box: IntervalVector) -> IntervalVector:
        """L_i = 1/2 (z - z*)^T H_i (z - z*) enclosed over the joint box"""
        if not self.nonlinear:
            return IntervalVector.point(np.zeros(self.space.n))
        offsets = box - z_star
        zero = Interval(0.0, 0.0)
        components = []
        for H in self.hessians:
            grid = [[h.evaluate_interval(box) if not h.is_zero() else zero for h in row] for row in H]
            hessian = IntervalMatrix.from_intervals(grid)
            if hessian.is_zero():
                components.append(zero)
            else:
                components.append(hessian.quadratic_form(offsets) * 0.5)
        return IntervalVector.from_intervals(components)

    def linearize(
        self,
        x_star: Sequence[float],
        u_star: Sequence[float],
        state_box: IntervalVector,
        input_box: IntervalVector,
    ) -> LinearizedSystem:
        """
        Linearize at (x*, u*) with a remainder valid over state_box x input_box

        Args:
            x_star: State expansion point
            u_star: Input expansion point
            state_box: States the remainder must cover
            input_box: Inputs the remainder must cover

        Returns:
            Linearized system with A, B, c and remainder L
        """
        n, m = self.space.n, self.space.m
        x_star = np.asarray(x_star, dtype=float).reshape(-1)
        u_star = np.asarray(u_star, dtype=float).reshape(-1)
        if state_box.dim != n or input_box.dim != m:
            raise DomainError(f"Linearization boxes must have dimensions {n} and {m}")
        if not state_box.contains(x_star):
            raise DomainError("State expansion point lies outside the state box")
        if not input_box.contains(u_star):
            raise DomainError("Input expansion point lies outside the input box")
        z_star = self.space.join(x_star, u_star)
        jac = np.array([[d.evaluate(z_star) for d in row] for row in self.jacobian]).reshape(n, n + m)
        c = np.array([F.evaluate(z_star) for F in self.field])
        L = self.remainder(z_star, state_box.product(input_box))
        return LinearizedSystem(
            A=jac[:, :n],
            B=jac[:, n:],
            c=c,
            L=L,
            x_star=x_star,
            u_star=u_star,
        )


def linearize(
    f: Sequence[MultiPoly],
    g: Sequence[Sequence[MultiPoly]],
    x_star: Sequence[float],
    u_star: Sequence[float],
    state_box: IntervalVector,
    input_box: IntervalVector,
) -> LinearizedSystem:
    """One-shot linearization of dx/dt = f(x) + g(x) u"""
    return Linearizer(control_affine_field(f, g)).linearize(x_star, u_star, state_box, input_box)
