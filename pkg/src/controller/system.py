"""Control-affine polynomial systems dx/dt = f(x) + g(x) u"""

from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence, Tuple
import logging
import numpy as np

from src.exceptions import DomainError, InfeasibleInputSet
from src.interval.arrays import IntervalVector
from src.poly.multipoly import CompiledField, MultiPoly, VarSpace, lie_derivative
from src.reach.linearize import control_affine_field

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControlAffineSystem:
    """Polynomial drift f, input matrix g, input box U and actuation radius eps_u"""

    space: VarSpace
    f: Tuple[MultiPoly, ...]
    g: Tuple[Tuple[MultiPoly, ...], ...]
    U_box: IntervalVector
    eps_u: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(self.f))
        object.__setattr__(self, "g", tuple(tuple(row) for row in self.g))
        n, m = self.space.n, self.space.m
        if len(self.f) != n or len(self.g) != n or any(len(row) != m for row in self.g):
            raise DomainError(f"Drift must have {n} entries and the input matrix shape ({n}, {m})")
        for p in self.f + tuple(p for row in self.g for p in row):
            if p.space != self.space:
                raise DomainError("Dynamics live in a different variable space")
            if p.depends_on_inputs():
                raise DomainError(f"Drift and input matrix must be state-only, got {p}")
        if self.U_box.dim != m:
            raise DomainError(f"Input box has dimension {self.U_box.dim}, expected {m}")
        if self.eps_u < 0.0:
            raise DomainError(f"Actuation radius must be nonnegative, got {self.eps_u}")
        if self.eps_u > 0.0 and self.eps_u >= float(np.min(0.5 * self.U_box.width())):
            raise InfeasibleInputSet(
                f"Actuation radius {self.eps_u} leaves no admissible input in {self.U_box.to_list()}"
            )

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def m(self) -> int:
        return self.space.m

    @cached_property
    def vector_field(self) -> List[MultiPoly]:
        """F(x, u) = f(x) + g(x) u over the joint space"""
        return control_affine_field(self.f, self.g)

    @cached_property
    def compiled(self) -> CompiledField:
        return CompiledField(self.vector_field)

    def lie_f(self, p: MultiPoly) -> MultiPoly:
        """Lie derivative along the drift"""
        return lie_derivative(p, self.f)

    def lie_F(self, p: MultiPoly) -> MultiPoly:
        """Lie derivative along the full field; affine in u"""
        return lie_derivative(p, self.vector_field)

    def lie_g(self, p: MultiPoly) -> List[MultiPoly]:
        """Row of Lie derivatives along each input column"""
        return [lie_derivative(p, [row[j] for row in self.g]) for j in range(self.m)]

    def evaluate(self, x: Sequence[float], u: Sequence[float]) -> np.ndarray:
        """dx/dt at one state and input"""
        return self.compiled(self.space.join(x, u))
