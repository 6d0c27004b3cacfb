"""Vectorised binomial recentering of polynomials with rigorous coefficient bounds"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import comb, nextafter, inf
from typing import Dict, Tuple
import numpy as np

from src.interval.arrays import grouped_sum_bounds, mul_bounds
from src.poly.multipoly import MultiPoly


@dataclass(frozen=True)
class ShiftPlan:
    """Precomputed expansion of p(c + w) = sum_beta q_beta(c) w^beta.

    Each pair (alpha, beta <= alpha) of a source monomial and a target monomial
    contributes a_alpha * C(alpha, beta) * c^(alpha - beta) to q_beta.
    """

    targets: np.ndarray       # (K, d) target exponents
    deltas: np.ndarray        # (P, d) exponents of c in each pair
    mult_lo: np.ndarray       # (P,) bounds of a_alpha * C(alpha, beta)
    mult_hi: np.ndarray
    selector: np.ndarray      # (P, K) pair-to-target assignment
    max_degree: int

    @classmethod
    def from_poly(cls, p: MultiPoly) -> "ShiftPlan":
        d = p.space.dim
        target_index: Dict[Tuple[int, ...], int] = {}
        deltas, mult_lo, mult_hi, pair_targets = [], [], [], []
        for alpha, coef in p.items():
            for beta in product(*(range(e + 1) for e in alpha)):
                k = target_index.setdefault(beta, len(target_index))
                binomial = 1
                for a_i, b_i in zip(alpha, beta):
                    binomial *= comb(a_i, b_i)
                value = coef * binomial
                if Fraction(value) == Fraction(coef) * binomial:
                    lo = hi = value
                else:
                    lo, hi = nextafter(value, -inf), nextafter(value, inf)
                deltas.append(tuple(a - b for a, b in zip(alpha, beta)))
                mult_lo.append(lo)
                mult_hi.append(hi)
                pair_targets.append(k)
        targets = sorted(target_index, key=lambda e: (-sum(e), tuple(-x for x in e)))
        order = {t: i for i, t in enumerate(targets)}
        remap = {target_index[t]: order[t] for t in targets}
        selector = np.zeros((len(pair_targets), len(targets)))
        for row, k in enumerate(pair_targets):
            selector[row, remap[k]] = 1.0
        deltas_arr = np.array(deltas, dtype=int).reshape(-1, d)
        return cls(
            targets=np.array(targets, dtype=int).reshape(-1, d),
            deltas=deltas_arr,
            mult_lo=np.array(mult_lo, dtype=float),
            mult_hi=np.array(mult_hi, dtype=float),
            selector=selector,
            max_degree=int(deltas_arr.max()) if deltas_arr.size else 0,
        )

    @property
    def size(self) -> int:
        return self.targets.shape[0]

    def coefficient_bounds(self, centers: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Interval bounds of every shifted coefficient at each center.

        Args:
            centers: expansion points, shape (N, d)

        Returns:
            (lo, hi) arrays of shape (N, K) ordered like `targets`
        """
        centers = np.asarray(centers, dtype=float)
        n_points, d = centers.shape
        if self.size == 0:
            empty = np.zeros((n_points, 0))
            return empty, empty
        # Powers c_i^k as intervals, shape (N, d, max_degree + 1)
        pow_lo = np.ones((n_points, d, self.max_degree + 1))
        pow_hi = np.ones((n_points, d, self.max_degree + 1))
        for k in range(1, self.max_degree + 1):
            pow_lo[:, :, k], pow_hi[:, :, k] = mul_bounds(
                pow_lo[:, :, k - 1], pow_hi[:, :, k - 1], centers, centers
            )
        mono_lo = np.ones((n_points, self.deltas.shape[0]))
        mono_hi = np.ones((n_points, self.deltas.shape[0]))
        for i in range(d):
            column = self.deltas[:, i]
            if not column.any():
                continue
            mono_lo, mono_hi = mul_bounds(
                mono_lo, mono_hi, pow_lo[:, i, column], pow_hi[:, i, column]
            )
        term_lo, term_hi = mul_bounds(mono_lo, mono_hi, self.mult_lo, self.mult_hi)
        return grouped_sum_bounds(term_lo, term_hi, self.selector)
