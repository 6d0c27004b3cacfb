"""Sparse multivariate polynomials over a joint state/input variable space"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union
import logging
import numpy as np

from src.exceptions import DomainError
from src.interval.arrays import IntervalVector
from src.interval.interval import Interval, interval_sum

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]
Number = Union[int, float]


@dataclass(frozen=True)
class VarSpace:
    """Ordered state and input variable names; z = (x, u)"""

    state_names: Tuple[str, ...]
    input_names: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "state_names", tuple(self.state_names))
        object.__setattr__(self, "input_names", tuple(self.input_names))
        names = self.names
        if len(set(names)) != len(names):
            raise DomainError(f"Variable names must be unique: {names}")
        if not self.state_names:
            raise DomainError("A variable space needs at least one state variable")

    @classmethod
    def standard(cls, n: int, m: int) -> "VarSpace":
        """Space with states x1..xn and inputs u1..um"""
        return cls(tuple(f"x{i + 1}" for i in range(n)), tuple(f"u{j + 1}" for j in range(m)))

    @property
    def names(self) -> Tuple[str, ...]:
        return self.state_names + self.input_names

    @property
    def n(self) -> int:
        return len(self.state_names)

    @property
    def m(self) -> int:
        return len(self.input_names)

    @property
    def dim(self) -> int:
        return self.n + self.m

    def index(self, var: Union[str, int]) -> int:
        if isinstance(var, (int, np.integer)):
            if not 0 <= var < self.dim:
                raise DomainError(f"Variable index {var} out of range for {self.dim} variables")
            return int(var)
        try:
            return self.names.index(var)
        except ValueError:
            raise DomainError(f"Unknown variable: {var}")

    def join(self, x: Sequence[float], u: Optional[Sequence[float]] = None) -> np.ndarray:
        """Stack a state and an input into a joint point"""
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.zeros(self.m) if u is None else np.asarray(u, dtype=float).reshape(-1)
        if x.size != self.n or u.size != self.m:
            raise DomainError(f"Expected state of size {self.n} and input of size {self.m}")
        return np.concatenate([x, u])


def _term_key(item: Tuple[Exponent, float]) -> Tuple[int, Exponent]:
    exponent = item[0]
    return (-sum(exponent), tuple(-e for e in exponent))


class MultiPoly:
    """Immutable sparse polynomial: a map from exponent tuples to nonzero coefficients"""

    __slots__ = ("space", "_terms")

    def __init__(self, space: VarSpace, terms: Optional[Mapping[Exponent, Number]] = None):
        """Initialize from an exponent-to-coefficient mapping"""
        clean: Dict[Exponent, float] = {}
        for exponent, coef in (terms or {}).items():
            exponent = tuple(int(e) for e in exponent)
            if len(exponent) != space.dim or any(e < 0 for e in exponent):
                raise DomainError(f"Exponent {exponent} does not fit a space of dimension {space.dim}")
            coef = float(coef)
            if not np.isfinite(coef):
                raise DomainError(f"Non-finite coefficient {coef} for exponent {exponent}")
            if coef != 0.0:
                clean[exponent] = coef
        self.space = space
        self._terms = dict(sorted(clean.items(), key=_term_key))

    # Constructors

    @classmethod
    def zero(cls, space: VarSpace) -> "MultiPoly":
        return cls(space)

    @classmethod
    def constant(cls, space: VarSpace, value: Number) -> "MultiPoly":
        return cls(space, {(0,) * space.dim: value})

    @classmethod
    def variable(cls, space: VarSpace, var: Union[str, int]) -> "MultiPoly":
        exponent = [0] * space.dim
        exponent[space.index(var)] = 1
        return cls(space, {tuple(exponent): 1.0})

    # Introspection

    @property
    def terms(self) -> Dict[Exponent, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, exponent: Exponent) -> float:
        return self._terms.get(tuple(exponent), 0.0)

    @property
    def degree(self) -> int:
        if not self._terms:
            return 0
        return max(sum(e) for e in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_affine(self) -> bool:
        return self.degree <= 1

    def depends_on(self, var: Union[str, int]) -> bool:
        i = self.space.index(var)
        return any(e[i] > 0 for e in self._terms)

    def depends_on_inputs(self) -> bool:
        n = self.space.n
        return any(any(e[n:]) for e in self._terms)

    def degree_in(self, var: Union[str, int]) -> int:
        i = self.space.index(var)
        return max((e[i] for e in self._terms), default=0)

    def __len__(self) -> int:
        return len(self._terms)

    # Arithmetic

    def _check_space(self, other: "MultiPoly") -> None:
        if other.space != self.space:
            raise DomainError("Polynomials live in different variable spaces")

    def _lift(self, other: Union["MultiPoly", Number]) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            self._check_space(other)
            return other
        return MultiPoly.constant(self.space, other)

    def __add__(self, other: Union["MultiPoly", Number]) -> "MultiPoly":
        other = self._lift(other)
        terms = dict(self._terms)
        for exponent, coef in other._terms.items():
            terms[exponent] = terms.get(exponent, 0.0) + coef
        return MultiPoly(self.space, terms)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.space, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other: Union["MultiPoly", Number]) -> "MultiPoly":
        return self + (-self._lift(other))

    def __rsub__(self, other: Number) -> "MultiPoly":
        return self._lift(other) - self

    def __mul__(self, other: Union["MultiPoly", Number]) -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            scale = float(other)
            return MultiPoly(self.space, {e: c * scale for e, c in self._terms.items()})
        self._check_space(other)
        terms: Dict[Exponent, float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                exponent = tuple(a + b for a, b in zip(e1, e2))
                terms[exponent] = terms.get(exponent, 0.0) + c1 * c2
        return MultiPoly(self.space, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "MultiPoly":
        if not isinstance(k, int) or k < 0:
            raise DomainError(f"Polynomial power requires a nonnegative integer, got {k}")
        result = MultiPoly.constant(self.space, 1.0)
        for _ in range(k):
            result = result * self
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.space == other.space and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.space, tuple(self._terms.items())))

    # Evaluation

    def _point(self, z: Sequence[float]) -> np.ndarray:
        point = np.asarray(z, dtype=float).reshape(-1)
        if point.size != self.space.dim:
            raise DomainError(f"Point has dimension {point.size}, expected {self.space.dim}")
        return point

    def evaluate(self, z: Sequence[float]) -> float:
        """Value at a joint point"""
        point = [float(v) for v in self._point(z)]
        total = 0.0
        for exponent, coef in self._terms.items():
            value = coef
            for v, e in zip(point, exponent):
                if e:
                    value *= v ** e
            total += value
        return total

    def evaluate_interval(self, box: IntervalVector) -> Interval:
        """Enclosure of the range over a box, factoring one variable at a time"""
        if box.dim != self.space.dim:
            raise DomainError(f"Box has dimension {box.dim}, expected {self.space.dim}")
        if not self._terms:
            return Interval(0.0, 0.0)
        return _factored_enclosure(list(self._terms.items()), list(box), 0)

    def compile(self) -> "CompiledField":
        return CompiledField([self])

    # Calculus and substitution

    def diff(self, var: Union[str, int]) -> "MultiPoly":
        """Exact partial derivative"""
        i = self.space.index(var)
        terms: Dict[Exponent, float] = {}
        for exponent, coef in self._terms.items():
            k = exponent[i]
            if k == 0:
                continue
            reduced = exponent[:i] + (k - 1,) + exponent[i + 1:]
            terms[reduced] = coef * k
        return MultiPoly(self.space, terms)

    def gradient(self, variables: Optional[Iterable[Union[str, int]]] = None) -> List["MultiPoly"]:
        variables = self.space.state_names if variables is None else variables
        return [self.diff(v) for v in variables]

    def substitute(self, values: Mapping[Union[str, int], float]) -> "MultiPoly":
        """Fix some variables at numeric values; the result keeps the same space"""
        fixed = {self.space.index(k): float(v) for k, v in values.items()}
        terms: Dict[Exponent, float] = {}
        for exponent, coef in self._terms.items():
            value = coef
            reduced = list(exponent)
            for i, v in fixed.items():
                if exponent[i]:
                    value *= v ** exponent[i]
                    reduced[i] = 0
            key = tuple(reduced)
            terms[key] = terms.get(key, 0.0) + value
        return MultiPoly(self.space, terms)

    def substitute_state(self, x: Sequence[float]) -> "MultiPoly":
        """Fix every state variable, leaving a polynomial in the inputs"""
        return self.substitute({i: v for i, v in enumerate(np.asarray(x, dtype=float).reshape(-1))})

    def truncate(self, order: int) -> Tuple["MultiPoly", "MultiPoly"]:
        """Split into the part of total degree <= order and the rest"""
        low = {e: c for e, c in self._terms.items() if sum(e) <= order}
        high = {e: c for e, c in self._terms.items() if sum(e) > order}
        return MultiPoly(self.space, low), MultiPoly(self.space, high)

    def recenter(self, z_star: Sequence[float]) -> "MultiPoly":
        """Polynomial q with q(w) = p(z_star + w), coefficients to rounding"""
        from src.poly.recenter import ShiftPlan

        center = self._point(z_star)
        plan = ShiftPlan.from_poly(self)
        lo, hi = plan.coefficient_bounds(center[None, :])
        mids = np.where(lo[0] == hi[0], lo[0], 0.5 * lo[0] + 0.5 * hi[0])
        return MultiPoly(self.space, {tuple(int(e) for e in t): c for t, c in zip(plan.targets, mids)})

    def __str__(self) -> str:
        from src.poly.parser import format_poly

        return format_poly(self)

    def __repr__(self) -> str:
        return f"MultiPoly({str(self)!r})"


def _factored_enclosure(terms: List[Tuple[Exponent, float]], box: List[Interval], var: int) -> Interval:
    if var == len(box):
        return interval_sum(Interval.point(c) for _, c in terms)
    groups: Dict[int, List[Tuple[Exponent, float]]] = {}
    for exponent, coef in terms:
        groups.setdefault(exponent[var], []).append((exponent, coef))
    parts = []
    for power, group in sorted(groups.items()):
        inner = _factored_enclosure(group, box, var + 1)
        parts.append(inner if power == 0 else box[var] ** power * inner)
    return interval_sum(parts)


def lie_derivative(h: MultiPoly, field: Sequence[MultiPoly]) -> MultiPoly:
    """Directional derivative grad_x h . field of a state-only function"""
    space = h.space
    if len(field) != space.n:
        raise DomainError(f"Vector field has {len(field)} components, expected {space.n}")
    if h.depends_on_inputs():
        raise DomainError("Lie derivatives are taken of state-only functions")
    result = MultiPoly.zero(space)
    for i, component in enumerate(field):
        if not h.depends_on(i):
            continue
        result = result + h.diff(i) * component
    return result


class CompiledField:
    """Vectorised evaluator of a list of polynomials over the same space"""

    def __init__(self, polys: Sequence[MultiPoly]):
        """Initialize by stacking the terms of every component"""
        if not polys:
            raise DomainError("Cannot compile an empty polynomial list")
        self.space = polys[0].space
        exponents, coefs, rows = [], [], []
        for row, poly in enumerate(polys):
            if poly.space != self.space:
                raise DomainError("Polynomials live in different variable spaces")
            for exponent, coef in poly.items():
                exponents.append(exponent)
                coefs.append(coef)
                rows.append(row)
        self.size = len(polys)
        self._exponents = np.array(exponents, dtype=float).reshape(-1, self.space.dim)
        self._coefs = np.array(coefs, dtype=float)
        self._selector = np.zeros((len(coefs), self.size))
        self._selector[np.arange(len(coefs)), rows] = 1.0

    def __call__(self, z: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (..., dim); returns (..., size)"""
        z = np.asarray(z, dtype=float)
        monomials = np.prod(z[..., None, :] ** self._exponents, axis=-1)
        return (monomials * self._coefs) @ self._selector
