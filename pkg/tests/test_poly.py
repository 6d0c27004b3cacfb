"""Tests for polynomials, parsing, recentering and Taylor models"""

import numpy as np
import pytest
import sympy

from src.exceptions import DomainError, ExpressionError


@pytest.fixture
def space():
    """Two states and one input"""
    from src.poly.multipoly import VarSpace

    return VarSpace.standard(2, 1)


def random_poly(space, rng, terms=6, max_degree=4):
    from src.poly.multipoly import MultiPoly

    coefs = {}
    for _ in range(terms):
        exponent = tuple(int(e) for e in rng.integers(0, max_degree + 1, space.dim))
        if sum(exponent) <= max_degree:
            coefs[exponent] = float(rng.integers(-5, 6))
    return MultiPoly(space, coefs)


def to_sympy(p):
    symbols = sympy.symbols(p.space.names)
    expr = sympy.Integer(0)
    for exponent, coef in p.items():
        term = sympy.Rational(repr(coef))
        for s, e in zip(symbols, exponent):
            term *= s ** e
        expr += term
    return expr, symbols


def test_parse_evaluates_barrier(space):
    """Test parsing the cubic-system barrier and evaluating it"""
    from src.poly.parser import parse_polynomial

    h = parse_polynomial("-x2^2 - x1 + 1", space)
    assert h.evaluate(space.join([-2.0, 1.0], [0.0])) == 2.0
    assert h.degree == 2
    assert not h.depends_on_inputs()


def test_parse_with_parameters(space):
    """Test named parameters and division by them"""
    from src.poly.parser import parse_polynomial

    params = {"k": 50.0, "m": 1.5}
    h = parse_polynomial("10 - k/2*(x1 - 0.5)^2", space, params)
    grad = h.gradient()
    assert grad[0].evaluate(space.join([0.5, 3.0], [0.0])) == 0.0
    assert h.evaluate(space.join([0.5, 0.0], [0.0])) == 10.0
    g = parse_polynomial("1/m", space, params)
    assert g.evaluate(space.join([0.0, 0.0], [0.0])) == pytest.approx(1.0 / 1.5)


@pytest.mark.parametrize("text", ["x1/x2", "sin(x1)", "x3 + 1", "", "x1 +", "sqrt(x1)", "x1^-1"])
def test_parse_rejects_non_polynomials(space, text):
    """Test that non-polynomial or malformed text raises ExpressionError"""
    from src.poly.parser import parse_polynomial

    with pytest.raises(ExpressionError):
        parse_polynomial(text, space)


def test_canonical_printer_round_trips(space):
    """Test parse(print(p)) == p"""
    from src.poly.parser import format_poly, parse_polynomial

    rng = np.random.default_rng(0)
    for _ in range(30):
        p = random_poly(space, rng) * 0.1
        assert parse_polynomial(format_poly(p), space) == p
    assert format_poly(parse_polynomial("0", space)) == "0"


def test_diff_matches_sympy(space):
    """Test partial derivatives against sympy"""
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = random_poly(space, rng)
        expr, symbols = to_sympy(p)
        for i, s in enumerate(symbols):
            expected = sympy.expand(sympy.diff(expr, s))
            got, _ = to_sympy(p.diff(i))
            assert sympy.expand(got - expected) == 0


def test_lie_derivative_of_cubic_system():
    """Test L_f h and L_g h for the cubic planar system"""
    from src.poly.multipoly import VarSpace, lie_derivative
    from src.poly.parser import parse_polynomial

    space = VarSpace.standard(2, 1)
    h = parse_polynomial("-x2^2 - x1 + 1", space)
    f = [parse_polynomial("-0.6*x1 - x2", space), parse_polynomial("x1^3", space)]
    g = [parse_polynomial("0", space), parse_polynomial("x2", space)]
    expected = parse_polynomial("0.6*x1 + x2 - 2*x2*x1^3", space)
    assert lie_derivative(h, f) == expected
    assert lie_derivative(h, g) == parse_polynomial("-2*x2^2", space)
    with pytest.raises(DomainError):
        lie_derivative(parse_polynomial("u1", space), f)


def test_recenter_matches_sympy_expansion(space):
    """Test p(z* + w) coefficients against sympy"""
    rng = np.random.default_rng(2)
    for _ in range(15):
        p = random_poly(space, rng)
        center = rng.integers(-3, 4, space.dim).astype(float)
        shifted = p.recenter(center)
        expr, symbols = to_sympy(p)
        expected = sympy.expand(expr.subs({s: s + int(c) for s, c in zip(symbols, center)}, simultaneous=True))
        got, _ = to_sympy(shifted)
        assert sympy.expand(got - expected) == 0


def test_recenter_evaluates_consistently(space):
    """Test q(w) == p(z* + w) at random points"""
    rng = np.random.default_rng(4)
    p = random_poly(space, rng, terms=8)
    center = rng.uniform(-1, 1, space.dim)
    q = p.recenter(center)
    for w in rng.uniform(-0.5, 0.5, (50, space.dim)):
        assert q.evaluate(w) == pytest.approx(p.evaluate(center + w), rel=1e-9, abs=1e-9)


def test_compiled_field_matches_evaluate(space):
    """Test vectorised evaluation against scalar evaluation"""
    from src.poly.multipoly import CompiledField

    rng = np.random.default_rng(6)
    polys = [random_poly(space, rng) for _ in range(3)]
    field = CompiledField(polys)
    points = rng.uniform(-2, 2, (20, space.dim))
    values = field(points)
    for z, row in zip(points, values):
        assert row == pytest.approx([p.evaluate(z) for p in polys], rel=1e-12, abs=1e-12)


def test_substitute_state_leaves_input_polynomial(space):
    """Test fixing the states of an input-affine expression"""
    from src.poly.parser import parse_polynomial

    xi = parse_polynomial("x1*u1 + x2^2 + 3", space)
    reduced = xi.substitute_state([2.0, -1.0])
    assert reduced == parse_polynomial("2*u1 + 4", space)


def test_taylor_model_contains_polynomial(space):
    """Test p(z) in P(z - z*) + I at sampled points"""
    from src.interval.arrays import IntervalVector
    from src.poly.taylor_model import build_taylor_model

    rng = np.random.default_rng(8)
    domain = IntervalVector([-2.2, 0.8, -1.0], [-1.8, 1.2, 1.0])
    center = domain.midpoint()
    for _ in range(10):
        p = random_poly(space, rng, terms=8)
        model = build_taylor_model(p, center, domain, 2)
        assert model.poly.degree <= 2
        for z in rng.uniform(domain.lo, domain.hi, (200, space.dim)):
            bounds = model.bounds_at(z)
            slack = 1e-9 * (1.0 + abs(p.evaluate(z)))
            assert bounds.lo - slack <= p.evaluate(z) <= bounds.hi + slack


def test_taylor_model_of_linear_polynomial_has_no_remainder(space):
    """Test that a linear polynomial keeps a zero remainder"""
    from src.interval.arrays import IntervalVector
    from src.poly.parser import parse_polynomial
    from src.poly.taylor_model import build_taylor_model

    p = parse_polynomial("3*x1 - 2*x2 + u1 + 1", space)
    domain = IntervalVector([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0])
    model = build_taylor_model(p, [0.0, 0.0, 0.0], domain, 2)
    assert model.remainder.lo == 0.0 and model.remainder.hi == 0.0
    assert model.poly == p


def test_taylor_model_rejects_center_outside_domain(space):
    """Test that the expansion point must lie in the domain"""
    from src.interval.arrays import IntervalVector
    from src.poly.parser import parse_polynomial
    from src.poly.taylor_model import build_taylor_model

    p = parse_polynomial("x1^3", space)
    domain = IntervalVector([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        build_taylor_model(p, [2.0, 0.0, 0.0], domain, 2)


def test_taylor_remainder_shrinks_with_order(space):
    """Test that raising the order never widens the remainder"""
    from src.interval.arrays import IntervalVector
    from src.interval.interval import Interval
    from src.poly.taylor_model import build_taylor_model

    rng = np.random.default_rng(17)
    domain = IntervalVector([-1.5, 0.5, -1.0], [-0.5, 1.5, 1.0])
    for _ in range(25):
        p = random_poly(space, rng, terms=10, max_degree=5)
        center = rng.uniform(domain.lo, domain.hi)
        remainders = [build_taylor_model(p, center, domain, n).remainder for n in range(p.degree + 1)]
        for lower, higher in zip(remainders, remainders[1:]):
            assert higher.subset_of(lower)
            assert higher.width <= lower.width
        assert remainders[-1] == Interval(0.0, 0.0)
