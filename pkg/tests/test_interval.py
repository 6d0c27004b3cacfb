"""Tests for interval arithmetic"""

from fractions import Fraction

import numpy as np
import pytest

from src.exceptions import DomainError


def test_interval_rejects_reversed_endpoints():
    """Test that lo > hi is refused"""
    from src.interval.interval import Interval

    with pytest.raises(DomainError):
        Interval(2.0, 1.0)
    with pytest.raises(DomainError):
        Interval(float("nan"), 1.0)


def test_exact_operations_are_not_widened():
    """Test that representable results stay tight"""
    from src.interval.interval import Interval

    assert Interval(1.0, 2.0) + Interval(3.0, 4.0) == Interval(4.0, 6.0)
    assert Interval(-1.0, 2.0) * Interval(3.0, 4.0) == Interval(-4.0, 8.0)
    assert Interval(-2.0, 1.0) ** 2 == Interval(0.0, 4.0)
    assert Interval(-2.0, -1.0) ** 3 == Interval(-8.0, -1.0)
    assert Interval(1.0, 2.0) - Interval(0.5, 1.0) == Interval(0.0, 1.5)


def test_division_by_zero_containing_interval():
    """Test that dividing by an interval containing zero raises"""
    from src.interval.interval import Interval

    with pytest.raises(DomainError):
        Interval(1.0, 2.0) / Interval(-1.0, 1.0)
    result = Interval(1.0, 2.0) / Interval(4.0, 8.0)
    assert result.contains(0.125) and result.contains(0.5)


def test_directed_rounding_encloses_exact_results():
    """Test add/mul/div bounds against exact rational arithmetic"""
    from src.interval.interval import add_down, add_up, div_down, div_up, mul_down, mul_up

    rng = np.random.default_rng(7)
    for a, b in rng.uniform(-1e3, 1e3, size=(500, 2)):
        a, b = float(a), float(b)
        exact_sum = Fraction(a) + Fraction(b)
        exact_prod = Fraction(a) * Fraction(b)
        exact_quot = Fraction(a) / Fraction(b)
        assert Fraction(add_down(a, b)) <= exact_sum <= Fraction(add_up(a, b))
        assert Fraction(mul_down(a, b)) <= exact_prod <= Fraction(mul_up(a, b))
        assert Fraction(div_down(a, b)) <= exact_quot <= Fraction(div_up(a, b))
        assert add_up(a, b) - add_down(a, b) <= 2 * np.spacing(abs(a + b))


def test_interval_operations_enclose_sampled_values():
    """Test that interval results contain every pointwise result"""
    from src.interval.interval import Interval

    rng = np.random.default_rng(11)
    for _ in range(200):
        a_lo, a_hi = np.sort(rng.uniform(-3, 3, 2))
        b_lo, b_hi = np.sort(rng.uniform(-3, 3, 2))
        a, b = Interval(a_lo, a_hi), Interval(b_lo, b_hi)
        x, y = rng.uniform(a_lo, a_hi), rng.uniform(b_lo, b_hi)
        assert (a + b).contains(x + y)
        assert (a - b).contains(x - y)
        assert (a * b).contains(x * y)
        assert (a ** 3).contains(x ** 3)


def test_interval_operations_are_inclusion_monotone():
    """Test that nested operands give nested results"""
    from src.interval.interval import Interval

    rng = np.random.default_rng(12)

    def nested(lo, hi):
        outer = Interval(*np.sort(rng.uniform(lo, hi, 2)))
        inner = Interval(*np.sort(rng.uniform(outer.lo, outer.hi, 2)))
        return inner, outer

    for _ in range(300):
        a, a_outer = nested(-4, 4)
        b, b_outer = nested(-4, 4)
        d, d_outer = nested(0.25, 3) if rng.random() < 0.5 else nested(-3, -0.25)
        assert (a + b).subset_of(a_outer + b_outer)
        assert (a - b).subset_of(a_outer - b_outer)
        assert (a * b).subset_of(a_outer * b_outer)
        assert (a / d).subset_of(a_outer / d_outer)
        for k in (2, 3, 4, 5):
            assert (a ** k).subset_of(a_outer ** k)


def test_sum_bounds_single_term_is_exact():
    """Test that sums with one nonzero term are returned unchanged"""
    from src.interval.arrays import sum_bounds

    lo = np.array([[0.1, 0.0, 0.0]])
    lo_sum, hi_sum = sum_bounds(lo, lo, axis=1)
    assert lo_sum[0] == 0.1 and hi_sum[0] == 0.1


def test_sum_bounds_encloses_exact_sum():
    """Test the summation error bound against rational sums"""
    from src.interval.arrays import sum_bounds

    rng = np.random.default_rng(3)
    values = rng.uniform(-1.0, 1.0, size=(50, 20))
    lo, hi = sum_bounds(values, values, axis=1)
    for row, low, high in zip(values, lo, hi):
        exact = sum(Fraction(float(v)) for v in row)
        assert Fraction(low) <= exact <= Fraction(high)


def test_ball_enclosure_contains_ball_samples():
    """Test that the box around a 2-norm ball contains ball samples"""
    from src.interval.arrays import IntervalVector

    rng = np.random.default_rng(5)
    center = np.array([0.5, -1.0, 2.0])
    box = IntervalVector.ball_enclosure(center, 0.1)
    directions = rng.standard_normal((10000, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    points = center + directions * 0.1 * rng.random((10000, 1)) ** (1.0 / 3.0)
    assert all(box.contains(p) for p in points)


def test_interval_vector_set_operations():
    """Test product, hull, subset and split"""
    from src.interval.arrays import IntervalVector

    a = IntervalVector([0.0, 1.0], [1.0, 2.0])
    b = IntervalVector([-1.0], [1.0])
    joint = a.product(b)
    assert joint.dim == 3
    assert joint[2].lo == -1.0
    assert a.subset_of(a.hull(IntervalVector([2.0, 2.0], [3.0, 3.0])))
    left, right = a.split(0)
    assert left.hi[0] == 0.5 and right.lo[0] == 0.5
    with pytest.raises(DomainError):
        IntervalVector([1.0], [0.0])


def test_interval_matrix_product_encloses_point_products():
    """Test that interval matrix products contain sampled products"""
    from src.interval.arrays import IntervalMatrix, IntervalVector

    rng = np.random.default_rng(13)
    M_lo = rng.uniform(-1, 1, (3, 3))
    M = IntervalMatrix(M_lo, M_lo + 0.1)
    v_lo = rng.uniform(-1, 1, 3)
    v = IntervalVector(v_lo, v_lo + 0.2)
    product = M @ v
    for _ in range(200):
        Mp = rng.uniform(M.lo, M.hi)
        vp = rng.uniform(v.lo, v.hi)
        assert product.contains(Mp @ vp)


def test_quadratic_form_encloses_samples():
    """Test d^T M d enclosure"""
    from src.interval.arrays import IntervalMatrix, IntervalVector

    rng = np.random.default_rng(17)
    M = IntervalMatrix.point(np.array([[2.0, -1.0], [0.5, 3.0]]))
    d = IntervalVector([-0.5, -0.2], [0.3, 0.4])
    form = M.quadratic_form(d)
    for _ in range(500):
        x = rng.uniform(d.lo, d.hi)
        assert form.contains(x @ M.lo @ x)
