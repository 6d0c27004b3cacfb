"""Tests for zonotopes, linearization and reachable tubes"""

import numpy as np
import pytest

from src.exceptions import ConvergenceError, DomainError


def test_zonotope_identity_map_is_exact():
    """Test that mapping by the identity leaves the zonotope unchanged"""
    from src.reach.zonotope import Zonotope

    Z = Zonotope([0.1, -0.3], np.array([[0.2, 0.05], [0.0, 0.1]]))
    image = Z.linear_map(np.eye(2))
    assert np.array_equal(image.center, Z.center)
    assert np.array_equal(image.generators, Z.generators)


def test_zonotope_from_box_hull_round_trips():
    """Test that the hull of a box zonotope contains the box"""
    from src.interval.arrays import IntervalVector
    from src.reach.zonotope import Zonotope

    box = IntervalVector([-1.0, 0.0, 2.0], [1.0, 0.5, 2.0])
    hull = Zonotope.from_box(box).interval_hull()
    assert box.subset_of(hull)
    assert np.allclose(hull.lo, box.lo) and np.allclose(hull.hi, box.hi)


def test_zonotope_operations_enclose_samples():
    """Test linear map and Minkowski sum against mapped samples"""
    from src.reach.zonotope import Zonotope, zono_interval_hull, zono_linear_map, zono_minkowski

    rng = np.random.default_rng(21)
    Z1 = Zonotope(rng.uniform(-1, 1, 3), rng.uniform(-0.3, 0.3, (3, 4)))
    Z2 = Zonotope(rng.uniform(-1, 1, 3), rng.uniform(-0.3, 0.3, (3, 2)))
    M = rng.uniform(-2, 2, (3, 3))
    mapped = zono_interval_hull(zono_linear_map(M, Z1))
    summed = zono_interval_hull(zono_minkowski(Z1, Z2))
    for p, q in zip(Z1.sample(rng, 2000), Z2.sample(rng, 2000)):
        assert mapped.contains(M @ p)
        assert summed.contains(p + q)


def test_convex_hull_with_image_encloses_segments():
    """Test that CH(Z, M Z) contains convex combinations of z and M z"""
    from src.reach.zonotope import Zonotope

    rng = np.random.default_rng(22)
    Z = Zonotope([0.5, -0.5], np.array([[0.1, 0.0], [0.05, 0.2]]))
    M = np.array([[0.9, -0.2], [0.3, 1.1]])
    hull = Z.convex_hull_with_image(M).interval_hull()
    for z in Z.sample(rng, 2000):
        lam = rng.random()
        assert hull.contains(lam * z + (1.0 - lam) * (M @ z))


def test_zonotope_rejects_bad_shapes():
    """Test dimension validation"""
    from src.reach.zonotope import Zonotope

    with pytest.raises(DomainError):
        Zonotope([1.0, 2.0], np.zeros((3, 1)))
    with pytest.raises(DomainError):
        Zonotope([])
    with pytest.raises(DomainError):
        Zonotope([0.0, 1.0]).linear_map(np.eye(3))


def test_exponential_series_encloses_closed_form():
    """Test e^{A dt} for a nilpotent and a rotation generator"""
    from src.reach.tube import exponential_series

    dt = 0.02
    nilpotent = exponential_series(np.array([[0.0, 1.0], [0.0, 0.0]]), dt)
    exact = np.array([[1.0, dt], [0.0, 1.0]])
    assert np.all(np.abs(nilpotent.phi - exact) <= nilpotent.phi_error + 1e-18)

    w = 3.0
    rotation = exponential_series(np.array([[0.0, w], [-w, 0.0]]), dt)
    c, s = np.cos(w * dt), np.sin(w * dt)
    exact = np.array([[c, s], [-s, c]])
    assert np.all(np.abs(rotation.phi - exact) <= rotation.phi_error + 1e-15)
    integral = np.array([[s, 1.0 - c], [c - 1.0, s]]) / w
    assert np.all(np.abs(rotation.gamma - integral) <= rotation.gamma_error + 1e-15)


def test_exponential_series_zero_matrix_is_exact():
    """Test that A = 0 gives the identity with no error"""
    from src.reach.tube import exponential_series

    series = exponential_series(np.zeros((3, 3)), 0.1)
    assert np.array_equal(series.phi, np.eye(3))
    assert not series.phi_error.any()


def test_exponential_series_refuses_large_steps():
    """Test ConvergenceError when ||A|| dt is too large for the order"""
    from src.reach.tube import exponential_series

    with pytest.raises(ConvergenceError):
        exponential_series(np.array([[100.0]]), 1.0, order=4)
    with pytest.raises(DomainError):
        exponential_series(np.eye(2), 0.0)


def test_linearize_cubic_system(example1):
    """Test A and B of the cubic system at (-2, 1) with u* = 0"""
    from src.interval.arrays import IntervalVector
    from src.reach.linearize import linearize

    system = example1.build_system()

    state_box = IntervalVector([-2.1, 0.9], [-1.9, 1.1])
    sys = linearize(system.f, system.g, [-2.0, 1.0], [0.0], state_box, system.U_box)
    assert sys.A == pytest.approx(np.array([[-0.6, -1.0], [12.0, 0.0]]))
    assert sys.B == pytest.approx(np.array([[0.0], [1.0]]))
    assert sys.c == pytest.approx([0.6 * 2.0 - 1.0, -8.0])
    assert sys.L.lo[0] == 0.0 and sys.L.hi[0] == 0.0
    assert sys.L.lo[1] < 0.0 < sys.L.hi[1]


def test_linear_field_has_zero_remainder(example3):
    """Test that the double integrator linearizes with L = 0"""
    from src.interval.arrays import IntervalVector
    from src.reach.linearize import Linearizer

    system = example3.build_system()
    linearizer = Linearizer(system.vector_field)
    assert not linearizer.nonlinear
    box = IntervalVector.ball_enclosure(np.zeros(6), 1.0)
    sys = linearizer.linearize(np.zeros(6), np.zeros(3), box, system.U_box)
    assert not sys.L.lo.any() and not sys.L.hi.any()


def test_linearize_rejects_point_outside_box(example1):
    """Test that the expansion point must lie in its box"""
    from src.interval.arrays import IntervalVector
    from src.reach.linearize import Linearizer

    system = example1.build_system()
    box = IntervalVector([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(DomainError):
        Linearizer(system.vector_field).linearize([-2.0, 1.0], [0.0], box, system.U_box)


def test_remainder_widens_with_state_box():
    """Test that nested state boxes give nested remainders on random cubic fields"""
    from src.interval.arrays import IntervalVector
    from src.poly.multipoly import MultiPoly, VarSpace
    from src.reach.linearize import Linearizer

    space = VarSpace.standard(2, 1)
    rng = np.random.default_rng(23)
    input_box = IntervalVector([-1.0], [1.0])
    for _ in range(20):
        field = []
        for _ in range(space.n):
            terms = {}
            for _ in range(5):
                exponent = tuple(int(e) for e in rng.integers(0, 3, space.dim))
                terms[exponent] = float(rng.uniform(-2, 2))
            field.append(MultiPoly(space, terms))
        linearizer = Linearizer(field)
        x_star = rng.uniform(-1, 1, space.n)
        inner = IntervalVector(x_star - rng.uniform(0.0, 0.2, space.n), x_star + rng.uniform(0.0, 0.2, space.n))
        outer = IntervalVector(inner.lo - rng.uniform(0.0, 0.5, space.n), inner.hi + rng.uniform(0.0, 0.5, space.n))
        small = linearizer.linearize(x_star, [0.0], inner, input_box).L
        large = linearizer.linearize(x_star, [0.0], outer, input_box).L
        assert small.subset_of(large)
        assert np.all(small.width() <= large.width())

def test_frozen_dynamics_tube_equals_initial_set():
    """Test that A = B = c = L = 0 leaves the initial set in place"""
    from src.interval.arrays import IntervalVector
    from src.reach.linearize import LinearizedSystem
    from src.reach.tube import reach_tube
    from src.reach.zonotope import Zonotope

    box = IntervalVector([0.25, -1.0], [0.75, 1.0])
    X0 = Zonotope.from_box(box)
    sys = LinearizedSystem(
        A=np.zeros((2, 2)),
        B=np.zeros((2, 1)),
        c=np.zeros(2),
        L=IntervalVector.point(np.zeros(2)),
        x_star=X0.center.copy(),
        u_star=np.zeros(1),
    )
    result = reach_tube(sys, X0, IntervalVector([-1.0], [1.0]), 0.02)
    assert result.hull == X0.interval_hull()


def test_cubic_system_tube_contains_trajectories(example1):
    """Test Monte Carlo tube containment for the cubic system at (-2, 1)"""
    from src.reach.tube import ReachabilityAnalyzer
    from src.reach.zonotope import Zonotope
    from src.sim.audit import audit_tube, simulate_samples

    system = example1.build_system()
    analyzer = ReachabilityAnalyzer(system.vector_field)
    X0 = Zonotope.point([-2.0, 1.0])
    reach = analyzer.compute(X0, system.U_box, 0.02)
    assert reach.seed is not None and reach.hull.subset_of(reach.seed)

    rng = np.random.default_rng(0)
    paths, _ = simulate_samples(system, X0, system.U_box, 0.02, 100, rng, 10000)
    assert audit_tube(reach, paths) == 0


def test_uncertain_initial_set_tube_contains_trajectories(example2):
    """Test tube containment from a measurement box"""
    from src.interval.arrays import IntervalVector
    from src.reach.tube import guaranteed_reach
    from src.reach.zonotope import Zonotope
    from src.sim.audit import audit_tube, simulate_samples

    system = example2.build_system()
    X0 = Zonotope.from_box(IntervalVector.ball_enclosure([0.5, -1.0], 0.1))
    reach = guaranteed_reach(system.vector_field, X0, system.U_box, 0.02)
    assert reach.endpoint.interval_hull().subset_of(reach.hull)

    rng = np.random.default_rng(1)
    paths, _ = simulate_samples(system, X0, system.U_box, 0.02, 50, rng, 2000)
    assert audit_tube(reach, paths) == 0


def test_tube_grows_with_interval_length(example3):
    """Test hull(dt1) within hull(dt2) for dt1 < dt2 on the double integrator"""
    from src.interval.arrays import IntervalVector
    from src.reach.tube import ReachabilityAnalyzer
    from src.reach.zonotope import Zonotope

    system = example3.build_system()
    analyzer = ReachabilityAnalyzer(system.vector_field)
    X0 = Zonotope.from_box(IntervalVector.ball_enclosure([0.1, -0.2, 0.3, 0.5, 0.0, -0.4], 0.02))
    short = analyzer.compute(X0, system.U_box, 0.01).hull
    long = analyzer.compute(X0, system.U_box, 0.02).hull
    assert np.all(long.lo <= short.lo + 1e-9)
    assert np.all(short.hi <= long.hi + 1e-9)
