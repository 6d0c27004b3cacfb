"""Tests for barrier construction, the safety QP and the filter"""

import numpy as np
import pytest

from src.exceptions import DomainError, InfeasibleInputSet, RelativeDegreeError


def test_relative_degrees_of_bundled_barriers(example1, example2, example3):
    """Test r = 1, 2 and 2 for the three scenarios"""
    from src.controller.cbf import relative_degree

    for config, expected in ((example1, 1), (example2, 2), (example3, 2)):
        system = config.build_system()
        for spec in config.build_barriers():
            assert relative_degree(spec.h, system, [config.x0]) == expected


def test_relative_degree_undefined_raises(example1):
    """Test a barrier the input never reaches"""
    from src.controller.cbf import relative_degree
    from src.poly.multipoly import MultiPoly

    system = example1.build_system()
    with pytest.raises(RelativeDegreeError):
        relative_degree(MultiPoly.constant(system.space, 1.0), system)


def test_coefficient_and_lambda_conversions():
    """Test a <-> lambda for (20, 100) and (6, 8)"""
    from src.controller.cbf import coefficients_from_lambdas, lambdas_from_coefficients

    assert lambdas_from_coefficients((20.0, 100.0)) == pytest.approx((10.0, 10.0), rel=1e-6)
    assert lambdas_from_coefficients((6.0, 8.0)) == pytest.approx((4.0, 2.0))
    assert coefficients_from_lambdas((4.0, 2.0)) == pytest.approx((6.0, 8.0))
    with pytest.raises(DomainError):
        lambdas_from_coefficients((0.0, 1.0))
    with pytest.raises(DomainError):
        lambdas_from_coefficients((-3.0, 2.0))


def test_cbf_spec_checks_consistency(example2):
    """Test that inconsistent a and lambdas are refused"""
    from src.controller.cbf import CBFSpec

    h = example2.build_barriers()[0].h
    spec = CBFSpec(h=h, lambdas=(10.0, 10.0))
    assert spec.a_vec == pytest.approx((20.0, 100.0))
    assert spec.order == 2
    with pytest.raises(DomainError):
        CBFSpec(h=h, a_vec=(20.0, 100.0), lambdas=(5.0, 20.0))
    with pytest.raises(DomainError):
        CBFSpec(h=h)
    with pytest.raises(DomainError):
        CBFSpec(h=h, gamma=-1.0)


def test_build_xi_relative_degree_one(example1):
    """Test xi = L_f h + L_g h u + 3 h for the cubic system"""
    from src.controller.cbf import build_xi
    from src.poly.parser import parse_polynomial

    system = example1.build_system()
    spec = example1.build_barriers()[0]
    xi = build_xi(spec, system, 1)
    expected = parse_polynomial("0.6*x1 + x2 - 2*x2*x1^3 - 2*x2^2*u1 + 3*(-x2^2 - x1 + 1)", system.space)
    rng = np.random.default_rng(51)
    for z in rng.uniform(-2, 2, (200, 3)):
        assert xi.evaluate(z) == pytest.approx(expected.evaluate(z), rel=1e-12, abs=1e-12)


def test_build_xi_relative_degree_two(example2):
    """Test xi = L_f^2 h + L_g L_f h u + 20 L_f h + 100 h"""
    from src.controller.cbf import build_xi

    system = example2.build_system()
    spec = example2.build_barriers()[0]
    xi = build_xi(spec, system, 2)
    h = spec.h
    lf_h = system.lie_f(h)
    expected = system.lie_f(lf_h) + system.lie_g(lf_h)[0] * _input(system) + lf_h * 20.0 + h * 100.0
    rng = np.random.default_rng(52)
    for z in rng.uniform(-2, 2, (200, 3)):
        assert xi.evaluate(z) == pytest.approx(expected.evaluate(z), rel=1e-10, abs=1e-9)
    with pytest.raises(RelativeDegreeError):
        build_xi(spec, system, 3)


def _input(system):
    from src.poly.multipoly import MultiPoly

    return MultiPoly.variable(system.space, "u1")


def test_s_chain_of_mass_spring_damper(example2):
    """Test s_1 = L_f h + 10 h"""
    from src.controller.cbf import build_s_chain

    system = example2.build_system()
    spec = example2.build_barriers()[0]
    chain = build_s_chain(spec, system, 2)
    assert len(chain) == 2
    expected = system.lie_f(spec.h) + spec.h * 10.0
    rng = np.random.default_rng(53)
    for z in rng.uniform(-2, 2, (100, 3)):
        assert chain[1].evaluate(z) == pytest.approx(expected.evaluate(z), rel=1e-10, abs=1e-9)


def test_shrink_input_box():
    """Test U minus the actuation ball"""
    from src.controller.cbf import shrink_input_box
    from src.interval.arrays import IntervalVector

    U = IntervalVector([-1.0], [1.0])
    shrunk = shrink_input_box(U, 0.1)
    assert shrunk.lo[0] == pytest.approx(-0.9)
    assert shrunk.hi[0] == pytest.approx(0.9)
    assert shrunk.lo[0] >= -0.9 and shrunk.hi[0] <= 0.9
    assert shrink_input_box(U, 0.0) == U
    with pytest.raises(InfeasibleInputSet):
        shrink_input_box(U, 1.5)


def test_system_rejects_oversized_actuation_radius(example1):
    """Test InfeasibleInputSet when eps_u reaches the input half-width"""
    with pytest.raises(InfeasibleInputSet):
        example1.with_overrides(eps_u=1.0).build_system()


def test_make_constraint_at_cubic_anchor(example1):
    """Test row = L_g h(-2, 1) = -2 and rhs = L_f h + 3 h + phi"""
    from src.controller.cbf import build_xi, make_constraint

    system = example1.build_system()
    xi = build_xi(example1.build_barriers()[0], system, 1)
    row, rhs = make_constraint(xi, [-2.0, 1.0], -0.5)
    assert row == pytest.approx([-2.0])
    assert rhs == pytest.approx(15.8 + 6.0 - 0.5)


def test_qp_returns_nominal_when_safe():
    """Test an inactive constraint leaves the nominal input"""
    from src.controller.qp import solve_safety_qp
    from src.interval.arrays import IntervalVector

    U = IntervalVector([-1.0, -1.0], [1.0, 1.0])
    result = solve_safety_qp([0.2, -0.3], [(np.array([1.0, 0.0]), 1.0)], U)
    assert result.feasible
    assert result.u_star == pytest.approx([0.2, -0.3])
    assert result.active_set == ()


def test_qp_projects_onto_half_plane():
    """Test projection of the nominal input onto u1 + u2 >= 1"""
    from src.controller.qp import solve_safety_qp
    from src.interval.arrays import IntervalVector

    U = IntervalVector([-2.0, -2.0], [2.0, 2.0])
    result = solve_safety_qp([0.0, 0.0], [(np.array([1.0, 1.0]), -1.0)], U)
    assert result.feasible
    assert result.u_star == pytest.approx([0.5, 0.5])
    assert result.active_set == (0,)
    assert result.kkt_residual <= 1e-9


def test_qp_respects_box_and_constraint():
    """Test a constraint pushing the input against the box"""
    from src.controller.qp import solve_safety_qp
    from src.interval.arrays import IntervalVector

    U = IntervalVector([-1.0, -1.0], [1.0, 1.0])
    # u1 >= 0.5 and u2 <= -0.2; box rows start at index 2
    constraints = [(np.array([1.0, 0.0]), -0.5), (np.array([0.0, -1.0]), -0.2)]
    result = solve_safety_qp([3.0, 3.0], constraints, U)
    assert result.feasible
    assert result.u_star == pytest.approx([1.0, -0.2])
    assert result.kkt_residual <= 1e-9
    assert set(result.active_set) == {1, 3}


def test_qp_flags_infeasibility():
    """Test that contradictory constraints are reported, not raised"""
    from src.controller.qp import solve_safety_qp
    from src.interval.arrays import IntervalVector

    U = IntervalVector([-1.0], [1.0])
    result = solve_safety_qp([0.0], [(np.array([1.0]), -2.0)], U)
    assert not result.feasible
    assert U.contains(result.u_star)
    assert result.u_star == pytest.approx([1.0], abs=1e-12)


def test_qp_solution_is_optimal_for_random_problems():
    """Test KKT conditions on 200 random feasible problems with up to 12 rows"""
    from src.controller.qp import solve_safety_qp
    from src.interval.arrays import IntervalVector

    rng = np.random.default_rng(55)
    U = IntervalVector(-np.ones(3), np.ones(3))
    for _ in range(200):
        # u = 0 satisfies every row, and the box adds six more
        constraints = [(rng.normal(size=3), float(rng.uniform(0.0, 0.5))) for _ in range(int(rng.integers(1, 7)))]
        result = solve_safety_qp(rng.uniform(-2, 2, 3), constraints, U)
        assert result.feasible
        assert result.kkt_residual <= 1e-8
        assert U.contains(result.u_star, tol=1e-12)
        for row, rhs in constraints:
            assert row @ result.u_star + rhs >= -1e-9


def test_qp_keeps_feasible_nominal_exactly():
    """Test u_star is the nominal input bit for bit whenever it is admissible"""
    from src.controller.qp import solve_safety_qp
    from src.interval.arrays import IntervalVector

    rng = np.random.default_rng(56)
    U = IntervalVector(-np.ones(3), np.ones(3))
    for _ in range(100):
        u_nom = rng.uniform(-1, 1, 3)
        constraints = []
        for _ in range(int(rng.integers(1, 7))):
            row = rng.normal(size=3)
            constraints.append((row, float(-(row @ u_nom) + rng.uniform(1e-6, 1.0))))
        result = solve_safety_qp(u_nom, constraints, U)
        assert result.feasible
        assert np.array_equal(result.u_star, u_nom)
        assert result.active_set == ()


def test_naive_filter_skips_margins(example1):
    """Test that the naive filter uses phi = 0 and no tube"""
    from src.controller.safety_filter import ControllerKind, SafetyFilter

    scenario = example1.build()
    filt = SafetyFilter(scenario.system, scenario.barriers, kind=ControllerKind.NAIVE)
    decision = filt.step([-2.0, 1.0], [0.0], 0.02)
    assert decision.reach is None
    assert decision.phis == (0.0,)
    assert decision.qp.feasible
    assert filt.U_qp == scenario.system.U_box


def test_uncertainty_aware_filter_step(example1):
    """Test one usdcbf step: shrunk inputs, a nonpositive margin and a feasible QP"""
    from src.controller.safety_filter import ControllerKind, SafetyFilter

    scenario = example1.build()
    filt = SafetyFilter(
        scenario.system, scenario.barriers, kind=ControllerKind.USDCBF,
        eps_x=scenario.eps_x, pop_tolerance=1e-5,
    )
    assert filt.U_qp.hi[0] <= 0.9
    decision = filt.step([-2.0, 1.0], [-1.0], 0.02)
    assert decision.reach is not None
    assert decision.margins[0].phi <= 0.0
    assert decision.qp.feasible
    row, rhs = decision.constraints[0]
    assert row @ decision.u_desired + rhs >= -1e-9
    assert filt.U_qp.contains(decision.u_desired)


def test_barrier_rows_and_critical_barrier(example3):
    """Test the input row of a box barrier and the smallest-h selection"""
    from src.controller.safety_filter import ControllerKind, SafetyFilter

    scenario = example3.build()
    filt = SafetyFilter(scenario.system, scenario.barriers, kind=ControllerKind.NAIVE)
    x = np.array([0.45, 0.0, 0.3, 0.0, 0.0, 0.0])
    critical = filt.critical_barrier(x)
    assert critical.spec.name == "h1"
    assert critical.input_row(x) == pytest.approx([-1.0, 0.0, 0.0])
    assert filt.barrier_values(x)[0] == pytest.approx(0.05)


def test_qp_beats_every_feasible_grid_point():
    """Test the QP objective against a dense grid of feasible inputs in two dimensions"""
    from src.controller.qp import solve_safety_qp
    from src.interval.arrays import IntervalVector

    rng = np.random.default_rng(57)
    U = IntervalVector([-1.0, -1.0], [1.0, 1.0])
    axis = np.linspace(-1.0, 1.0, 401)
    grid = np.stack(np.meshgrid(axis, axis), axis=-1).reshape(-1, 2)
    for _ in range(20):
        constraints = [(rng.normal(size=2), float(rng.uniform(0.0, 0.5))) for _ in range(int(rng.integers(1, 7)))]
        u_nom = rng.uniform(-3, 3, 2)
        result = solve_safety_qp(u_nom, constraints, U)
        feasible = np.ones(len(grid), dtype=bool)
        for row, rhs in constraints:
            feasible &= grid @ row + rhs >= 0.0
        best = np.min(np.sum((grid[feasible] - u_nom) ** 2, axis=1))
        objective = float(np.sum((result.u_star - u_nom) ** 2))
        assert objective <= best + 1e-9


def test_qp_beats_every_feasible_grid_point_with_three_inputs():
    """Test the QP objective against a 41-point-per-axis grid of feasible inputs"""
    from src.controller.qp import solve_safety_qp
    from src.interval.arrays import IntervalVector

    rng = np.random.default_rng(58)
    U = IntervalVector(-np.ones(3), np.ones(3))
    axis = np.linspace(-1.0, 1.0, 41)
    grid = np.stack(np.meshgrid(axis, axis, axis), axis=-1).reshape(-1, 3)
    for _ in range(20):
        constraints = [(rng.normal(size=3), float(rng.uniform(0.0, 0.5))) for _ in range(6)]
        u_nom = rng.uniform(-3, 3, 3)
        result = solve_safety_qp(u_nom, constraints, U)
        feasible = np.ones(len(grid), dtype=bool)
        for row, rhs in constraints:
            feasible &= grid @ row + rhs >= 0.0
        best = np.min(np.sum((grid[feasible] - u_nom) ** 2, axis=1))
        objective = float(np.sum((result.u_star - u_nom) ** 2))
        assert objective <= best + 1e-9


def test_least_violation_point_of_contradictory_constraints():
    """Test the infeasible fallback lands on the box corner closest to u1 + u2 >= 3"""
    from src.controller.qp import solve_safety_qp
    from src.interval.arrays import IntervalVector

    U = IntervalVector([-1.0, -1.0], [1.0, 1.0])
    result = solve_safety_qp([-0.5, 0.2], [(np.array([1.0, 1.0]), -3.0)], U)
    assert not result.feasible
    np.testing.assert_allclose(result.u_star, [1.0, 1.0], atol=1e-9)


def test_least_violation_warns_when_not_converged(monkeypatch, caplog):
    """Test that a capped least-violation search is logged"""
    import src.controller.qp as qp
    from src.interval.arrays import IntervalVector

    monkeypatch.setattr(qp, "_LEAST_VIOLATION_ITERATIONS", 1)
    U = IntervalVector([-1.0, -1.0], [1.0, 1.0])
    with caplog.at_level("WARNING", logger="src.controller.qp"):
        result = qp.solve_safety_qp([-0.5, 0.2], [(np.array([1.0, 1.0]), -3.0)], U)
    assert not result.feasible
    assert U.contains(result.u_star)
    assert "not converged" in caplog.text
