"""Cost admissibility, lattice value estimates, stability of the state map."""

import numpy as np
import pytest

from transport_hjb import (
    AlignmentError,
    BudgetError,
    ControlBounds,
    ControlPath,
    CostRejectedError,
    GridFunction,
    HorizonError,
    LatticeSpec,
    ProblemSpec,
    ValueEvaluator,
    bellman_report,
    boundary_effort_cost,
    build_weak_norm,
    clipped_weak_energy_cost,
    constant_cost,
    discount_step_weights,
    estimate_value,
    lattice_path,
    random_lattice_path,
    trajectory_gronwall_report,
    unclipped_l2_cost,
    validate_cost,
    value_lipschitz_probe,
)

FULL = ControlBounds(0.0, 1.0, -1.0, 1.0)


@pytest.fixture(scope="module")
def clipped(weak_norm):
    return clipped_weak_energy_cost(weak_norm, 4.0)


@pytest.fixture(scope="module")
def bumpy(problem):
    g = problem.grid
    return GridFunction(g, 1.2 * np.sin(np.pi * g.nodes) + 0.4)


# -- cost admissibility audit ---------------------------------------------------


def test_constant_cost_audit_is_clean(weak_norm, rng):
    rep = validate_cost(constant_cost(1.0), weak_norm, rng)
    assert rep.accepted
    assert rep.worst_bound_excess == 0.0
    assert rep.worst_lipschitz_excess == 0.0


def test_clipped_energy_cost_audit_is_clean(clipped, weak_norm, rng):
    rep = validate_cost(clipped, weak_norm, rng)
    assert rep.accepted
    assert rep.worst_bound_excess == 0.0
    assert rep.worst_lipschitz_excess <= 0.0


def test_boundary_effort_cost_is_admissible(weak_norm, rng):
    cost = boundary_effort_cost(weak_norm, 4.0, 0.5, 1.0)
    assert validate_cost(cost, weak_norm, rng).accepted


def test_unbounded_energy_cost_is_rejected(problem, weak_norm, rng):
    cost = unclipped_l2_cost(problem.grid.trapezoid_weights)
    with pytest.raises(CostRejectedError, match="uniform bound"):
        validate_cost(cost, weak_norm, rng)


def test_clip_level_must_be_positive(weak_norm):
    with pytest.raises(ValueError):
        clipped_weak_energy_cost(weak_norm, 0.0)


def test_clipped_cost_evaluates_the_capped_energy(clipped, weak_norm, bumpy):
    energy = weak_norm.norm(bumpy) ** 2
    assert clipped.at(bumpy) == pytest.approx(min(4.0, energy), rel=1e-12)
    big = GridFunction(bumpy.spec, 40.0 * bumpy.values)
    assert clipped.at(big) == 4.0


# -- discounting weights --------------------------------------------------------


def test_discount_weights_integrate_the_exponential(problem):
    rho, dt = 1.0, problem.dt
    w0, w1 = discount_step_weights(rho, dt)
    assert w0 + w1 == pytest.approx((1.0 - np.exp(-rho * dt)) / rho, rel=1e-14)
    assert w0 > w1 > 0.0
    # leading separation term of the exact weights
    assert w0 - w1 == pytest.approx(rho * dt * dt / 6.0, rel=5e-3)


# -- control lattice bookkeeping ------------------------------------------------


def test_lattice_counting():
    lat = LatticeSpec(3, 3, 4)
    assert lat.pairs == 9
    assert lat.sequence_count() == 9**4


def test_lattice_budget_guard():
    LatticeSpec(2, 2, 4).require_budget(300)
    with pytest.raises(BudgetError):
        LatticeSpec(4, 4, 6).require_budget(2_000_000)


def test_lattice_coarsening_halves_segments():
    assert LatticeSpec(2, 2, 4).coarser() == LatticeSpec(2, 2, 2)
    assert LatticeSpec(2, 2, 3).coarser() == LatticeSpec(2, 2, 1)
    assert LatticeSpec(2, 2, 1).coarser() is None


def test_lattice_rejects_degenerate_shapes():
    with pytest.raises(ValueError):
        LatticeSpec(0, 1, 1)
    with pytest.raises(ValueError):
        LatticeSpec(1, 1, 0)


def test_lattice_path_materializes_the_chosen_pairs(problem):
    path = lattice_path(problem, FULL, LatticeSpec(3, 3, 4), 8 * problem.dt, (0, 4, 8, 2))
    assert path.steps == 8
    assert set(path.boundary.tolist()) <= {0.0, 0.5, 1.0}
    assert set(path.distributed[:, 0].tolist()) <= {-1.0, 0.0, 1.0}
    # pair index 4 is the centre of the 3x3 grid
    assert path.boundary[2] == 0.5
    assert path.distributed[2, 0] == 0.0


def test_lattice_path_index_validation(problem):
    lat = LatticeSpec(3, 3, 4)
    with pytest.raises(ValueError):
        lattice_path(problem, FULL, lat, 8 * problem.dt, (0, 1))
    with pytest.raises(ValueError):
        lattice_path(problem, FULL, lat, 8 * problem.dt, (0, 1, 2, 9))


def test_random_lattice_path_stays_on_the_lattice(problem, rng):
    lat = LatticeSpec(3, 3, 4)
    path = random_lattice_path(problem, FULL, lat, 8 * problem.dt, rng)
    assert path.steps == 8
    assert set(path.boundary.tolist()) <= set(FULL.gamma_lattice(3).tolist())
    assert set(path.distributed.ravel().tolist()) <= set(FULL.lambda_lattice(3).tolist())
    path.validate_bounds(FULL)


def test_path_coverage_guard(problem):
    path = ControlPath.constant(problem.grid, 10, 0.0, 0.0)
    path.require_covers(10)
    with pytest.raises(HorizonError):
        path.require_covers(11)


# -- value estimates -------------------------------------------------------------


def test_constant_cost_value_is_the_discount_integral(problem, box):
    est = estimate_value(
        problem, constant_cost(1.0), box, LatticeSpec(2, 1, 2), GridFunction.zero(problem.grid), 3.0
    )
    assert est.value == pytest.approx(1.0 - np.exp(-3.0), abs=1e-12)
    assert est.gap_tail == pytest.approx(np.exp(-3.0), rel=1e-12)
    assert est.gap_lattice == pytest.approx(0.0, abs=1e-14)
    assert est.value - est.gap_total <= 1.0 <= est.value + est.gap_total + 1e-14


def test_argmin_tie_breaks_to_the_smallest_sequence(problem, box):
    # constant cost makes every sequence optimal; lexicographic order wins
    est = estimate_value(
        problem, constant_cost(1.0), box, LatticeSpec(2, 1, 2), GridFunction.zero(problem.grid), 1.0
    )
    assert est.argmin_boundary == (0.0, 0.0)
    assert est.argmin_distributed == (0.0, 0.0)


def test_refining_the_lattice_never_raises_the_value(problem, box, clipped, bumpy):
    coarse = estimate_value(problem, clipped, box, LatticeSpec(2, 1, 2), bumpy, 1.0)
    fine = estimate_value(problem, clipped, box, LatticeSpec(3, 1, 2), bumpy, 1.0)
    assert fine.value <= coarse.value + 1e-15
    lo = max(coarse.value - coarse.gap_total, fine.value - fine.gap_total)
    hi = min(coarse.value + coarse.gap_total, fine.value + fine.gap_total)
    assert lo <= hi


def test_misaligned_horizon_is_rejected(problem, box, clipped, bumpy):
    with pytest.raises(AlignmentError):
        estimate_value(problem, clipped, box, LatticeSpec(2, 1, 3), bumpy, 1.0)


def test_estimate_respects_the_budget(problem, box, clipped, bumpy):
    with pytest.raises(BudgetError):
        estimate_value(problem, clipped, box, LatticeSpec(2, 1, 2), bumpy, 1.0, budget=3)


def test_fast_evaluator_reproduces_the_estimate(problem, box, clipped, bumpy):
    lat = LatticeSpec(2, 1, 2)
    est = estimate_value(problem, clipped, box, lat, bumpy, 1.0)
    ev = ValueEvaluator(problem, clipped, box, lat, 1.0)
    value, _ = ev.value_at(bumpy)
    assert abs(value - est.value) <= 1e-12
    assert ev(bumpy) == value
    assert ev.gap_tail() == est.gap_tail
    assert abs(ev.gap_lattice_at(bumpy) - est.gap_lattice) <= 1e-12


# -- dynamic programming consistency ---------------------------------------------


def test_bellman_split_matches_the_full_enumeration(problem, clipped, bumpy):
    rep = bellman_report(problem, clipped, FULL, LatticeSpec(2, 2, 2), bumpy, 1.0)
    assert rep.residual <= rep.combined_gap
    assert rep.residual <= 1e-10
    assert rep.full_value == pytest.approx(rep.split_value, abs=1e-10)


def test_bellman_residual_vanishes_for_constant_cost(problem, box):
    rep = bellman_report(
        problem, constant_cost(1.0), box, LatticeSpec(2, 1, 2), GridFunction.zero(problem.grid), 1.0
    )
    assert rep.residual <= 1e-12


def test_bellman_needs_a_segment_to_split_off(problem, box, clipped, bumpy):
    with pytest.raises(ValueError):
        bellman_report(problem, clipped, box, LatticeSpec(2, 1, 1), bumpy, 1.0)


# -- weak-norm stability of the state map ----------------------------------------


@pytest.mark.parametrize("mu", [-1.0, 0.0, 1.0])
@pytest.mark.parametrize("horizon", [0.5, 1.0])
def test_shared_controls_contract_in_the_weak_norm(mu, horizon):
    p = ProblemSpec.make(mu=mu)
    g = p.grid
    bf = build_weak_norm(p)
    rng = np.random.default_rng(7)
    path = ControlPath.constant(g, 220, 0.5, 0.0)
    xa = GridFunction(g, rng.normal(size=g.node_count))
    xb = GridFunction(g, rng.normal(size=g.node_count))
    rep = trajectory_gronwall_report(p, bf, xa, xb, path, horizon)
    assert rep.passed
    assert rep.sup_energy <= rep.growth_constant * rep.initial_energy * (1.0 + 1e-12)
    if horizon == 1.0:
        # one crossing time: the difference has left through the outflow end
        assert rep.forgetting_energy == 0.0
        assert rep.forgotten_exactly
    else:
        assert np.isnan(rep.forgetting_energy)
        assert not rep.forgotten_exactly


def test_stability_holds_along_random_lattice_controls(weak_norm, rng):
    p = ProblemSpec.make(mu=1.0)
    bf = build_weak_norm(p)
    lat = LatticeSpec(3, 3, 4)
    for _ in range(5):
        xa = GridFunction(p.grid, rng.normal(size=p.grid.node_count))
        xb = GridFunction(p.grid, rng.normal(size=p.grid.node_count))
        path = random_lattice_path(p, FULL, lat, 1.0, rng)
        rep = trajectory_gronwall_report(p, bf, xa, xb, path, 1.0)
        assert rep.passed
        assert rep.sup_energy <= 0.05 * rep.bound  # far from saturating
        assert rep.forgotten_exactly


def test_value_function_is_weak_norm_lipschitz(problem, box, weak_norm, clipped, rng):
    pairs = []
    for _ in range(3):
        base = rng.normal(size=problem.grid.node_count)
        shift = base + 0.3 * rng.normal(size=problem.grid.node_count)
        pairs.append((GridFunction(problem.grid, base), GridFunction(problem.grid, shift)))
    rows = value_lipschitz_probe(
        problem, clipped, box, LatticeSpec(2, 1, 2), weak_norm, pairs, 1.0, clipped.weak_lipschitz
    )
    assert len(rows) == 3
    for row in rows:
        assert row.passed
        assert row.weak_distance > 0.0
        assert row.lhs <= row.rhs
