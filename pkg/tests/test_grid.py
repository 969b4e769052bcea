"""Quadrature, norms, difference quotients, and domain proxies."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transport_hjb import (
    AlignmentError,
    DomainError,
    GridFunction,
    GridMismatchError,
    GridSpec,
    dq_energy,
    dq_pairing,
    h1_seminorm,
    in_domain_a,
    in_domain_astar,
    inner_product,
    l2_norm,
    require_domain_a,
    require_domain_astar,
    sup_norm,
)

GRID = GridSpec(101, 1.0)
R = GRID.nodes


def gf(values):
    return GridFunction(GRID, np.asarray(values, dtype=float))


def poly(*coeffs):
    return gf(sum(c * R**k for k, c in enumerate(coeffs)))


# -- construction guards ----------------------------------------------------


def test_grid_rejects_degenerate_shapes():
    with pytest.raises(ValueError):
        GridSpec(2, 1.0)
    with pytest.raises(ValueError):
        GridSpec(11, 0.0)
    with pytest.raises(ValueError):
        GridSpec(11, float("inf"))


def test_grid_function_shape_and_finiteness():
    with pytest.raises(GridMismatchError):
        GridFunction(GRID, np.zeros(7))
    with pytest.raises(ValueError):
        GridFunction(GRID, np.full(GRID.node_count, np.nan))


def test_grid_function_values_frozen():
    f = poly(0.0, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 7.0


def test_mixed_grid_arithmetic_rejected():
    other = GridFunction(GridSpec(51, 1.0), np.zeros(51))
    with pytest.raises(GridMismatchError):
        _ = poly(1.0) + other


def test_trapezoid_weights_sum_to_length():
    assert abs(float(GRID.trapezoid_weights.sum()) - GRID.sbar) < 1e-14


def test_steps_of_snaps_within_tolerance_and_rejects_misalignment():
    dr = GRID.dr
    assert GRID.steps_of(3 * dr * (1.0 + 1e-12)) == 3
    with pytest.raises(AlignmentError):
        GRID.steps_of(1.37 * dr)
    with pytest.raises(AlignmentError):
        GRID.steps_of(-dr)


# -- quadrature exactness ---------------------------------------------------


def test_constant_integrates_exactly():
    assert inner_product(poly(1.0), poly(1.0)) == pytest.approx(1.0, abs=1e-15)


def test_linear_integrates_exactly():
    # trapezoid is exact for piecewise-linear integrands
    assert inner_product(poly(0.0, 1.0), poly(1.0)) == pytest.approx(0.5, abs=1e-14)


def test_quadratic_integrates_to_second_order():
    got = inner_product(poly(0.0, 1.0), poly(0.0, 1.0))
    assert abs(got - 1.0 / 3.0) < 1e-4
    # composite trapezoid error for r^2 is dr^2 / 6 exactly
    assert abs(got - 1.0 / 3.0) == pytest.approx(GRID.dr**2 / 6.0, rel=1e-6)


def test_l2_and_sup_norms():
    f = poly(0.0, 1.0)
    assert sup_norm(f) == 1.0
    assert abs(l2_norm(f) - np.sqrt(inner_product(f, f))) < 1e-15


def test_h1_seminorm_of_linear_is_exact():
    assert h1_seminorm(poly(2.0, -3.0)) == pytest.approx(3.0, abs=1e-13)
    assert h1_seminorm(poly(5.0)) == 0.0


finite_vals = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False)
vectors = st.lists(finite_vals, min_size=GRID.node_count, max_size=GRID.node_count)


@settings(max_examples=40, deadline=None)
@given(vectors, vectors)
def test_inner_product_symmetric(fv, gv):
    f, g = gf(fv), gf(gv)
    # elementwise products commute bitwise, so both orders agree exactly
    assert inner_product(f, g) == inner_product(g, f)


@settings(max_examples=40, deadline=None)
@given(
    vectors,
    vectors,
    vectors,
    st.floats(min_value=-3.0, max_value=3.0, allow_nan=False),
    st.floats(min_value=-3.0, max_value=3.0, allow_nan=False),
)
def test_inner_product_bilinear(fv, gv, hv, a, b):
    f, g, h = gf(fv), gf(gv), gf(hv)
    lhs = inner_product(a * f + b * g, h)
    rhs = a * inner_product(f, h) + b * inner_product(g, h)
    scale = (abs(a) * sup_norm(f) + abs(b) * sup_norm(g)) * sup_norm(h) + 1.0
    assert abs(lhs - rhs) <= 1e-10 * scale


# -- difference-quotient energy ---------------------------------------------


def test_energy_of_linear_matches_closed_form():
    # shifted difference of r is s everywhere, so the integral is s (1 - s)
    f = poly(0.0, 1.0)
    for s in (0.1, 0.05, 0.02):
        assert dq_energy(f, s) == pytest.approx(s * (1.0 - s), abs=1e-12)


def test_energy_nonnegative_and_alignment_guarded():
    f = poly(0.0, 0.0, 1.0)
    assert dq_energy(f, 0.1) >= 0.0
    with pytest.raises(AlignmentError):
        dq_energy(f, 0.1234)
    with pytest.raises(AlignmentError):
        dq_energy(f, 0.0)
    with pytest.raises(AlignmentError):
        dq_energy(f, GRID.sbar)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
        min_size=4,
        max_size=4,
    )
)
def test_energy_decreases_along_shift_halving_for_cubics(coeffs):
    spec = GridSpec(201, 1.0)
    r = spec.nodes
    x = GridFunction(spec, sum(c * r**k for k, c in enumerate(coeffs)))
    vals = [dq_energy(x, k * spec.dr) for k in (16, 8, 4, 2, 1)]
    for prev, nxt in zip(vals, vals[1:]):
        assert nxt <= prev + 1e-6


# -- difference-quotient pairing --------------------------------------------


def test_pairing_of_linear_matches_closed_form():
    # quotient of r is exactly 1, so the pairing integrates r over [s, 1-s]
    f = poly(0.0, 1.0)
    assert dq_pairing(f, 0.05) == pytest.approx(0.45, abs=1e-12)


def test_pairing_approaches_boundary_square_difference():
    # limit is (x(sbar)^2 - x(0)^2) / 2; for x = r the gap is exactly s
    f = poly(0.0, 1.0)
    limit = 0.5
    gaps = [abs(dq_pairing(f, k * GRID.dr) - limit) for k in (8, 4, 2, 1)]
    for prev, nxt in zip(gaps, gaps[1:]):
        assert nxt < prev
    assert gaps[-1] == pytest.approx(GRID.dr, abs=1e-12)


def test_pairing_gap_slope_bounded_under_refinement():
    # the gap/s ratio must stay bounded as the grid refines
    def slope(nodes):
        spec = GridSpec(nodes, 1.0)
        x = GridFunction(spec, np.sin(spec.nodes))
        s = 4 * spec.dr
        limit = 0.5 * (np.sin(1.0) ** 2 - 0.0)
        return abs(dq_pairing(x, s) - limit) / s

    assert slope(401) <= 1.5 * slope(201) + 1e-9


def test_pairing_alignment_guards():
    f = poly(0.0, 1.0)
    with pytest.raises(AlignmentError):
        dq_pairing(f, 0.013)
    with pytest.raises(AlignmentError):
        dq_pairing(f, 0.5)  # needs 2s < sbar along the grid


# -- domain proxies ----------------------------------------------------------


def test_domain_proxies_read_the_endpoints():
    inflow_zero = gf(R * (1.0 - R))
    assert in_domain_a(inflow_zero)
    assert in_domain_astar(inflow_zero)
    assert not in_domain_a(poly(1.0))
    assert not in_domain_astar(poly(1.0))


def test_domain_requirements_raise_with_offender():
    with pytest.raises(DomainError):
        require_domain_astar(poly(1.0))
    with pytest.raises(DomainError):
        require_domain_a(poly(1.0))
    require_domain_a(gf(R))
    require_domain_astar(gf(1.0 - R))


def test_domain_tolerance_scales_with_magnitude():
    vals = 1e6 * (1.0 - R)
    vals[-1] = 1e-4  # tiny endpoint relative to the 1e6 scale
    assert in_domain_astar(gf(vals))
    assert not in_domain_astar(gf(1e-4 + 0.0 * R, ), tol=1e-8)


def test_domain_tol_must_be_positive():
    with pytest.raises(ValueError):
        in_domain_a(poly(0.0), tol=0.0)
