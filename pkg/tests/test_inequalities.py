# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from conftest import constant_field
from error_handler import ConfigurationError, DomainError, PreconditionError
from exponents import LMPair, PQPair, exponent_set_from_lambda
from field_generators import generate_divfree_random, generate_shear_heat, generate_zero
from fields import GridSpec, SpaceTimePoint
from functionals import DEFAULT_QUADRATURE
from inequalities import (Cutoff, basiclemma_identities, check_basiclemma, check_energy_consequence,
                          check_energy_inequality, check_interior_l3, check_l24_interpolation,
                          check_L4_interpolation, check_nonlinear_term, check_pressure_bound,
                          check_sec4_interpolation, default_cutoff, energy_balance, make_ratio, weighted_product)
from mixed_norms import ParabolicCylinder, get_rule

EXPONENTS = exponent_set_from_lambda(1.5)


def test_make_ratio_conventions() -> None:
    record = make_ratio("x", 0.5, 0.0, 0.0)
    assert record.ratio == 0.0 and record.zero_over_zero and not record.infinite

    record = make_ratio("x", 0.5, 1.0, 0.0)
    assert record.infinite and math.isinf(record.ratio)
    assert record.to_dict()['ratio'] == "inf"

    assert make_ratio("x", 0.5, 1.0, 2.0).ratio == 0.5
    for lhs, rhs in ((-1.0, 1.0), (1.0, math.nan), (math.inf, 1.0)):
        with pytest.raises(DomainError):
            make_ratio("x", 0.5, lhs, rhs)


def test_weighted_product() -> None:
    assert weighted_product((0.0, 2.0), (-0.5, 1.0)) == 0.0
    assert weighted_product((4.0, 9.0), (0.5, 0.5)) == pytest.approx(6.0)


def test_basiclemma_identities() -> None:
    identities = basiclemma_identities(EXPONENTS)
    assert identities['alpha'] == pytest.approx(1.0 / 3.0)
    assert identities['beta'] == pytest.approx(2.0 / 9.0)
    assert identities['delta'] == pytest.approx(4.0 / 9.0)


def test_interior_l3_on_constant_field(interior_grid, interior_center) -> None:
    r = 0.25
    field_ = constant_field(interior_grid)
    record = check_interior_l3(field_, interior_center, r, EXPONENTS)
    rule = get_rule(interior_grid, ParabolicCylinder(interior_center, r), DEFAULT_QUADRATURE)
    V, T = rule.total_volume, rule.total_time
    p, q = EXPONENTS.p, EXPONENTS.q
    expected = V ** (0.5 - 2.0 / p) * T ** (1.0 - 2.0 / q) * r ** 0.5
    assert record.details['E'] == 0.0
    assert record.ratio == pytest.approx(expected, rel=1e-9)


def test_boundary_check_on_constant_field_is_infinite(half_grid, boundary_center) -> None:
    # 勾配がないので右辺は 0
    record = check_basiclemma(constant_field(half_grid), boundary_center, 0.25, EXPONENTS)
    assert record.infinite


def test_basiclemma_on_shear(half_grid, boundary_center) -> None:
    record = check_basiclemma(generate_shear_heat(half_grid), boundary_center, 0.25, EXPONENTS)
    assert 0.0 < record.ratio < math.inf
    assert record.details['identities']['alpha'] == pytest.approx(1.0 / 3.0)


def test_center_kind_preconditions(half_grid, interior_grid, boundary_center, interior_center) -> None:
    with pytest.raises(PreconditionError):
        check_basiclemma(generate_zero(interior_grid), interior_center, 0.25, EXPONENTS)
    with pytest.raises(PreconditionError):
        check_interior_l3(generate_zero(half_grid), boundary_center, 0.25, EXPONENTS)


def test_interpolation_on_unit_constant(interior_grid, interior_center) -> None:
    field_ = constant_field(interior_grid)
    r = 0.25
    assert check_L4_interpolation(field_, interior_center, r, PQPair(6.0, 4.0)).ratio == pytest.approx(1.0, rel=1e-12)
    sec4 = check_sec4_interpolation(field_, interior_center, r, LMPair(4.5, 4.5))
    assert sec4.ratio == pytest.approx(1.0, rel=1e-12)
    assert sec4.details['case'] == "l<=m"
    l_greater = check_sec4_interpolation(field_, interior_center, r, LMPair(5.0, 4.2))
    assert l_greater.details['k'] == pytest.approx(4.52)
    assert l_greater.details['lk_displayed_ratio'] == pytest.approx(1.0, rel=1e-12)
    assert l_greater.details['lk_holder_ratio'] == pytest.approx(1.0, rel=1e-12)
    assert check_l24_interpolation(field_, interior_center, r).ratio == pytest.approx(1.0, rel=1e-12)


def test_interpolation_domain_errors(interior_grid, interior_center) -> None:
    field_ = constant_field(interior_grid)
    with pytest.raises(DomainError):
        check_sec4_interpolation(field_, interior_center, 0.25, LMPair(3.0, 3.0))
    with pytest.raises(DomainError):
        check_L4_interpolation(field_, interior_center, 0.25, PQPair(2.25, 3.0))


def test_l24_holds_for_random_field(interior_grid, interior_center) -> None:
    field_ = generate_divfree_random(interior_grid, seed=4, pressure="zero")
    for r in (0.25, 0.375, 0.5):
        assert check_l24_interpolation(field_, interior_center, r).ratio <= 1.0 + 1e-12


def test_nonlinear_term_vanishes_for_shear(half_grid, boundary_center) -> None:
    record = check_nonlinear_term(generate_shear_heat(half_grid), boundary_center, 0.25, EXPONENTS)
    assert record.lhs == 0.0
    assert record.name == "nonlinear_boundary"


def test_nonlinear_interior_mode_adds_term(interior_grid, interior_center) -> None:
    field_ = generate_divfree_random(interior_grid, seed=4, pressure="zero")
    boundary = check_nonlinear_term(field_, interior_center, 0.25, EXPONENTS, mode="boundary")
    interior = check_nonlinear_term(field_, interior_center, 0.25, EXPONENTS, mode="interior")
    assert interior.details['interior_term'] > 0.0
    assert interior.rhs_without_N == pytest.approx(boundary.rhs_without_N + interior.details['interior_term'])
    with pytest.raises(ValueError):
        check_nonlinear_term(field_, interior_center, 0.25, EXPONENTS, mode="sideways")


def test_energy_consequence_on_zero_field(interior_grid, interior_center) -> None:
    record = check_energy_consequence(generate_zero(interior_grid), interior_center, 0.5, 1.0, 0.0, EXPONENTS)
    assert record.zero_over_zero


def test_energy_on_zero_field(half_grid, boundary_center) -> None:
    record = check_energy_inequality(generate_zero(half_grid), boundary_center, 0.5)
    assert record.zero_over_zero
    assert record.details['residual'] == 0.0


def _energy_grid(h: float, dt: float) -> GridSpec:
    return GridSpec(origin=(-0.5, -0.5, 0.0), h=h, counts=(int(round(1.0 / h)) + 1, int(round(1.0 / h)) + 1,
                                                           int(round(0.5 / h)) + 1),
                    t0=0.0, dt=dt, nt=int(round(0.25 / dt)) + 1, half_space=True)


def test_energy_residual_converges_for_exact_solution(boundary_center) -> None:
    coarse = check_energy_inequality(generate_shear_heat(_energy_grid(1.0 / 16.0, 1.0 / 64.0)), boundary_center, 0.5)
    fine = check_energy_inequality(generate_shear_heat(_energy_grid(1.0 / 32.0, 1.0 / 128.0)), boundary_center, 0.5)
    res_coarse = abs(coarse.details['residual'])
    res_fine = abs(fine.details['residual'])
    assert res_coarse <= 0.05 * (coarse.lhs + abs(coarse.details['rhs_signed']))
    assert res_fine < res_coarse / 2.0


def test_energy_negative_control(boundary_center) -> None:
    grid = _energy_grid(1.0 / 16.0, 1.0 / 64.0)
    shear = generate_shear_heat(grid)
    exact = check_energy_inequality(shear, boundary_center, 0.5)
    growth = np.exp(20.0 * grid.times())[:, None, None, None, None]
    grown = shear.with_samples(u=shear.u * growth, analytic=None, name="grown")
    control = check_energy_inequality(grown, boundary_center, 0.5)
    assert control.details['residual'] < 0.0
    assert abs(control.details['residual']) >= 10.0 * abs(exact.details['residual'])


def test_cutoff_validation(half_grid, boundary_center) -> None:
    with pytest.raises(ConfigurationError):
        Cutoff(center=(0.0, 0.0, 0.0), radius=0.0, t_start=0.0, t_ramp_end=0.1)
    with pytest.raises(ConfigurationError):
        Cutoff(center=(0.0, 0.0, 0.0), radius=0.25, t_start=0.1, t_ramp_end=0.1)
    shear = generate_shear_heat(half_grid)
    # 台が x1 = 1/2 の面を越える
    with pytest.raises(ConfigurationError):
        energy_balance(shear, 0.25, Cutoff(center=(0.4, 0.0, 0.0), radius=0.25, t_start=0.1, t_ramp_end=0.2))
    # 初期時刻より前から立ち上がる
    with pytest.raises(ConfigurationError):
        check_energy_inequality(shear, SpaceTimePoint((0.0, 0.0, 0.0), 0.125), 0.5)
    with pytest.raises(ConfigurationError):
        energy_balance(shear, 0.1, default_cutoff(boundary_center, 0.25))


def test_default_cutoff(boundary_center) -> None:
    cutoff = default_cutoff(boundary_center, 0.5)
    assert cutoff.t_start == pytest.approx(0.0)
    assert cutoff.t_ramp_end == pytest.approx(0.1875)
    assert cutoff.temporal(0.0) == (0.0, 0.0)
    assert cutoff.temporal(0.25)[0] == pytest.approx(1.0)


def test_pressure_bound_requires_small_radius(interior_grid, interior_center) -> None:
    with pytest.raises(PreconditionError):
        check_pressure_bound(generate_zero(interior_grid), interior_center, 0.25, 0.5, EXPONENTS)


def test_pressure_bound_interior_mode() -> None:
    grid = GridSpec(origin=(-0.5, -0.5, -0.5), h=1.0 / 32.0, counts=(33, 33, 33), t0=0.0, dt=1.0 / 16.0, nt=5)
    field_ = generate_divfree_random(grid, seed=1)
    z = SpaceTimePoint((0.0, 0.0, 0.0), 0.25)
    record = check_pressure_bound(field_, z, 0.125, 0.5, EXPONENTS, mode="interior")
    assert record.name == "pressure_bound_interior"
    assert 0.0 <= record.ratio < math.inf
    assert record.details['interior_term'] > 0.0
