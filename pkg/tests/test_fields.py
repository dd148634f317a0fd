# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from conftest import constant_field
from error_handler import ConfigurationError, RangeError, UnsupportedOperationError
from field_generators import (closure_from_metadata, generate, generate_divfree_random, generate_homogeneous_profile,
                              generate_shear_heat, generate_zero, with_forcing)
from fields import GridSpec, SpaceTimePoint, check_invariants, nse_residual, sample_closure, scale_field


@pytest.mark.parametrize("kwargs", [
    dict(h=0.0),
    dict(dt=-1.0),
    dict(counts=(2, 17, 17)),
    dict(nt=0),
    dict(origin=(-0.5, -0.5, -0.5), half_space=True),
])
def test_grid_validation(kwargs) -> None:
    params = dict(origin=(-0.5, -0.5, 0.0), h=0.0625, counts=(17, 17, 9), t0=0.0, dt=0.015625, nt=17)
    params.update(kwargs)
    with pytest.raises(ConfigurationError):
        GridSpec(**params)


def test_grid_geometry(half_grid) -> None:
    assert half_grid.shape == (17, 17, 17, 9)
    assert half_grid.t_end == pytest.approx(0.25)
    assert half_grid.upper == pytest.approx((0.5, 0.5, 0.5))
    assert half_grid.nearest_node(SpaceTimePoint((0.0, 0.0, 0.25), 0.125)) == (8, 8, 8, 4)
    assert half_grid.is_node((0.0, 0.0, 0.0))
    assert not half_grid.is_node((0.03125, 0.0, 0.0))
    assert GridSpec.from_dict(half_grid.to_dict()) == half_grid


def test_point_rejects_nonfinite() -> None:
    with pytest.raises(ConfigurationError):
        SpaceTimePoint((0.0, math.nan, 0.0), 0.0)


def test_samples_are_read_only(interior_grid) -> None:
    field_ = constant_field(interior_grid)
    with pytest.raises(ValueError):
        field_.u[0, 0, 0, 0, 0] = 2.0


def test_shape_mismatch_is_rejected(interior_grid) -> None:
    field_ = constant_field(interior_grid)
    with pytest.raises(ConfigurationError):
        field_.with_samples(p=np.zeros((3, 3)))


def test_shear_invariants(half_grid) -> None:
    shear = generate_shear_heat(half_grid)
    measured = check_invariants(shear)
    assert measured['divergence'] <= 1e-10
    assert measured['boundary_trace'] <= 1e-12


def test_shear_residual_is_second_order(half_grid) -> None:
    shear = generate_shear_heat(half_grid)
    residual = nse_residual(shear, SpaceTimePoint((0.0, 0.0, 0.25), 0.125))
    bound = shear.metadata['residual_constant'] * (half_grid.h ** 2 + half_grid.dt ** 2)
    assert np.max(np.abs(residual)) <= 2.0 * bound


def test_residual_stencil_near_face(half_grid) -> None:
    shear = generate_shear_heat(half_grid)
    with pytest.raises(RangeError):
        nse_residual(shear, SpaceTimePoint((0.0, 0.0, 0.0625), 0.125))
    with pytest.raises(RangeError):
        nse_residual(shear, SpaceTimePoint((0.0, 0.0, 0.25), 0.0))


def test_generators_check_grid_kind(half_grid, interior_grid) -> None:
    with pytest.raises(ConfigurationError):
        generate_shear_heat(interior_grid)
    with pytest.raises(ConfigurationError):
        generate_homogeneous_profile(half_grid)
    with pytest.raises(ConfigurationError):
        generate_homogeneous_profile(interior_grid, singular_point=(0.0, 0.0, 0.0))
    with pytest.raises(ConfigurationError):
        generate('nope', interior_grid)


def test_zero_field(half_grid) -> None:
    zero = generate_zero(half_grid)
    assert not np.any(zero.u) and not np.any(zero.p) and not np.any(zero.f)


def test_homogeneous_profile_is_divergence_free_away_from_singularity(interior_grid) -> None:
    profile = generate_homogeneous_profile(interior_grid)
    point = tuple(profile.metadata['params']['singular_point'])
    assert not interior_grid.is_node(point)
    assert check_invariants(profile)['divergence'] <= profile.div_tol


def test_random_field_is_deterministic(interior_grid) -> None:
    a = generate_divfree_random(interior_grid, seed=3, pressure="zero")
    b = generate_divfree_random(interior_grid, seed=3, pressure="zero")
    c = generate_divfree_random(interior_grid, seed=4, pressure="zero")
    assert np.array_equal(a.u, b.u)
    assert not np.array_equal(a.u, c.u)


def test_random_field_vanishes_on_boundary(half_grid) -> None:
    field_ = generate_divfree_random(half_grid, seed=5, pressure="zero")
    measured = check_invariants(field_)
    assert measured['boundary_trace'] <= 1e-12
    assert measured['divergence'] <= field_.div_tol


def test_random_generator_arguments(interior_grid) -> None:
    with pytest.raises(ConfigurationError):
        generate_divfree_random(interior_grid, seed=1, modes=0)
    with pytest.raises(ConfigurationError):
        generate_divfree_random(interior_grid, seed=1, pressure="neumann")


def test_forcing(half_grid) -> None:
    shear = generate_shear_heat(half_grid)
    forced = with_forcing(shear, "constant", amplitude=2.0)
    assert np.all(forced.f[..., 0] == 2.0)
    assert forced.metadata['forcing']['kind'] == "constant"
    assert not shear.metadata.get('forcing')

    bump = with_forcing(shear, "gaussian", amplitude=1.0, width=0.1, center=(0.0, 0.0, 0.25))
    n, i, j, k = half_grid.nearest_node(SpaceTimePoint((0.0, 0.0, 0.25), 0.0))
    assert bump.f[n, i, j, k, 0] == pytest.approx(1.0)

    with pytest.raises(ConfigurationError):
        with_forcing(shear, "gaussian", width=0.0)
    with pytest.raises(ConfigurationError):
        with_forcing(shear, "linear")


def test_closure_from_metadata_matches_samples(half_grid) -> None:
    forced = with_forcing(generate_shear_heat(half_grid, amplitude=0.5), "constant", amplitude=1.5)
    closures = closure_from_metadata(half_grid, forced.metadata)
    assert np.allclose(sample_closure(closures.u, half_grid, vector=True), forced.u, rtol=0, atol=1e-14)
    assert np.allclose(sample_closure(closures.f, half_grid, vector=True), forced.f, rtol=0, atol=1e-14)
    assert closure_from_metadata(half_grid, {'generator': 'unknown'}) is None


def test_scale_field(half_grid) -> None:
    shear = generate_shear_heat(half_grid)
    scaled = scale_field(shear, 2.0)
    assert scaled.grid.h == half_grid.h / 2.0
    assert scaled.grid.dt == half_grid.dt / 4.0
    # 2 のべきのスケールでは標本点が元の格子点と一致する
    assert np.allclose(scaled.u, 2.0 * shear.u, rtol=1e-14, atol=1e-14)
    assert scaled.metadata['scale'] == 2.0


def test_scale_field_needs_closure(interior_grid) -> None:
    with pytest.raises(UnsupportedOperationError):
        scale_field(constant_field(interior_grid), 2.0)
    with pytest.raises(ConfigurationError):
        scale_field(generate_zero(interior_grid), 0.0)
