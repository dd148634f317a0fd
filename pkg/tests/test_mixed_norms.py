# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from error_handler import ConfigurationError, DomainError, RangeError, ResolutionError
from exponents import INF, PQPair
from fields import SpaceTimePoint, sample_closure
from mixed_norms import (ClipMode, ParabolicCylinder, QuadratureConfig, dense_oracle_lpq, dyadic_radii, get_rule,
                         infer_clip, is_admissible, lpq_norm, morrey_norm, parabolic_distance, spatial_mean)

CFG = QuadratureConfig()


def test_quadrature_config_validation() -> None:
    for kwargs in (dict(subsample=0), dict(subsample=9), dict(min_cells=3), dict(time_subsample=0)):
        with pytest.raises(ConfigurationError):
            QuadratureConfig(**kwargs)
    with pytest.raises(ConfigurationError):
        ParabolicCylinder(SpaceTimePoint((0.0, 0.0, 0.0), 0.25), 0.0)


def test_infer_clip(half_grid, interior_grid, boundary_center) -> None:
    assert infer_clip(half_grid, boundary_center) is ClipMode.HALF
    assert infer_clip(half_grid, SpaceTimePoint((0.0, 0.0, 0.25), 0.25)) is ClipMode.INTERIOR
    assert infer_clip(interior_grid, boundary_center) is ClipMode.INTERIOR


def test_constant_norm_matches_measure(interior_grid, interior_center) -> None:
    r = 0.25
    cyl = ParabolicCylinder(interior_center, r)
    rule = get_rule(interior_grid, cyl, CFG)
    V, T = rule.total_volume, rule.total_time
    assert V == pytest.approx(4.0 / 3.0 * math.pi * r ** 3, rel=0.03)
    assert T == pytest.approx(r ** 2, rel=1e-12)
    assert not rule.truncated

    ones = np.full(interior_grid.shape, 2.0)
    for pq in (PQPair(2.0, INF), PQPair(3.0, 3.0), PQPair(2.25, 3.0), PQPair(INF, 2.0)):
        expected = 2.0 * (V ** pq.inv_p) * (T ** pq.inv_q)
        assert lpq_norm(ones, interior_grid, cyl, pq) == pytest.approx(expected, rel=1e-12)


def test_half_ball_volume(half_grid, boundary_center) -> None:
    r = 0.25
    rule = get_rule(half_grid, ParabolicCylinder(boundary_center, r, ClipMode.HALF), CFG)
    assert rule.total_volume == pytest.approx(2.0 / 3.0 * math.pi * r ** 3, rel=0.03)
    assert not rule.truncated


def test_rule_is_cached(interior_grid, interior_center) -> None:
    cyl = ParabolicCylinder(interior_center, 0.375)
    assert get_rule(interior_grid, cyl, CFG) is get_rule(interior_grid, cyl, CFG)


def test_resolution_and_range(interior_grid, interior_center) -> None:
    with pytest.raises(ResolutionError) as info:
        get_rule(interior_grid, ParabolicCylinder(interior_center, 0.2), CFG)
    assert info.value.radius == pytest.approx(0.2)
    with pytest.raises(RangeError):
        get_rule(interior_grid, ParabolicCylinder(SpaceTimePoint((5.0, 5.0, 5.0), 0.25), 0.25), CFG)
    with pytest.raises(RangeError):
        get_rule(interior_grid, ParabolicCylinder(SpaceTimePoint((0.0, 0.0, 0.0), 3.0), 0.25), CFG)
    assert not is_admissible(interior_grid, ParabolicCylinder(interior_center, 0.125), CFG)
    assert is_admissible(interior_grid, ParabolicCylinder(interior_center, 0.25), CFG)


def test_truncated_cylinder_is_flagged(interior_grid) -> None:
    rule = get_rule(interior_grid, ParabolicCylinder(SpaceTimePoint((0.25, 0.0, 0.0), 0.25), 0.5), CFG)
    assert rule.truncated


def test_cell_average_matches_dense_oracle(interior_grid, interior_center) -> None:
    def g(x1, x2, x3, t):
        return 1.0 + x1 ** 2 + 0.5 * x2 * x3 + t

    nodes = sample_closure(g, interior_grid, vector=False)
    cyl = ParabolicCylinder(interior_center, 0.25)
    for pq in (PQPair(2.0, 3.0), PQPair(2.25, 3.0), PQPair(2.0, INF)):
        oracle = dense_oracle_lpq(g, interior_grid, cyl, pq)
        assert lpq_norm(nodes, interior_grid, cyl, pq) == pytest.approx(oracle, rel=0.02)


def test_spatial_mean(interior_grid, interior_center) -> None:
    cyl = ParabolicCylinder(interior_center, 0.25)
    values = np.full(interior_grid.shape, 3.0)
    assert spatial_mean(values, interior_grid, cyl, 0) == pytest.approx(3.0, rel=1e-12)
    with pytest.raises(RangeError):
        spatial_mean(values, interior_grid, cyl, 100)


def test_morrey_norm_of_constant(interior_grid, interior_center) -> None:
    f_norm = np.full(interior_grid.shape, 0.5)
    estimate = morrey_norm(f_norm, interior_grid, 2.0, [interior_center], [0.25, 0.375])
    assert estimate.value == pytest.approx(0.5, rel=1e-12)
    assert estimate.n_samples == 2

    # γ < 2 では r^{2−γ} により最大の半径が選ばれる
    estimate = morrey_norm(f_norm, interior_grid, 1.0, [interior_center], [0.25, 0.375])
    assert estimate.argmax_radius == 0.375
    assert estimate.value == pytest.approx(0.375 * 0.5, rel=1e-12)


@pytest.mark.parametrize("gamma", [0.0, -1.0, 2.5])
def test_morrey_gamma_range(interior_grid, interior_center, gamma) -> None:
    with pytest.raises(DomainError):
        morrey_norm(np.zeros(interior_grid.shape), interior_grid, gamma, [interior_center], [0.25])


def test_parabolic_distance() -> None:
    z = SpaceTimePoint((0.0, 0.0, 0.0), 0.0)
    assert parabolic_distance(z, SpaceTimePoint((3.0, 4.0, 0.0), 4.0)) == pytest.approx(7.0)
    assert parabolic_distance(z, z) == 0.0


def test_dyadic_radii() -> None:
    assert dyadic_radii(1.0, 3) == [1.0, 0.5, 0.25]
