# -*- coding: utf-8 -*-
from dataclasses import replace

import numpy as np
import pytest

from error_handler import ConfigurationError, DomainError, PreconditionError
from exponents import LMPair, singular_dimension
from field_generators import generate_divfree_random, generate_zero
from fields import SpaceTimePoint
from singular_set import (EXPANSION_ONE_SIDED, EXPANSION_SHIFTED, Candidate, CoverEstimate, curve_rows,
                          cylinders_disjoint, dimension_curve, expansion_contains, flag_candidates,
                          maximal_disjoint_families, monotone_trend, premeasure, premeasure_range, vitali_cover)

LM = LMPair(4.5, 4.5)


def _candidate(x1: float, t: float, r: float, x2: float = 0.0, x3: float = 0.0) -> Candidate:
    return Candidate(z=SpaceTimePoint((x1, x2, x3), t), r_z=r, witness_value=1.0)


def test_greedy_family_is_disjoint_and_covers() -> None:
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 12))
        candidates = [Candidate(z=SpaceTimePoint(tuple(rng.uniform(-1.0, 1.0, 3)), float(rng.uniform(0.0, 1.0))),
                                r_z=float(rng.uniform(0.05, 0.5)), witness_value=1.0) for _ in range(n)]
        cover = vitali_cover(candidates)
        assert cover.covered and cover.disjoint_verified
        for a in cover.disjoint_family:
            for b in cover.disjoint_family:
                if a is not b:
                    assert cylinders_disjoint(a, b)


def test_single_candidate_selects_itself() -> None:
    only = _candidate(0.0, 0.5, 0.25)
    cover = vitali_cover([only])
    assert cover.disjoint_family == (only,)
    assert cover.covered


def test_expansion_variants() -> None:
    outer = _candidate(0.0, 0.0, 1.0)
    later = _candidate(0.0, 0.5, 0.5)
    assert expansion_contains(outer, later, EXPANSION_SHIFTED)
    assert not expansion_contains(outer, later, EXPANSION_ONE_SIDED)
    assert not expansion_contains(outer, _candidate(5.0, 0.0, 0.5))
    with pytest.raises(ConfigurationError):
        vitali_cover([outer], expansion="two_sided")


def test_collinear_families() -> None:
    candidates = [_candidate(0.0, 0.0, 1.0), _candidate(1.5, 0.0, 1.0), _candidate(3.0, 0.0, 1.0)]
    assert maximal_disjoint_families(candidates) == [[0, 2], [1]]
    d = singular_dimension(LM)
    low, high = premeasure_range(candidates, d)
    assert low == pytest.approx(5.0 ** d)
    assert high == pytest.approx(2.0 * 5.0 ** d)
    assert maximal_disjoint_families([]) == [[]]


def test_brute_force_limit() -> None:
    with pytest.raises(ConfigurationError):
        maximal_disjoint_families([_candidate(3.0 * i, 0.0, 1.0) for i in range(7)])


def test_premeasure_requires_cover() -> None:
    broken = CoverEstimate(candidates=(), disjoint_family=(), covered=False, disjoint_verified=True, uncovered=(0,))
    with pytest.raises(PreconditionError):
        premeasure(broken, 0.5)


def test_isolated_candidates() -> None:
    delta = 0.2
    r = 0.5 * delta
    candidates = [_candidate(float(i), 0.0, r) for i in range(4)]
    cover = premeasure(vitali_cover(candidates), 0.5)
    assert len(cover.disjoint_family) == 4
    assert cover.premeasure == pytest.approx(4 * (5.0 * delta / 2.0) ** 0.5)
    assert cover.premeasure_unexpanded == pytest.approx(4 * r ** 0.5)


def test_zero_field_has_no_candidates(interior_grid, interior_center) -> None:
    estimates = dimension_curve(generate_zero(interior_grid), [interior_center], LM, 0.05, [0.5, 1.0, 0.75])
    assert [e.delta for e in estimates] == [1.0, 0.75, 0.5]
    assert all(not e.candidates and e.premeasure == 0.0 for e in estimates)
    assert monotone_trend(estimates) == "nonincreasing"
    rows = curve_rows(estimates)
    assert rows[0]['dimension'] == 0.5 and rows[0]['family_size'] == 0


def test_region_V_is_required(interior_grid, interior_center) -> None:
    with pytest.raises(DomainError):
        dimension_curve(generate_zero(interior_grid), [interior_center], LMPair(3.0, 3.0), 0.05, [1.0])
    with pytest.raises(DomainError):
        flag_candidates(generate_zero(interior_grid), [interior_center], LMPair(3.0, 3.0), 0.05, 1.0, [0.25])


def test_flag_candidates_collects_errors(interior_grid, interior_center) -> None:
    errors = []
    outside = SpaceTimePoint((5.0, 5.0, 5.0), 0.25)
    found = flag_candidates(generate_zero(interior_grid), [outside], LM, 0.05, 1.0, [0.25], errors=errors)
    assert found == []
    assert errors and errors[0]['error_type'] == "ResolutionError"
    with pytest.raises(ConfigurationError):
        flag_candidates(generate_zero(interior_grid), [interior_center], LM, 0.05, 0.25, [0.25, 0.5])


def test_chain_on_random_field(interior_grid) -> None:
    field_ = generate_divfree_random(interior_grid, seed=9, pressure="zero")
    centers = [SpaceTimePoint((-0.25, 0.0, 0.0), 0.25), SpaceTimePoint((0.25, 0.0, 0.0), 0.25)]
    [estimate] = dimension_curve(field_, centers, LM, 1e-9, [1.0], radii=[0.25], workers=2)
    assert len(estimate.disjoint_family) == 2
    chain = estimate.chain
    assert chain is not None and chain.ratio <= 1.0
    # l = m では和集合上のノルムは各シリンダーの和に等しい
    assert chain.rhs_without_N == pytest.approx(chain.details['per_cylinder_sum'], rel=1e-10)


def test_monotone_trend() -> None:
    def estimate(delta, value):
        return CoverEstimate(candidates=(), disjoint_family=(), covered=True, disjoint_verified=True,
                             delta=delta, premeasure=value)

    assert monotone_trend([estimate(0.2, 3.0), estimate(0.1, 2.0)]) == "decreasing"
    assert monotone_trend([estimate(0.1, 2.0), estimate(0.2, 1.0)]) == "nonmonotone"


def test_greedy_family_is_one_of_the_maximal_families() -> None:
    rng = np.random.default_rng(4)
    d = singular_dimension(LM)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        candidates = [Candidate(z=SpaceTimePoint(tuple(rng.uniform(-1.0, 1.0, 3)), float(rng.uniform(0.0, 1.0))),
                                r_z=float(rng.uniform(0.05, 0.8)), witness_value=1.0) for _ in range(n)]
        cover = premeasure(vitali_cover(candidates), d)
        chosen = sorted(i for i, c in enumerate(candidates) if any(c is s for s in cover.disjoint_family))
        assert chosen in maximal_disjoint_families(candidates)
        low, high = premeasure_range(candidates, d)
        assert low - 1e-12 <= cover.premeasure <= high + 1e-12


def test_premeasure_of_isolated_points_decreases_with_delta() -> None:
    d = singular_dimension(LM)
    points = [(0.0, 0.0), (2.0, 0.5), (-1.5, 3.0)]
    estimates = []
    for delta in (0.8, 0.4, 0.2, 0.1, 0.05):
        candidates = [_candidate(x1, t, 0.5 * delta) for x1, t in points]
        cover = premeasure(vitali_cover(candidates), d)
        assert len(cover.disjoint_family) == len(points)
        assert cover.premeasure == pytest.approx(len(points) * (2.5 * delta) ** d)
        estimates.append(replace(cover, delta=delta))
    assert monotone_trend(estimates) == "decreasing"
