# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from error_handler import DomainError
from exponents import (INF, LMPair, PQPair, RegionTag, Sec4Case, classify_region, criterion_exponent,
                       exponent_set_from_lambda, exponent_set_from_pq, in_region_V, interp_L4_exponents,
                       interp_sec4_exponents, l4_weights_sec4, parse_exponent, sec4_case, singular_dimension)


def test_lambda_three_halves_anchor() -> None:
    e = exponent_set_from_lambda(1.5)
    assert e.kappa == pytest.approx(9.0 / 8.0, abs=1e-12)
    assert e.kappa_star == pytest.approx(9.0 / 5.0, abs=1e-12)
    assert e.p == pytest.approx(9.0 / 4.0, abs=1e-12)
    assert e.q == pytest.approx(3.0, abs=1e-12)


def test_relations_hold_for_sampled_lambda() -> None:
    rng = np.random.default_rng(11)
    for lam in rng.uniform(1.0, 2.0, 200):
        if not (1.0 < lam < 2.0):
            continue
        e = exponent_set_from_lambda(lam)
        e.check()
        assert 3.0 / e.p + 2.0 / e.q == pytest.approx(2.0, abs=1e-12)
        assert e.pq.scaling_sum == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("lam", [1.0, 2.0, 0.5, 2.5])
def test_lambda_outside_open_interval_is_rejected(lam) -> None:
    with pytest.raises(DomainError):
        exponent_set_from_lambda(lam)


def test_exponent_set_from_pq_recovers_lambda() -> None:
    assert exponent_set_from_pq(PQPair(2.25, 3.0)).lam == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(DomainError):
        exponent_set_from_pq(PQPair(3.0, 3.0))


def test_kappa_prime_satisfies_scaling_relation() -> None:
    e = exponent_set_from_lambda(1.5)
    assert 3.0 / e.kappa_prime + 2.0 / e.lam == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(DomainError):
        e.kappa_tilde


@pytest.mark.parametrize("p, q, expected", [
    (2.25, 3.0, RegionTag.II),
    (3.0, 3.0, RegionTag.II),
    (2.0, 4.0, RegionTag.II),
    (6.0, 4.0, RegionTag.II),  # 3/p+2/q = 1 の境界は II
    (4.0, INF, RegionTag.I),
    (1.5, INF, RegionTag.EXCLUDED_ENDPOINT),
    (3.0, 2.0, RegionTag.EXCLUDED_ENDPOINT),
    (1.2, 2.0, RegionTag.OUTSIDE),
    (6.0, 1.5, RegionTag.OUTSIDE),
])
def test_classify_region(p, q, expected) -> None:
    assert classify_region(PQPair(p, q)) is expected


def test_criterion_exponent() -> None:
    assert criterion_exponent(PQPair(2.25, 3.0)) == pytest.approx(1.0)
    assert criterion_exponent(PQPair(2.0, 4.0)) == pytest.approx(1.0)
    assert criterion_exponent(PQPair(6.0, 4.0)) == pytest.approx(0.0, abs=1e-12)
    for pq in (PQPair(1.5, INF), PQPair(1.2, 2.0)):
        with pytest.raises(DomainError):
            criterion_exponent(pq)


def test_exponent_below_one_is_rejected() -> None:
    with pytest.raises(DomainError):
        PQPair(0.5, 3.0)


def test_parse_exponent() -> None:
    assert parse_exponent("inf") is INF
    assert parse_exponent("∞") is INF
    assert parse_exponent(math.inf) is INF
    assert parse_exponent("9/4") == 2.25
    assert PQPair.of("2", "inf").q is INF


def test_region_V_and_dimension() -> None:
    lm = LMPair(4.5, 4.5)
    assert in_region_V(lm)
    assert singular_dimension(lm) == 0.5
    l_greater = LMPair(5.0, 4.2)
    assert in_region_V(l_greater)
    assert singular_dimension(l_greater) == pytest.approx(3.0 - 4.2 + 2.0 * 4.2 / 5.0)
    with pytest.raises(DomainError):
        singular_dimension(LMPair(3.0, 3.0))


def test_sec4_weights_at_equal_exponents() -> None:
    w = l4_weights_sec4(LMPair(4.5, 4.5))
    assert w.alpha == pytest.approx(10.0 / 3.0, rel=1e-12)
    assert w.beta == pytest.approx(10.0 / 3.0, rel=1e-12)
    assert w.sigma == pytest.approx(-6.75 / 14.0, rel=1e-12)
    assert w.weight_2inf == pytest.approx(0.592857, rel=1e-5)
    assert w.weight_62 == pytest.approx(0.889286, rel=1e-5)
    assert w.weight_lm + w.weight_2inf + w.weight_62 == pytest.approx(1.0, abs=1e-12)
    assert not w.degenerate


def test_sec4_cases() -> None:
    assert sec4_case(LMPair(4.5, 4.5)) is Sec4Case.L_AT_MOST
    assert sec4_case(LMPair(5.0, 4.2)) is Sec4Case.L_GREATER
    assert sec4_case(LMPair(3.0, 3.0)) is None

    exps = interp_sec4_exponents(LMPair(5.0, 4.2))
    assert exps.k == pytest.approx(4.52, abs=1e-12)
    assert 4.0 < exps.k < 5.0
    assert exps.sigma_k == pytest.approx(4.2 / 4.52, rel=1e-12)
    assert interp_sec4_exponents(LMPair(4.5, 4.5)).k is None
    with pytest.raises(DomainError):
        interp_sec4_exponents(LMPair(3.0, 3.0))


def test_l4_interpolation_weights() -> None:
    w = interp_L4_exponents(PQPair(6.0, 4.0))
    assert w.as_tuple() == pytest.approx((0.5, 0.25, 0.25))
    assert sum(w.as_tuple()) == pytest.approx(1.0)
    assert not w.endpoint
    assert interp_L4_exponents(PQPair(3.0, INF)).endpoint
    with pytest.raises(DomainError):
        interp_L4_exponents(PQPair(2.25, 3.0))
