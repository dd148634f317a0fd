# -*- coding: utf-8 -*-
"""
スケール不変汎関数モジュール

中心 z と半径 r のシリンダー上で A, C, E, G, D̃, D̃₁, D, D₁ と
判定量 r^{−(3/p+2/q−1)}·‖u‖_{L^{p,q}} を計算し、半径ごとのレポートにまとめる。
境界中心（半空間格子で x3 = 0）は Q⁺、それ以外は Q を使う。
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import integrate

from config import DEFAULT_THREADS
from error_handler import DomainError, RangeError, ResolutionError, UnsupportedOperationError
from exponents import INF, ExponentSet, PQPair, criterion_exponent
from fields import SpaceTimeField, SpaceTimePoint
from mixed_norms import (ClipMode, CylinderRule, ParabolicCylinder, QuadratureConfig, check_admissible, get_rule,
                         infer_clip, lpq_norm, mixed_norm_from_values, slab_means)
from performance_utils import BatchProcessor, monitor

logger = logging.getLogger(__name__)

DEFAULT_QUADRATURE = QuadratureConfig()


def cylinder_at(field_: SpaceTimeField, z: SpaceTimePoint, r: float) -> ParabolicCylinder:
    """中心から切り取りモードを推定したシリンダー"""
    return ParabolicCylinder(z, r, infer_clip(field_.grid, z))


def _rule(field_: SpaceTimeField, z: SpaceTimePoint, r: float, cfg: QuadratureConfig) -> CylinderRule:
    return get_rule(field_.grid, cylinder_at(field_, z, r), cfg)


def _speed_closure(field_: SpaceTimeField) -> Callable:
    if field_.analytic is None:
        raise UnsupportedOperationError(f"{field_.name}: 解析的クロージャがないため解析的求積は使えません")
    u = field_.analytic.u

    def speed(x1, x2, x3, t):
        return np.sqrt(np.sum(np.asarray(u(x1, x2, x3, t)) ** 2, axis=-1))

    return speed


def speed_norm(field_: SpaceTimeField, z: SpaceTimePoint, r: float, pq: PQPair,
               cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """‖u‖_{L^{p,q}}（切り取られたシリンダー上）"""
    integrand = _speed_closure(field_) if cfg.analytic else field_.speed
    return lpq_norm(integrand, field_.grid, cylinder_at(field_, z, r), pq, cfg)


def pressure_oscillation(field_: SpaceTimeField, rule: CylinderRule) -> np.ndarray:
    """セル値 p − (p)_B(s) (S, M)"""
    values = rule.cell_values(field_.p)
    return values - slab_means(values, rule)[:, None]


def functional_A(field_: SpaceTimeField, z: SpaceTimePoint, r: float,
                 cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """A(r) = sup_s (1/r)∫_B |u|²"""
    return speed_norm(field_, z, r, PQPair(2.0, INF), cfg) ** 2 / r


def functional_C(field_: SpaceTimeField, z: SpaceTimePoint, r: float,
                 cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """C(r) = (1/r²)∫_Q |u|³"""
    return speed_norm(field_, z, r, PQPair(3.0, 3.0), cfg) ** 3 / r ** 2


def functional_E(field_: SpaceTimeField, z: SpaceTimePoint, r: float,
                 cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """E(r) = (1/r)∫_Q |∇u|²"""
    rule = _rule(field_, z, r, cfg)
    values = rule.cell_values(field_.grad_u_norm)
    return mixed_norm_from_values(values, rule, PQPair(2.0, 2.0)) ** 2 / r


# 部分正則性の古典的な量 (1/r)∫|∇u|² は E と同じ実装を使う
ckn_quantity = functional_E


def functional_G(field_: SpaceTimeField, z: SpaceTimePoint, r: float, exponents: ExponentSet,
                 cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """G(r) = (1/r)‖u‖_{L^{p,q}}（3/p+2/q = 2）"""
    return speed_norm(field_, z, r, exponents.pq, cfg) / r


def functional_D_tilde(field_: SpaceTimeField, z: SpaceTimePoint, r: float, exponents: ExponentSet,
                       cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """D̃(r) = (1/r)‖p − (p)_B(s)‖_{L^{κ*,λ}}"""
    rule = _rule(field_, z, r, cfg)
    return mixed_norm_from_values(pressure_oscillation(field_, rule), rule,
                                  PQPair(exponents.kappa_star, exponents.lam)) / r


def functional_D1_tilde(field_: SpaceTimeField, z: SpaceTimePoint, r: float, exponents: ExponentSet,
                        cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """D̃₁(r) = (1/r)‖∇p‖_{L^{κ,λ}}"""
    rule = _rule(field_, z, r, cfg)
    values = rule.cell_values(field_.grad_p_norm)
    return mixed_norm_from_values(values, rule, PQPair(exponents.kappa, exponents.lam)) / r


def functional_D(field_: SpaceTimeField, z: SpaceTimePoint, r: float,
                 cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """D(r) = (1/r²)∫_Q |p − (p)_B|^{3/2}"""
    rule = _rule(field_, z, r, cfg)
    osc = np.abs(pressure_oscillation(field_, rule))
    return float(rule.tau @ (osc ** 1.5 @ rule.volume)) / r ** 2


def functional_D1(field_: SpaceTimeField, z: SpaceTimePoint, r: float,
                  cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """D₁(r) = r^{−3/2}∫(∫_B |∇p|^{9/8})^{4/3}ds。κ=9/8, λ=3/2 の D̃₁ の 3/2 乗"""
    rule = _rule(field_, z, r, cfg)
    values = rule.cell_values(field_.grad_p_norm)
    inner = values ** (9.0 / 8.0) @ rule.volume
    return float(rule.tau @ inner ** (4.0 / 3.0)) / r ** 1.5


def functional_C_osc(field_: SpaceTimeField, z: SpaceTimePoint, r: float,
                     cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """(1/r²)∫_Q |u − (u)_B(s)|³"""
    rule = _rule(field_, z, r, cfg)
    squared = 0.0
    for comp in range(3):
        values = rule.cell_values(field_.u[..., comp])
        squared = squared + (values - slab_means(values, rule)[:, None]) ** 2
    return mixed_norm_from_values(np.sqrt(squared), rule, PQPair(3.0, 3.0)) ** 3 / r ** 2


def functional_ckn_single(field_: SpaceTimeField, z: SpaceTimePoint, r: float,
                          cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """単一半径の量 r^{−2}∫_Q (|u|³ + |p|^{3/2})"""
    rule = _rule(field_, z, r, cfg)
    pressure_part = float(rule.tau @ (np.abs(rule.cell_values(field_.p)) ** 1.5 @ rule.volume))
    return functional_C(field_, z, r, cfg) + pressure_part / r ** 2


def criterion_quantity(field_: SpaceTimeField, z: SpaceTimePoint, r: float, pq: PQPair,
                       cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """r^{−(3/p+2/q−1)}·‖u‖_{L^{p,q}}

    Raises:
        DomainError: (p,q) が領域 I, II の外、または除外端点の場合
    """
    power = criterion_exponent(pq)
    return speed_norm(field_, z, r, pq, cfg) / r ** power


def homogeneous_criterion_oracle(amplitude: float, pq: PQPair, r: float) -> float:
    """斉次プロファイル |u| = A·sinθ/ρ の判定量を動径・角度の1次元求積で求める

    ∫_B|u|^p = A^p·2π∫_0^π sin^{p+1}θ dθ·∫_0^r ρ^{2−p} dρ（特異点を中心とする切り取りのない球）。
    3/p+2/q = 2 上では G(r) に等しく r に依らない。

    Raises:
        DomainError: p ≥ 3（球上で可積分でない）、または (p,q) が判定量の定義域の外
    """
    power = criterion_exponent(pq)
    p = pq.p
    if p is INF or p >= 3.0:
        raise DomainError(f"p={p} では |u|^p が特異点の周りで可積分ではありません")
    angular, _ = integrate.quad(lambda th: np.sin(th) ** (p + 1.0), 0.0, math.pi)
    radial, _ = integrate.quad(lambda rho: 1.0, 0.0, r, weight='alg', wvar=(2.0 - p, 0.0))
    spatial = abs(amplitude) * (2.0 * math.pi * angular * radial) ** (1.0 / p)
    duration = 1.0 if pq.q is INF else (r * r) ** (1.0 / pq.q)
    return spatial * duration / r ** power


@dataclass(frozen=True)
class FunctionalReport:
    """1つの (z, r) に対する汎関数の記録"""
    center: SpaceTimePoint
    radius: float
    A: float
    C: float
    E: float
    G: float
    D_tilde: float
    D1_tilde: float
    D: float
    D1: float
    criterion: float
    exponents: ExponentSet
    pq: PQPair
    C_osc: float = 0.0
    ckn_single: float = 0.0
    clip: ClipMode = ClipMode.INTERIOR
    mixed: bool = False
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            'kind': 'functional_report',
            'center': self.center.to_dict(), 'r': self.radius,
            'A': self.A, 'C': self.C, 'E': self.E, 'G': self.G,
            'D_tilde': self.D_tilde, 'D1_tilde': self.D1_tilde, 'D': self.D, 'D1': self.D1,
            'C_osc': self.C_osc, 'ckn_single': self.ckn_single,
            'criterion': self.criterion, 'exponents': self.exponents.to_dict(), 'pq': self.pq.to_dict(),
            'clip': self.clip.value, 'mixed': self.mixed, 'truncated': self.truncated,
        }


def compute_report(field_: SpaceTimeField, z: SpaceTimePoint, r: float, exponents: ExponentSet,
                   pq: Optional[PQPair] = None, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> FunctionalReport:
    """1つの半径ですべての汎関数を計算する"""
    pq = pq or exponents.pq
    rule = _rule(field_, z, r, cfg)
    if rule.touches_boundary:
        logger.info(f"内部中心 {z.x} のシリンダー r={r:g} が境界に接しています（mixed）")
    return FunctionalReport(
        center=z, radius=r,
        A=functional_A(field_, z, r, cfg),
        C=functional_C(field_, z, r, cfg),
        E=functional_E(field_, z, r, cfg),
        G=functional_G(field_, z, r, exponents, cfg),
        D_tilde=functional_D_tilde(field_, z, r, exponents, cfg),
        D1_tilde=functional_D1_tilde(field_, z, r, exponents, cfg),
        D=functional_D(field_, z, r, cfg),
        D1=functional_D1(field_, z, r, cfg),
        criterion=criterion_quantity(field_, z, r, pq, cfg),
        exponents=exponents, pq=pq,
        C_osc=functional_C_osc(field_, z, r, cfg),
        ckn_single=functional_ckn_single(field_, z, r, cfg),
        clip=rule.cylinder.clip, mixed=rule.touches_boundary, truncated=rule.truncated,
    )


def check_radii(field_: SpaceTimeField, z: SpaceTimePoint, radii: Sequence[float],
                cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> List[float]:
    """全半径が適格かを先に検査し、降順に並べて返す

    Raises:
        ResolutionError / RangeError: 不適格な半径があれば、その半径をメッセージに含めて送出
    """
    ordered = sorted((float(r) for r in radii), reverse=True)
    for r in ordered:
        try:
            check_admissible(field_.grid, cylinder_at(field_, z, r), cfg)
        except ResolutionError as e:
            raise ResolutionError(f"半径 r={r:g} は不適格です: {e}", radius=r) from e
        except RangeError as e:
            raise RangeError(f"半径 r={r:g} は不適格です: {e}") from e
    return ordered


@monitor.measure_time("sweep")
def sweep(field_: SpaceTimeField, z: SpaceTimePoint, radii: Sequence[float], exponents: ExponentSet,
          pq: Optional[PQPair] = None, cfg: QuadratureConfig = DEFAULT_QUADRATURE,
          workers: int = DEFAULT_THREADS) -> List[FunctionalReport]:
    """降順の半径列で汎関数を計算する（出力順は半径の降順で決定的）"""
    ordered = check_radii(field_, z, radii, cfg)
    processor = BatchProcessor(workers=workers)
    reports = processor.process_in_batches(ordered, lambda r: compute_report(field_, z, r, exponents, pq, cfg))
    logger.info(f"中心 {z.x}, t={z.t:g}: {len(reports)} 半径の汎関数を計算しました")
    return reports
