# -*- coding: utf-8 -*-
"""
正則性判定モジュール

汎関数の半径掃引を ε しきい値の判定に変換する。r → 0 の limsup / liminf は
適格な最小 K 個の半径での max / min で近似し、K と半径の下限を判定に記録する。
"""
import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

from config import DEFAULT_K, DEFAULT_THREADS, HYSTERESIS_BAND
from error_handler import AnalysisError, DomainError, ResolutionError
from exponents import ExponentSet, PQPair, criterion_exponent
from fields import SpaceTimeField, SpaceTimePoint
from functionals import (DEFAULT_QUADRATURE, check_radii, criterion_quantity, cylinder_at, functional_C,
                         functional_ckn_single, functional_D1_tilde, functional_D_tilde,
                         functional_E)
from inequalities import RatioRecord, make_ratio
from mixed_norms import QuadratureConfig, is_admissible
from performance_utils import BatchProcessor, monitor

logger = logging.getLogger(__name__)


class VerdictStatus(enum.Enum):
    REGULAR_BY_TH1 = "regular_by_TH1"
    REGULAR_BY_MOD_LEMMA = "regular_by_mod_lemma"
    REGULAR_BY_CKN = "regular_by_CKN"
    FLAGGED_CANDIDATE = "flagged_candidate"
    INCONCLUSIVE = "inconclusive"

    @property
    def is_regular(self) -> bool:
        return self in (VerdictStatus.REGULAR_BY_TH1, VerdictStatus.REGULAR_BY_MOD_LEMMA,
                        VerdictStatus.REGULAR_BY_CKN)


@dataclass(frozen=True)
class Verdict:
    """1つの中心に対する判定

    evidence は (r, 量, しきい値) の列。decisive は判定に使った max または min。
    """
    status: VerdictStatus
    criterion: str
    center: SpaceTimePoint
    evidence: Tuple[Tuple[float, float, float], ...]
    epsilon_used: float
    radii_used: Tuple[float, ...]
    decisive: float
    k: int
    epsilon0: Optional[float] = None

    @property
    def radius_floor(self) -> float:
        return min(self.radii_used)

    def to_dict(self) -> dict:
        return {
            'kind': 'verdict', 'status': self.status.value, 'criterion': self.criterion,
            'center': self.center.to_dict(), 'evidence': [list(e) for e in self.evidence],
            'epsilon_used': self.epsilon_used, 'epsilon0': self.epsilon0,
            'radii_used': list(self.radii_used), 'radius_floor': self.radius_floor,
            'decisive': self.decisive, 'k': self.k,
        }


def smallest_admissible(field_: SpaceTimeField, z: SpaceTimePoint, radii: Sequence[float], k: int,
                        cfg: QuadratureConfig) -> List[float]:
    """適格な半径のうち小さい方から K 個（降順で返す）

    Raises:
        ResolutionError: 適格な半径が K 個未満の場合
    """
    if k < 1:
        raise DomainError(f"K={k} は1以上でなければなりません")
    admissible = sorted((float(r) for r in radii if is_admissible(field_.grid, cylinder_at(field_, z, r), cfg)),
                        reverse=True)
    if len(admissible) < k:
        floor = min(radii) if radii else float('nan')
        raise ResolutionError(f"中心 {z.x}: 適格な半径が {len(admissible)} 個しかありません（K={k} 個必要）",
                              radius=floor)
    return admissible[-k:]


def _evaluate(field_: SpaceTimeField, z: SpaceTimePoint, radii: Sequence[float], k: int,
              quantity: Callable[[float], float], cfg: QuadratureConfig, workers: int):
    used = smallest_admissible(field_, z, radii, k, cfg)
    values = BatchProcessor(workers=workers).process_in_batches(used, quantity)
    return used, [float(v) for v in values]


@monitor.measure_time("evaluate_TH1")
def evaluate_TH1(field_: SpaceTimeField, z: SpaceTimePoint, pq: PQPair, radii: Sequence[float],
                 epsilon: float, k: int = DEFAULT_K, cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                 workers: int = 1) -> Verdict:
    """limsup r^{−(3/p+2/q−1)}‖u‖_{L^{p,q}} ≤ ε を最小 K 半径の max で判定する"""
    criterion_exponent(pq)
    used, values = _evaluate(field_, z, radii, k, lambda r: criterion_quantity(field_, z, r, pq, cfg), cfg, workers)
    decisive = max(values)
    status = VerdictStatus.REGULAR_BY_TH1 if decisive <= epsilon else VerdictStatus.INCONCLUSIVE
    return Verdict(status=status, criterion="TH1", center=z,
                   evidence=tuple((r, v, epsilon) for r, v in zip(used, values)),
                   epsilon_used=epsilon, radii_used=tuple(used), decisive=decisive, k=k)


def evaluate_mod_lemma(field_: SpaceTimeField, z: SpaceTimePoint, exponents: ExponentSet,
                       radii: Sequence[float], epsilon: float, k: int = DEFAULT_K,
                       cfg: QuadratureConfig = DEFAULT_QUADRATURE, workers: int = 1) -> Verdict:
    """liminf (C^{1/3}(r) + D̃(r)) < ε を最小 K 半径の min で判定する"""
    def quantity(r):
        return functional_C(field_, z, r, cfg) ** (1.0 / 3.0) + functional_D_tilde(field_, z, r, exponents, cfg)

    used, values = _evaluate(field_, z, radii, k, quantity, cfg, workers)
    decisive = min(values)
    status = VerdictStatus.REGULAR_BY_MOD_LEMMA if decisive < epsilon else VerdictStatus.INCONCLUSIVE
    return Verdict(status=status, criterion="mod_lemma", center=z,
                   evidence=tuple((r, v, epsilon) for r, v in zip(used, values)),
                   epsilon_used=epsilon, radii_used=tuple(used), decisive=decisive, k=k)


def ckn_criterion(field_: SpaceTimeField, z: SpaceTimePoint, radii: Sequence[float], epsilon: float,
                  k: int = DEFAULT_K, cfg: QuadratureConfig = DEFAULT_QUADRATURE, workers: int = 1) -> Verdict:
    """limsup (1/r)∫|∇u|² ≤ ε"""
    used, values = _evaluate(field_, z, radii, k, lambda r: functional_E(field_, z, r, cfg), cfg, workers)
    decisive = max(values)
    status = VerdictStatus.REGULAR_BY_CKN if decisive <= epsilon else VerdictStatus.INCONCLUSIVE
    return Verdict(status=status, criterion="CKN", center=z,
                   evidence=tuple((r, v, epsilon) for r, v in zip(used, values)),
                   epsilon_used=epsilon, radii_used=tuple(used), decisive=decisive, k=k)


def ckn_single_criterion(field_: SpaceTimeField, z: SpaceTimePoint, r: float, epsilon: float,
                         cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> Verdict:
    """単一半径の r^{−2}∫(|u|³+|p|^{3/2}) ≤ ε"""
    value = functional_ckn_single(field_, z, r, cfg)
    status = VerdictStatus.REGULAR_BY_CKN if value <= epsilon else VerdictStatus.INCONCLUSIVE
    return Verdict(status=status, criterion="CKN_single", center=z, evidence=((r, value, epsilon),),
                   epsilon_used=epsilon, radii_used=(r,), decisive=value, k=1)


def classify_center(verdict: Verdict, epsilon0: float) -> Verdict:
    """判定不能のうち、ある半径で量が ε₀ 以上のものを候補に格上げする"""
    if verdict.status is not VerdictStatus.INCONCLUSIVE:
        return replace(verdict, epsilon0=epsilon0)
    if any(value >= epsilon0 for _, value, _ in verdict.evidence):
        return replace(verdict, status=VerdictStatus.FLAGGED_CANDIDATE, epsilon0=epsilon0)
    return replace(verdict, epsilon0=epsilon0)


def within_hysteresis(verdict: Verdict, band: float = HYSTERESIS_BAND) -> bool:
    """判定量が ε の ±band 倍の帯に入っているか（スケーリング比較から除外する）"""
    eps = verdict.epsilon_used
    return abs(verdict.decisive - eps) <= band * eps


def displaced_lattice(z: SpaceTimePoint, offset: float) -> List[SpaceTimePoint]:
    """z から x1-x2 面内で offset だけ離した8点（軸方向4点と対角4点）"""
    x1, x2, x3 = z.x
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
    return [SpaceTimePoint((x1 + a * offset, x2 + b * offset, x3), z.t) for a, b in steps]


def calibrate_epsilon0(center: Verdict, lattice: Sequence[Verdict]) -> Optional[float]:
    """中心だけが候補になる ε₀（中心の最大量と格子の最大量の幾何平均）

    格子のどこかが中心以上の量を持つ場合は None。
    """
    center_max = max(v for _, v, _ in center.evidence)
    lattice_max = max((v for verdict in lattice for _, v, _ in verdict.evidence), default=0.0)
    if not lattice_max < center_max:
        return None
    return math.sqrt(max(lattice_max, 1e-300) * center_max)


CenterResult = Union[Verdict, AnalysisError]


@monitor.measure_time("evaluate_centers")
def evaluate_centers(field_: SpaceTimeField, centers: Sequence[SpaceTimePoint], pq: PQPair,
                     radii: Sequence[float], epsilon: float, epsilon0: float, k: int = DEFAULT_K,
                     cfg: QuadratureConfig = DEFAULT_QUADRATURE, workers: int = DEFAULT_THREADS) -> List[CenterResult]:
    """中心ごとに TH1 判定と候補分類を行う（結果は中心の順、解析エラーは値として返す）"""
    def one(z):
        return classify_center(evaluate_TH1(field_, z, pq, radii, epsilon, k, cfg), epsilon0)

    results = BatchProcessor(workers=workers).process_in_batches(list(centers), one, collect_errors=True)
    for res in results:
        if isinstance(res, Exception) and not isinstance(res, AnalysisError):
            raise res
    flagged = sum(1 for res in results if isinstance(res, Verdict) and res.status is VerdictStatus.FLAGGED_CANDIDATE)
    logger.info(f"{len(results)} 中心を判定しました（候補 {flagged} 件）")
    return results


def resolve_alpha(alpha, exponents: ExponentSet) -> float:
    """α = "lambda" なら 1 − 1/λ"""
    if isinstance(alpha, str):
        if alpha != "lambda":
            raise DomainError(f"α='{alpha}' は数値か 'lambda' でなければなりません")
        return 1.0 - 1.0 / exponents.lam
    return float(alpha)


def decay_diagnostic(field_: SpaceTimeField, z: SpaceTimePoint, exponents: ExponentSet, r: float,
                     theta: float, alpha=0.5, gamma: float = 1.0, morrey_value: float = 0.0,
                     beta: float = 0.5, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatioRecord:
    """(C^{1/3}(θr)+D̃(θr)) / (θ^{1+α}(C^{1/3}(r)+D̃(r)+m_γ r^{β+1}))（判定はしない）"""
    if not (0.0 < theta < 0.5):
        raise DomainError(f"θ={theta} は (0, 1/2) になければなりません")
    if not (0.0 < beta < gamma <= 2.0):
        raise DomainError(f"0 < β < γ ≤ 2 が必要です (β={beta}, γ={gamma})")
    a = resolve_alpha(alpha, exponents)
    check_radii(field_, z, [r, theta * r], cfg)

    def osc(radius):
        return functional_C(field_, z, radius, cfg) ** (1.0 / 3.0) + functional_D_tilde(field_, z, radius, exponents, cfg)

    small, large = osc(theta * r), osc(r)
    rhs = theta ** (1.0 + a) * (large + morrey_value * r ** (beta + 1.0))
    return make_ratio("decay", r, small, rhs,
                      {'center': z.to_dict(), 'field': field_.name, 'exponents': exponents.to_dict()},
                      theta=theta, alpha=a, beta=beta, gamma=gamma, morrey=morrey_value,
                      small_radius_value=small, large_radius_value=large)


@dataclass(frozen=True)
class IterationRecord:
    """s_k = C(θ^k r) + D̃₁(θ^k r) と参照包絡 (1/2)^k s_0 + tail"""
    center: SpaceTimePoint
    radii: Tuple[float, ...]
    sequence: Tuple[float, ...]
    envelope: Tuple[float, ...]
    theta: float
    tail: float

    def to_dict(self) -> dict:
        return {'kind': 'iteration', 'center': self.center.to_dict(), 'radii': list(self.radii),
                'sequence': list(self.sequence), 'envelope': list(self.envelope),
                'theta': self.theta, 'tail': self.tail}


def iteration_diagnostic(field_: SpaceTimeField, z: SpaceTimePoint, exponents: ExponentSet, r: float,
                         theta: float, k_max: int, tail: float = 0.0,
                         cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> IterationRecord:
    """反復評価の列を返す（θ^{k_max}·r が適格であること）"""
    if not (0.0 < theta < 1.0):
        raise DomainError(f"θ={theta} は (0,1) になければなりません")
    radii = [r * theta ** k for k in range(k_max + 1)]
    check_radii(field_, z, radii, cfg)
    seq = [functional_C(field_, z, rk, cfg) + functional_D1_tilde(field_, z, rk, exponents, cfg) for rk in radii]
    envelope = [0.5 ** k * seq[0] + tail for k in range(k_max + 1)]
    return IterationRecord(center=z, radii=tuple(radii), sequence=tuple(seq), envelope=tuple(envelope),
                           theta=theta, tail=tail)
