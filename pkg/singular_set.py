# -*- coding: utf-8 -*-
"""
特異集合の被覆モジュール

候補点の抽出、半径降順の貪欲 Vitali 被覆（5r 拡大）、放物型 Hausdorff
前測度の和、および δ に対する前測度曲線を扱う。
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from config import BRUTE_FORCE_LIMIT, DEFAULT_RADIUS_FRACTION, DEFAULT_THREADS, EXPANSION_FACTOR
from error_handler import AnalysisError, ConfigurationError, DomainError, PreconditionError
from exponents import LMPair, REGION_V_TEXT, in_region_V, singular_dimension
from fields import SpaceTimeField, SpaceTimePoint
from functionals import DEFAULT_QUADRATURE, cylinder_at, speed_norm
from inequalities import RatioRecord, make_ratio
from mixed_norms import QuadratureConfig, get_rule, is_admissible
from performance_utils import BatchProcessor, monitor

logger = logging.getLogger(__name__)

EXPANSION_SHIFTED = "shifted"  # B(x,5r) × (t + r² − 25r², t + r²)
EXPANSION_ONE_SIDED = "one_sided"  # B(x,5r) × (t − 25r², t)
_TOL = 1e-12


@dataclass(frozen=True)
class Candidate:
    """スケール化ノルムが ε₀ 以上となる半径 r_z を持つ点"""
    z: SpaceTimePoint
    r_z: float
    witness_value: float

    def to_dict(self) -> dict:
        return {'z': self.z.to_dict(), 'r_z': self.r_z, 'witness_value': self.witness_value}


def _spatial_distance(a: Candidate, b: Candidate) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a.z.x, b.z.x)))


def cylinders_disjoint(a: Candidate, b: Candidate) -> bool:
    """Q_{z_a,r_a} ∩ Q_{z_b,r_b} = ∅（球が離れているか、開いた時間区間が離れている）"""
    if _spatial_distance(a, b) >= a.r_z + b.r_z - _TOL:
        return True
    return a.z.t <= b.z.t - b.r_z ** 2 + _TOL or b.z.t <= a.z.t - a.r_z ** 2 + _TOL


def expansion_contains(outer: Candidate, inner: Candidate, expansion: str = EXPANSION_SHIFTED,
                       factor: float = EXPANSION_FACTOR) -> bool:
    """inner のシリンダーが outer の 5r 拡大に含まれるか"""
    big = factor * outer.r_z
    if _spatial_distance(outer, inner) + inner.r_z > big + _TOL:
        return False
    top = outer.z.t + outer.r_z ** 2 if expansion == EXPANSION_SHIFTED else outer.z.t
    bottom = top - big ** 2
    return inner.z.t <= top + _TOL and inner.z.t - inner.r_z ** 2 >= bottom - _TOL


@dataclass(frozen=True)
class CoverEstimate:
    """被覆と前測度の記録"""
    candidates: Tuple[Candidate, ...]
    disjoint_family: Tuple[Candidate, ...]
    covered: bool
    disjoint_verified: bool
    expansion: str = EXPANSION_SHIFTED
    uncovered: Tuple[int, ...] = ()
    delta: Optional[float] = None
    dimension: Optional[float] = None
    premeasure: Optional[float] = None
    premeasure_unexpanded: Optional[float] = None
    chain: Optional[RatioRecord] = None
    errors: Tuple[Dict, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            'kind': 'cover', 'delta': self.delta, 'dimension': self.dimension,
            'candidates': [c.to_dict() for c in self.candidates],
            'disjoint_family': [c.to_dict() for c in self.disjoint_family],
            'covered': self.covered, 'disjoint_verified': self.disjoint_verified,
            'expansion': self.expansion, 'uncovered': list(self.uncovered),
            'premeasure': self.premeasure, 'premeasure_unexpanded': self.premeasure_unexpanded,
            'chain': self.chain.to_dict() if self.chain else None,
            'errors': list(self.errors),
        }


def _require_region_V(lm: LMPair):
    if not in_region_V(lm):
        raise DomainError(f"(l,m)=({lm.l},{lm.m}) は領域 V ({REGION_V_TEXT}) の外です")


@monitor.measure_time("flag_candidates")
def flag_candidates(field_: SpaceTimeField, centers: Sequence[SpaceTimePoint], lm: LMPair, epsilon0: float,
                    delta: float, radii: Sequence[float], cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                    errors: Optional[List[Dict]] = None, workers: int = DEFAULT_THREADS) -> List[Candidate]:
    """各中心で r^{−ς}‖u‖_{L^{l,m}} ≥ ε₀ となる最小の半径 (< δ) を候補にする

    解像度・範囲エラーは中心ごとに errors に集め、処理は続ける。
    """
    _require_region_V(lm)
    varsigma = lm.varsigma
    pq = lm.as_pq()
    usable = sorted(float(r) for r in radii if r < delta)
    if not usable:
        raise ConfigurationError(f"δ={delta} 未満の半径がありません")

    def one(z):
        found, problems = None, []
        for r in usable:
            if not is_admissible(field_.grid, cylinder_at(field_, z, r), cfg):
                problems.append({'kind': 'error', 'context': f"flag_candidates z={z.x} t={z.t}",
                                 'error_type': 'ResolutionError', 'message': f"半径 r={r:g} は不適格です"})
                continue
            value = speed_norm(field_, z, r, pq, cfg) / r ** varsigma
            if value >= epsilon0:
                found = Candidate(z=z, r_z=r, witness_value=value)
                break
        return found, problems

    results = BatchProcessor(workers=workers).process_in_batches(list(centers), one, collect_errors=True)
    candidates = []
    for z, res in zip(centers, results):
        if isinstance(res, Exception):
            if not isinstance(res, AnalysisError):
                raise res
            if errors is not None:
                errors.append({'kind': 'error', 'context': f"flag_candidates z={z.x} t={z.t}",
                               'error_type': type(res).__name__, 'message': str(res)})
            continue
        found, problems = res
        if errors is not None:
            errors.extend(problems)
        if found is not None:
            candidates.append(found)
    logger.info(f"δ={delta:g}: {len(centers)} 中心中 {len(candidates)} 件を候補としました")
    return candidates


def vitali_cover(candidates: Sequence[Candidate], expansion: str = EXPANSION_SHIFTED) -> CoverEstimate:
    """半径降順の貪欲法で互いに素な部分族を選び、5r 拡大による被覆を検証する"""
    if expansion not in (EXPANSION_SHIFTED, EXPANSION_ONE_SIDED):
        raise ConfigurationError(f"拡大方式 '{expansion}' は '{EXPANSION_SHIFTED}' か '{EXPANSION_ONE_SIDED}' です")
    candidates = tuple(candidates)
    order = sorted(range(len(candidates)), key=lambda i: -candidates[i].r_z)
    selected: List[Candidate] = []
    for i in order:
        c = candidates[i]
        if all(cylinders_disjoint(c, s) for s in selected):
            selected.append(c)

    disjoint_verified = all(cylinders_disjoint(a, b)
                            for n, a in enumerate(selected) for b in selected[n + 1:])
    uncovered = tuple(i for i, c in enumerate(candidates)
                      if not any(expansion_contains(s, c, expansion) for s in selected))
    if uncovered:
        logger.warning(f"{len(uncovered)} 件の候補が 5r 拡大に含まれていません（方式 {expansion}）")
    return CoverEstimate(candidates=candidates, disjoint_family=tuple(selected), covered=not uncovered,
                         disjoint_verified=disjoint_verified, expansion=expansion, uncovered=uncovered)


def union_norm_power(field_: SpaceTimeField, family: Sequence[Candidate], lm: LMPair,
                     cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> Tuple[float, float]:
    """互いに素なシリンダーの和集合 V 上の ‖u‖^m_{L^{l,m}(V)} と Σ_j ‖u‖^m_{L^{l,m}(Q_j)}

    各シリンダーの空間積分を自分の時間スラブ上で区分的に一定として、
    全シリンダーの時間端点で区切った区間ごとに和を取る。
    """
    l, m = lm.l, lm.m
    pieces = []
    per_cylinder = 0.0
    for c in family:
        rule = get_rule(field_.grid, cylinder_at(field_, c.z, c.r_z), cfg)
        integrals = np.abs(rule.cell_values(field_.speed)) ** l @ rule.volume
        per_cylinder += float(np.sum(rule.tau * integrals ** (m / l)))
        pieces.append((rule.overlaps, integrals))

    breaks = sorted({t for overlaps, _ in pieces for lo_hi in overlaps for t in lo_hi})
    union = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo <= 0.0:
            continue
        mid = 0.5 * (lo + hi)
        total = 0.0
        for overlaps, integrals in pieces:
            for (a, b), value in zip(overlaps, integrals):
                if a <= mid < b:
                    total += value
                    break
        union += (hi - lo) * total ** (m / l)
    return union, per_cylinder


def cover_norm_chain(field_: SpaceTimeField, cover: CoverEstimate, lm: LMPair, epsilon0: float,
                     cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> Optional[RatioRecord]:
    """ε₀^m Σ r_j^{ςm} ≤ ‖u‖^m_{L^{l,m}(∪Q_j)} を比として評価する（l ≤ m のときのみ）"""
    if lm.l > lm.m:
        logger.info(f"(l,m)=({lm.l},{lm.m}) は l > m のため被覆ノルムの連鎖は評価しません")
        return None
    varsigma = lm.varsigma
    lhs = epsilon0 ** lm.m * sum(c.r_z ** (varsigma * lm.m) for c in cover.disjoint_family)
    union, per_cylinder = union_norm_power(field_, cover.disjoint_family, lm, cfg)
    return make_ratio("cover_norm_chain", min((c.r_z for c in cover.disjoint_family), default=0.0), lhs, union,
                      {'field': field_.name, 'lm': lm.to_dict(), 'epsilon0': epsilon0},
                      per_cylinder_sum=per_cylinder, family_size=len(cover.disjoint_family))


def premeasure(cover: CoverEstimate, d: float, field_: Optional[SpaceTimeField] = None,
               lm: Optional[LMPair] = None, epsilon0: Optional[float] = None,
               cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> CoverEstimate:
    """Σ(5r_j)^d（被覆は 5r 拡大なので拡大半径を使う）と Σ r_j^d

    Raises:
        PreconditionError: covered = False の場合
    """
    if not cover.covered:
        raise PreconditionError(f"被覆が成立していません（未被覆 {len(cover.uncovered)} 件）")
    radii = [c.r_z for c in cover.disjoint_family]
    expanded = float(sum((EXPANSION_FACTOR * r) ** d for r in radii))
    plain = float(sum(r ** d for r in radii))
    chain = None
    if field_ is not None and lm is not None and epsilon0 is not None and radii:
        chain = cover_norm_chain(field_, cover, lm, epsilon0, cfg)
    return replace(cover, dimension=d, premeasure=expanded, premeasure_unexpanded=plain, chain=chain)


def conflict_graph(candidates: Sequence[Candidate]) -> nx.Graph:
    """シリンダーが交わる候補同士を辺で結んだグラフ"""
    graph = nx.Graph()
    graph.add_nodes_from(range(len(candidates)))
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            if not cylinders_disjoint(candidates[i], candidates[j]):
                graph.add_edge(i, j)
    return graph


def maximal_disjoint_families(candidates: Sequence[Candidate]) -> List[List[int]]:
    """極大な互いに素な部分族をすべて列挙する（補グラフの極大クリーク）"""
    if len(candidates) > BRUTE_FORCE_LIMIT:
        raise ConfigurationError(f"全列挙は候補 {BRUTE_FORCE_LIMIT} 件以下でのみ行います（{len(candidates)} 件）")
    if not candidates:
        return [[]]
    complement = nx.complement(conflict_graph(candidates))
    return sorted(sorted(clique) for clique in nx.find_cliques(complement))


def premeasure_range(candidates: Sequence[Candidate], d: float) -> Tuple[float, float]:
    """全極大部分族での Σ(5r)^d の最小値と最大値"""
    sums = [sum((EXPANSION_FACTOR * candidates[i].r_z) ** d for i in family)
            for family in maximal_disjoint_families(candidates)]
    return float(min(sums)), float(max(sums))


@monitor.measure_time("dimension_curve")
def dimension_curve(field_: SpaceTimeField, centers: Sequence[SpaceTimePoint], lm: LMPair, epsilon0: float,
                    deltas: Sequence[float], radii: Optional[Sequence[float]] = None,
                    radius_fraction: float = DEFAULT_RADIUS_FRACTION,
                    cfg: QuadratureConfig = DEFAULT_QUADRATURE, workers: int = DEFAULT_THREADS,
                    expansion: str = EXPANSION_SHIFTED) -> List[CoverEstimate]:
    """各 δ で d = d(l,m) の前測度を計算する

    radii を省略すると半径 radius_fraction·δ の1つだけを使う。
    """
    d = singular_dimension(lm)
    if not (0.0 < radius_fraction < 1.0):
        raise ConfigurationError(f"radius_fraction={radius_fraction} は (0,1) になければなりません")
    estimates = []
    for delta in sorted(deltas, reverse=True):
        errors: List[Dict] = []
        usable = list(radii) if radii is not None else [radius_fraction * delta]
        candidates = flag_candidates(field_, centers, lm, epsilon0, delta, usable, cfg, errors, workers)
        cover = vitali_cover(candidates, expansion)
        if cover.covered:
            estimate = premeasure(cover, d, field_, lm, epsilon0, cfg)
        else:
            estimate = replace(cover, dimension=d)
        estimates.append(replace(estimate, delta=delta, errors=tuple(errors)))
    logger.info(f"前測度曲線 d={d:g}: " + ", ".join(f"δ={e.delta:g}→{e.premeasure}" for e in estimates))
    return estimates


def monotone_trend(estimates: Sequence[CoverEstimate]) -> str:
    """δ を小さくしたときの前測度の傾向（"decreasing" / "nonincreasing" / "nonmonotone"）"""
    ordered = sorted((e for e in estimates if e.premeasure is not None), key=lambda e: -e.delta)
    values = [e.premeasure for e in ordered]
    pairs = list(zip(values[:-1], values[1:]))
    if pairs and all(b < a for a, b in pairs):
        return "decreasing"
    if all(b <= a for a, b in pairs):
        return "nonincreasing"
    return "nonmonotone"


def curve_rows(estimates: Sequence[CoverEstimate]) -> List[Dict]:
    """CSV 用の (δ, 前測度) 行"""
    return [{'delta': e.delta, 'dimension': e.dimension, 'premeasure': e.premeasure,
             'premeasure_unexpanded': e.premeasure_unexpanded, 'family_size': len(e.disjoint_family),
             'candidates': len(e.candidates), 'covered': e.covered} for e in estimates]
