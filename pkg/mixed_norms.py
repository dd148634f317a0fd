# -*- coding: utf-8 -*-
"""
放物型シリンダー上の求積モジュール

Q_{z,r} = B_{x,r} × (t−r², t) を格子領域で切り取り、混合ノルム L^{p,q}、
空間平均、Morrey ノルム、放物型距離を計算する。

サンプル値の積分ではセルごとに「切り取られた部分での三線形補間の平均」を使い、
部分セルの体積と補間重みはセルあたり subsample³ 点の指示関数で求める。
時間方向は各スラブと (t−r², t) の重なり区間の中点で線形補間した値に、
重なりの長さを重みとして掛ける。
"""
import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import CELL_CHUNK, DEFAULT_MIN_CELLS, DEFAULT_SUBSAMPLE, MAX_SUBSAMPLE, MIN_MIN_CELLS, ORACLE_SUBSAMPLE
from error_handler import ConfigurationError, DomainError, RangeError, ResolutionError
from exponents import INF, PQPair
from fields import GridSpec, SpaceTimePoint
from performance_utils import DataCache

logger = logging.getLogger(__name__)

_rule_cache = DataCache()


class ClipMode(enum.Enum):
    """シリンダーの切り取り方"""
    INTERIOR = "interior"  # Q_{z,r}
    HALF = "half"  # Q⁺_{z,r} = Q_{z,r} ∩ {x3 > 0}


@dataclass(frozen=True)
class ParabolicCylinder:
    """中心 z、半径 r、切り取りモード"""
    center: SpaceTimePoint
    radius: float
    clip: ClipMode = ClipMode.INTERIOR

    def __post_init__(self):
        object.__setattr__(self, 'radius', float(self.radius))
        if not (self.radius > 0) or not math.isfinite(self.radius):
            raise ConfigurationError(f"シリンダー半径 r={self.radius} は正の有限値でなければなりません")

    @property
    def t_bottom(self) -> float:
        return self.center.t - self.radius ** 2


@dataclass(frozen=True)
class QuadratureConfig:
    """求積設定

    analytic=True のとき、点値の被積分関数（|u| など）は解析的クロージャを
    サブサンプル点で直接評価する。
    """
    subsample: int = DEFAULT_SUBSAMPLE
    min_cells: int = DEFAULT_MIN_CELLS
    analytic: bool = False
    time_subsample: int = 1

    def __post_init__(self):
        if not (1 <= self.subsample <= MAX_SUBSAMPLE):
            raise ConfigurationError(f"subsample={self.subsample} は [1, {MAX_SUBSAMPLE}] の範囲でなければなりません")
        if self.min_cells < MIN_MIN_CELLS:
            raise ConfigurationError(f"min_cells={self.min_cells} は {MIN_MIN_CELLS} 以上でなければなりません")
        if self.time_subsample < 1:
            raise ConfigurationError(f"time_subsample={self.time_subsample} は1以上でなければなりません")

    def to_dict(self) -> dict:
        return {'subsample': self.subsample, 'min_cells': self.min_cells,
                'analytic': self.analytic, 'time_subsample': self.time_subsample}


def infer_clip(grid: GridSpec, z: SpaceTimePoint) -> ClipMode:
    """半空間格子で x3 = 0 の中心は HALF、それ以外は INTERIOR"""
    if grid.half_space and abs(z.x[2]) <= 1e-9 * grid.h:
        return ClipMode.HALF
    return ClipMode.INTERIOR


def _unit_offsets(sub: int) -> np.ndarray:
    """セル内サブサンプル点の単位座標 (sub³, 3)"""
    s = (np.arange(sub) + 0.5) / sub
    a, b, c = np.meshgrid(s, s, s, indexing='ij')
    return np.stack([a.ravel(), b.ravel(), c.ravel()], axis=-1)


_CORNERS = [(e1, e2, e3) for e1 in (0, 1) for e2 in (0, 1) for e3 in (0, 1)]


def _trilinear_basis(offsets: np.ndarray) -> np.ndarray:
    """各サブサンプル点での8隅の三線形基底 (npts, 8)"""
    cols = []
    for e1, e2, e3 in _CORNERS:
        w = np.ones(len(offsets))
        for axis, e in enumerate((e1, e2, e3)):
            w = w * (offsets[:, axis] if e else 1.0 - offsets[:, axis])
        cols.append(w)
    return np.stack(cols, axis=-1)


class CylinderRule:
    """格子に対する切り取り済みシリンダーの求積則"""

    def __init__(self, grid: GridSpec, cylinder: ParabolicCylinder, cfg: QuadratureConfig):
        self.grid = grid
        self.cylinder = cylinder
        self.cfg = cfg
        self.truncated = False
        self.touches_boundary = False
        self._build_space()
        self._build_time()

    # 空間
    def _build_space(self):
        grid, cyl, cfg = self.grid, self.cylinder, self.cfg
        h = grid.h
        if cyl.radius < cfg.min_cells * h * (1.0 - 1e-9):
            raise ResolutionError(
                f"半径 r={cyl.radius:.6g} が最小解像度 {cfg.min_cells}·h={cfg.min_cells * h:.6g} を下回っています",
                radius=cyl.radius)

        # 以降は格子単位（原点基準、間隔1）で計算する
        center = grid.fractional_index(cyl.center.x)
        r = cyl.radius / h
        n_cells = np.array(grid.counts) - 1
        x3_min = 0.0
        if cyl.clip is ClipMode.HALF:
            x3_min = max(0.0, -grid.origin[2] / h)

        lo = np.floor(center - r).astype(int)
        hi = np.ceil(center + r).astype(int)
        lo[2] = max(lo[2], int(math.floor(x3_min)))
        for axis in range(3):
            if center[axis] - r < 0.0 or center[axis] + r > n_cells[axis]:
                if axis == 2 and center[axis] - r < 0.0 and center[axis] + r <= n_cells[axis]:
                    if cyl.clip is ClipMode.HALF:
                        continue
                    if grid.half_space:
                        self.touches_boundary = True
                        continue
                self.truncated = True
        lo = np.clip(lo, 0, n_cells)
        hi = np.clip(hi, 0, n_cells)
        if np.any(hi <= lo):
            raise RangeError(f"シリンダー (中心 {cyl.center.x}, r={cyl.radius}) が格子の外にあります")

        axes = [np.arange(lo[a], hi[a], dtype=float) for a in range(3)]
        c0 = [axes[a] - center[a] for a in range(3)]
        c1 = [axes[a] + 1.0 - center[a] for a in range(3)]
        near = [np.maximum(np.maximum(c0[a], 0.0), -c1[a]) ** 2 for a in range(3)]
        far = [np.maximum(c0[a] ** 2, c1[a] ** 2) for a in range(3)]
        near2 = near[0][:, None, None] + near[1][None, :, None] + near[2][None, None, :]
        far2 = far[0][:, None, None] + far[1][None, :, None] + far[2][None, None, :]
        above = (axes[2] >= x3_min)[None, None, :]
        below = (axes[2] + 1.0 <= x3_min)[None, None, :]
        r2 = r * r

        full = (far2 <= r2) & above
        empty = (near2 >= r2) | below
        partial = ~(full | empty)

        ia, ib, ic = [], [], []
        frac, cw = [], []
        fi = np.nonzero(full)
        if len(fi[0]):
            ia.append(fi[0]); ib.append(fi[1]); ic.append(fi[2])
            frac.append(np.ones(len(fi[0])))
            cw.append(np.full((len(fi[0]), 8), 0.125))

        pi = np.nonzero(partial)
        if len(pi[0]):
            offsets = _unit_offsets(cfg.subsample)
            basis = _trilinear_basis(offsets)
            for start in range(0, len(pi[0]), CELL_CHUNK):
                sl = slice(start, start + CELL_CHUNK)
                a, b, c = pi[0][sl], pi[1][sl], pi[2][sl]
                cell_lo = np.stack([axes[0][a], axes[1][b], axes[2][c]], axis=-1)
                pts = cell_lo[:, None, :] + offsets[None, :, :]
                rel = pts - center[None, None, :]
                inside = (np.sum(rel ** 2, axis=-1) < r2) & (pts[..., 2] > x3_min)
                count = inside.sum(axis=1)
                keep = count > 0
                if not keep.any():
                    continue
                weights = inside[keep].astype(float) @ basis
                weights /= count[keep][:, None]
                ia.append(a[keep]); ib.append(b[keep]); ic.append(c[keep])
                frac.append(count[keep] / offsets.shape[0])
                cw.append(weights)

        if not ia:
            raise RangeError(f"シリンダー (中心 {cyl.center.x}, r={cyl.radius}) が格子と交わりません")
        self.ia = np.concatenate(ia) + lo[0]
        self.ib = np.concatenate(ib) + lo[1]
        self.ic = np.concatenate(ic) + lo[2]
        self.volume = np.concatenate(frac) * h ** 3
        self.corner_weights = np.concatenate(cw, axis=0).T.copy()  # (8, M)
        self.fraction = np.concatenate(frac)

    # 時間
    def _build_time(self):
        grid, cyl = self.grid, self.cylinder
        if grid.nt < 2:
            raise RangeError("時間方向の積分には2つ以上の時間格子点が必要です")
        t_top = cyl.center.t
        t_bottom = cyl.t_bottom
        eps = 1e-9 * grid.dt
        if t_bottom < grid.t0 - eps or t_top > grid.t_end + eps:
            self.truncated = True
        a = max(t_bottom, grid.t0)
        b = min(t_top, grid.t_end)
        if b - a <= eps:
            raise RangeError(f"シリンダーの時間区間 ({t_bottom:.6g}, {t_top:.6g}) が格子の時間範囲外です")
        n_first = int(math.floor((a - grid.t0) / grid.dt + 1e-9))
        n_last = int(math.ceil((b - grid.t0) / grid.dt - 1e-9)) - 1
        n_first = min(max(n_first, 0), grid.nt - 2)
        n_last = min(max(n_last, n_first), grid.nt - 2)

        levels, theta, tau, mids = [], [], [], []
        for n in range(n_first, n_last + 1):
            tn = grid.t0 + n * grid.dt
            lo = max(a, tn)
            hi = min(b, tn + grid.dt)
            if hi - lo <= eps:
                continue
            levels.append(n)
            mid = 0.5 * (lo + hi)
            theta.append((mid - tn) / grid.dt)
            tau.append(hi - lo)
            mids.append((lo, hi))
        self.levels = np.array(levels, dtype=int)
        self.theta = np.array(theta)
        self.tau = np.array(tau)
        self.overlaps = mids

    @property
    def n_slabs(self) -> int:
        return len(self.levels)

    @property
    def total_volume(self) -> float:
        return float(np.sum(self.volume))

    @property
    def total_time(self) -> float:
        return float(np.sum(self.tau))

    def cell_values(self, nodes: np.ndarray) -> np.ndarray:
        """節点スカラー (nt, nx, ny, nz) からスラブ×セルの値 (S, M) を求める"""
        if nodes.shape != self.grid.shape:
            raise ConfigurationError(f"被積分関数の形状 {nodes.shape} が格子 {self.grid.shape} と一致しません")
        uniq = np.unique(np.concatenate([self.levels, self.levels + 1]))
        level_values = np.zeros((len(uniq), len(self.volume)))
        for corner, (e1, e2, e3) in enumerate(_CORNERS):
            gathered = nodes[uniq[:, None], (self.ia + e1)[None, :], (self.ib + e2)[None, :], (self.ic + e3)[None, :]]
            level_values += self.corner_weights[corner][None, :] * gathered
        pos = np.searchsorted(uniq, self.levels)
        lower = level_values[pos]
        upper = level_values[pos + 1]
        return (1.0 - self.theta)[:, None] * lower + self.theta[:, None] * upper

    def time_samples(self, time_subsample: int) -> Tuple[np.ndarray, np.ndarray]:
        """重なり区間を細分した時刻と重み（解析的評価用）"""
        times, weights = [], []
        for lo, hi in self.overlaps:
            step = (hi - lo) / time_subsample
            for j in range(time_subsample):
                times.append(lo + (j + 0.5) * step)
                weights.append(step)
        return np.array(times), np.array(weights)


def get_rule(grid: GridSpec, cyl: ParabolicCylinder, cfg: QuadratureConfig) -> CylinderRule:
    """キャッシュ付きで求積則を取得する"""
    key = (grid, cyl, cfg.subsample, cfg.min_cells)
    return _rule_cache.get_or_create(key, lambda: CylinderRule(grid, cyl, cfg))


def check_admissible(grid: GridSpec, cyl: ParabolicCylinder, cfg: QuadratureConfig) -> CylinderRule:
    """解像度・範囲を検査して求積則を返す（不適なら例外）"""
    return get_rule(grid, cyl, cfg)


def is_admissible(grid: GridSpec, cyl: ParabolicCylinder, cfg: QuadratureConfig) -> bool:
    try:
        get_rule(grid, cyl, cfg)
        return True
    except (ResolutionError, RangeError):
        return False


# 混合ノルムの評価

def spatial_norms(values: np.ndarray, volume: np.ndarray, p) -> np.ndarray:
    """各スラブの空間 L^p ノルム"""
    a = np.abs(values)
    if p is INF:
        return a.max(axis=1)
    return (a ** p @ volume) ** (1.0 / p)


def temporal_norm(spatial: np.ndarray, tau: np.ndarray, q) -> float:
    """スラブごとの空間ノルムから時間 L^q ノルム"""
    if q is INF:
        return float(np.max(spatial))
    return float(np.sum(tau * spatial ** q) ** (1.0 / q))


def mixed_norm_from_values(values: np.ndarray, rule: CylinderRule, pq: PQPair, normalized: bool = False) -> float:
    """セル値 (S, M) から ‖·‖_{L^{p,q}} を求める

    normalized=True では空間・時間の測度をそれぞれ1に正規化する。
    """
    volume, tau = rule.volume, rule.tau
    if normalized:
        volume = volume / volume.sum()
        tau = tau / tau.sum()
    return temporal_norm(spatial_norms(values, volume, pq.p), tau, pq.q)


Integrand = Union[np.ndarray, Callable[..., np.ndarray]]


def _analytic_spatial(fn: Callable, rule: CylinderRule, times: np.ndarray, p, subsample: int) -> np.ndarray:
    """クロージャをサブサンプル点で評価し、各時刻の ∫|g|^p（p=∞ なら最大値）を返す"""
    grid, cyl = rule.grid, rule.cylinder
    h = grid.h
    center = grid.fractional_index(cyl.center.x)
    r2 = (cyl.radius / h) ** 2
    x3_min = max(0.0, -grid.origin[2] / h) if cyl.clip is ClipMode.HALF else -np.inf
    offsets = _unit_offsets(subsample)
    eta3 = (h / subsample) ** 3
    origin = np.asarray(grid.origin)
    out = np.zeros(len(times))
    chunk = max(1, CELL_CHUNK * 8 // offsets.shape[0])
    for start in range(0, len(rule.ia), chunk):
        sl = slice(start, start + chunk)
        cell_lo = np.stack([rule.ia[sl], rule.ib[sl], rule.ic[sl]], axis=-1).astype(float)
        pts = (cell_lo[:, None, :] + offsets[None, :, :]).reshape(-1, 3)
        inside = (np.sum((pts - center) ** 2, axis=-1) < r2) & (pts[:, 2] > x3_min)
        if not inside.any():
            continue
        phys = origin + h * pts[inside]
        for it, t in enumerate(times):
            vals = np.abs(np.asarray(fn(phys[:, 0], phys[:, 1], phys[:, 2], np.full(len(phys), t)), dtype=float))
            if p is INF:
                out[it] = max(out[it], float(vals.max()))
            else:
                out[it] += float(np.sum(vals ** p)) * eta3
    return out


def lpq_norm(field_fn: Integrand, grid: GridSpec, cyl: ParabolicCylinder, pq: PQPair,
             cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """切り取られたシリンダー上の混合ノルム ‖g‖_{L^{p,q}}

    Args:
        field_fn: 節点スカラー配列 (nt, nx, ny, nz)、または解析的スカラー関数 g(x1, x2, x3, t)
        grid: 格子
        cyl: シリンダー
        pq: 指数
        cfg: 求積設定

    Raises:
        ResolutionError: r < min_cells·h
        RangeError: シリンダーが格子の外
    """
    rule = get_rule(grid, cyl, cfg)
    if callable(field_fn):
        times, weights = rule.time_samples(cfg.time_subsample)
        integrals = _analytic_spatial(field_fn, rule, times, pq.p, cfg.subsample)
        spatial = integrals if pq.p is INF else integrals ** (1.0 / pq.p)
        return temporal_norm(spatial, weights, pq.q)
    return mixed_norm_from_values(rule.cell_values(np.asarray(field_fn)), rule, pq)


def dense_oracle_lpq(fn: Callable, grid: GridSpec, cyl: ParabolicCylinder, pq: PQPair,
                     min_cells: int = DEFAULT_MIN_CELLS) -> float:
    """8倍細分の密なリーマン和によるオラクル"""
    cfg = QuadratureConfig(subsample=ORACLE_SUBSAMPLE, min_cells=min_cells, analytic=True,
                           time_subsample=ORACLE_SUBSAMPLE)
    return lpq_norm(fn, grid, cyl, pq, cfg)


def spatial_mean(field_fn: np.ndarray, grid: GridSpec, cyl: ParabolicCylinder, time_slab_index: int,
                 cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """1つの時間スラブでの切り取られた球上の平均"""
    rule = get_rule(grid, cyl, cfg)
    if not (0 <= time_slab_index < rule.n_slabs):
        raise RangeError(f"スラブ番号 {time_slab_index} は範囲 [0, {rule.n_slabs}) の外です")
    values = rule.cell_values(np.asarray(field_fn))[time_slab_index]
    return float(values @ rule.volume / rule.total_volume)


def slab_means(values: np.ndarray, rule: CylinderRule) -> np.ndarray:
    """各スラブの空間平均 (S,)"""
    return values @ rule.volume / rule.total_volume


@dataclass(frozen=True)
class MorreyEstimate:
    """Morrey ノルムの有限標本近似"""
    value: float
    gamma: float
    argmax_center: Optional[SpaceTimePoint]
    argmax_radius: Optional[float]
    n_samples: int
    radii: Tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            'value': self.value, 'gamma': self.gamma,
            'argmax_center': self.argmax_center.to_dict() if self.argmax_center else None,
            'argmax_radius': self.argmax_radius, 'n_samples': self.n_samples, 'radii': list(self.radii),
        }


def morrey_norm(f_norm: np.ndarray, grid: GridSpec, gamma: float, centers: Sequence[SpaceTimePoint],
                radii: Sequence[float], cfg: QuadratureConfig = QuadratureConfig()) -> MorreyEstimate:
    """m_γ(f) = sup r^{2−γ}(⨍_{Q(z,r)∩ω} |f|²)^{1/2} を標本 (z, r) 上で近似する

    Args:
        f_norm: 節点での |f|
    """
    if not (0.0 < gamma <= 2.0):
        raise DomainError(f"γ={gamma} は (0,2] の範囲でなければなりません")
    centers = list(centers)
    radii = [float(r) for r in radii]
    if not centers or not radii:
        raise ConfigurationError("Morrey ノルムの標本集合が空です")
    squared = np.asarray(f_norm) ** 2
    best, best_z, best_r = 0.0, None, None
    for z in centers:
        clip = infer_clip(grid, z)
        for r in radii:
            rule = get_rule(grid, ParabolicCylinder(z, r, clip), cfg)
            values = rule.cell_values(squared)
            mean = float(rule.tau @ (values @ rule.volume)) / (rule.total_volume * rule.total_time)
            candidate = r ** (2.0 - gamma) * math.sqrt(max(mean, 0.0))
            if best_z is None or candidate > best:
                best, best_z, best_r = candidate, z, r
    return MorreyEstimate(value=best, gamma=gamma, argmax_center=best_z, argmax_radius=best_r,
                          n_samples=len(centers) * len(radii), radii=tuple(radii))


def parabolic_distance(z: SpaceTimePoint, z2: SpaceTimePoint) -> float:
    """d(z, z') = |x − x'| + |t − t'|^{1/2}"""
    dx = math.sqrt(sum((a - b) ** 2 for a, b in zip(z.x, z2.x)))
    return dx + math.sqrt(abs(z.t - z2.t))


def dyadic_radii(r_max: float, count: int) -> List[float]:
    """r_max, r_max/2, ... の降順リスト"""
    return [r_max / 2 ** k for k in range(count)]
