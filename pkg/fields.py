# -*- coding: utf-8 -*-
"""
時空間場モジュール

4次元格子 (t, x1, x2, x3) 上の速度・圧力・外力のサンプルと、
任意の解析的クロージャを保持する。配列の並びは
u: (nt, nx, ny, nz, 3), p: (nt, nx, ny, nz), f: (nt, nx, ny, nz, 3)。
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from config import NODE_SNAP_TOL
from error_handler import ConfigurationError, RangeError, UnsupportedOperationError

logger = logging.getLogger(__name__)

Vector3 = Tuple[float, float, float]


@dataclass(frozen=True)
class GridSpec:
    """一様間隔の時空間格子"""
    origin: Vector3
    h: float
    counts: Tuple[int, int, int]
    t0: float
    dt: float
    nt: int
    half_space: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'origin', tuple(float(v) for v in self.origin))
        object.__setattr__(self, 'counts', tuple(int(n) for n in self.counts))
        if len(self.origin) != 3 or len(self.counts) != 3:
            raise ConfigurationError("origin と counts は3成分でなければなりません")
        if not (self.h > 0):
            raise ConfigurationError(f"格子間隔 h={self.h} は正でなければなりません")
        if not (self.dt > 0):
            raise ConfigurationError(f"時間刻み dt={self.dt} は正でなければなりません")
        if min(self.counts) < 3:
            raise ConfigurationError(f"各軸の格子点数は3以上が必要です: counts={self.counts}")
        if self.nt < 1:
            raise ConfigurationError(f"時間格子点数 nt={self.nt} は1以上が必要です")
        if self.half_space and self.origin[2] != 0.0:
            raise ConfigurationError("半空間格子では origin の x3 成分は 0 でなければなりません")

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return (self.nt,) + self.counts

    @property
    def t_end(self) -> float:
        return self.t0 + (self.nt - 1) * self.dt

    @property
    def upper(self) -> Vector3:
        return tuple(o + (n - 1) * self.h for o, n in zip(self.origin, self.counts))

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.h * np.arange(self.counts[i])

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    def broadcast_coordinates(self):
        """クロージャ評価用のブロードキャスト可能な座標 (x1, x2, x3, t)"""
        x1 = self.axis(0)[None, :, None, None]
        x2 = self.axis(1)[None, None, :, None]
        x3 = self.axis(2)[None, None, None, :]
        t = self.times()[:, None, None, None]
        return x1, x2, x3, t

    def spatial_mesh(self):
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing='ij')

    def fractional_index(self, x: Vector3) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.asarray(self.origin)) / self.h

    def nearest_node(self, point: "SpaceTimePoint") -> Tuple[int, int, int, int]:
        """最も近い格子点の添字 (n, i, j, k)"""
        idx = np.rint(self.fractional_index(point.x)).astype(int)
        n = int(round((point.t - self.t0) / self.dt))
        return (n, int(idx[0]), int(idx[1]), int(idx[2]))

    def is_node(self, x: Vector3) -> bool:
        frac = self.fractional_index(x)
        return bool(np.all(np.abs(frac - np.rint(frac)) <= NODE_SNAP_TOL))

    def scaled(self, s: float) -> "GridSpec":
        """x → x/s, t → t/s² の逆像を覆う格子"""
        return GridSpec(origin=tuple(o / s for o in self.origin), h=self.h / s, counts=self.counts,
                        t0=self.t0 / s ** 2, dt=self.dt / s ** 2, nt=self.nt, half_space=self.half_space)

    def to_dict(self) -> dict:
        return {
            'origin': list(self.origin), 'h': self.h, 'counts': list(self.counts),
            't0': self.t0, 'dt': self.dt, 'nt': self.nt, 'half_space': self.half_space,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        try:
            return cls(origin=tuple(data['origin']), h=float(data['h']), counts=tuple(data['counts']),
                       t0=float(data.get('t0', 0.0)), dt=float(data['dt']), nt=int(data['nt']),
                       half_space=bool(data.get('half_space', False)))
        except KeyError as e:
            raise ConfigurationError(f"格子設定にキー {e} がありません") from e


@dataclass(frozen=True)
class SpaceTimePoint:
    """時空間の点 z = (x, t)"""
    x: Vector3
    t: float

    def __post_init__(self):
        object.__setattr__(self, 'x', tuple(float(v) for v in self.x))
        object.__setattr__(self, 't', float(self.t))
        if len(self.x) != 3 or not all(math.isfinite(v) for v in self.x + (self.t,)):
            raise ConfigurationError(f"不正な時空間点です: x={self.x}, t={self.t}")

    def scaled(self, s: float) -> "SpaceTimePoint":
        return SpaceTimePoint(tuple(v / s for v in self.x), self.t / s ** 2)

    def to_dict(self) -> dict:
        return {'x': list(self.x), 't': self.t}


ScalarClosure = Callable[..., np.ndarray]


@dataclass(frozen=True)
class AnalyticFields:
    """(u, p, f) の解析的評価関数。引数 (x1, x2, x3, t) はブロードキャスト可能な配列

    p, f が None のものは解析形がない（サンプルのみ）ことを表す。
    """
    u: ScalarClosure
    p: Optional[ScalarClosure] = None
    f: Optional[ScalarClosure] = None


def stack_components(*components) -> np.ndarray:
    """成分をブロードキャストして最後の軸に積む"""
    return np.stack(np.broadcast_arrays(*components), axis=-1)


def sample_closure(fn: ScalarClosure, grid: GridSpec, vector: bool) -> np.ndarray:
    """クロージャを格子点上で評価する"""
    x1, x2, x3, t = grid.broadcast_coordinates()
    values = np.asarray(fn(x1, x2, x3, t), dtype=float)
    shape = grid.shape + ((3,) if vector else ())
    return np.ascontiguousarray(np.broadcast_to(values, shape), dtype=np.float64)


def spatial_derivative(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    """空間微分。内部は2次中心差分、格子面では2次片側差分"""
    return np.gradient(a, h, axis=axis + 1, edge_order=2)


def convective_term(u: np.ndarray, h: float) -> np.ndarray:
    """(u·∇)u。u は (L, nx, ny, nz, 3)"""
    out = np.zeros(u.shape)
    for comp in range(3):
        for axis in range(3):
            out[..., comp] += u[..., axis] * spatial_derivative(u[..., comp], h, axis)
    return out


def divergence_of(v: np.ndarray, h: float) -> np.ndarray:
    """ベクトル場 (L, nx, ny, nz, 3) の発散"""
    return sum(spatial_derivative(v[..., i], h, i) for i in range(3))


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """格子上の速度・圧力・外力のサンプル（構築後は不変）"""
    grid: GridSpec
    u: np.ndarray
    p: np.ndarray
    f: np.ndarray
    analytic: Optional[AnalyticFields] = None
    name: str = "field"
    div_tol: float = math.inf
    boundary_tol: float = math.inf
    exclusions: Tuple[Tuple[Vector3, float], ...] = ()
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        shape = self.grid.shape
        expected = {'u': shape + (3,), 'p': shape, 'f': shape + (3,)}
        for key, want in expected.items():
            arr = np.asarray(getattr(self, key), dtype=np.float64)
            if arr.shape != want:
                raise ConfigurationError(f"{key} の形状 {arr.shape} が格子 {want} と一致しません")
            arr = np.array(arr, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)

    # 派生量（遅延評価してキャッシュする）
    @cached_property
    def speed(self) -> np.ndarray:
        """|u|"""
        return np.sqrt(np.sum(self.u ** 2, axis=-1))

    @cached_property
    def grad_u_norm(self) -> np.ndarray:
        """|∇u|（フロベニウスノルム）"""
        total = np.zeros(self.grid.shape)
        for comp in range(3):
            for axis in range(3):
                total += spatial_derivative(self.u[..., comp], self.grid.h, axis) ** 2
        return np.sqrt(total)

    @cached_property
    def grad_p(self) -> np.ndarray:
        return np.stack([spatial_derivative(self.p, self.grid.h, axis) for axis in range(3)], axis=-1)

    @cached_property
    def grad_p_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.grad_p ** 2, axis=-1))

    @cached_property
    def convective(self) -> np.ndarray:
        """(u·∇)u"""
        return convective_term(self.u, self.grid.h)

    @cached_property
    def convective_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.convective ** 2, axis=-1))

    @cached_property
    def forcing_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.f ** 2, axis=-1))

    @cached_property
    def divergence(self) -> np.ndarray:
        return divergence_of(self.u, self.grid.h)

    def with_samples(self, **changes) -> "SpaceTimeField":
        """サンプルや属性を置き換えた新しい場を返す"""
        return replace(self, **changes)


def check_invariants(field_: SpaceTimeField) -> Dict[str, float]:
    """離散発散（内部格子点）と x3=0 面での |u| の最大値を測る"""
    grid = field_.grid
    interior = field_.divergence[:, 1:-1, 1:-1, 1:-1]
    mask = np.ones(interior.shape[1:], dtype=bool)
    if field_.exclusions:
        x1, x2, x3 = grid.spatial_mesh()
        for center, radius in field_.exclusions:
            dist = np.sqrt((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2 + (x3 - center[2]) ** 2)
            mask &= dist[1:-1, 1:-1, 1:-1] > radius
    div_max = float(np.max(np.abs(interior[:, mask]))) if mask.any() else 0.0
    boundary = 0.0
    if grid.half_space:
        boundary = float(np.max(field_.speed[:, :, :, 0]))
    return {'divergence': div_max, 'boundary_trace': boundary}


def validate_invariants(field_: SpaceTimeField) -> Dict[str, float]:
    """宣言された許容値を超えていれば ConfigurationError"""
    measured = check_invariants(field_)
    if measured['divergence'] > field_.div_tol:
        raise ConfigurationError(
            f"{field_.name}: 離散発散 {measured['divergence']:.3e} が許容値 {field_.div_tol:.3e} を超えています")
    if field_.grid.half_space and measured['boundary_trace'] > field_.boundary_tol:
        raise ConfigurationError(
            f"{field_.name}: 境界トレース {measured['boundary_trace']:.3e} が許容値 {field_.boundary_tol:.3e} を超えています")
    return measured


def scale_field(field_: SpaceTimeField, s: float) -> SpaceTimeField:
    """u_s(x,t) = s·u(sx, s²t), p_s = s²·p(sx, s²t), f_s = s³·f(sx, s²t)

    u と f は解析的クロージャから再サンプルする。圧力にクロージャがなければ、
    新しい格子の各点が元の格子点に一致することを使ってサンプルを s² 倍する。

    Raises:
        UnsupportedOperationError: 解析的クロージャがない場合
    """
    if not (s > 0):
        raise ConfigurationError(f"スケール s={s} は正でなければなりません")
    closure = field_.analytic
    if closure is None:
        raise UnsupportedOperationError(f"{field_.name}: 解析的クロージャがないためスケーリングできません")

    u_fn = closure.u

    def u_s(x1, x2, x3, t):
        return s * u_fn(s * x1, s * x2, s * x3, s * s * t)

    p_s = None
    if closure.p is not None:
        p_fn = closure.p

        def p_s(x1, x2, x3, t):
            return s * s * p_fn(s * x1, s * x2, s * x3, s * s * t)

    f_s = None
    if closure.f is not None:
        f_fn = closure.f

        def f_s(x1, x2, x3, t):
            return s ** 3 * f_fn(s * x1, s * x2, s * x3, s * s * t)

    grid = field_.grid.scaled(s)
    u = sample_closure(u_s, grid, vector=True)
    p = sample_closure(p_s, grid, vector=False) if p_s is not None else s * s * field_.p
    f = sample_closure(f_s, grid, vector=True) if f_s is not None else s ** 3 * field_.f

    metadata = dict(field_.metadata)
    metadata['scale'] = metadata.get('scale', 1.0) * s
    exclusions = tuple((tuple(c / s for c in center), radius / s) for center, radius in field_.exclusions)
    return SpaceTimeField(
        grid=grid, u=u, p=p, f=f, analytic=AnalyticFields(u=u_s, p=p_s, f=f_s),
        name=f"{field_.name}@s={s:g}", div_tol=field_.div_tol * s * s,
        boundary_tol=field_.boundary_tol * s, exclusions=exclusions, metadata=metadata,
    )


def nse_residual(field_: SpaceTimeField, point: SpaceTimePoint) -> np.ndarray:
    """中心差分で u_t − Δu + (u·∇)u + ∇p − f を評価する

    Raises:
        RangeError: 点が格子面から2セル以内にある場合
    """
    grid = field_.grid
    n, i, j, k = grid.nearest_node(point)
    limits = (grid.nt,) + grid.counts
    for idx, size, label in zip((n, i, j, k), limits, ('t', 'x1', 'x2', 'x3')):
        if idx < 2 or idx > size - 3:
            raise RangeError(f"残差ステンシルが格子外です ({label} 添字 {idx}, 格子点数 {size})")

    u, p, f = field_.u, field_.p, field_.f
    h, dt = grid.h, grid.dt
    here = (n, i, j, k)

    def shifted(arr, axis, offset):
        idx = list(here)
        idx[axis] += offset
        return arr[tuple(idx)]

    u_t = (shifted(u, 0, 1) - shifted(u, 0, -1)) / (2.0 * dt)
    lap = sum((shifted(u, a, 1) - 2.0 * u[here] + shifted(u, a, -1)) / h ** 2 for a in (1, 2, 3))
    conv = sum(u[here][a - 1] * (shifted(u, a, 1) - shifted(u, a, -1)) / (2.0 * h) for a in (1, 2, 3))
    grad_p = np.array([(shifted(p, a, 1) - shifted(p, a, -1)) / (2.0 * h) for a in (1, 2, 3)])
    return u_t - lap + conv + grad_p - f[here]
