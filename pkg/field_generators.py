# -*- coding: utf-8 -*-
"""
解析的な場の生成モジュール

零場、せん断熱流（厳密解）、次数 −1 の斉次プロファイル、
シード付きランダム発散ゼロ場、および合成外力を生成する。
生成器はサンプルと解析的クロージャの両方を持つ場を返し、
クロージャはメタデータから再構築できる。
"""
import logging
import math
from typing import Callable, Dict, Optional

import numpy as np

from error_handler import ConfigurationError
from fields import AnalyticFields, GridSpec, SpaceTimeField, sample_closure, stack_components, validate_invariants

logger = logging.getLogger(__name__)


def _zero_vector(x1, x2, x3, t):
    return stack_components(0.0 * x1, 0.0 * x2, 0.0 * x3 + 0.0 * t)


def _zero_scalar(x1, x2, x3, t):
    return 0.0 * (x1 + x2 + x3 + t)


# クロージャ構築（メタデータからの再構築にも使う）

def _shear_closures(amplitude: float, wavenumber: float) -> AnalyticFields:
    a = wavenumber

    def u(x1, x2, x3, t):
        u1 = amplitude * np.sin(a * x3) * np.exp(-a * a * t)
        return stack_components(u1 + 0.0 * x1 + 0.0 * x2, 0.0 * u1, 0.0 * u1)

    return AnalyticFields(u=u, p=_zero_scalar, f=_zero_vector)


def _homogeneous_closures(amplitude: float, point) -> AnalyticFields:
    c1, c2, c3 = point

    def u(x1, x2, x3, t):
        y1, y2, y3 = x1 - c1, x2 - c2, x3 - c3
        r2 = y1 * y1 + y2 * y2 + y3 * y3
        zero = 0.0 * (r2 + t)
        return stack_components(-amplitude * y2 / r2 + zero, amplitude * y1 / r2 + zero, zero)

    return AnalyticFields(u=u, p=_zero_scalar, f=_zero_vector)


def _random_modes(seed: int, modes: int, max_wavenumber: float) -> Dict[str, np.ndarray]:
    """シードから決定的にモードを引く"""
    rng = np.random.default_rng(seed)
    k = rng.uniform(-max_wavenumber, max_wavenumber, size=(modes, 3))
    a = rng.normal(size=(modes, 3)) / modes
    phase = rng.uniform(0.0, 2.0 * math.pi, size=modes)
    omega = rng.uniform(0.0, 2.0 * math.pi, size=modes)
    psi = rng.uniform(0.0, 2.0 * math.pi, size=modes)
    return {'k': k, 'a': a, 'phase': phase, 'omega': omega, 'psi': psi}


def _random_velocity(modes: Dict[str, np.ndarray], half_space: bool) -> Callable:
    """u = curl(Σ c_j(t)·T(x3)·sin(k_j·x+φ_j)·a_j)

    半空間ではテーパー T = x3²/(1+x3²) を掛け、x3 = 0 で A と ∂3A が消える。
    """
    k, a, phase, omega, psi = modes['k'], modes['a'], modes['phase'], modes['omega'], modes['psi']

    def u(x1, x2, x3, t):
        if half_space:
            taper = x3 * x3 / (1.0 + x3 * x3)
            dtaper = 2.0 * x3 / (1.0 + x3 * x3) ** 2
        else:
            taper, dtaper = 1.0, 0.0
        out = [0.0 * (x1 + x2 + x3 + t)] * 3
        for j in range(len(k)):
            theta = k[j, 0] * x1 + k[j, 1] * x2 + k[j, 2] * x3 + phase[j]
            c = np.cos(omega[j] * t + psi[j])
            cos_t, sin_t = np.cos(theta), np.sin(theta)
            # ∇g = T cosθ k + T' sinθ e3
            g1 = c * taper * cos_t * k[j, 0]
            g2 = c * taper * cos_t * k[j, 1]
            g3 = c * (taper * cos_t * k[j, 2] + dtaper * sin_t)
            aj = a[j]
            out = [
                out[0] + g2 * aj[2] - g3 * aj[1],
                out[1] + g3 * aj[0] - g1 * aj[2],
                out[2] + g1 * aj[1] - g2 * aj[0],
            ]
        return stack_components(*out)

    return u


def _forcing_closure(kind: str, amplitude: float, width: float, center) -> Callable:
    if kind == "constant":
        def f(x1, x2, x3, t):
            zero = 0.0 * (x1 + x2 + x3 + t)
            return stack_components(amplitude + zero, zero, zero)
        return f
    if kind == "gaussian":
        if not (width > 0):
            raise ConfigurationError(f"ガウス外力の幅 width={width} は正でなければなりません")
        c1, c2, c3 = center

        def f(x1, x2, x3, t):
            d2 = (x1 - c1) ** 2 + (x2 - c2) ** 2 + (x3 - c3) ** 2
            bump = amplitude * np.exp(-d2 / (2.0 * width * width)) + 0.0 * t
            return stack_components(bump, 0.0 * bump, 0.0 * bump)
        return f
    raise ConfigurationError(f"外力の種類 kind='{kind}' は 'constant' か 'gaussian' でなければなりません")


def _scaled(fn: Optional[Callable], s: float, power: int) -> Optional[Callable]:
    if fn is None:
        return None

    def g(x1, x2, x3, t):
        return s ** power * fn(s * x1, s * x2, s * x3, s * s * t)

    return g


def closure_from_metadata(grid: GridSpec, metadata: Dict) -> Optional[AnalyticFields]:
    """ファイルのメタデータから解析的クロージャを再構築する（不明な生成器なら None）"""
    name = metadata.get('generator')
    params = metadata.get('params', {})
    if name == 'zero':
        closures = AnalyticFields(u=_zero_vector, p=_zero_scalar, f=_zero_vector)
    elif name == 'shear':
        closures = _shear_closures(float(params['amplitude']), float(params['wavenumber']))
    elif name == 'homogeneous':
        closures = _homogeneous_closures(float(params['amplitude']), tuple(params['singular_point']))
    elif name == 'random':
        modes = _random_modes(int(params['seed']), int(params['modes']), float(params['max_wavenumber']))
        u = _random_velocity(modes, bool(params['half_space']))
        p = _zero_scalar if params.get('pressure') == 'zero' else None
        closures = AnalyticFields(u=u, p=p, f=_zero_vector)
    else:
        return None

    forcing = metadata.get('forcing')
    if forcing:
        f = _forcing_closure(forcing['kind'], float(forcing['amplitude']), float(forcing.get('width', 1.0)),
                             tuple(forcing.get('center', (0.0, 0.0, 0.0))))
        closures = AnalyticFields(u=closures.u, p=closures.p, f=f)

    s = float(metadata.get('scale', 1.0))
    if s != 1.0:
        closures = AnalyticFields(u=_scaled(closures.u, s, 1), p=_scaled(closures.p, s, 2),
                                  f=_scaled(closures.f, s, 3))
    return closures


def _build(grid: GridSpec, closures: AnalyticFields, name: str, metadata: Dict,
           p: Optional[np.ndarray] = None, **tolerances) -> SpaceTimeField:
    u = sample_closure(closures.u, grid, vector=True)
    if p is None:
        p = sample_closure(closures.p, grid, vector=False)
    f = sample_closure(closures.f, grid, vector=True)
    field_ = SpaceTimeField(grid=grid, u=u, p=p, f=f, analytic=closures, name=name, metadata=metadata, **tolerances)
    measured = validate_invariants(field_)
    logger.info(f"場 '{name}' を生成しました: 発散={measured['divergence']:.2e}, "
                f"境界トレース={measured['boundary_trace']:.2e}")
    return field_


def generate_zero(grid: GridSpec) -> SpaceTimeField:
    """全サンプルが 0 の場"""
    closures = AnalyticFields(u=_zero_vector, p=_zero_scalar, f=_zero_vector)
    return _build(grid, closures, "zero", {'generator': 'zero', 'params': {}}, div_tol=0.0, boundary_tol=0.0)


def generate_shear_heat(grid: GridSpec, amplitude: float = 1.0, wavenumber: float = math.pi) -> SpaceTimeField:
    """u = (A·sin(a·x3)·exp(−a²t), 0, 0), p = 0, f = 0 の厳密解

    (u·∇)u = 0 かつ ∂t u = Δu。中心差分の残差は
    residual_constant·(h² + dt²) で抑えられる。

    Raises:
        ConfigurationError: 半空間格子でない場合
    """
    if not grid.half_space:
        raise ConfigurationError("せん断熱流は半空間格子 (half_space=True) でのみ生成できます")
    a = float(wavenumber)
    growth = math.exp(max(0.0, -a * a * grid.t0))
    metadata = {
        'generator': 'shear',
        'params': {'amplitude': float(amplitude), 'wavenumber': a},
        'residual_constant': abs(amplitude) * growth * (a ** 6 / 6.0 + a ** 4 / 12.0),
    }
    return _build(grid, _shear_closures(float(amplitude), a), "shear", metadata,
                  div_tol=1e-12 * max(1.0, abs(amplitude) * a), boundary_tol=1e-12 * max(1.0, abs(amplitude)))


def default_singular_point(grid: GridSpec):
    """箱の中心に最も近い格子点から各軸 h/2 ずらした点"""
    center = np.asarray(grid.origin) + 0.5 * (np.asarray(grid.counts) - 1) * grid.h
    node = np.asarray(grid.origin) + np.rint((center - np.asarray(grid.origin)) / grid.h) * grid.h
    return tuple(float(v) for v in node + 0.5 * grid.h)


def generate_homogeneous_profile(grid: GridSpec, amplitude: float = 1.0, singular_point=None) -> SpaceTimeField:
    """u = A·(−y2, y1, 0)/|y|²（y = x − c）の時間に依存しない次数 −1 のプロファイル

    NSE の解ではない。特異点から 8h 以内は離散発散の検査から除く。

    Raises:
        ConfigurationError: 半空間格子の場合、または特異点が格子点に一致する場合
    """
    if grid.half_space:
        raise ConfigurationError("斉次プロファイルは内部格子 (half_space=False) 専用です")
    point = tuple(float(v) for v in (singular_point if singular_point is not None else default_singular_point(grid)))
    if grid.is_node(point):
        raise ConfigurationError(f"特異点 {point} が格子点に一致しています")
    metadata = {
        'generator': 'homogeneous',
        'params': {'amplitude': float(amplitude), 'singular_point': list(point)},
    }
    return _build(grid, _homogeneous_closures(float(amplitude), point), "homogeneous", metadata,
                  div_tol=0.05 * abs(amplitude) / grid.h ** 2, boundary_tol=math.inf,
                  exclusions=((point, 8.0 * grid.h),))


def generate_divfree_random(grid: GridSpec, seed: int, modes: int = 4, pressure: str = "poisson",
                            max_wavenumber: float = 2.0 * math.pi, workers: int = 1) -> SpaceTimeField:
    """シード付きランダムベクトルポテンシャルの回転として発散ゼロ場を作る

    Args:
        grid: 格子
        seed: 乱数シード（同じシードなら同じバイト列）
        modes: フーリエモード数
        pressure: "poisson"（箱上の圧力ポアソン方程式を解く）または "zero"
        max_wavenumber: 波数成分の上限
        workers: ポアソン求解のスレッド数

    Returns:
        mode_constant をメタデータに持つ場。離散発散は 10·h²·mode_constant 以下
    """
    if modes < 1:
        raise ConfigurationError(f"modes={modes} は1以上でなければなりません")
    if pressure not in ("poisson", "zero"):
        raise ConfigurationError(f"pressure='{pressure}' は 'poisson' か 'zero' でなければなりません")
    drawn = _random_modes(int(seed), int(modes), float(max_wavenumber))
    mode_constant = float(sum(np.sum(np.abs(a)) * (np.linalg.norm(k) + 3.0) ** 4
                              for k, a in zip(drawn['k'], drawn['a'])))
    u_fn = _random_velocity(drawn, grid.half_space)
    closures = AnalyticFields(u=u_fn, p=_zero_scalar if pressure == "zero" else None, f=_zero_vector)
    metadata = {
        'generator': 'random',
        'params': {'seed': int(seed), 'modes': int(modes), 'max_wavenumber': float(max_wavenumber),
                   'half_space': grid.half_space, 'pressure': pressure},
        'mode_constant': mode_constant,
        'pressure_zero_flag': pressure == "zero",
    }
    p = None
    if pressure == "poisson":
        # 循環 import を避けるため遅延 import
        from pressure import pressure_from_velocity
        u = sample_closure(u_fn, grid, vector=True)
        p = pressure_from_velocity(grid, u, np.zeros(u.shape), workers=workers)
    return _build(grid, closures, f"random-{seed}", metadata, p=p,
                  div_tol=10.0 * grid.h ** 2 * mode_constant, boundary_tol=1e-12)


def with_forcing(field_: SpaceTimeField, kind: str = "constant", amplitude: float = 1.0, width: float = 1.0,
                 center=(0.0, 0.0, 0.0)) -> SpaceTimeField:
    """e1 方向の合成外力（一定値またはガウス形の山）を付け加える"""
    f_fn = _forcing_closure(kind, float(amplitude), float(width), tuple(center))
    f = sample_closure(f_fn, field_.grid, vector=True)
    closures = None
    if field_.analytic is not None:
        closures = AnalyticFields(u=field_.analytic.u, p=field_.analytic.p, f=f_fn)
    metadata = dict(field_.metadata)
    metadata['forcing'] = {'kind': kind, 'amplitude': float(amplitude), 'width': float(width),
                           'center': [float(c) for c in center]}
    return field_.with_samples(f=f, analytic=closures, metadata=metadata, name=f"{field_.name}+f")


GENERATORS: Dict[str, Callable[..., SpaceTimeField]] = {
    'zero': generate_zero,
    'shear': generate_shear_heat,
    'homogeneous': generate_homogeneous_profile,
    'random': generate_divfree_random,
}


def generate(name: str, grid: GridSpec, **params) -> SpaceTimeField:
    """名前で生成器を呼ぶ"""
    try:
        generator = GENERATORS[name]
    except KeyError:
        raise ConfigurationError(f"未知の生成器 '{name}' です（{', '.join(GENERATORS)} のいずれか）") from None
    return generator(grid, **params)
