# -*- coding: utf-8 -*-
"""
不等式の比検査モジュール

各不等式を「左辺 / 定数 N を除いた右辺」の無次元比として評価する。
0/0 は 0（フラグ付き）、x/0 (x>0) は無限大フラグ付きで記録する。
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from error_handler import ConfigurationError, DomainError, PreconditionError
from exponents import INF, ExponentSet, LMPair, PQPair, Sec4Case, interp_L4_exponents, interp_sec4_exponents
from fields import SpaceTimeField, SpaceTimePoint
from functionals import (DEFAULT_QUADRATURE, cylinder_at, functional_A, functional_C, functional_D1_tilde,
                         functional_D_tilde, functional_E, functional_G)
from mixed_norms import ClipMode, QuadratureConfig, get_rule, infer_clip, mixed_norm_from_values
from pressure import D1Split

logger = logging.getLogger(__name__)


class CheckMode(enum.Enum):
    BOUNDARY = "boundary"
    INTERIOR = "interior"


@dataclass(frozen=True)
class RatioRecord:
    """不等式1つ分の比の記録"""
    name: str
    r: float
    lhs: float
    rhs_without_N: float
    ratio: float
    infinite: bool = False
    zero_over_zero: bool = False
    context: Dict = field(default_factory=dict)
    details: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'kind': 'ratio', 'name': self.name, 'r': self.r, 'lhs': self.lhs,
            'rhs_without_N': self.rhs_without_N,
            'ratio': "inf" if self.infinite else self.ratio,
            'infinite': self.infinite, 'zero_over_zero': self.zero_over_zero,
            'context': self.context, 'details': self.details,
        }


def make_ratio(name: str, r: float, lhs: float, rhs: float, context: Optional[Dict] = None,
               **details) -> RatioRecord:
    """比を作る。0/0 → 0、x/0 → 無限大フラグ"""
    lhs, rhs = float(lhs), float(rhs)
    if lhs < 0 or rhs < 0 or not (math.isfinite(lhs) and math.isfinite(rhs)):
        raise DomainError(f"{name}: 左辺 {lhs} と右辺 {rhs} は有限な非負値でなければなりません")
    zero_over_zero = infinite = False
    if rhs == 0.0:
        if lhs == 0.0:
            ratio, zero_over_zero = 0.0, True
        else:
            ratio, infinite = math.inf, True
            logger.warning(f"{name}: 右辺が 0 で左辺が {lhs:.3e} です（比は無限大）")
    else:
        ratio = lhs / rhs
    return RatioRecord(name=name, r=float(r), lhs=lhs, rhs_without_N=rhs, ratio=ratio, infinite=infinite,
                       zero_over_zero=zero_over_zero, context=dict(context or {}), details=details)


def _context(field_: SpaceTimeField, z: SpaceTimePoint, **extra) -> Dict:
    ctx = {'center': z.to_dict(), 'field': field_.name}
    ctx.update(extra)
    return ctx


def _require_clip(field_: SpaceTimeField, z: SpaceTimePoint, want: ClipMode, name: str):
    got = infer_clip(field_.grid, z)
    if got is not want:
        raise PreconditionError(f"{name} には{'境界' if want is ClipMode.HALF else '内部'}中心が必要です (中心 {z.x})")


def basiclemma_identities(exponents: ExponentSet) -> Dict[str, float]:
    """L³ 評価の証明で使う指数 α = 1/q, β = (1−1/q)/3, δ = 1/p と恒等式の残差"""
    p, q = exponents.p, exponents.q
    alpha, beta, delta = 1.0 / q, (1.0 - 1.0 / q) / 3.0, 1.0 / p
    residuals = {
        '2α+6β+pδ=3': 2.0 * alpha + 6.0 * beta + p * delta - 3.0,
        '3β+1/q=1': 3.0 * beta + 1.0 / q - 1.0,
    }
    for key, res in residuals.items():
        if abs(res) > 1e-12:
            raise DomainError(f"指数恒等式 {key} が満たされていません (残差={res:.3e})")
    return {'alpha': alpha, 'beta': beta, 'delta': delta, **{f"residual {k}": v for k, v in residuals.items()}}


def check_basiclemma(field_: SpaceTimeField, z: SpaceTimePoint, r: float, exponents: ExponentSet,
                     cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatioRecord:
    """C(r) ≤ N·A^{1/q}·E^{1−1/q}·G（境界中心）"""
    _require_clip(field_, z, ClipMode.HALF, "basiclemma")
    identities = basiclemma_identities(exponents)
    q = exponents.q
    A = functional_A(field_, z, r, cfg)
    C = functional_C(field_, z, r, cfg)
    E = functional_E(field_, z, r, cfg)
    G = functional_G(field_, z, r, exponents, cfg)
    rhs = A ** (1.0 / q) * E ** (1.0 - 1.0 / q) * G
    return make_ratio("basiclemma", r, C, rhs, _context(field_, z, exponents=exponents.to_dict()),
                      A=A, C=C, E=E, G=G, identities=identities)


def check_interior_l3(field_: SpaceTimeField, z: SpaceTimePoint, r: float, exponents: ExponentSet,
                      cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatioRecord:
    """C ≤ N(A^{1/q}E^{1−1/q}G + A^{1/2}G²)（内部中心）"""
    _require_clip(field_, z, ClipMode.INTERIOR, "interior_l3")
    q = exponents.q
    A = functional_A(field_, z, r, cfg)
    C = functional_C(field_, z, r, cfg)
    E = functional_E(field_, z, r, cfg)
    G = functional_G(field_, z, r, exponents, cfg)
    rhs = A ** (1.0 / q) * E ** (1.0 - 1.0 / q) * G + math.sqrt(A) * G ** 2
    return make_ratio("interior_l3", r, C, rhs, _context(field_, z, exponents=exponents.to_dict()),
                      A=A, C=C, E=E, G=G)


# 局所エネルギー不等式

def _bump(s: np.ndarray):
    """b(s) = (1−s²)⁴ とその1階・2階微分（|s| ≥ 1 で 0）"""
    inside = np.abs(s) < 1.0
    w = np.where(inside, 1.0 - s * s, 0.0)
    b = w ** 4
    db = np.where(inside, -8.0 * s * w ** 3, 0.0)
    d2b = np.where(inside, -8.0 * w ** 3 + 48.0 * s * s * w ** 2, 0.0)
    return b, db, d2b


@dataclass(frozen=True)
class Cutoff:
    """1次元の山の積 ψ(x) と滑らかな立ち上がり χ(t) の積 φ = χψ

    ψ の台は center の周りの一辺 2·radius の箱、χ は t_start で 0、t_ramp_end で 1。
    """
    center: tuple
    radius: float
    t_start: float
    t_ramp_end: float

    def __post_init__(self):
        if not (self.radius > 0):
            raise ConfigurationError(f"カットオフ半径 {self.radius} は正でなければなりません")
        if not (self.t_ramp_end > self.t_start):
            raise ConfigurationError("カットオフの立ち上がり区間が空です")

    def spatial(self, grid):
        """ψ, ∇ψ (3成分), Δψ を格子点で返す"""
        factors = []
        for axis in range(3):
            s = (grid.axis(axis) - self.center[axis]) / self.radius
            b, db, d2b = _bump(s)
            factors.append((b, db / self.radius, d2b / self.radius ** 2))

        def outer(a, b, c):
            return a[:, None, None] * b[None, :, None] * c[None, None, :]

        (b1, d1, e1), (b2, d2, e2), (b3, d3, e3) = factors
        psi = outer(b1, b2, b3)
        grad = [outer(d1, b2, b3), outer(b1, d2, b3), outer(b1, b2, d3)]
        lap = outer(e1, b2, b3) + outer(b1, e2, b3) + outer(b1, b2, e3)
        return psi, grad, lap

    def temporal(self, t: float):
        """χ(t), χ'(t)"""
        span = self.t_ramp_end - self.t_start
        tau = min(max((t - self.t_start) / span, 0.0), 1.0)
        chi = tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)
        dchi = 30.0 * tau * tau * (1.0 - tau) ** 2 / span
        return chi, dchi

    def validate(self, grid, t_top: float):
        """台が領域内にあり、初期時刻の近くで消えることを確かめる"""
        lower, upper = np.asarray(grid.origin), np.asarray(grid.upper)
        c = np.asarray(self.center)
        tol = 1e-9 * grid.h
        for axis in range(3):
            below = c[axis] - self.radius < lower[axis] - tol
            above = c[axis] + self.radius > upper[axis] + tol
            if axis == 2 and below and grid.half_space:
                below = False  # 平らな境界 Γ 上では φ は消えなくてよい
            if below or above:
                raise ConfigurationError(f"カットオフの台が格子面（軸 {axis + 1}）を越えています")
        if self.t_start < grid.t0 - 1e-9 * grid.dt:
            raise ConfigurationError("カットオフは初期時刻の近くで 0 でなければなりません")
        if self.t_ramp_end > t_top + 1e-9 * grid.dt:
            raise ConfigurationError("カットオフの立ち上がりが評価時刻を越えています")


def default_cutoff(z: SpaceTimePoint, r: float) -> Cutoff:
    """台 B(x, r) を含む箱、時間 (t−r², t−r²/4) で立ち上がるカットオフ"""
    return Cutoff(center=z.x, radius=r, t_start=z.t - r * r, t_ramp_end=z.t - 0.25 * r * r)


def _trapezoid_weights(n: int, step: float) -> np.ndarray:
    w = np.full(n, step)
    w[0] = w[-1] = 0.5 * step
    return w


def energy_balance(field_: SpaceTimeField, t_top: float, cutoff: Cutoff) -> Dict[str, float]:
    """局所エネルギー不等式の両辺を格子点上の台形則で評価する"""
    grid = field_.grid
    n_top = int(round((t_top - grid.t0) / grid.dt))
    if n_top < 1 or n_top >= grid.nt or abs(grid.t0 + n_top * grid.dt - t_top) > 1e-9 * grid.dt:
        raise ConfigurationError(f"評価時刻 t={t_top} は格子の時間点でなければなりません")
    cutoff.validate(grid, t_top)

    psi, grad_psi, lap_psi = cutoff.spatial(grid)
    wx = [_trapezoid_weights(n, grid.h) for n in grid.counts]
    space_w = wx[0][:, None, None] * wx[1][None, :, None] * wx[2][None, None, :]
    time_w = _trapezoid_weights(n_top + 1, grid.dt)

    dissipation = 0.0
    rhs = 0.0
    for n in range(n_top + 1):
        chi, dchi = cutoff.temporal(grid.t0 + n * grid.dt)
        if chi == 0.0 and dchi == 0.0:
            continue
        u = field_.u[n]
        u2 = np.sum(u ** 2, axis=-1)
        u_dot_grad = sum(u[..., i] * grad_psi[i] for i in range(3))
        f_dot_u = np.sum(field_.f[n] * u, axis=-1)
        integrand = (u2 * (dchi * psi + chi * lap_psi) + (u2 + 2.0 * field_.p[n]) * chi * u_dot_grad
                     + 2.0 * chi * psi * f_dot_u)
        rhs += time_w[n] * float(np.sum(integrand * space_w))
        dissipation += time_w[n] * float(np.sum(field_.grad_u_norm[n] ** 2 * chi * psi * space_w))

    chi_top, _ = cutoff.temporal(t_top)
    kinetic = float(np.sum(np.sum(field_.u[n_top] ** 2, axis=-1) * chi_top * psi * space_w))
    lhs = kinetic + 2.0 * dissipation
    return {'lhs': lhs, 'rhs': rhs, 'kinetic': kinetic, 'dissipation': dissipation, 'residual': rhs - lhs}


def check_energy_inequality(field_: SpaceTimeField, z: SpaceTimePoint, r: float,
                            cutoff: Optional[Cutoff] = None) -> RatioRecord:
    """局所エネルギー不等式。details['residual'] = rhs − lhs（適合弱解なら ≥ −tol）"""
    cutoff = cutoff or default_cutoff(z, r)
    balance = energy_balance(field_, z.t, cutoff)
    # 右辺は負にもなりうるので比は絶対値で取る
    record = make_ratio("energy", r, balance['lhs'], abs(balance['rhs']), _context(field_, z),
                        residual=balance['residual'], rhs_signed=balance['rhs'],
                        kinetic=balance['kinetic'], dissipation=balance['dissipation'],
                        cutoff={'center': list(cutoff.center), 'radius': cutoff.radius,
                                't_start': cutoff.t_start, 't_ramp_end': cutoff.t_ramp_end})
    logger.debug(f"エネルギー残差 rhs−lhs = {balance['residual']:.3e}")
    return record


def check_energy_consequence(field_: SpaceTimeField, z: SpaceTimePoint, r: float, gamma: float,
                             morrey_value: float, exponents: ExponentSet,
                             cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatioRecord:
    """A(r/2)+E(r/2) ≤ N(C(r)^{2/3}+C(r)+G(r)D̃(r)+r^{2(γ+1)}m_γ²)"""
    half = 0.5 * r
    lhs = functional_A(field_, z, half, cfg) + functional_E(field_, z, half, cfg)
    C = functional_C(field_, z, r, cfg)
    G = functional_G(field_, z, r, exponents, cfg)
    Dt = functional_D_tilde(field_, z, r, exponents, cfg)
    forcing = r ** (2.0 * (gamma + 1.0)) * morrey_value ** 2
    rhs = C ** (2.0 / 3.0) + C + G * Dt + forcing
    return make_ratio("energy_consequence", r, lhs, rhs,
                      _context(field_, z, exponents=exponents.to_dict(), gamma=gamma, morrey=morrey_value),
                      C=C, G=G, D_tilde=Dt, forcing_term=forcing)


def check_nonlinear_term(field_: SpaceTimeField, z: SpaceTimePoint, rho: float, exponents: ExponentSet,
                         mode="boundary", cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatioRecord:
    """‖(u·∇)u‖_{L^{κ,λ}(Q_ρ)} ≤ N·ρ·E^{1/λ}·A^{(3−2κ)/(2κ)}（内部では項を1つ追加）"""
    mode = CheckMode(mode)
    kappa, lam = exponents.kappa, exponents.lam
    rule = get_rule(field_.grid, cylinder_at(field_, z, rho), cfg)
    lhs = mixed_norm_from_values(rule.cell_values(field_.convective_norm), rule, PQPair(kappa, lam))
    A = functional_A(field_, z, rho, cfg)
    E = functional_E(field_, z, rho, cfg)
    rhs = rho * E ** (1.0 / lam) * A ** ((3.0 - 2.0 * kappa) / (2.0 * kappa))
    extra = {}
    if mode is CheckMode.INTERIOR:
        G = functional_G(field_, z, rho, exponents, cfg)
        middle = rho * math.sqrt(E) * A ** ((2.0 - kappa) / (2.0 * kappa)) * G ** ((kappa - 1.0) / kappa)
        rhs += middle
        extra = {'G': G, 'interior_term': middle}
    return make_ratio(f"nonlinear_{mode.value}", rho, lhs, rhs,
                      _context(field_, z, exponents=exponents.to_dict(), mode=mode.value), A=A, E=E, **extra)


# 補間不等式（測度を1に正規化して比較する）

def weighted_product(norms, weights) -> float:
    """Π norm_i^{w_i}。どれかのノルムが 0 なら 0（負の重みでも発散させない）"""
    if any(n == 0.0 for n in norms):
        return 0.0
    return float(np.prod([n ** w for n, w in zip(norms, weights)]))


def _normalized_norms(field_: SpaceTimeField, z: SpaceTimePoint, r: float, pairs,
                      cfg: QuadratureConfig) -> list:
    rule = get_rule(field_.grid, cylinder_at(field_, z, r), cfg)
    values = rule.cell_values(field_.speed)
    return [mixed_norm_from_values(values, rule, pq, normalized=True) for pq in pairs]


def check_L4_interpolation(field_: SpaceTimeField, z: SpaceTimePoint, r: float, rs: PQPair,
                           cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatioRecord:
    """‖u‖_{L⁴} ≤ ‖u‖^{1/2}_{r,s}·‖u‖^{1/q}_{2,∞}·‖u‖^{3/(2p)}_{6,2}（p=r, q=s と読む）"""
    weights = interp_L4_exponents(rs)
    l4, n_rs, n_2inf, n_62 = _normalized_norms(
        field_, z, r, [PQPair(4.0, 4.0), rs, PQPair(2.0, INF), PQPair(6.0, 2.0)], cfg)
    w = weights.as_tuple()
    rhs = weighted_product((n_rs, n_2inf, n_62), w)
    return make_ratio("l4_interpolation", r, l4, rhs, _context(field_, z, rs=rs.to_dict()),
                      weights=list(w), endpoint=weights.endpoint, pairing_ambiguous=weights.pairing_ambiguous)


def check_sec4_interpolation(field_: SpaceTimeField, z: SpaceTimePoint, r: float, lm: LMPair,
                             cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatioRecord:
    """‖u‖_{L⁴} ≤ ‖u‖^σ_{l,m}·‖u‖^{(6−α)(1−σ)/(2α)}_{2,∞}·‖u‖^{2(1−σ)/β}_{6,2}

    l>m のケースでは ‖u‖_{L^k} と ‖u‖_{l,m}, ‖u‖_{2,∞} の比も
    表示どおりの重みとヘルダー整合な重み（(l,m) ノルムに m/k）の両方で記録する。
    """
    exps = interp_sec4_exponents(lm)
    w = exps.weights
    pairs = [PQPair(4.0, 4.0), lm.as_pq(), PQPair(2.0, INF), PQPair(6.0, 2.0)]
    if exps.case is Sec4Case.L_GREATER:
        pairs.append(PQPair(exps.k, exps.k))
    norms = _normalized_norms(field_, z, r, pairs, cfg)
    l4, n_lm, n_2inf, n_62 = norms[:4]
    rhs = weighted_product((n_lm, n_2inf, n_62), (w.weight_lm, w.weight_2inf, w.weight_62))
    details = {'case': exps.case.value, 'alpha': w.alpha, 'beta': w.beta, 'sigma': w.sigma,
               'weights': [w.weight_lm, w.weight_2inf, w.weight_62], 'degenerate': w.degenerate}
    if exps.case is Sec4Case.L_GREATER:
        lk = norms[4]
        sigma = exps.sigma_k
        displayed = make_ratio("sec4_lk_displayed", r, lk, weighted_product((n_lm, n_2inf), (1.0 - sigma, sigma)))
        consistent = make_ratio("sec4_lk_holder", r, lk, weighted_product((n_lm, n_2inf), (sigma, 1.0 - sigma)))
        details.update({'k': exps.k, 'sigma_k': sigma,
                        'lk_displayed_ratio': "inf" if displayed.infinite else displayed.ratio,
                        'lk_holder_ratio': "inf" if consistent.infinite else consistent.ratio})
    return make_ratio("sec4_interpolation", r, l4, rhs, _context(field_, z, lm=lm.to_dict()), **details)


def check_l24_interpolation(field_: SpaceTimeField, z: SpaceTimePoint, r: float,
                            cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatioRecord:
    """‖u‖_{L^{2,4}} ≤ ‖u‖^{1/2}_{L^{2,∞}}·‖u‖^{1/2}_{L^{2,2}}"""
    l24, n_2inf, n_22 = _normalized_norms(
        field_, z, r, [PQPair(2.0, 4.0), PQPair(2.0, INF), PQPair(2.0, 2.0)], cfg)
    return make_ratio("l24_interpolation", r, l24, math.sqrt(n_2inf * n_22), _context(field_, z))


def check_pressure_bound(field_: SpaceTimeField, z: SpaceTimePoint, r: float, rho: float,
                         exponents: ExponentSet, gamma: float = 1.0, morrey_value: float = 0.0,
                         mode="boundary", d1_values: Optional[D1Split] = None,
                         cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatioRecord:
    """D̃₁(r) ≤ N[(ρ/r)(E^{1/λ}(ρ)A^{(3−2κ)/(2κ)}(ρ)+ρ^{γ+1}m_γ) + (r/ρ)(E^{1/2}(ρ)+D̃₁(ρ))]

    内部モードでは (ρ/r)·E^{1/2}A^{(2−κ)/(2κ)}G^{(κ−1)/κ}(ρ) を加える。

    Raises:
        PreconditionError: r > ρ/4 の場合
    """
    mode = CheckMode(mode)
    if not (0.0 < r <= 0.25 * rho * (1.0 + 1e-12)):
        raise PreconditionError(f"圧力評価には 0 < r ≤ ρ/4 が必要です (r={r}, ρ={rho})")
    kappa, lam = exponents.kappa, exponents.lam
    lhs = functional_D1_tilde(field_, z, r, exponents, cfg)
    A = functional_A(field_, z, rho, cfg)
    E = functional_E(field_, z, rho, cfg)
    D1_rho = functional_D1_tilde(field_, z, rho, exponents, cfg)
    outer = E ** (1.0 / lam) * A ** ((3.0 - 2.0 * kappa) / (2.0 * kappa)) + rho ** (gamma + 1.0) * morrey_value
    rhs = (rho / r) * outer + (r / rho) * (math.sqrt(E) + D1_rho)
    details = {'A_rho': A, 'E_rho': E, 'D1_tilde_rho': D1_rho}
    if mode is CheckMode.INTERIOR:
        G = functional_G(field_, z, rho, exponents, cfg)
        middle = (rho / r) * math.sqrt(E) * A ** ((2.0 - kappa) / (2.0 * kappa)) * G ** ((kappa - 1.0) / kappa)
        rhs += middle
        details['interior_term'] = middle
    if d1_values is not None:
        details['d1_split'] = d1_values.to_dict()
    return make_ratio(f"pressure_bound_{mode.value}", r, lhs, rhs,
                      _context(field_, z, exponents=exponents.to_dict(), rho=rho, gamma=gamma,
                               morrey=morrey_value, mode=mode.value), **details)
