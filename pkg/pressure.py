# -*- coding: utf-8 -*-
"""
内部圧力分解モジュール

p = p₁ + p₂ + (スラブ平均) と分解する。p₁ は球を囲む部分箱で
Δp₁ = div(f − (u·∇)u)（ゼロ Dirichlet）を解いたもの、p₂ は残りで、
離散的に調和であるかを検査する。
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from config import MIN_INTERIOR_CELLS, POISSON_TOL
from error_handler import ConfigurationError, RangeError, SolverError
from exponents import ExponentSet, PQPair
from fields import GridSpec, SpaceTimeField, SpaceTimePoint, convective_term, divergence_of, spatial_derivative
from mixed_norms import ClipMode, ParabolicCylinder, QuadratureConfig, get_rule, mixed_norm_from_values
from performance_utils import BatchProcessor, monitor

logger = logging.getLogger(__name__)


def poisson_source(u: np.ndarray, f: np.ndarray, h: float) -> np.ndarray:
    """圧力ポアソン方程式の右辺 div(f − (u·∇)u)"""
    return divergence_of(f - convective_term(u, h), h)


def laplacian_matrix(shape: Tuple[int, int, int], h: float) -> sp.csc_matrix:
    """内部未知数 shape に対するゼロ Dirichlet の7点ラプラシアン"""
    def second_difference(n):
        return sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format='csr')

    nx, ny, nz = shape
    ix, iy, iz = sp.identity(nx, format='csr'), sp.identity(ny, format='csr'), sp.identity(nz, format='csr')
    lap = (sp.kron(sp.kron(second_difference(nx), iy), iz)
           + sp.kron(sp.kron(ix, second_difference(ny)), iz)
           + sp.kron(sp.kron(ix, iy), second_difference(nz)))
    return (lap / h ** 2).tocsc()


def discrete_laplacian(a: np.ndarray, h: float) -> np.ndarray:
    """(L, nx, ny, nz) 配列の内部点での7点ラプラシアン (L, nx-2, ny-2, nz-2)"""
    c = a[:, 1:-1, 1:-1, 1:-1]
    return (a[:, 2:, 1:-1, 1:-1] + a[:, :-2, 1:-1, 1:-1]
            + a[:, 1:-1, 2:, 1:-1] + a[:, 1:-1, :-2, 1:-1]
            + a[:, 1:-1, 1:-1, 2:] + a[:, 1:-1, 1:-1, :-2] - 6.0 * c) / h ** 2


class DirichletPoissonSolver:
    """箱上のゼロ Dirichlet ポアソン方程式を LU 分解で解く（分解は再利用する）"""

    def __init__(self, box_shape: Tuple[int, int, int], h: float, workers: int = 1):
        if min(box_shape) < 3:
            raise ConfigurationError(f"ポアソン箱 {box_shape} は各軸3点以上が必要です")
        self.box_shape = box_shape
        self.h = h
        self.interior_shape = tuple(n - 2 for n in box_shape)
        self.matrix = laplacian_matrix(self.interior_shape, h)
        self.lu = splu(self.matrix)
        self.workers = workers

    def solve(self, rhs: np.ndarray) -> Tuple[np.ndarray, float]:
        """各スラブを独立に解く

        Args:
            rhs: (L, bx, by, bz) の右辺（境界値は使わない）

        Returns:
            (解 (L, bx, by, bz), 相対残差の最大値)
        """
        interior = rhs[:, 1:-1, 1:-1, 1:-1]
        solution = np.zeros(rhs.shape)

        def solve_slab(n):
            b = interior[n].ravel()
            x = self.lu.solve(b)
            scale = float(np.max(np.abs(b))) if b.size else 0.0
            res = float(np.max(np.abs(self.matrix @ x - b))) if b.size else 0.0
            return x.reshape(self.interior_shape), (res / scale if scale > 0 else res)

        results = BatchProcessor(workers=self.workers).process_in_batches(list(range(rhs.shape[0])), solve_slab)
        residual = 0.0
        for n, (x, res) in enumerate(results):
            solution[n, 1:-1, 1:-1, 1:-1] = x
            residual = max(residual, res)
        return solution, residual


@monitor.measure_time("pressure_from_velocity")
def pressure_from_velocity(grid: GridSpec, u: np.ndarray, f: np.ndarray, workers: int = 1) -> np.ndarray:
    """格子全体の箱で圧力ポアソン方程式を解いた圧力（箱の面でゼロ）"""
    solver = DirichletPoissonSolver(grid.counts, grid.h, workers=workers)
    p, residual = solver.solve(poisson_source(u, f, grid.h))
    if residual > POISSON_TOL:
        raise SolverError("圧力ポアソン方程式が許容誤差内で解けませんでした", residual)
    logger.debug(f"圧力ポアソン残差: {residual:.3e}")
    return p


@dataclass(frozen=True, eq=False)
class PressureSplit:
    """内部圧力分解の結果

    p₂ はスラブごとに球上の平均を引いて正規化し、p₁ は正規化しない。
    """
    grid: GridSpec
    center: SpaceTimePoint
    rho: float
    box_lo: Tuple[int, int, int]
    box_hi: Tuple[int, int, int]
    levels: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    slab_means: np.ndarray
    harmonic_residual: float
    poisson_residual: float
    ball_mask: np.ndarray
    normalization: str = "p2 mean-free over the ball per slab; p1 unnormalized"

    def reconstruct(self) -> np.ndarray:
        """p₁ + p₂ + スラブ平均"""
        return self.p1 + self.p2 + self.slab_means[:, None, None, None]

    def box_slices(self) -> Tuple[slice, slice, slice]:
        return tuple(slice(lo, hi + 1) for lo, hi in zip(self.box_lo, self.box_hi))

    def to_dict(self) -> dict:
        return {
            'kind': 'pressure_split', 'center': self.center.to_dict(), 'rho': self.rho,
            'box_lo': list(self.box_lo), 'box_hi': list(self.box_hi), 'levels': self.levels.tolist(),
            'harmonic_residual': self.harmonic_residual, 'poisson_residual': self.poisson_residual,
            'normalization': self.normalization,
        }


@monitor.measure_time("decompose_interior")
def decompose_interior(field_: SpaceTimeField, z: SpaceTimePoint, rho: float, workers: int = 1) -> PressureSplit:
    """内部球 B_{x,ρ} 上で圧力を分解する

    Raises:
        RangeError: 球が格子面から MIN_INTERIOR_CELLS セル以内にある場合
        SolverError: ポアソン残差が許容誤差を超えた場合
    """
    grid = field_.grid
    h = grid.h
    center = grid.fractional_index(z.x)
    r = rho / h
    n_cells = np.array(grid.counts) - 1
    if np.any(center - r < MIN_INTERIOR_CELLS) or np.any(center + r > n_cells - MIN_INTERIOR_CELLS):
        raise RangeError(f"球 (中心 {z.x}, ρ={rho}) が格子面に近すぎます（{MIN_INTERIOR_CELLS}セル以上の余白が必要）")
    box_lo = np.floor(center - r).astype(int)
    box_hi = np.ceil(center + r).astype(int)

    t_bottom = z.t - rho ** 2
    if t_bottom < grid.t0 - 1e-9 * grid.dt or z.t > grid.t_end + 1e-9 * grid.dt:
        raise RangeError(f"時間区間 ({t_bottom:.6g}, {z.t:.6g}) が格子の時間範囲外です")
    n_first = max(0, int(math.floor((t_bottom - grid.t0) / grid.dt + 1e-9)))
    n_last = min(grid.nt - 1, int(math.ceil((z.t - grid.t0) / grid.dt - 1e-9)))
    levels = np.arange(n_first, n_last + 1)

    box = tuple(slice(lo, hi + 1) for lo, hi in zip(box_lo, box_hi))
    source = poisson_source(field_.u[levels], field_.f[levels], h)[(slice(None),) + box]
    p_box = field_.p[levels][(slice(None),) + box]

    solver = DirichletPoissonSolver(p_box.shape[1:], h, workers=workers)
    p1, poisson_residual = solver.solve(source)
    if poisson_residual > POISSON_TOL:
        raise SolverError("p₁ のポアソン方程式が許容誤差内で解けませんでした", poisson_residual)

    x1 = (np.arange(box_lo[0], box_hi[0] + 1) - center[0])[:, None, None]
    x2 = (np.arange(box_lo[1], box_hi[1] + 1) - center[1])[None, :, None]
    x3 = (np.arange(box_lo[2], box_hi[2] + 1) - center[2])[None, None, :]
    dist = np.sqrt(x1 ** 2 + x2 ** 2 + x3 ** 2)
    ball_mask = dist <= r

    p2 = p_box - p1
    means = p2[:, ball_mask].mean(axis=1)
    p2 = p2 - means[:, None, None, None]

    inner = (dist <= r - 1.0)[1:-1, 1:-1, 1:-1]
    harmonic_residual = 0.0
    if inner.any():
        lap_p2 = np.abs(discrete_laplacian(p2, h)[:, inner])
        lap_p = np.abs(discrete_laplacian(p_box, h)[:, inner])
        ref = float(lap_p.max())
        harmonic_residual = float(lap_p2.max()) / ref if ref > 0 else float(lap_p2.max())

    logger.info(f"圧力分解: ρ={rho:g}, スラブ数={len(levels)}, ポアソン残差={poisson_residual:.2e}, "
                f"調和残差={harmonic_residual:.2e}")
    return PressureSplit(
        grid=grid, center=z, rho=rho, box_lo=tuple(int(v) for v in box_lo), box_hi=tuple(int(v) for v in box_hi),
        levels=levels, p1=p1, p2=p2, slab_means=means, harmonic_residual=harmonic_residual,
        poisson_residual=poisson_residual, ball_mask=ball_mask,
    )


@dataclass(frozen=True)
class D1Split:
    """分解された各部分の D̃₁ 型の量"""
    d1_p1: float
    d1_p2: float
    d1_p2_kappa_prime: float
    kappa_prime: float
    holder_factor: float

    def to_dict(self) -> dict:
        return {
            'kind': 'd1_split', 'd1_p1': self.d1_p1, 'd1_p2': self.d1_p2,
            'd1_p2_kappa_prime': self.d1_p2_kappa_prime, 'kappa_prime': self.kappa_prime,
            'holder_factor': self.holder_factor,
        }


def _embedded_gradient_norm(split: PressureSplit, part: np.ndarray) -> np.ndarray:
    """部分箱の |∇part| を格子全体の配列に埋め込む（部分箱の外は0）"""
    grid = split.grid
    grad = np.sqrt(sum(spatial_derivative(part, grid.h, axis) ** 2 for axis in range(3)))
    full = np.zeros(grid.shape)
    # levels は連続した整数列
    full[(slice(int(split.levels[0]), int(split.levels[-1]) + 1),) + split.box_slices()] = grad
    return full


def d1_from_split(split: PressureSplit, z: SpaceTimePoint, r: float, exponents: ExponentSet,
                  cfg: QuadratureConfig = QuadratureConfig()) -> D1Split:
    """(1/r)‖∇p₁‖_{L^{κ,λ}}, (1/r)‖∇p₂‖_{L^{κ,λ}} と r·‖∇p₂‖_{L^{κ',λ}}（3/κ'+2/λ=2）

    Raises:
        RangeError: シリンダーが分解の範囲を超える場合
    """
    if np.max(np.abs(np.asarray(z.x) - np.asarray(split.center.x))) > 1e-9 * split.grid.h or r > split.rho:
        raise RangeError(f"シリンダー (中心 {z.x}, r={r}) は分解 (中心 {split.center.x}, ρ={split.rho}) の内側にありません")
    rule = get_rule(split.grid, ParabolicCylinder(z, r, ClipMode.INTERIOR), cfg)
    needed = np.unique(np.concatenate([rule.levels, rule.levels + 1]))
    if not np.all(np.isin(needed, split.levels)):
        raise RangeError("シリンダーの時間スラブが分解の時間範囲外です")

    g1 = rule.cell_values(_embedded_gradient_norm(split, split.p1))
    g2 = rule.cell_values(_embedded_gradient_norm(split, split.p2))
    norm_pair = PQPair(exponents.kappa, exponents.lam)
    kp = exponents.kappa_prime
    d1_p1 = mixed_norm_from_values(g1, rule, norm_pair) / r
    d1_p2 = mixed_norm_from_values(g2, rule, norm_pair) / r
    d1_p2_kp = r * mixed_norm_from_values(g2, rule, PQPair(kp, exponents.lam))
    holder = rule.total_volume ** (1.0 / exponents.kappa - 1.0 / kp) / r ** 2
    return D1Split(d1_p1=d1_p1, d1_p2=d1_p2, d1_p2_kappa_prime=d1_p2_kp, kappa_prime=kp, holder_factor=holder)
