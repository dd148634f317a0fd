# -*- coding: utf-8 -*-
"""
テスト共通のフィクスチャ

格子は h = 1/16、時間 [0, 1/4] を dt = 1/64 で刻む小さなもの。
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir)))

from fields import GridSpec, SpaceTimeField, SpaceTimePoint  # noqa: E402

H = 1.0 / 16.0
DT = 1.0 / 64.0
T_END = 0.25


@pytest.fixture
def half_grid():
    """x1, x2 ∈ [−1/2, 1/2], x3 ∈ [0, 1/2] の半空間格子"""
    return GridSpec(origin=(-0.5, -0.5, 0.0), h=H, counts=(17, 17, 9), t0=0.0, dt=DT, nt=17, half_space=True)


@pytest.fixture
def interior_grid():
    """[−1/2, 1/2]³ の内部格子"""
    return GridSpec(origin=(-0.5, -0.5, -0.5), h=H, counts=(17, 17, 17), t0=0.0, dt=DT, nt=17)


@pytest.fixture
def boundary_center():
    return SpaceTimePoint((0.0, 0.0, 0.0), T_END)


@pytest.fixture
def interior_center():
    return SpaceTimePoint((0.0, 0.0, 0.0), T_END)


def constant_field(grid: GridSpec, value: float = 1.0) -> SpaceTimeField:
    """u ≡ (value, 0, 0), p = f = 0（発散ゼロ、非線形項ゼロ）"""
    u = np.zeros(grid.shape + (3,))
    u[..., 0] = value
    return SpaceTimeField(grid=grid, u=u, p=np.zeros(grid.shape), f=np.zeros(grid.shape + (3,)), name="constant")
