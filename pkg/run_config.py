# -*- coding: utf-8 -*-
"""
実行設定モジュール

セクション → キーの入れ子 JSON 設定ファイルを読み込み、コマンドラインの
上書きを適用し、計算の前にすべての値を検証する。解決済みの設定は
to_dict() でそのままレポートのヘッダーに書き出す。
"""
import copy
import itertools
import json
import logging
import os
from typing import Any, Dict, List, Optional

from config import (DEFAULT_DELTAS, DEFAULT_EPSILON, DEFAULT_EPSILON0, DEFAULT_GAMMA, DEFAULT_K,
                    DEFAULT_LAMBDA, DEFAULT_MIN_CELLS, DEFAULT_RADIUS_FRACTION, DEFAULT_SUBSAMPLE, DEFAULT_THETA,
                    DEFAULT_THREADS, DEFAULT_DECAY_ALPHA, DEFAULT_DECAY_BETA, GENERATOR_NAMES, LOG_FILE, LOG_LEVEL,
                    VERIFY_SUITES)
from error_handler import AnalysisError, ConfigurationError
from exponents import LMPair, PQPair, exponent_set_from_lambda, exponent_to_json, parse_exponent
from fields import GridSpec, SpaceTimePoint
from mixed_norms import QuadratureConfig, dyadic_radii

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS: Dict[str, Dict[str, Any]] = {
    "field": {
        "path": None,
        "generator": "shear",
        "params": {},
        "forcing": None,
    },
    "grid": {
        "origin": [-1.0, -1.0, 0.0],
        "h": 0.0625,
        "counts": [33, 33, 17],
        "t0": 0.0,
        "dt": 0.015625,
        "nt": 17,
        "half_space": True,
    },
    "centers": {
        "points": [],
        "lattice": None,
    },
    "radii": {
        "values": [],
        "r_max": 0.5,
        "count": 4,
    },
    "exponents": {
        "lambda": DEFAULT_LAMBDA,
        "pq": [2.25, 3.0],
        "lm": [4.5, 4.5],
        "rs": [6.0, 4.0],
    },
    "criteria": {
        "epsilon": DEFAULT_EPSILON,
        "epsilon0": DEFAULT_EPSILON0,
        "k": DEFAULT_K,
        "gamma": DEFAULT_GAMMA,
        "morrey": None,
        "theta": DEFAULT_THETA,
        "alpha": DEFAULT_DECAY_ALPHA,
        "beta": DEFAULT_DECAY_BETA,
        "k_max": 2,
        "iteration_theta": 0.5,
    },
    "cover": {
        "deltas": list(DEFAULT_DELTAS),
        "radius_fraction": DEFAULT_RADIUS_FRACTION,
        "expansion": "shifted",
    },
    "quadrature": {
        "subsample": DEFAULT_SUBSAMPLE,
        "min_cells": DEFAULT_MIN_CELLS,
        "analytic": False,
        "time_subsample": 1,
    },
    "verify": {
        "suites": list(VERIFY_SUITES),
        "corpus": ["zero", "shear", "random"],
        "seeds": [1, 2, 3, 4, 5],
    },
    "calibrate": {
        "boost": 4.0,
        "offset": 0.3125,
        "seeds": [1, 2, 3, 4, 5],
    },
    "output": {
        "out": "out",
        "excel": False,
    },
    "performance": {
        "threads": DEFAULT_THREADS,
    },
    "run": {
        "seed": 7,
    },
    "logging": {
        "level": LOG_LEVEL,
        "file": LOG_FILE,
    },
}


def deep_merge(base: Dict, override: Dict) -> Dict:
    """入れ子の辞書を再帰的にマージした新しい辞書を返す"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def apply_override(settings: Dict, dotted_key: str, value: Any):
    """"section.key" 形式のキーで値を上書きする"""
    parts = dotted_key.split(".")
    if len(parts) < 2:
        raise ConfigurationError(f"上書きキー '{dotted_key}' は 'section.key' 形式でなければなりません")
    node = settings
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigurationError(f"設定セクション '{part}' がありません（キー '{dotted_key}'）")
        node = node[part]
    node[parts[-1]] = value


def parse_override_value(text: str) -> Any:
    """--set の値。JSON として読めなければ文字列のまま"""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_settings(file_path: str) -> Dict:
    """
    設定ファイルを読み込む

    Args:
        file_path: JSON 設定ファイルのパス

    Returns:
        既定値にマージした設定
    """
    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigurationError(f"設定ファイルを読み込めません: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"設定ファイルの JSON が不正です: {file_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError("設定ファイルの最上位はオブジェクトでなければなりません")
    unknown = sorted(set(data) - set(DEFAULT_SETTINGS))
    if unknown:
        raise ConfigurationError(f"未知の設定セクションです: {', '.join(unknown)}")
    return deep_merge(DEFAULT_SETTINGS, data)


def save_settings(settings: Dict, file_path: str):
    with open(file_path, 'w', encoding='utf-8') as f:
        json.dump(settings, f, ensure_ascii=False, indent=2)


def default_centers(grid: GridSpec) -> List[SpaceTimePoint]:
    """最終時刻での箱の中央。半空間格子では境界中心と内部中心の2点"""
    mid = [grid.origin[i] + ((grid.counts[i] - 1) // 2) * grid.h for i in range(3)]
    t = grid.t_end
    if grid.half_space:
        return [SpaceTimePoint((mid[0], mid[1], 0.0), t), SpaceTimePoint((mid[0], mid[1], mid[2]), t)]
    return [SpaceTimePoint(tuple(mid), t)]


class RunConfig:
    """検証済みの実行設定

    settings は解決済みの入れ子辞書で、型付きの値は属性として持つ。
    """

    def __init__(self, settings: Optional[Dict] = None):
        self.settings = deep_merge(DEFAULT_SETTINGS, settings or {})
        self._validate()

    @classmethod
    def from_file(cls, file_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """
        設定ファイルと上書きから RunConfig を作る

        Args:
            file_path: JSON 設定ファイル（None なら既定値）
            overrides: "section.key" → 値 の上書き
        """
        settings = load_settings(file_path) if file_path else copy.deepcopy(DEFAULT_SETTINGS)
        for key, value in (overrides or {}).items():
            apply_override(settings, key, value)
        return cls(settings)

    def to_dict(self) -> Dict:
        return copy.deepcopy(self.settings)

    def _fail(self, key: str, message: str):
        raise ConfigurationError(f"設定 '{key}': {message}")

    def _number(self, section: str, key: str, positive: bool = False, integer: bool = False):
        value = self.settings[section][key]
        name = f"{section}.{key}"
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self._fail(name, f"数値でなければなりません（{value!r}）")
        if integer and int(value) != value:
            self._fail(name, f"整数でなければなりません（{value!r}）")
        if positive and not value > 0:
            self._fail(name, f"正でなければなりません（{value!r}）")
        return int(value) if integer else float(value)

    def _validate(self):
        s = self.settings
        unknown = sorted(set(s) - set(DEFAULT_SETTINGS))
        if unknown:
            raise ConfigurationError(f"未知の設定セクションです: {', '.join(unknown)}")

        # 場
        self.field_path = s['field']['path']
        self.generator = s['field']['generator']
        if self.field_path is None and self.generator not in GENERATOR_NAMES:
            self._fail('field.generator', f"'{self.generator}' は {', '.join(GENERATOR_NAMES)} のいずれかです")
        if not isinstance(s['field']['params'], dict):
            self._fail('field.params', "オブジェクトでなければなりません")
        self.generator_params = dict(s['field']['params'])
        self.forcing = s['field']['forcing']
        if self.forcing is not None:
            if not isinstance(self.forcing, dict) or self.forcing.get('kind') not in ('constant', 'gaussian'):
                self._fail('field.forcing', "{'kind': 'constant'|'gaussian', ...} でなければなりません")

        try:
            self.grid = GridSpec.from_dict(s['grid'])
        except (AnalysisError, TypeError, ValueError) as e:
            self._fail('grid', str(e))

        # 中心
        self.center_points = self._parse_points(s['centers']['points'])
        lattice = s['centers']['lattice']
        if lattice is not None:
            if not isinstance(lattice, dict) or set(lattice) != {'x1', 'x2', 'x3', 't'}:
                self._fail('centers.lattice', "キー x1, x2, x3, t の座標リストが必要です")
            combos = itertools.product(lattice['x1'], lattice['x2'], lattice['x3'], lattice['t'])
            self.center_points += self._parse_points([list(c) for c in combos], 'centers.lattice')

        # 半径
        values = s['radii']['values']
        if values:
            self.radii = sorted(self._positive_list('radii', 'values'), reverse=True)
        else:
            self.radii = dyadic_radii(self._number('radii', 'r_max', positive=True),
                                      self._number('radii', 'count', positive=True, integer=True))

        # 指数
        try:
            self.exponents = exponent_set_from_lambda(self._number('exponents', 'lambda'))
        except AnalysisError as e:
            self._fail('exponents.lambda', str(e))
        self.pq = self._pair('exponents', 'pq')
        self.rs = self._pair('exponents', 'rs')
        lm = s['exponents']['lm']
        try:
            self.lm = LMPair(float(lm[0]), float(lm[1]))
        except (AnalysisError, TypeError, ValueError, IndexError) as e:
            self._fail('exponents.lm', f"(l, m) の2要素リストが必要です: {e}")

        # 判定
        self.epsilon = self._number('criteria', 'epsilon', positive=True)
        self.epsilon0 = self._number('criteria', 'epsilon0', positive=True)
        self.k = self._number('criteria', 'k', positive=True, integer=True)
        self.gamma = self._number('criteria', 'gamma', positive=True)
        if self.gamma > 2.0:
            self._fail('criteria.gamma', "γ は (0, 2] になければなりません")
        morrey = s['criteria']['morrey']
        self.morrey = None if morrey is None else self._number('criteria', 'morrey')
        self.theta = self._number('criteria', 'theta', positive=True)
        if self.theta >= 0.5:
            self._fail('criteria.theta', "θ は (0, 1/2) になければなりません")
        alpha = s['criteria']['alpha']
        if alpha != "lambda":
            alpha = self._number('criteria', 'alpha', positive=True)
        self.alpha = alpha
        self.beta = self._number('criteria', 'beta', positive=True)
        if not self.beta < self.gamma:
            self._fail('criteria.beta', f"β={self.beta} は γ={self.gamma} 未満でなければなりません")
        self.k_max = self._number('criteria', 'k_max', positive=True, integer=True)
        self.iteration_theta = self._number('criteria', 'iteration_theta', positive=True)
        if self.iteration_theta >= 1.0:
            self._fail('criteria.iteration_theta', "反復の θ は (0, 1) になければなりません")

        # 被覆
        self.deltas = sorted(self._positive_list('cover', 'deltas'), reverse=True)
        self.radius_fraction = self._number('cover', 'radius_fraction', positive=True)
        if self.radius_fraction >= 1.0:
            self._fail('cover.radius_fraction', "(0, 1) になければなりません")
        self.expansion = s['cover']['expansion']
        if self.expansion not in ("shifted", "one_sided"):
            self._fail('cover.expansion', "'shifted' か 'one_sided' でなければなりません")

        try:
            self.quadrature = QuadratureConfig(
                subsample=self._number('quadrature', 'subsample', positive=True, integer=True),
                min_cells=self._number('quadrature', 'min_cells', positive=True, integer=True),
                analytic=bool(s['quadrature']['analytic']),
                time_subsample=self._number('quadrature', 'time_subsample', positive=True, integer=True),
            )
        except ConfigurationError as e:
            self._fail('quadrature', str(e))

        # 検証・較正
        self.suites = list(s['verify']['suites'])
        unknown_suites = [name for name in self.suites if name not in VERIFY_SUITES]
        if unknown_suites:
            self._fail('verify.suites', f"未知のスイート {', '.join(unknown_suites)}（{', '.join(VERIFY_SUITES)}）")
        self.corpus = list(s['verify']['corpus'])
        bad = [name for name in self.corpus if name not in GENERATOR_NAMES]
        if bad:
            self._fail('verify.corpus', f"未知の生成器 {', '.join(bad)}")
        self.verify_seeds = self._int_list('verify', 'seeds')
        self.boost = self._number('calibrate', 'boost', positive=True)
        self.calibrate_seeds = self._int_list('calibrate', 'seeds')
        self.calibrate_offset = self._number('calibrate', 'offset', positive=True)

        self.out_dir = s['output']['out']
        if not isinstance(self.out_dir, str) or not self.out_dir:
            self._fail('output.out', "出力ディレクトリ名が必要です")
        self.excel = bool(s['output']['excel'])
        self.threads = self._number('performance', 'threads', positive=True, integer=True)
        self.seed = self._number('run', 'seed', integer=True)
        self.log_level = str(s['logging']['level'])
        self.log_file = s['logging']['file']

    def _parse_points(self, points, key: str = 'centers.points') -> List[SpaceTimePoint]:
        parsed = []
        for point in points or []:
            try:
                x1, x2, x3, t = (float(v) for v in point)
                parsed.append(SpaceTimePoint((x1, x2, x3), t))
            except (AnalysisError, TypeError, ValueError) as e:
                self._fail(key, f"中心 {point!r} は [x1, x2, x3, t] でなければなりません: {e}")
        return parsed

    def _pair(self, section: str, key: str) -> PQPair:
        value = self.settings[section][key]
        try:
            first, second = value
            return PQPair(parse_exponent(first), parse_exponent(second))
        except (AnalysisError, TypeError, ValueError) as e:
            self._fail(f"{section}.{key}", f"2要素の指数リストが必要です（{value!r}）: {e}")

    def _positive_list(self, section: str, key: str) -> List[float]:
        value = self.settings[section][key]
        if (not isinstance(value, list) or not value
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in value)):
            self._fail(f"{section}.{key}", "正の数の空でないリストでなければなりません")
        return [float(v) for v in value]

    def _int_list(self, section: str, key: str) -> List[int]:
        value = self.settings[section][key]
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            self._fail(f"{section}.{key}", "整数のリストでなければなりません")
        return list(value)

    def centers_for(self, grid: GridSpec) -> List[SpaceTimePoint]:
        """設定された中心、なければ格子の既定中心"""
        return list(self.center_points) or default_centers(grid)

    def output_path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def describe(self) -> str:
        pq = f"({exponent_to_json(self.pq.p)},{exponent_to_json(self.pq.q)})"
        return (f"λ={self.exponents.lam:g}, (p,q)={pq}, (l,m)=({self.lm.l:g},{self.lm.m:g}), "
                f"ε={self.epsilon:g}, ε₀={self.epsilon0:g}, K={self.k}, 半径={self.radii}")
