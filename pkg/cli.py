# -*- coding: utf-8 -*-
"""
コマンドラインインターフェース

サブコマンド:
    generate   解析的な場を格子にサンプルして場ファイルに保存する
    analyze    中心ごとに汎関数を半径掃引し、正則性判定を行う
    verify     不等式の比検査スイートを走らせる
    cover      候補点の抽出、Vitali 被覆、前測度曲線を計算する
    calibrate  基準コーパスと強調した斉次プロファイルを分ける ε を求める

終了コードは設定・入出力の失敗で 2、verify の判定基準違反で 1、それ以外は 0。
"""
import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import (BRUTE_FORCE_LIMIT, ENERGY_REL_TOL, EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK, EXPONENT_SAMPLES,
                    GENERATOR_NAMES, HARMONIC_FACTOR, MEAN_FREE_TOL, POISSON_TOL, RECONSTRUCTION_TOL, VERIFY_SUITES)
from criteria import (Verdict, calibrate_epsilon0, ckn_criterion, classify_center, decay_diagnostic, displaced_lattice,
                      evaluate_centers, evaluate_mod_lemma, evaluate_TH1, iteration_diagnostic)
from data_utils import ReportWriter, field_checksum, read_field, write_curve, write_field, write_summary
from error_handler import AnalysisError, ConfigurationError, DomainError, ErrorHandler, FieldFileError
from exponents import LMPair, REGION_V_TEXT, exponent_set_from_lambda, in_region_V, singular_dimension
from field_generators import generate, generate_homogeneous_profile, with_forcing
from fields import GridSpec, SpaceTimeField, SpaceTimePoint, check_invariants
from functionals import cylinder_at, functional_D1_tilde, sweep
from inequalities import (basiclemma_identities, check_basiclemma, check_energy_consequence,
                          check_energy_inequality, check_interior_l3, check_l24_interpolation,
                          check_L4_interpolation, check_nonlinear_term, check_pressure_bound,
                          check_sec4_interpolation)
from mixed_norms import ClipMode, infer_clip, is_admissible, morrey_norm
from performance_utils import memory_usage_psutil, monitor
from pressure import d1_from_split, decompose_interior
from run_config import RunConfig, parse_override_value
from singular_set import curve_rows, dimension_curve, monotone_trend, premeasure_range

logger = logging.getLogger(__name__)


# 場の準備

def build_field(config: RunConfig) -> SpaceTimeField:
    """設定の生成器で場を作る（外力の指定があれば付け加える）"""
    params = dict(config.generator_params)
    if config.generator == 'random':
        params.setdefault('seed', config.seed)
        params.setdefault('workers', config.threads)
    try:
        field_ = generate(config.generator, config.grid, **params)
    except TypeError as e:
        raise ConfigurationError(f"設定 'field.params': 生成器 '{config.generator}' の引数が不正です: {e}") from e
    if config.forcing:
        forcing = dict(config.forcing)
        kind = forcing.pop('kind')
        try:
            field_ = with_forcing(field_, kind, **forcing)
        except TypeError as e:
            raise ConfigurationError(f"設定 'field.forcing': 引数が不正です: {e}") from e
    return field_


def load_field(config: RunConfig) -> SpaceTimeField:
    """--field があれば読み込み、なければ生成する"""
    if config.field_path:
        return read_field(config.field_path)
    return build_field(config)


def interior_grid(grid: GridSpec) -> GridSpec:
    """半空間格子を x3 方向に中央へずらした内部格子"""
    if not grid.half_space:
        return grid
    origin = (grid.origin[0], grid.origin[1], -0.5 * (grid.counts[2] - 1) * grid.h)
    return GridSpec(origin=origin, h=grid.h, counts=grid.counts, t0=grid.t0, dt=grid.dt, nt=grid.nt,
                    half_space=False)


def center_label(z: SpaceTimePoint) -> str:
    return "(" + ",".join(f"{v:g}" for v in z.x) + f";{z.t:g})"


def admissible_radii(field_: SpaceTimeField, z: SpaceTimePoint, radii: Sequence[float],
                     config: RunConfig) -> Tuple[List[float], List[float]]:
    """(適格な半径, 除外した半径)"""
    ok, skipped = [], []
    for r in radii:
        (ok if is_admissible(field_.grid, cylinder_at(field_, z, r), config.quadrature) else skipped).append(r)
    return ok, skipped


def guarded(handler: ErrorHandler, writer: ReportWriter, context: str, func: Callable, *args, **kwargs):
    """解析エラーをレポートに記録して None を返す"""
    try:
        return func(*args, **kwargs)
    except AnalysisError as e:
        writer.write(handler.handle_exception(e, context))
        return None


def morrey_value(field_: SpaceTimeField, config: RunConfig, centers: Sequence[SpaceTimePoint]) -> float:
    """設定値、なければ中心と半径の標本上での m_γ(f)"""
    if config.morrey is not None:
        return config.morrey
    f_norm = field_.forcing_norm
    if not np.any(f_norm):
        return 0.0
    radii = [r for r in config.radii
             if all(is_admissible(field_.grid, cylinder_at(field_, z, r), config.quadrature) for z in centers)]
    if not radii:
        logger.warning("Morrey ノルムを見積もる共通の適格半径がないため 0 とします")
        return 0.0
    estimate = morrey_norm(f_norm, field_.grid, config.gamma, centers, radii, config.quadrature)
    logger.info(f"m_γ(f) ≈ {estimate.value:.4g}（γ={config.gamma}）")
    return estimate.value


# generate

def cmd_generate(config: RunConfig, handler: ErrorHandler) -> int:
    """場を生成して場ファイルに書き出す"""
    field_ = build_field(config)
    path = config.field_path or config.output_path(field_.name)
    checksum = write_field(field_, path)
    with ReportWriter(config.out_dir) as writer:
        writer.write_header('generate', config.to_dict(), checksum)
        writer.write({'kind': 'field', 'name': field_.name, 'path': path, 'checksum': checksum,
                      'grid': field_.grid.to_dict(), 'metadata': field_.metadata,
                      'invariants': check_invariants(field_)})
    print(f"{path}: sha256={checksum}")
    return EXIT_OK


# analyze

def _summary_rows(z: SpaceTimePoint, reports, status: str) -> List[Dict]:
    return [{'center': center_label(z), 'r': rep.radius, 'A': rep.A, 'C': rep.C, 'E': rep.E, 'G': rep.G,
             'D_tilde': rep.D_tilde, 'D1_tilde': rep.D1_tilde, 'criterion': rep.criterion, 'status': status}
            for rep in reports]


def _largest_with_admissible(field_: SpaceTimeField, z: SpaceTimePoint, radii: Sequence[float], factor: float,
                             config: RunConfig) -> Optional[float]:
    """factor·r も適格となる最大の半径 r"""
    for r in sorted(radii, reverse=True):
        if is_admissible(field_.grid, cylinder_at(field_, z, factor * r), config.quadrature):
            return r
    return None


@monitor.measure_time("cmd_analyze")
def cmd_analyze(config: RunConfig, handler: ErrorHandler) -> int:
    """汎関数の掃引と判定を中心ごとにレポートへ流す"""
    field_ = load_field(config)
    centers = config.centers_for(field_.grid)
    cfg = config.quadrature
    rows: List[Dict] = []
    with ReportWriter(config.out_dir) as writer:
        writer.write_header('analyze', config.to_dict(), field_checksum(field_))
        morrey = guarded(handler, writer, "morrey", morrey_value, field_, config, centers) or 0.0
        verdicts = evaluate_centers(field_, centers, config.pq, config.radii, config.epsilon, config.epsilon0,
                                    config.k, cfg, workers=config.threads)
        for z, verdict in zip(centers, verdicts):
            context = f"analyze {center_label(z)}"
            if not isinstance(verdict, Verdict):
                record = handler.handle_exception(verdict, context)
                record['center'] = z.to_dict()
                writer.write(record)
                continue
            radii, skipped = admissible_radii(field_, z, config.radii, config)
            if skipped:
                writer.write({'kind': 'skipped_radii', 'center': z.to_dict(), 'radii': skipped})
            reports = guarded(handler, writer, context, sweep, field_, z, radii, config.exponents, config.pq, cfg,
                              workers=config.threads) or []
            writer.write_all(reports)
            writer.write(verdict)
            for other in (
                guarded(handler, writer, context, evaluate_mod_lemma, field_, z, config.exponents, config.radii,
                        config.epsilon, config.k, cfg),
                guarded(handler, writer, context, ckn_criterion, field_, z, config.radii, config.epsilon,
                        config.k, cfg),
            ):
                if other is not None:
                    writer.write(other)
            diagnostics = []
            r_decay = _largest_with_admissible(field_, z, radii, config.theta, config)
            if r_decay is not None:
                diagnostics.append(guarded(handler, writer, context, decay_diagnostic, field_, z, config.exponents,
                                           r_decay, config.theta, config.alpha, config.gamma, morrey, config.beta,
                                           cfg))
            r_iter = _largest_with_admissible(field_, z, radii, config.iteration_theta ** config.k_max, config)
            if r_iter is not None:
                diagnostics.append(guarded(handler, writer, context, iteration_diagnostic, field_, z,
                                           config.exponents, r_iter, config.iteration_theta, config.k_max, 0.0, cfg))
            writer.write_all(d for d in diagnostics if d is not None)
            rows.extend(_summary_rows(z, reports, verdict.status.value))
        write_summary(rows, config.out_dir, config.excel)
    logger.info(f"メモリ使用量: {memory_usage_psutil():.1f} MB")
    return EXIT_OK


# verify

@dataclass
class VerifyContext:
    """スイート実行中の共有状態"""
    config: RunConfig
    handler: ErrorHandler
    writer: ReportWriter
    failures: List[Dict] = field(default_factory=list)

    def fail(self, suite: str, field_name: str, message: str, **details):
        record = {'kind': 'assertion_failure', 'suite': suite, 'field': field_name, 'message': message}
        record.update(details)
        logger.error(f"[{suite}] {field_name}: {message}")
        self.failures.append(record)
        self.writer.write(record)

    def run(self, context: str, func: Callable, *args, **kwargs):
        record = guarded(self.handler, self.writer, context, func, *args, **kwargs)
        if record is not None:
            self.writer.write(record)
        return record


def _pairs(ctx: VerifyContext, field_: SpaceTimeField, clip: Optional[ClipMode] = None):
    """(中心, 適格な半径) の組。clip を指定するとその種類の中心だけ"""
    for z in ctx.config.centers_for(field_.grid):
        if clip is not None and infer_clip(field_.grid, z) is not clip:
            continue
        radii, _ = admissible_radii(field_, z, ctx.config.radii, ctx.config)
        for r in radii:
            yield z, r


def suite_exponents(ctx: VerifyContext):
    """λ の標本で指数関係式を検証し、λ=3/2 と d(4.5,4.5) の値を確かめる"""
    rng = np.random.default_rng(ctx.config.seed)
    lams = rng.uniform(1.0, 2.0, EXPONENT_SAMPLES)
    lams = lams[(lams > 1.0) & (lams < 2.0)]
    bad = 0
    for lam in lams:
        try:
            basiclemma_identities(exponent_set_from_lambda(float(lam)))
        except DomainError as e:
            bad += 1
            ctx.fail('exponents', '-', str(e), lam=float(lam))
    anchor = exponent_set_from_lambda(1.5)
    expected = {'kappa': 9.0 / 8.0, 'kappa_star': 9.0 / 5.0, 'p': 9.0 / 4.0, 'q': 3.0}
    for key, want in expected.items():
        if abs(getattr(anchor, key) - want) > 1e-12:
            ctx.fail('exponents', '-', f"λ=3/2 で {key}={getattr(anchor, key)} (期待値 {want})")
    dimension = singular_dimension(LMPair(4.5, 4.5))
    if dimension != 0.5:
        ctx.fail('exponents', '-', f"d(4.5,4.5)={dimension} (期待値 0.5)")
    ctx.writer.write({'kind': 'exponent_check', 'samples': int(len(lams)), 'failures': bad,
                      'anchor': anchor.to_dict(), 'dimension_4.5_4.5': dimension})


def suite_basiclemma(ctx: VerifyContext, field_: SpaceTimeField):
    for z, r in _pairs(ctx, field_, ClipMode.HALF):
        ctx.run(f"basiclemma {field_.name}", check_basiclemma, field_, z, r, ctx.config.exponents,
                ctx.config.quadrature)


def suite_interior_l3(ctx: VerifyContext, field_: SpaceTimeField):
    for z, r in _pairs(ctx, field_, ClipMode.INTERIOR):
        ctx.run(f"interior_l3 {field_.name}", check_interior_l3, field_, z, r, ctx.config.exponents,
                ctx.config.quadrature)


def suite_energy(ctx: VerifyContext, field_: SpaceTimeField):
    """局所エネルギー収支。厳密解（residual_constant を持つ場）では相対残差を判定する"""
    exact = 'residual_constant' in field_.metadata
    for z, r in _pairs(ctx, field_):
        record = ctx.run(f"energy {field_.name}", check_energy_inequality, field_, z, r)
        if record is None or not exact:
            continue
        scale = record.lhs + abs(record.details['rhs_signed'])
        relative = abs(record.details['residual']) / scale if scale > 0 else 0.0
        if relative > ENERGY_REL_TOL:
            ctx.fail('energy', field_.name, f"厳密解の相対エネルギー残差 {relative:.3e} が {ENERGY_REL_TOL} を超えました",
                     center=z.to_dict(), r=r)


def suite_energy_consequence(ctx: VerifyContext, field_: SpaceTimeField):
    centers = ctx.config.centers_for(field_.grid)
    morrey = guarded(ctx.handler, ctx.writer, "morrey", morrey_value, field_, ctx.config, centers) or 0.0
    for z, r in _pairs(ctx, field_):
        ctx.run(f"energy_consequence {field_.name}", check_energy_consequence, field_, z, r, ctx.config.gamma,
                morrey, ctx.config.exponents, ctx.config.quadrature)


def _mode(field_: SpaceTimeField, z: SpaceTimePoint) -> str:
    return "boundary" if infer_clip(field_.grid, z) is ClipMode.HALF else "interior"


def suite_nonlinear(ctx: VerifyContext, field_: SpaceTimeField):
    for z, r in _pairs(ctx, field_):
        ctx.run(f"nonlinear {field_.name}", check_nonlinear_term, field_, z, r, ctx.config.exponents,
                _mode(field_, z), ctx.config.quadrature)


def suite_l4_interpolation(ctx: VerifyContext, field_: SpaceTimeField):
    for z, r in _pairs(ctx, field_):
        ctx.run(f"l4_interpolation {field_.name}", check_L4_interpolation, field_, z, r, ctx.config.rs,
                ctx.config.quadrature)


def suite_sec4_interpolation(ctx: VerifyContext, field_: SpaceTimeField):
    for z, r in _pairs(ctx, field_):
        ctx.run(f"sec4_interpolation {field_.name}", check_sec4_interpolation, field_, z, r, ctx.config.lm,
                ctx.config.quadrature)


def suite_l24_interpolation(ctx: VerifyContext, field_: SpaceTimeField):
    for z, r in _pairs(ctx, field_):
        ctx.run(f"l24_interpolation {field_.name}", check_l24_interpolation, field_, z, r, ctx.config.quadrature)


def _pressure_bound_with_split(field_: SpaceTimeField, z: SpaceTimePoint, r: float, rho: float, config: RunConfig,
                               morrey: float):
    mode = _mode(field_, z)
    d1_values = None
    if mode == "interior":
        split = decompose_interior(field_, z, rho, workers=config.threads)
        d1_values = d1_from_split(split, z, r, config.exponents, config.quadrature)
    return check_pressure_bound(field_, z, r, rho, config.exponents, config.gamma, morrey, mode, d1_values,
                                config.quadrature)


def suite_pressure_bound(ctx: VerifyContext, field_: SpaceTimeField):
    """0 < r ≤ ρ/4 を満たす半径の組すべてで圧力評価の比を取る"""
    config = ctx.config
    centers = config.centers_for(field_.grid)
    morrey = guarded(ctx.handler, ctx.writer, "morrey", morrey_value, field_, config, centers) or 0.0
    for z in centers:
        radii, _ = admissible_radii(field_, z, config.radii, config)
        for rho in radii:
            for r in radii:
                if r <= 0.25 * rho:
                    ctx.run(f"pressure_bound {field_.name}", _pressure_bound_with_split, field_, z, r, rho,
                            config, morrey)


def _self_consistent_pressure(field_: SpaceTimeField) -> bool:
    """圧力が同じ離散ポアソン方程式から作られた場か"""
    meta = field_.metadata
    return (meta.get('generator') == 'random' and meta.get('params', {}).get('pressure') == 'poisson'
            and not meta.get('forcing') and float(meta.get('scale', 1.0)) == 1.0)


def suite_pressure_split(ctx: VerifyContext, field_: SpaceTimeField):
    """内部圧力分解の再構成・平均・調和性を判定する"""
    config = ctx.config
    consistent = _self_consistent_pressure(field_)
    for z, rho in _pairs(ctx, field_, ClipMode.INTERIOR):
        context = f"pressure_split {field_.name}"
        split = guarded(ctx.handler, ctx.writer, context, decompose_interior, field_, z, rho, config.threads)
        if split is None:
            continue
        p_box = field_.p[split.levels][(slice(None),) + split.box_slices()]
        scale = max(1.0, float(np.max(np.abs(p_box))))
        reconstruction = float(np.max(np.abs(split.reconstruct() - p_box))) / scale
        mean_error = float(np.max(np.abs(split.p2[:, split.ball_mask].mean(axis=1))))
        mean_error /= max(1.0, float(np.max(np.abs(split.p2))))
        record = split.to_dict()
        record.update({'field': field_.name, 'reconstruction_error': reconstruction, 'mean_error': mean_error,
                       'self_consistent': consistent})

        r = 0.5 * rho
        d1 = guarded(ctx.handler, ctx.writer, context, d1_from_split, split, z, r, config.exponents,
                     config.quadrature)
        if d1 is not None:
            total = functional_D1_tilde(field_, z, r, config.exponents, config.quadrature)
            record.update({'d1': d1.to_dict(), 'r': r, 'D1_tilde': total,
                           'triangle_ok': total <= d1.d1_p1 + d1.d1_p2 + 1e-9 * max(1.0, total)})
        ctx.writer.write(record)

        if reconstruction > RECONSTRUCTION_TOL:
            ctx.fail('pressure_split', field_.name, f"再構成誤差 {reconstruction:.3e} > {RECONSTRUCTION_TOL}",
                     center=z.to_dict(), rho=rho)
        if mean_error > MEAN_FREE_TOL:
            ctx.fail('pressure_split', field_.name, f"p₂ の球上平均 {mean_error:.3e} > {MEAN_FREE_TOL}",
                     center=z.to_dict(), rho=rho)
        if consistent and split.harmonic_residual > HARMONIC_FACTOR * POISSON_TOL:
            ctx.fail('pressure_split', field_.name,
                     f"調和残差 {split.harmonic_residual:.3e} > {HARMONIC_FACTOR * POISSON_TOL:.1e}",
                     center=z.to_dict(), rho=rho)


SUITES: Dict[str, Callable[[VerifyContext, SpaceTimeField], None]] = {
    'basiclemma': suite_basiclemma,
    'interior_l3': suite_interior_l3,
    'energy': suite_energy,
    'energy_consequence': suite_energy_consequence,
    'nonlinear': suite_nonlinear,
    'l4_interpolation': suite_l4_interpolation,
    'sec4_interpolation': suite_sec4_interpolation,
    'l24_interpolation': suite_l24_interpolation,
    'pressure_bound': suite_pressure_bound,
    'pressure_split': suite_pressure_split,
}


def build_corpus(config: RunConfig, grid: GridSpec, names: Sequence[str], seeds: Sequence[int]) -> List[SpaceTimeField]:
    """生成器名のリストから場の一覧を作る（格子に合わない生成器は飛ばす）"""
    corpus = []
    for name in names:
        if name == 'shear' and not grid.half_space:
            logger.warning("内部格子のため shear を飛ばします")
            continue
        if name == 'homogeneous' and grid.half_space:
            logger.warning("半空間格子のため homogeneous を飛ばします")
            continue
        if name == 'random':
            corpus.extend(generate('random', grid, seed=seed, workers=config.threads) for seed in seeds)
        else:
            corpus.append(generate(name, grid))
    return corpus


@monitor.measure_time("cmd_verify")
def cmd_verify(config: RunConfig, handler: ErrorHandler) -> int:
    """比検査スイートを実行する。判定基準違反があれば EXIT_ASSERTION"""
    if config.field_path:
        corpus = [read_field(config.field_path)]
    else:
        corpus = build_corpus(config, config.grid, config.corpus, config.verify_seeds)
    checksum = field_checksum(corpus[0]) if len(corpus) == 1 else None
    with ReportWriter(config.out_dir) as writer:
        writer.write_header('verify', config.to_dict(), checksum)
        ctx = VerifyContext(config, handler, writer)
        if 'exponents' in config.suites:
            suite_exponents(ctx)
        for field_ in corpus:
            for name in config.suites:
                if name in SUITES:
                    logger.info(f"スイート {name} を {field_.name} で実行します")
                    SUITES[name](ctx, field_)
        writer.write({'kind': 'verify_summary', 'suites': config.suites, 'fields': [f.name for f in corpus],
                      'assertion_failures': len(ctx.failures)})
    if ctx.failures:
        logger.error(f"判定基準違反が {len(ctx.failures)} 件ありました")
        return EXIT_ASSERTION
    return EXIT_OK


# cover

@monitor.measure_time("cmd_cover")
def cmd_cover(config: RunConfig, handler: ErrorHandler) -> int:
    """候補抽出・被覆・前測度曲線を JSON と CSV に書き出す"""
    lm = config.lm
    if not in_region_V(lm):
        raise ConfigurationError(f"(l,m)=({lm.l:g},{lm.m:g}) は領域 V の外です。条件: {REGION_V_TEXT}")
    field_ = load_field(config)
    centers = config.centers_for(field_.grid)
    explicit = config.radii if config.settings['radii']['values'] else None
    with ReportWriter(config.out_dir) as writer:
        writer.write_header('cover', config.to_dict(), field_checksum(field_))
        estimates = dimension_curve(field_, centers, lm, config.epsilon0, config.deltas, explicit,
                                    config.radius_fraction, config.quadrature, config.threads, config.expansion)
        for estimate in estimates:
            writer.write(estimate)
            if estimate.candidates and len(estimate.candidates) <= BRUTE_FORCE_LIMIT:
                low, high = premeasure_range(estimate.candidates, estimate.dimension)
                writer.write({'kind': 'premeasure_range', 'delta': estimate.delta, 'min': low, 'max': high,
                              'greedy': estimate.premeasure})
        trend = monotone_trend(estimates)
        writer.write({'kind': 'dimension_curve', 'dimension': singular_dimension(lm), 'trend': trend,
                      'csv': write_curve(curve_rows(estimates), config.out_dir)})
    logger.info(f"前測度曲線の傾向: {trend}")
    return EXIT_OK


# calibrate

def _th1_verdicts(field_: SpaceTimeField, centers: Sequence[SpaceTimePoint], config: RunConfig,
                  handler: ErrorHandler, writer: ReportWriter) -> List[Verdict]:
    verdicts = []
    for z in centers:
        verdict = guarded(handler, writer, f"calibrate {field_.name} {center_label(z)}", evaluate_TH1, field_, z,
                          config.pq, config.radii, config.epsilon, config.k, config.quadrature, config.threads)
        if verdict is not None:
            verdicts.append(verdict)
    return verdicts


def _evidence_values(verdicts: Sequence[Verdict]) -> List[float]:
    return [v for verdict in verdicts for _, v, _ in verdict.evidence]


@monitor.measure_time("cmd_calibrate")
def cmd_calibrate(config: RunConfig, handler: ErrorHandler) -> int:
    """ε と ε₀ を較正する

    ε は基準コーパスの最大判定量と強調プロファイル中心の最小判定量の間、
    ε₀ は強調プロファイル中心の最大量と、中心からずらした格子上の最大量の間に置く。
    """
    grid = config.grid
    corpus = build_corpus(config, grid, ['zero', 'shear', 'random'], config.calibrate_seeds)
    inner = interior_grid(grid)
    boosted = generate_homogeneous_profile(inner, amplitude=config.boost)
    point = SpaceTimePoint(tuple(boosted.metadata['params']['singular_point']), inner.t_end)

    with ReportWriter(config.out_dir) as writer:
        writer.write_header('calibrate', config.to_dict())
        per_field = {}
        baseline_max = 0.0
        for field_ in corpus:
            field_max = max(_evidence_values(_th1_verdicts(field_, config.centers_for(grid), config, handler, writer)),
                            default=0.0)
            per_field[field_.name] = field_max
            baseline_max = max(baseline_max, field_max)
        center_verdicts = _th1_verdicts(boosted, [point], config, handler, writer)
        boosted_min = min(_evidence_values(center_verdicts), default=math.nan)
        separable = math.isfinite(boosted_min) and baseline_max < boosted_min
        separating = math.sqrt(max(baseline_max, 1e-300) * boosted_min) if separable else None

        lattice_verdicts = _th1_verdicts(boosted, displaced_lattice(point, config.calibrate_offset),
                                         config, handler, writer)
        epsilon0 = calibrate_epsilon0(center_verdicts[0], lattice_verdicts) if center_verdicts else None
        statuses = {}
        if epsilon0 is not None:
            center_status = classify_center(center_verdicts[0], epsilon0)
            lattice_status = [classify_center(v, epsilon0) for v in lattice_verdicts]
            writer.write_all([center_status.to_dict()] + [v.to_dict() for v in lattice_status])
            statuses = {'center': center_status.status.value,
                        'lattice': [v.status.value for v in lattice_status]}
        writer.write({'kind': 'calibration', 'baseline_max': baseline_max, 'boosted_min': boosted_min,
                      'separable': separable, 'separating_epsilon': separating, 'boost': config.boost,
                      'lattice_offset': config.calibrate_offset, 'lattice_centers': len(lattice_verdicts),
                      'lattice_max': max(_evidence_values(lattice_verdicts), default=0.0),
                      'separating_epsilon0': epsilon0, 'statuses': statuses,
                      'per_field': per_field, 'pq': config.pq.to_dict()})
    if separable:
        print(f"ε = {separating:.6g}（基準最大 {baseline_max:.4g} < 強調最小 {boosted_min:.4g}）")
    else:
        logger.warning(f"基準コーパス（最大 {baseline_max:.4g}）と強調プロファイル（最小 {boosted_min:.4g}）を分けられません")
    if epsilon0 is not None:
        print(f"ε₀ = {epsilon0:.6g}（ずらした格子 {len(lattice_verdicts)} 点は候補になりません）")
    else:
        logger.warning("ずらした格子上の量が中心以上のため ε₀ を較正できません")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig, ErrorHandler], int]] = {
    'generate': cmd_generate,
    'analyze': cmd_analyze,
    'verify': cmd_verify,
    'cover': cmd_cover,
    'calibrate': cmd_calibrate,
}


# 引数解析

def _key_value(text: str) -> Tuple[str, Any]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"'{text}' は KEY=VALUE 形式ではありません")
    return key.strip(), parse_override_value(value)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="JSON 設定ファイル")
    common.add_argument('--field', help="場ファイル（generate では出力先）")
    common.add_argument('--out', help="出力ディレクトリ")
    common.add_argument('--threads', type=int, help="ワーカースレッド数")
    common.add_argument('--seed', type=int, help="乱数シード")
    common.add_argument('--excel', action='store_true', default=None, help="サマリーを .xlsx でも書き出す")
    common.add_argument('--log-level', help="ログレベル")
    common.add_argument('--set', dest='overrides', action='append', type=_key_value, default=[],
                        metavar='SECTION.KEY=VALUE', help="任意の設定値を上書きする（値は JSON）")

    parser = argparse.ArgumentParser(prog='cyllens', description="放物型シリンダー上のスケール不変量の解析")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('generate', parents=[common], help="場を生成して保存する")
    p.add_argument('--generator', choices=GENERATOR_NAMES)
    p.add_argument('--param', dest='params', action='append', type=_key_value, default=[],
                   metavar='KEY=VALUE', help="生成器の引数")

    p = sub.add_parser('analyze', parents=[common], help="汎関数の掃引と正則性判定")
    p.add_argument('--epsilon', type=float)
    p.add_argument('--epsilon0', type=float)
    p.add_argument('--k', type=int)
    p.add_argument('--lambda', dest='lam', type=float)
    p.add_argument('--pq', nargs=2, metavar=('P', 'Q'))
    p.add_argument('--radii', nargs='+', type=float)

    p = sub.add_parser('verify', parents=[common], help="不等式の比検査")
    p.add_argument('--suites', nargs='+', choices=VERIFY_SUITES)
    p.add_argument('--corpus', nargs='+', choices=GENERATOR_NAMES)
    p.add_argument('--radii', nargs='+', type=float)

    p = sub.add_parser('cover', parents=[common], help="Vitali 被覆と前測度曲線")
    p.add_argument('--lm', nargs=2, type=float, metavar=('L', 'M'))
    p.add_argument('--deltas', nargs='+', type=float)
    p.add_argument('--epsilon0', type=float)

    p = sub.add_parser('calibrate', parents=[common], help="ε の較正")
    p.add_argument('--boost', type=float)
    return parser


# 引数名 → 設定キー
_FLAG_KEYS = {
    'field': 'field.path', 'out': 'output.out', 'threads': 'performance.threads', 'seed': 'run.seed',
    'excel': 'output.excel', 'log_level': 'logging.level', 'generator': 'field.generator',
    'epsilon': 'criteria.epsilon', 'epsilon0': 'criteria.epsilon0', 'k': 'criteria.k',
    'lam': 'exponents.lambda', 'pq': 'exponents.pq', 'radii': 'radii.values', 'suites': 'verify.suites',
    'corpus': 'verify.corpus', 'lm': 'exponents.lm', 'deltas': 'cover.deltas', 'boost': 'calibrate.boost',
}


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """コマンドライン引数を "section.key" の上書きに変換する"""
    overrides: Dict[str, Any] = {}
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    for key, value in getattr(args, 'params', []):
        overrides[f"field.params.{key}"] = value
    for key, value in args.overrides:
        overrides[key] = value
    return overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    """エントリポイント。終了コードを返す"""
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.from_file(args.config, overrides_from_args(args))
    except ConfigurationError as e:
        print(f"エラー: 設定が不正です。{e}", file=sys.stderr)
        return EXIT_CONFIG

    handler = ErrorHandler(status_callback=lambda message: print(message, file=sys.stderr),
                           log_file=config.log_file, level=config.log_level)
    logger.info(f"{args.command}: {config.describe()}")
    try:
        return COMMANDS[args.command](config, handler)
    except (ConfigurationError, FieldFileError, OSError) as e:
        handler.handle_exception(e, args.command, f"エラー: {e}")
        return EXIT_CONFIG
    finally:
        for name, seconds in sorted(monitor.get_execution_times().items()):
            logger.debug(f"[Performance] {name}: {seconds:.3f}秒")


if __name__ == "__main__":
    sys.exit(main())
