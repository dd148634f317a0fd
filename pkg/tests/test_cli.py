# -*- coding: utf-8 -*-
import math
import os

import pandas as pd
import pytest

from cli import build_parser, interior_grid, main, overrides_from_args
from config import EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK
from data_utils import read_report


def _common(out) -> list:
    return ['--out', str(out), '--set', 'logging.file=null',
            '--set', 'grid.origin=[-0.5,-0.5,0.0]', '--set', 'grid.counts=[17,17,9]', '--set', 'grid.nt=17']


def _records(out, kind):
    return [r for r in read_report(os.path.join(str(out), "report.jsonl")) if r['kind'] == kind]


def test_generate_writes_field(tmp_path) -> None:
    assert main(['generate', '--generator', 'shear'] + _common(tmp_path)) == EXIT_OK
    assert (tmp_path / "shear.hdr").exists() and (tmp_path / "shear.bin").exists()
    [header] = _records(tmp_path, 'header')
    assert header['command'] == "generate"
    assert header['config']['grid']['counts'] == [17, 17, 9]


def test_generator_grid_mismatch_is_a_config_error(tmp_path) -> None:
    assert main(['generate', '--generator', 'homogeneous'] + _common(tmp_path)) == EXIT_CONFIG


def test_random_generation_is_deterministic(tmp_path) -> None:
    checksums = []
    for name in ('a', 'b'):
        out = tmp_path / name
        assert main(['generate', '--generator', 'random', '--seed', '3'] + _common(out)) == EXIT_OK
        checksums.append(_records(out, 'header')[0]['field_checksum'])
    assert checksums[0] == checksums[1]


def test_verify_exponents(tmp_path) -> None:
    assert main(['verify', '--suites', 'exponents', '--corpus', 'zero'] + _common(tmp_path)) == EXIT_OK
    [check] = _records(tmp_path, 'exponent_check')
    assert check['failures'] == 0
    assert check['dimension_4.5_4.5'] == 0.5


def test_verify_suites_pass_on_reference_corpus(tmp_path) -> None:
    code = main(['verify', '--corpus', 'zero', 'shear', '--suites', 'energy', 'basiclemma', 'nonlinear',
                 '--radii', '0.5'] + _common(tmp_path))
    assert code == EXIT_OK
    [summary] = _records(tmp_path, 'verify_summary')
    assert summary['assertion_failures'] == 0
    assert summary['fields'] == ['zero', 'shear']
    assert _records(tmp_path, 'ratio')


def test_unknown_suite_is_rejected(tmp_path) -> None:
    with pytest.raises(SystemExit):
        main(['verify', '--suites', 'magic'] + _common(tmp_path))


def test_analyze_zero_field(tmp_path) -> None:
    code = main(['analyze', '--set', 'field.generator="zero"', '--radii', '0.5', '0.375', '0.25']
                + _common(tmp_path))
    assert code == EXIT_OK
    verdicts = [r for r in _records(tmp_path, 'verdict') if r['criterion'] == "TH1"]
    assert len(verdicts) == 2
    assert all(v['status'] == "regular_by_TH1" for v in verdicts)
    summary = pd.read_csv(tmp_path / "summary.csv")
    assert len(summary) == 6
    assert set(summary['status']) == {"regular_by_TH1"}


def test_negative_epsilon_is_a_config_error(tmp_path) -> None:
    assert main(['analyze', '--epsilon', '-1'] + _common(tmp_path)) == EXIT_CONFIG


def test_cover_outside_region_V(tmp_path) -> None:
    assert main(['cover', '--lm', '3', '3'] + _common(tmp_path)) == EXIT_CONFIG


def test_cover_zero_field(tmp_path) -> None:
    code = main(['cover', '--set', 'field.generator="zero"', '--deltas', '1.0', '0.75', '0.5'] + _common(tmp_path))
    assert code == EXIT_OK
    [curve] = _records(tmp_path, 'dimension_curve')
    assert curve['trend'] == "nonincreasing"
    assert (tmp_path / "dimension_curve.csv").exists()


def test_calibrate(tmp_path) -> None:
    code = main(['calibrate', '--set', 'calibrate.seeds=[1]', '--set', 'radii.values=[0.5,0.375,0.25]']
                + _common(tmp_path))
    assert code == EXIT_OK
    [calibration] = _records(tmp_path, 'calibration')
    assert set(calibration['per_field']) >= {'zero', 'shear'}
    assert calibration['lattice_centers'] <= 8
    if calibration['separating_epsilon0'] is not None:
        assert calibration['statuses']['center'] == 'flagged_candidate'
        assert 'flagged_candidate' not in calibration['statuses']['lattice']


def test_overrides_from_args() -> None:
    args = build_parser().parse_args(['analyze', '--epsilon', '0.1', '--pq', '4', 'inf', '--set', 'run.seed=9'])
    overrides = overrides_from_args(args)
    assert overrides['criteria.epsilon'] == 0.1
    assert overrides['exponents.pq'] == ['4', 'inf']
    assert overrides['run.seed'] == 9


def test_interior_grid_is_centred(half_grid) -> None:
    inner = interior_grid(half_grid)
    assert not inner.half_space
    assert inner.origin[2] == pytest.approx(-0.25)
    assert inner.counts == half_grid.counts




def _verify_ratios(out) -> list:
    code = main(['verify', '--out', str(out), '--set', 'logging.file=null',
                 '--set', 'grid.origin=[-0.5,-0.5,0.0]', '--set', 'grid.h=0.03125',
                 '--set', 'grid.counts=[33,33,33]', '--set', 'grid.nt=17',
                 '--radii', '0.5', '0.25', '0.125'])
    assert code in (EXIT_OK, EXIT_ASSERTION)
    [summary] = _records(out, 'verify_summary')
    assert summary['fields'] == ['zero', 'shear', 'random-1', 'random-2', 'random-3', 'random-4', 'random-5']
    assert 'exponents' in summary['suites'] and 'pressure_split' in summary['suites']
    return _records(out, 'ratio')


def test_ratio_suite_over_two_dyadic_decades(tmp_path) -> None:
    first = _verify_ratios(tmp_path / "a")
    second = _verify_ratios(tmp_path / "b")
    assert first
    assert all(not r['infinite'] and math.isfinite(r['ratio']) for r in first)
    # 再実行で同じ順序・同じ値
    assert [(r['name'], r['r']) for r in first] == [(r['name'], r['r']) for r in second]
    for a, b in zip(first, second):
        assert b['ratio'] == pytest.approx(a['ratio'], rel=1e-10, abs=1e-300)

    maxima = {}
    for record in first:
        upper, lower = maxima.setdefault(record['name'], [0.0, 0.0])
        if record['r'] >= 0.25:
            upper = max(upper, record['ratio'])
        if record['r'] <= 0.25:
            lower = max(lower, record['ratio'])
        maxima[record['name']] = [upper, lower]
    for name, (upper, lower) in maxima.items():
        if upper > 0.0 and lower > 0.0:
            assert max(upper, lower) / min(upper, lower) <= 10.0, name
