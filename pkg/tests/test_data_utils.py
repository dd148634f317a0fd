# -*- coding: utf-8 -*-
import math
import os

import numpy as np
import pandas as pd
import pytest

from config import SUMMARY_COLUMNS
from data_utils import (ReportWriter, field_checksum, field_paths, read_field, read_report, to_jsonable,
                        write_curve, write_field, write_summary)
from error_handler import FieldFileError
from exponents import INF, PQPair
from field_generators import generate_shear_heat, with_forcing


def test_field_paths() -> None:
    assert field_paths("out/a") == ("out/a.hdr", "out/a.bin")
    assert field_paths("out/a.hdr") == ("out/a.hdr", "out/a.bin")


def test_field_file_preserves_samples_and_closure(tmp_path, half_grid) -> None:
    shear = with_forcing(generate_shear_heat(half_grid), "constant", amplitude=0.5)
    base = str(tmp_path / "shear")
    checksum = write_field(shear, base)
    assert checksum == field_checksum(shear)

    loaded = read_field(base)
    assert loaded.grid == half_grid
    assert np.array_equal(loaded.u, shear.u)
    assert np.array_equal(loaded.f, shear.f)
    assert loaded.metadata == to_jsonable(shear.metadata)
    assert loaded.analytic is not None
    assert loaded.div_tol == shear.div_tol


def test_header_is_text_and_blob_is_little_endian(tmp_path, half_grid) -> None:
    base = str(tmp_path / "shear")
    write_field(generate_shear_heat(half_grid), base)
    with open(base + ".hdr", encoding='utf-8') as f:
        lines = f.read().splitlines()
    assert lines[0] == "magic:CYLLENS1"
    assert "components:u1,u2,u3,p,f1,f2,f3" in lines
    nx, ny, nz = half_grid.counts
    assert os.path.getsize(base + ".bin") == half_grid.nt * nx * ny * nz * 7 * 8


def test_corrupted_files_are_rejected(tmp_path, half_grid) -> None:
    base = str(tmp_path / "shear")
    write_field(generate_shear_heat(half_grid), base)
    with open(base + ".bin", 'r+b') as f:
        f.seek(64)
        f.write(b"\x01")
    with pytest.raises(FieldFileError):
        read_field(base)
    assert read_field(base, verify_checksum=False).grid == half_grid

    with open(base + ".hdr", encoding='utf-8') as f:
        text = f.read()
    with open(base + ".hdr", 'w', encoding='utf-8') as f:
        f.write(text.replace("magic:CYLLENS1", "magic:OTHER"))
    with pytest.raises(FieldFileError):
        read_field(base)
    with pytest.raises(FieldFileError):
        read_field(str(tmp_path / "missing"))


def test_to_jsonable() -> None:
    converted = to_jsonable({'a': np.float64(math.inf), 'b': (1, np.int64(2)), 'c': np.array([0.5]),
                             'd': PQPair(2.0, INF), 'e': math.nan})
    assert converted['a'] == "inf"
    assert converted['b'] == [1, 2]
    assert converted['c'] == [0.5]
    assert converted['e'] == "nan"
    assert isinstance(converted['d'], dict)


def test_report_writer(tmp_path) -> None:
    with ReportWriter(str(tmp_path)) as writer:
        writer.write_header("analyze", {'epsilon': 0.05}, "abc")
        writer.write_all([{'kind': 'x', 'value': math.inf}, {'kind': 'y', 'value': 1.0}])
    records = read_report(writer.path)
    assert [r['kind'] for r in records] == ['header', 'x', 'y']
    assert records[0]['field_checksum'] == "abc"
    assert records[1]['value'] == "inf"


def test_summary_and_curve(tmp_path) -> None:
    rows = [dict(center="(0,0,0,0.25)", r=0.5, A=1.0, C=2.0, E=3.0, G=4.0, D_tilde=0.0, D1_tilde=0.0,
                 criterion=4.0, status="inconclusive")]
    path = write_summary(rows, str(tmp_path), excel=True)
    df = pd.read_csv(path)
    assert list(df.columns) == SUMMARY_COLUMNS
    assert (tmp_path / "summary.xlsx").exists()
    curve = pd.read_csv(write_curve([{'delta': 0.2, 'premeasure': 1.5}], str(tmp_path)))
    assert curve['premeasure'].tolist() == [1.5]
