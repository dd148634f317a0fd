# -*- coding: utf-8 -*-
"""
データ入出力ユーティリティモジュール

場ファイル（テキストのサイドカーヘッダー + 64bit 浮動小数の生バイナリ）と
レポート（JSON lines、CSV/Excel のサマリー）を扱う。
"""
import enum
import hashlib
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import (BLOB_SUFFIX, CURVE_FILE, FIELD_COMPONENTS, FIELD_DTYPE, FIELD_ENDIANNESS, FIELD_MAGIC,
                    HEADER_SUFFIX, REPORT_FILE, SUMMARY_COLUMNS, SUMMARY_EXCEL_FILE, SUMMARY_FILE)
from error_handler import FieldFileError
from fields import GridSpec, SpaceTimeField

logger = logging.getLogger(__name__)


def field_paths(path: str) -> Tuple[str, str]:
    """ベースパスからヘッダーとバイナリのパスを得る"""
    base = path
    for suffix in (HEADER_SUFFIX, BLOB_SUFFIX):
        if base.endswith(suffix):
            base = base[:-len(suffix)]
    return base + HEADER_SUFFIX, base + BLOB_SUFFIX


def field_to_blob(field_: SpaceTimeField) -> bytes:
    """t, x3, x2, x1, 成分 (u1,u2,u3,p,f1,f2,f3) の順に並べたリトルエンディアンのバイト列"""
    stacked = np.concatenate([field_.u, field_.p[..., None], field_.f], axis=-1)
    ordered = np.ascontiguousarray(stacked.transpose(0, 3, 2, 1, 4), dtype=FIELD_DTYPE)
    return ordered.tobytes()


def blob_checksum(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def field_checksum(field_: SpaceTimeField) -> str:
    return blob_checksum(field_to_blob(field_))


def _format_float(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def write_field(field_: SpaceTimeField, path: str) -> str:
    """場をヘッダー + バイナリで保存する

    Args:
        field_: 保存する場
        path: ベースパス（拡張子 .hdr/.bin は付け替える）

    Returns:
        バイナリの sha256 チェックサム
    """
    header_path, blob_path = field_paths(path)
    grid = field_.grid
    blob = field_to_blob(field_)
    checksum = blob_checksum(blob)
    lines = [
        f"magic:{FIELD_MAGIC}",
        f"name:{field_.name}",
        f"nx:{grid.counts[0]}",
        f"ny:{grid.counts[1]}",
        f"nz:{grid.counts[2]}",
        f"nt:{grid.nt}",
        f"h:{_format_float(grid.h)}",
        f"origin:{','.join(_format_float(v) for v in grid.origin)}",
        f"t0:{_format_float(grid.t0)}",
        f"dt:{_format_float(grid.dt)}",
        f"half_space:{'true' if grid.half_space else 'false'}",
        f"components:{','.join(FIELD_COMPONENTS)}",
        f"endianness:{FIELD_ENDIANNESS}",
        f"dtype:{FIELD_DTYPE}",
        f"div_tol:{_format_float(field_.div_tol)}",
        f"boundary_tol:{_format_float(field_.boundary_tol)}",
        f"exclusions:{json.dumps([[list(c), r] for c, r in field_.exclusions])}",
        f"metadata:{json.dumps(to_jsonable(field_.metadata), ensure_ascii=False, sort_keys=True)}",
        f"checksum:{checksum}",
    ]
    directory = os.path.dirname(header_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        with open(blob_path, 'wb') as f:
            f.write(blob)
        with open(header_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise FieldFileError(f"場ファイルを書き込めません: {e}") from e
    logger.info(f"場 '{field_.name}' を保存しました: {header_path} (sha256={checksum[:12]}…)")
    return checksum


def read_header(header_path: str) -> Dict[str, str]:
    """key:value 形式のヘッダーを読む"""
    try:
        with open(header_path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise FieldFileError(f"ヘッダーを読み込めません: {e}") from e
    header = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise FieldFileError(f"{header_path}:{number}: key:value 形式ではありません")
        header[key.strip()] = value.strip()
    return header


def read_field(path: str, verify_checksum: bool = True) -> SpaceTimeField:
    """場ファイルを読み込む。生成器のメタデータがあれば解析的クロージャも復元する

    Raises:
        FieldFileError: 形式・チェックサム・サイズの不一致
    """
    header_path, blob_path = field_paths(path)
    header = read_header(header_path)
    try:
        if header.get('magic') != FIELD_MAGIC:
            raise FieldFileError(f"マジック '{header.get('magic')}' は {FIELD_MAGIC} ではありません")
        if header.get('endianness') != FIELD_ENDIANNESS or header.get('dtype') != FIELD_DTYPE:
            raise FieldFileError("対応していないエンディアンまたはデータ型です")
        if header.get('components', '').split(',') != FIELD_COMPONENTS:
            raise FieldFileError(f"成分リスト '{header.get('components')}' が想定と異なります")
        grid = GridSpec(
            origin=tuple(float(v) for v in header['origin'].split(',')),
            h=float(header['h']),
            counts=(int(header['nx']), int(header['ny']), int(header['nz'])),
            t0=float(header['t0']), dt=float(header['dt']), nt=int(header['nt']),
            half_space=header['half_space'] == 'true',
        )
        metadata = json.loads(header.get('metadata', '{}'))
        exclusions = tuple((tuple(c), float(r)) for c, r in json.loads(header.get('exclusions', '[]')))
        div_tol = float(header.get('div_tol', 'inf'))
        boundary_tol = float(header.get('boundary_tol', 'inf'))
    except KeyError as e:
        raise FieldFileError(f"ヘッダーにキー {e} がありません") from e
    except ValueError as e:
        raise FieldFileError(f"ヘッダーの値が不正です: {e}") from e

    try:
        with open(blob_path, 'rb') as f:
            blob = f.read()
    except OSError as e:
        raise FieldFileError(f"バイナリを読み込めません: {e}") from e
    nx, ny, nz = grid.counts
    expected = grid.nt * nx * ny * nz * len(FIELD_COMPONENTS) * 8
    if len(blob) != expected:
        raise FieldFileError(f"バイナリのサイズ {len(blob)} が期待値 {expected} と一致しません")
    if verify_checksum and blob_checksum(blob) != header.get('checksum'):
        raise FieldFileError("チェックサムが一致しません")

    data = np.frombuffer(blob, dtype=FIELD_DTYPE).reshape(grid.nt, nz, ny, nx, len(FIELD_COMPONENTS))
    data = data.transpose(0, 3, 2, 1, 4).astype(np.float64)

    # 循環 import を避けるため遅延 import
    from field_generators import closure_from_metadata
    analytic = closure_from_metadata(grid, metadata)
    return SpaceTimeField(grid=grid, u=data[..., 0:3], p=data[..., 3], f=data[..., 4:7], analytic=analytic,
                          name=header.get('name', os.path.basename(header_path)), div_tol=div_tol,
                          boundary_tol=boundary_tol, exclusions=exclusions, metadata=metadata)


def to_jsonable(value: Any) -> Any:
    """JSON に書ける形へ変換する（非有限の浮動小数は "inf"/"-inf"/"nan"）"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if hasattr(value, 'to_dict'):
        return to_jsonable(value.to_dict())
    return value


class ReportWriter:
    """JSON lines のレポートを1つの書き手で決定的な順に書き出す"""

    def __init__(self, out_dir: str, file_name: str = REPORT_FILE):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.path = os.path.join(out_dir, file_name)
        self.count = 0
        try:
            self._file = open(self.path, 'w', encoding='utf-8', newline='\n')
        except OSError as e:
            raise FieldFileError(f"レポートを作成できません: {e}") from e

    def write(self, record: Any):
        line = json.dumps(to_jsonable(record), ensure_ascii=False, sort_keys=True, allow_nan=False)
        self._file.write(line + "\n")
        self.count += 1

    def write_header(self, command: str, config: Dict, field_checksum_value: Optional[str] = None):
        """解決済みの設定をそのままヘッダーとして書く"""
        self.write({'kind': 'header', 'command': command, 'config': config, 'field_checksum': field_checksum_value})

    def write_all(self, records: Iterable[Any]):
        for record in records:
            self.write(record)

    def close(self):
        if not self._file.closed:
            self._file.close()
            logger.info(f"レポートを書き出しました: {self.path} ({self.count} レコード)")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


def read_report(path: str) -> List[Dict]:
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]


def write_summary(rows: List[Dict], out_dir: str, excel: bool = False) -> str:
    """(center, r, A, C, E, G, D̃, D̃₁, criterion, status) のサマリーを CSV（と任意で Excel）に書く"""
    df = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    csv_path = os.path.join(out_dir, SUMMARY_FILE)
    df.to_csv(csv_path, index=False, encoding='utf-8')
    if excel:
        df.to_excel(os.path.join(out_dir, SUMMARY_EXCEL_FILE), index=False)
    logger.info(f"サマリーを書き出しました: {csv_path} ({len(df)} 行)")
    return csv_path


def write_curve(rows: List[Dict], out_dir: str) -> str:
    """前測度曲線 (δ, 前測度) を CSV に書く"""
    path = os.path.join(out_dir, CURVE_FILE)
    pd.DataFrame(rows).to_csv(path, index=False, encoding='utf-8')
    return path
