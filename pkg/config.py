# -*- coding: utf-8 -*-
"""
放物型シリンダー解析ツール設定ファイル
"""

# 指数計算の許容誤差
EXPONENT_TOL = 1e-12  # 指数関係式の検証に使う許容誤差
NODE_SNAP_TOL = 1e-9  # 格子点への丸め許容（格子間隔に対する比）

# 判定基準のデフォルト値
DEFAULT_EPSILON = 0.05
DEFAULT_EPSILON0 = 0.05
DEFAULT_K = 3  # limsup/liminf を近似する最小半径の個数
DEFAULT_LAMBDA = 1.5
DEFAULT_GAMMA = 1.0
DEFAULT_DECAY_ALPHA = 0.5
DEFAULT_DECAY_BETA = 0.5
DEFAULT_THETA = 0.25
HYSTERESIS_BAND = 0.05  # スケーリング比較で判定を除外する ε 周りの帯

# 求積設定
DEFAULT_SUBSAMPLE = 4
MAX_SUBSAMPLE = 8
DEFAULT_MIN_CELLS = 4
MIN_MIN_CELLS = 4
ORACLE_SUBSAMPLE = 8  # 密なリーマン和オラクルの細分数
CELL_CHUNK = 4096  # 部分セル重み計算のチャンクサイズ

# 圧力分解設定
POISSON_TOL = 1e-8
MIN_INTERIOR_CELLS = 2  # 内部球と格子面の最小距離（セル数）

# 被覆設定
EXPANSION_FACTOR = 5.0
DEFAULT_DELTAS = [0.2, 0.1, 0.05]
DEFAULT_RADIUS_FRACTION = 0.5
BRUTE_FORCE_LIMIT = 6  # 全列挙オラクルを使う候補数の上限

# パフォーマンス設定
BATCH_SIZE = 16  # バッチ処理サイズ
CACHE_SIZE = 64  # 求積則キャッシュサイズ
DEFAULT_THREADS = 4

# ログ設定
LOG_LEVEL = "INFO"
LOG_FILE = "cyllens.log"
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

# 場ファイル設定
FIELD_MAGIC = "CYLLENS1"
FIELD_COMPONENTS = ["u1", "u2", "u3", "p", "f1", "f2", "f3"]
FIELD_ENDIANNESS = "little"
FIELD_DTYPE = "<f8"
HEADER_SUFFIX = ".hdr"
BLOB_SUFFIX = ".bin"

# レポート設定
REPORT_FILE = "report.jsonl"
SUMMARY_FILE = "summary.csv"
SUMMARY_EXCEL_FILE = "summary.xlsx"
CURVE_FILE = "dimension_curve.csv"
SUMMARY_COLUMNS = ['center', 'r', 'A', 'C', 'E', 'G', 'D_tilde', 'D1_tilde', 'criterion', 'status']

# 生成器名
GENERATOR_NAMES = ['zero', 'shear', 'homogeneous', 'random']

# 検証スイート名
VERIFY_SUITES = [
    'basiclemma', 'interior_l3', 'energy', 'energy_consequence', 'nonlinear',
    'l4_interpolation', 'sec4_interpolation', 'l24_interpolation', 'pressure_bound',
    'pressure_split', 'exponents',
]

# 検証の判定基準（違反すると verify は非ゼロで終了する）
ENERGY_REL_TOL = 0.05  # 厳密解での |rhs−lhs|/(lhs+|rhs|) の上限
RECONSTRUCTION_TOL = 1e-10  # p₁+p₂+平均 と p の差（|p| の最大値に対する比）
MEAN_FREE_TOL = 1e-12
HARMONIC_FACTOR = 10.0  # 調和残差の上限（POISSON_TOL の倍数）
EXPONENT_SAMPLES = 1000  # 指数関係式を検証する λ の標本数

# 終了コード
EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
