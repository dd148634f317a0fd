# -*- coding: utf-8 -*-
"""
指数代数モジュール

κ, κ*, λ, p, q および (l, m) の関係式、領域分類、特異集合の次元 d(l,m) を扱う。
無限大の指数は浮動小数の番兵ではなく列挙値 INF で表す。
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

from config import EXPONENT_TOL
from error_handler import DomainError

logger = logging.getLogger(__name__)


class Infinity(enum.Enum):
    """指数の無限大"""
    INF = "inf"

    def __repr__(self):
        return "INF"


INF = Infinity.INF
ExponentValue = Union[float, Infinity]


def parse_exponent(value) -> ExponentValue:
    """文字列・数値を指数値に変換する（"inf", "∞" を受け付ける）"""
    if value is INF:
        return INF
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "∞"):
            return INF
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    value = float(value)
    if math.isinf(value):
        return INF
    return value


def reciprocal(e: ExponentValue) -> float:
    """1/e（1/∞ = 0）"""
    return 0.0 if e is INF else 1.0 / e


def exponent_to_json(e: ExponentValue):
    return "inf" if e is INF else e


class RegionTag(enum.Enum):
    """判定条件の (p,q) 領域"""
    I = "I"
    II = "II"
    EXCLUDED_ENDPOINT = "excluded_endpoint"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class PQPair:
    """空間指数 p と時間指数 q の組"""
    p: ExponentValue
    q: ExponentValue

    def __post_init__(self):
        for name in ("p", "q"):
            value = getattr(self, name)
            if value is not INF and not (value >= 1.0):
                raise DomainError(f"指数 {name}={value} は 1 以上でなければなりません")

    @classmethod
    def of(cls, p, q) -> "PQPair":
        return cls(parse_exponent(p), parse_exponent(q))

    @property
    def inv_p(self) -> float:
        return reciprocal(self.p)

    @property
    def inv_q(self) -> float:
        return reciprocal(self.q)

    @property
    def scaling_sum(self) -> float:
        """3/p + 2/q"""
        return 3.0 * self.inv_p + 2.0 * self.inv_q

    def to_dict(self) -> dict:
        return {'p': exponent_to_json(self.p), 'q': exponent_to_json(self.q)}


@dataclass(frozen=True)
class LMPair:
    """特異集合評価の可積分性指数 (l, m)"""
    l: float
    m: float

    def __post_init__(self):
        if not (self.l > 0 and self.m > 0):
            raise DomainError(f"(l,m)=({self.l},{self.m}) は正でなければなりません")

    @property
    def varsigma(self) -> float:
        """ς = 3/l + 2/m − 1"""
        return 3.0 / self.l + 2.0 / self.m - 1.0

    def as_pq(self) -> PQPair:
        return PQPair(self.l, self.m)

    def to_dict(self) -> dict:
        return {'l': self.l, 'm': self.m}


@dataclass(frozen=True)
class ExponentSet:
    """関係式で結ばれた指数 (κ, κ*, λ, p, q)"""
    kappa: float
    kappa_star: float
    lam: float
    p: float
    q: float

    def __post_init__(self):
        self.check()

    def check(self, tol: float = EXPONENT_TOL):
        """4つの関係式を検証する"""
        residuals = {
            '3/κ+2/λ=4': 3.0 / self.kappa + 2.0 / self.lam - 4.0,
            '1/κ*=1/κ−1/3': 1.0 / self.kappa_star - (1.0 / self.kappa - 1.0 / 3.0),
            '1/p+1/κ*=1': 1.0 / self.p + 1.0 / self.kappa_star - 1.0,
            '1/q+1/λ=1': 1.0 / self.q + 1.0 / self.lam - 1.0,
        }
        for name, res in residuals.items():
            if abs(res) > tol:
                raise DomainError(f"指数関係式 {name} が満たされていません (残差={res:.3e})")

    @property
    def pq(self) -> PQPair:
        return PQPair(self.p, self.q)

    @property
    def kappa_prime(self) -> float:
        """3/κ' + 2/λ = 2 を満たす κ'"""
        return 3.0 / (2.0 - 2.0 / self.lam)

    @property
    def kappa_tilde(self) -> float:
        """3/κ̃ + 2/λ = 1 を満たす κ̃（λ > 2 でのみ有限）"""
        denom = 1.0 - 2.0 / self.lam
        if denom <= 0:
            raise DomainError(f"λ={self.lam} では κ̃ は定義されません (λ>2 が必要)")
        return 3.0 / denom

    def to_dict(self) -> dict:
        return {'kappa': self.kappa, 'kappa_star': self.kappa_star, 'lambda': self.lam, 'p': self.p, 'q': self.q}


def exponent_set_from_lambda(lam: float) -> ExponentSet:
    """λ ∈ (1,2) から一意に定まる ExponentSet を返す

    Raises:
        DomainError: λ が開区間 (1,2) の外にある場合
    """
    lam = float(lam)
    if not (1.0 < lam < 2.0):
        raise DomainError(f"λ={lam} は開区間 (1,2) の内部になければなりません")
    kappa = 3.0 / (4.0 - 2.0 / lam)
    inv_kappa_star = 1.0 / kappa - 1.0 / 3.0
    kappa_star = 1.0 / inv_kappa_star
    p = 1.0 / (1.0 - inv_kappa_star)
    q = 1.0 / (1.0 - 1.0 / lam)
    return ExponentSet(kappa=kappa, kappa_star=kappa_star, lam=lam, p=p, q=q)


def exponent_set_from_pq(pq: PQPair) -> ExponentSet:
    """3/p+2/q = 2 上の (p,q) から ExponentSet を復元する"""
    if pq.q is INF or pq.p is INF:
        raise DomainError("3/p+2/q=2 上の有限な (p,q) が必要です")
    if abs(pq.scaling_sum - 2.0) > 1e-9:
        raise DomainError(f"(p,q)=({pq.p},{pq.q}) は 3/p+2/q=2 を満たしません")
    return exponent_set_from_lambda(1.0 / (1.0 - pq.inv_q))


def _is_close(a: ExponentValue, b: ExponentValue) -> bool:
    if a is INF or b is INF:
        return a is b
    return abs(a - b) <= EXPONENT_TOL * max(1.0, abs(b))


def classify_region(pq: PQPair) -> RegionTag:
    """(p,q) を領域 I / II / 除外端点 / 外部 に分類する

    境界 3/p+2/q = 1 は II に含める（I は Prodi-Serrin の厳密な内部）。
    """
    if (_is_close(pq.p, 1.5) and pq.q is INF) or (_is_close(pq.p, 3.0) and _is_close(pq.q, 2.0)):
        return RegionTag.EXCLUDED_ENDPOINT
    s = pq.scaling_sum
    if s < 1.0 - EXPONENT_TOL:
        return RegionTag.I
    q_ok = pq.q is INF or pq.q > 2.0
    if s <= 2.0 + EXPONENT_TOL and q_ok:
        return RegionTag.II
    return RegionTag.OUTSIDE


def criterion_exponent(pq: PQPair) -> float:
    """判定量の半径べき 3/p + 2/q − 1"""
    region = classify_region(pq)
    if region is RegionTag.OUTSIDE:
        raise DomainError(f"(p,q)=({pq.p},{pq.q}) は領域 I, II の外です")
    if region is RegionTag.EXCLUDED_ENDPOINT:
        raise DomainError(f"(p,q)=({pq.p},{pq.q}) は除外された端点です")
    return pq.scaling_sum - 1.0


def in_region_V(lm: LMPair) -> bool:
    """領域 V: 3/l+2/m > 1, 1/l+1/m < 1/2, 3/l+1/m < 1"""
    l, m = lm.l, lm.m
    return (3.0 / l + 2.0 / m > 1.0) and (1.0 / l + 1.0 / m < 0.5) and (3.0 / l + 1.0 / m < 1.0)


REGION_V_TEXT = "3/l+2/m>1, 1/l+1/m<1/2, 3/l+1/m<1"


def singular_dimension(lm: LMPair) -> float:
    """特異集合の次元 d(l,m)"""
    if not in_region_V(lm):
        raise DomainError(f"(l,m)=({lm.l},{lm.m}) は領域 V ({REGION_V_TEXT}) の外です")
    l, m = lm.l, lm.m
    if l > m:
        return 3.0 - m + 2.0 * m / l
    return 2.0 - m + 3.0 * m / l


@dataclass(frozen=True)
class Sec4Weights:
    """(l,m) 補間に現れる α, β, σ と各ノルムへの重み"""
    alpha: float
    beta: float
    sigma: float
    weight_lm: float
    weight_2inf: float
    weight_62: float
    degenerate: bool = False


def l4_weights_sec4(lm: LMPair) -> Sec4Weights:
    """α, β, σ を表示式どおりに計算する（ケース判定なし）

    α の分子が 0 のときは α = 0 を返し degenerate を立てる。
    """
    l, m = lm.l, lm.m
    numerator = 3.0 / l + 2.0 / m - 1.25
    alpha_den = 1.0 / l + 1.0 / (2.0 * m) - 0.375
    beta_den = 3.0 * (1.0 / l + 1.0 / m - 0.5)
    if abs(numerator) <= EXPONENT_TOL:
        logger.warning(f"(l,m)=({l},{m}) で α の分子が 0 です")
        return Sec4Weights(alpha=0.0, beta=0.0, sigma=(4.0 - l) / 4.0,
                           weight_lm=(4.0 - l) / 4.0, weight_2inf=0.0, weight_62=0.0, degenerate=True)
    if abs(alpha_den) <= EXPONENT_TOL or abs(beta_den) <= EXPONENT_TOL:
        raise DomainError(f"(l,m)=({l},{m}) で α または β の分母が 0 になります")
    alpha = numerator / alpha_den
    beta = 4.0 * numerator / beta_den
    if abs(l - alpha) <= EXPONENT_TOL:
        raise DomainError(f"(l,m)=({l},{m}) で σ の分母 l−α が 0 になります")
    sigma = l * (4.0 - l) / (4.0 * (l - alpha))
    return Sec4Weights(
        alpha=alpha, beta=beta, sigma=sigma,
        weight_lm=sigma,
        weight_2inf=(6.0 - alpha) * (1.0 - sigma) / (2.0 * alpha),
        weight_62=2.0 * (1.0 - sigma) / beta,
    )


class Sec4Case(enum.Enum):
    L_GREATER = "l>m"
    L_AT_MOST = "l<=m"


@dataclass(frozen=True)
class Sec4Exponents:
    """interp_sec4_exponents の結果"""
    case: Sec4Case
    weights: Sec4Weights
    k: Optional[float] = None
    sigma_k: Optional[float] = None

    @property
    def alpha(self) -> float:
        return self.weights.alpha

    @property
    def beta(self) -> float:
        return self.weights.beta

    @property
    def sigma(self) -> float:
        return self.weights.sigma


def sec4_case(lm: LMPair) -> Optional[Sec4Case]:
    """(l,m) が l>m と l≤m のどちらの許容ケースに属するか（どちらでもなければ None）"""
    l, m = lm.l, lm.m
    if not (3.0 / l + 2.0 / m > 1.0):
        return None
    if l > m and 2.0 / l + 2.0 / m < 1.0:
        return Sec4Case.L_GREATER
    if l <= m and 3.0 / l + 1.0 / m < 1.0:
        return Sec4Case.L_AT_MOST
    return None


def interp_sec4_exponents(lm: LMPair) -> Sec4Exponents:
    """(l,m) の補間指数。l>m のケースでは k = 2+m−2m/l と σ = m/k も返す"""
    case = sec4_case(lm)
    if case is None:
        raise DomainError(f"(l,m)=({lm.l},{lm.m}) は許容ケース (l>m, l≤m) のどちらにも属しません")
    weights = l4_weights_sec4(lm)
    if case is Sec4Case.L_GREATER:
        k = 2.0 + lm.m - 2.0 * lm.m / lm.l
        return Sec4Exponents(case=case, weights=weights, k=k, sigma_k=lm.m / k)
    return Sec4Exponents(case=case, weights=weights)


@dataclass(frozen=True)
class L4Weights:
    """L⁴ 補間の重み (1/2, 1/q, 3/(2p))。p=r, q=s として読む"""
    half: float
    one_over_q: float
    three_over_2p: float
    endpoint: bool = False
    pairing_ambiguous: bool = True
    balance: Tuple[float, float, float] = field(default=(1.0, 0.25, 0.25))

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.half, self.one_over_q, self.three_over_2p)


def interp_L4_exponents(rs: PQPair) -> L4Weights:
    """Prodi-Serrin 線 3/r+2/s=1 上での L⁴ 補間の重み

    (3,∞) と (∞,2) の端点は endpoint フラグ付きで受け付ける。
    """
    if abs(rs.scaling_sum - 1.0) > 1e-9:
        raise DomainError(f"(r,s)=({rs.p},{rs.q}) は 3/r+2/s=1 上にありません")
    endpoint = False
    if rs.p is INF:
        endpoint = True
    elif rs.q is INF:
        if not _is_close(rs.p, 3.0):
            raise DomainError(f"(r,s)=({rs.p},{rs.q}) は 3<r<∞ を満たしません")
        endpoint = True
    elif not (rs.p > 3.0):
        raise DomainError(f"(r,s)=({rs.p},{rs.q}) は 3<r<∞ を満たしません")
    if endpoint:
        logger.warning(f"(r,s)=({exponent_to_json(rs.p)},{exponent_to_json(rs.q)}) は端点として扱います")

    w = (0.5, rs.inv_q, 1.5 * rs.inv_p)
    # 指数収支: 重みの和, 空間 1/4, 時間 1/4
    balance = (
        sum(w),
        w[0] * rs.inv_p + w[1] / 2.0 + w[2] / 6.0,
        w[0] * rs.inv_q + w[2] / 2.0,
    )
    for got, want in zip(balance, (1.0, 0.25, 0.25)):
        if abs(got - want) > 1e-9:
            raise DomainError(f"L⁴ 補間の指数収支が合いません: {balance}")
    return L4Weights(half=w[0], one_over_q=w[1], three_over_2p=w[2], endpoint=endpoint, balance=balance)
