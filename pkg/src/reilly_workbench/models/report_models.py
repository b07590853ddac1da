"""
検証レポートのデータモデル

各レポートは terms() で名前付きの数値を返し、CSV表・JSONレポートの行になる
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from src.reilly_workbench.models.geometry_models import ScalarField


class Verdict(str, Enum):
    """三値判定"""

    HOLDS = "holds-within-tolerance"
    VIOLATED = "violated-beyond-tolerance"
    INCONCLUSIVE = "inconclusive"


class SuiteOutcome(str, Enum):
    """スイート単位の結果"""

    HOLDS = "holds"
    STRICT = "strict"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"
    PRECONDITION_VIOLATED = "precondition_violated"
    NOT_CMC = "not_cmc"
    INDEFINITE = "indefinite"
    UNSUPPORTED = "unsupported"
    SCREEN_FAILED = "screen_failed"
    ERROR = "error"


def _relative(value: float, reference: float) -> float:
    if reference == 0.0:
        return float(abs(value))
    return float(value / abs(reference))


@dataclass
class CurvatureScreenResult:
    """Gauss曲率の下限スクリーニング"""

    minimum: float
    bound: float
    tolerance: float
    passed: bool

    def terms(self) -> Dict[str, float]:
        return {"min_curvature": self.minimum, "bound": self.bound}


@dataclass
class ReillyReport:
    """一般化Reilly恒等式の各項"""

    t_lhs: float
    b1: float
    b2: float
    t3: float
    t4: float
    h_max: float
    excluded_measure: float = 0.0

    @property
    def residual(self) -> float:
        return self.t_lhs - (self.b1 + self.b2 + self.t3 + self.t4)

    @property
    def scale(self) -> float:
        return abs(self.t_lhs) + abs(self.b1) + abs(self.b2) + abs(self.t3) + abs(self.t4)

    @property
    def relative_residual(self) -> float:
        scale = self.scale
        return abs(self.residual) / scale if scale > 0.0 else 0.0

    def terms(self) -> Dict[str, float]:
        return {
            "T_lhs": self.t_lhs,
            "B1": self.b1,
            "B2": self.b2,
            "T3": self.t3,
            "T4": self.t4,
            "scale": self.scale,
            "excluded_measure": self.excluded_measure,
        }


@dataclass
class HKReport:
    """
    Heintze-Karcher型不等式のレポート

    gap = lhs − reference_rhs。reference_rhs はユークリッドで n·Vol、
    球面で n∫V、双曲・カスタムで ∫ΔV
    """

    lhs: float
    rhs_bulk: float
    rhs_flux: float
    alt_rhs: float
    reference_rhs: float
    reference_kind: str
    min_h: float
    h_max: float
    precondition_met: bool = True
    precondition_note: str = ""
    screen: Optional[CurvatureScreenResult] = None
    excluded_measure: float = 0.0

    @property
    def gap(self) -> float:
        return self.lhs - self.reference_rhs

    @property
    def relative_gap(self) -> float:
        return _relative(self.gap, self.reference_rhs)

    @property
    def flux_vs_bulk(self) -> float:
        return self.rhs_flux - self.rhs_bulk

    @property
    def alt_gap(self) -> float:
        """lhs − n∫V の符号は未解決問題の経験的記録"""
        return self.lhs - self.alt_rhs

    def terms(self) -> Dict[str, float]:
        return {
            "lhs": self.lhs,
            "rhs_bulk": self.rhs_bulk,
            "rhs_flux": self.rhs_flux,
            "alt_rhs": self.alt_rhs,
            "reference_rhs": self.reference_rhs,
            "min_H": self.min_h,
            "flux_vs_bulk": self.flux_vs_bulk,
            "alt_gap": self.alt_gap,
        }


@dataclass
class MinkowskiReport:
    """Minkowski恒等式の二組の値"""

    first_lhs: float  # ∫_M V dA
    first_rhs: float  # ∫_M H p dA
    second_lhs: float  # ∫_M p dA
    second_rhs: float  # n ∫_Ω V dΩ
    h_max: float

    @property
    def first_discrepancy(self) -> float:
        return _relative(self.first_lhs - self.first_rhs, self.first_lhs)

    @property
    def second_discrepancy(self) -> float:
        return _relative(self.second_lhs - self.second_rhs, self.second_rhs)

    def terms(self) -> Dict[str, float]:
        return {
            "int_V_dA": self.first_lhs,
            "int_Hp_dA": self.first_rhs,
            "int_p_dA": self.second_lhs,
            "n_int_V": self.second_rhs,
            "first_discrepancy": self.first_discrepancy,
            "second_discrepancy": self.second_discrepancy,
        }


@dataclass
class AlexandrovReport:
    """CMC境界に対する等式連鎖"""

    mean_h: float
    max_h_deviation: float  # 相対値
    is_cmc: bool
    cmc_tolerance: float
    h_max: float
    schwarz_lhs: Optional[float] = None  # (n−1)/n ∫_Ω V
    schwarz_rhs: Optional[float] = None  # (n−1) H ∫_M u²V
    green_boundary: Optional[float] = None  # ∫_M uV
    green_bulk: Optional[float] = None  # ∫_Ω V
    minkowski_boundary: Optional[float] = None  # ∫_M V
    minkowski_bulk: Optional[float] = None  # n H ∫_Ω V
    holder_lhs: Optional[float] = None  # (∫_M uV)²
    holder_rhs: Optional[float] = None  # ∫_M V/H · ∫_M H u² V
    obata_residual: Optional[float] = None

    @property
    def schwarz_slack(self) -> Optional[float]:
        if self.schwarz_lhs is None:
            return None
        return _relative(self.schwarz_lhs - self.schwarz_rhs, self.schwarz_lhs)

    @property
    def green_discrepancy(self) -> Optional[float]:
        if self.green_bulk is None:
            return None
        return _relative(self.green_boundary - self.green_bulk, self.green_bulk)

    @property
    def minkowski_discrepancy(self) -> Optional[float]:
        if self.minkowski_boundary is None:
            return None
        return _relative(self.minkowski_boundary - self.minkowski_bulk, self.minkowski_boundary)

    @property
    def holder_slack(self) -> Optional[float]:
        if self.holder_rhs is None:
            return None
        return _relative(self.holder_rhs - self.holder_lhs, self.holder_rhs)

    @property
    def worst_slack(self) -> Optional[float]:
        """連鎖の各リンクと Obata 残差の絶対値の最大"""
        if not self.is_cmc:
            return None
        values = [
            self.schwarz_slack,
            self.green_discrepancy,
            self.minkowski_discrepancy,
            self.holder_slack,
            self.obata_residual,
        ]
        return float(max(abs(v) for v in values))

    def terms(self) -> Dict[str, float]:
        nan = float("nan")
        terms = {"mean_H": self.mean_h, "H_deviation": self.max_h_deviation}
        for name in (
            "schwarz_slack",
            "green_discrepancy",
            "minkowski_discrepancy",
            "holder_slack",
            "obata_residual",
        ):
            value = getattr(self, name)
            terms[name] = nan if value is None else float(value)
        return terms


@dataclass
class RigidityReport:
    """境界値 c の問題に対する Obata 残差と Schwarz スラック"""

    obata_residual: float  # 正規化済み
    schwarz_lhs: float  # (n−1)/n ∫ V(Δf + Knf)²
    boundary_expression: float
    boundary_scale: float
    min_f: float
    max_overshoot: float  # max f / c − 1
    h_max: float

    @property
    def schwarz_slack(self) -> float:
        return _relative(self.schwarz_lhs - self.boundary_expression, self.boundary_scale)

    def terms(self) -> Dict[str, float]:
        return {
            "obata_residual": self.obata_residual,
            "schwarz_lhs": self.schwarz_lhs,
            "boundary_expression": self.boundary_expression,
            "schwarz_slack": self.schwarz_slack,
            "min_f": self.min_f,
            "max_overshoot": self.max_overshoot,
        }


@dataclass
class EikonalResult:
    """基点からの測地距離場とその事後チェック"""

    field: ScalarField
    max_eikonal_residual: float
    mean_eikonal_residual: float
    cut_locus_suspects: np.ndarray  # 頂点ごとの bool
    excluded_measure: float

    def terms(self) -> Dict[str, float]:
        return {
            "max_eikonal_residual": self.max_eikonal_residual,
            "mean_eikonal_residual": self.mean_eikonal_residual,
            "cut_locus_suspects": float(np.count_nonzero(self.cut_locus_suspects)),
            "excluded_measure": self.excluded_measure,
        }


@dataclass
class RichardsonEstimate:
    """3水準Richardson外挿の結果"""

    value: float
    error_estimate: float
    order: Optional[float]
    samples: List[float] = field(default_factory=list)
