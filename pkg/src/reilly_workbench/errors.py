"""
ワークベンチ共通の例外定義

すべての例外は ValueError を継承し、CLI の終了コードを持つ
"""

from typing import List, Optional, Sequence


class WorkbenchError(ValueError):
    """ワークベンチの基底例外"""

    exit_code = 4


class ConfigurationError(WorkbenchError):
    """シナリオ設定の構文・検証エラー"""

    exit_code = 2

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class UsageError(WorkbenchError):
    """呼び出し方の誤り（形状不一致・未知のスイート名など）"""

    exit_code = 2


class DomainError(WorkbenchError):
    """チャート領域外の点・プロファイル"""

    def __init__(self, message: str, radius: Optional[float] = None):
        self.radius = radius
        super().__init__(message)


class SpecError(WorkbenchError):
    """退化した領域指定"""


class MissingPrerequisiteError(WorkbenchError):
    """前提となる入力（距離場など）が不足"""


class SingularityError(WorkbenchError):
    """基点など特異点での評価"""


class RecoveryError(WorkbenchError):
    """Hessian回復パッチの不足・退化"""


class GeometryError(WorkbenchError):
    """境界幾何の退化"""


class UnsupportedConfigurationError(WorkbenchError):
    """このワークベンチが扱わない構成"""


class NumericalError(WorkbenchError):
    """数値計算（ソルバー）の失敗"""

    exit_code = 4


class IndefiniteSystemError(NumericalError):
    """不定値（または実質的に不定値）な線形系"""

    def __init__(self, message: str, curvature: float):
        self.curvature = curvature
        super().__init__(f"{message} (detected curvature {curvature:.6e})")


class IterationLimitError(NumericalError):
    """反復上限までに収束しなかった"""

    def __init__(self, message: str, residual_history: Sequence[float]):
        self.residual_history: List[float] = list(residual_history)
        last = self.residual_history[-1] if self.residual_history else float("nan")
        super().__init__(f"{message} (last relative residual {last:.3e})")
