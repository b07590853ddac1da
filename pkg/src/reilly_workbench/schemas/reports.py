"""
実行レポートスキーマ定義

Pydanticモデルを使用してレポートファイルの形式を定義
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from src.reilly_workbench.models.report_models import SuiteOutcome, Verdict

REPORT_SCHEMA_VERSION = 1


class LevelRow(BaseModel):
    """一つの細分割レベルの数値"""

    level: int = Field(..., description="細分割レベル")
    h_max: float = Field(..., description="計量での最大辺長")
    terms: Dict[str, float] = Field(..., description="名前付きの項")
    quantity: float = Field(..., description="判定に使う量")


class ExtrapolationResult(BaseModel):
    """Richardson外挿の結果"""

    value: float = Field(..., description="外挿値")
    error_estimate: float = Field(..., description="推定誤差")
    order: Optional[float] = Field(None, description="推定次数")


class ErrorBlock(BaseModel):
    """スイート実行中のエラー"""

    type: str = Field(..., description="例外クラス名")
    message: str = Field(..., description="メッセージ")
    exit_code: int = Field(..., description="対応する終了コード")


class SuiteResult(BaseModel):
    """スイート単位の結果"""

    suite: str = Field(..., description="スイート名")
    quantity_name: str = Field("", description="判定に使った量の名前")
    rows: List[LevelRow] = Field(default_factory=list, description="レベルごとの数値")
    orders: List[Optional[float]] = Field(default_factory=list, description="隣接レベル間の観測次数")
    extrapolation: Optional[ExtrapolationResult] = Field(None, description="外挿結果")
    tolerance: Optional[float] = Field(None, description="判定の許容値")
    verdict: Optional[Verdict] = Field(None, description="三値判定")
    outcome: SuiteOutcome = Field(..., description="スイートの結果")
    expected: str = Field(..., description="期待結果")
    matches_expectation: bool = Field(..., description="期待どおりか")
    notes: List[str] = Field(default_factory=list, description="補足")
    error: Optional[ErrorBlock] = Field(None, description="エラー情報")


class RunReport(BaseModel):
    """シナリオ一つ分のレポート"""

    schema_version: int = Field(REPORT_SCHEMA_VERSION, description="レポートスキーマのバージョン")
    workbench_version: str = Field(..., description="ワークベンチのバージョン")
    config_hash: str = Field(..., description="シナリオ設定（既定値込み）のSHA-256")
    scenario: Dict[str, Any] = Field(..., description="シナリオ設定のエコー")
    seed: Optional[int] = Field(None, description="random 場に使ったシード")
    suites: List[SuiteResult] = Field(default_factory=list, description="スイート結果")
    passed: bool = Field(..., description="全スイートが期待どおりか")
    timings: Dict[str, float] = Field(
        default_factory=dict, description="段階ごとの経過秒（レポートファイルには含めない）"
    )

    @property
    def name(self) -> str:
        return self.scenario["name"]

    @property
    def numerical_failure(self) -> bool:
        """期待に反したスイートのうち数値計算の失敗によるものがあるか"""
        return any(
            not s.matches_expectation and s.error is not None and s.error.exit_code == 4
            for s in self.suites
        )

    @property
    def configuration_failure(self) -> bool:
        """設定の誤り（終了コード 2）で失敗したスイートがあるか"""
        return any(
            not s.matches_expectation and s.error is not None and s.error.exit_code == 2
            for s in self.suites
        )
