"""
シナリオ設定の読み込みユーティリティ

設定ファイル（JSON）を検証済みの ScenarioFile にし、
同梱のゴールデンシナリオ（data/golden_scenarios.json）を名前で引けるようにする
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import ValidationError

from src.reilly_workbench.errors import ConfigurationError, UsageError
from src.reilly_workbench.schemas.scenario import ScenarioConfig, ScenarioFile, SuiteEnum

logger = logging.getLogger(__name__)

GOLDEN_SCENARIO_FILE = "golden_scenarios.json"


def _location(error: dict) -> str:
    return ".".join(str(part) for part in error["loc"]) or "<root>"


def parse_scenario_file(text: str, source: str = "<string>") -> ScenarioFile:
    """
    JSON文字列を ScenarioFile に検証する

    Raises:
        ConfigurationError: JSONの構文エラー、またはスキーマ違反
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(
            f"invalid JSON: {e.msg}", location=f"{source}:{e.lineno}:{e.colno}"
        ) from e

    try:
        return ScenarioFile.model_validate(payload)
    except ValidationError as e:
        first = e.errors()[0]
        extra = f" (+{e.error_count() - 1} more)" if e.error_count() > 1 else ""
        raise ConfigurationError(f"{first['msg']}{extra}", location=f"{source}:{_location(first)}") from e


def load_scenario_file(path: Union[str, Path]) -> ScenarioFile:
    """
    設定ファイルを読み込む

    Raises:
        ConfigurationError: ファイルが読めない・不正な場合
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config: {e}", location=str(path)) from e
    scenario_file = parse_scenario_file(text, source=str(path))
    logger.info(f"Loaded {len(scenario_file.scenarios)} scenarios from {path}")
    return scenario_file


class ScenarioRegistry:
    """
    名前でシナリオを引くためのレジストリ

    既定では data/golden_scenarios.json を読む
    """

    def __init__(self, data_dir: Optional[Path] = None):
        """
        Args:
            data_dir: データディレクトリのパス。Noneの場合は自動検出
        """
        if data_dir is None:
            # src/reilly_workbench/utils -> src/reilly_workbench -> src -> project_root -> data
            self.data_dir = Path(__file__).parent.parent.parent.parent / "data"
        else:
            self.data_dir = Path(data_dir)

        self.seed: Optional[int] = None
        self.scenarios: Dict[str, ScenarioConfig] = {}
        self._loaded = False

    def load(self) -> None:
        if self._loaded:
            return
        scenario_file = load_scenario_file(self.data_dir / GOLDEN_SCENARIO_FILE)
        self.seed = scenario_file.seed
        self.scenarios = {s.name: s for s in scenario_file.scenarios}
        self._loaded = True

    def names(self, suite: Optional[str] = None) -> List[str]:
        """シナリオ名の一覧（suite を指定するとそのスイートを含むものだけ）"""
        self.load()
        if suite is None:
            return sorted(self.scenarios)
        wanted = parse_suite(suite)
        return sorted(name for name, s in self.scenarios.items() if wanted in s.suites)

    def get(self, name: str) -> ScenarioConfig:
        self.load()
        if name not in self.scenarios:
            raise UsageError(f"unknown scenario: {name}")
        return self.scenarios[name]


def parse_suite(name: str) -> SuiteEnum:
    """
    スイート名を SuiteEnum にする

    Raises:
        UsageError: 未知のスイート名の場合
    """
    try:
        return SuiteEnum(name)
    except ValueError as e:
        choices = ", ".join(s.value for s in SuiteEnum)
        raise UsageError(f"unknown suite '{name}' (choose from {choices})") from e


_registry: Optional[ScenarioRegistry] = None


def get_scenario_registry() -> ScenarioRegistry:
    """レジストリのシングルトンインスタンスを取得"""
    global _registry
    if _registry is None:
        _registry = ScenarioRegistry()
        _registry.load()
    return _registry
