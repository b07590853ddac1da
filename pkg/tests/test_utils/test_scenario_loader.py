"""
シナリオ設定の読み込みテスト
"""

import json
import sys
import tempfile
import unittest
from pathlib import Path

# プロジェクトルートをパスに追加
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.reilly_workbench.errors import ConfigurationError, UsageError
from src.reilly_workbench.schemas.scenario import SuiteEnum
from src.reilly_workbench.utils.scenario_loader import (
    ScenarioRegistry,
    get_scenario_registry,
    load_scenario_file,
    parse_scenario_file,
    parse_suite,
)

MINIMAL = {
    "schema_version": 1,
    "scenarios": [
        {
            "name": "ball",
            "model": {"kind": "hyperbolic"},
            "domain": {"profile": {"type": "geodesic_ball", "radius": 0.7}},
            "suites": ["hk"],
        }
    ],
}


class TestScenarioLoader(unittest.TestCase):
    """設定読み込みのテストクラス"""

    def test_minimal_file_defaults(self):
        """省略した項目には既定値が入る"""
        scenario_file = parse_scenario_file(json.dumps(MINIMAL))
        scenario = scenario_file.scenarios[0]
        self.assertEqual(scenario.levels, [1, 2, 3])
        self.assertEqual(scenario.tolerances.gap, 1e-3)
        self.assertEqual(scenario.expectation_for(SuiteEnum.HK), "inequality")
        self.assertIsNone(scenario_file.seed)

    def test_json_syntax_error_location(self):
        """構文エラーは 行:列 つき"""
        with self.assertRaises(ConfigurationError) as ctx:
            parse_scenario_file('{"scenarios": [\n  oops]}', source="bad.json")
        self.assertEqual(ctx.exception.location, "bad.json:2:3")
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_schema_error_location(self):
        """スキーマ違反はフィールドのパスつき"""
        payload = json.loads(json.dumps(MINIMAL))
        payload["scenarios"][0]["levels"] = [2, 1]
        with self.assertRaises(ConfigurationError) as ctx:
            parse_scenario_file(json.dumps(payload), source="cfg.json")
        self.assertTrue(ctx.exception.location.startswith("cfg.json:scenarios.0.levels"))

    def test_unsupported_schema_version(self):
        """未知の schema_version は拒否"""
        payload = dict(MINIMAL, schema_version=2)
        with self.assertRaises(ConfigurationError):
            parse_scenario_file(json.dumps(payload))

    def test_duplicate_names(self):
        """シナリオ名の重複は拒否"""
        payload = dict(MINIMAL, scenarios=MINIMAL["scenarios"] * 2)
        with self.assertRaises(ConfigurationError):
            parse_scenario_file(json.dumps(payload))

    def test_custom_model_needs_factor(self):
        """custom モデルに共形因子がなければ拒否"""
        payload = json.loads(json.dumps(MINIMAL))
        payload["scenarios"][0]["model"] = {"kind": "custom"}
        with self.assertRaises(ConfigurationError):
            parse_scenario_file(json.dumps(payload))

    def test_all_suites_expand(self):
        """suites: ["all"] は全スイートに展開される"""
        payload = json.loads(json.dumps(MINIMAL))
        payload["scenarios"][0]["suites"] = ["all"]
        scenario = parse_scenario_file(json.dumps(payload)).scenarios[0]
        self.assertEqual(len(scenario.suites), 8)
        self.assertNotIn(SuiteEnum.ALL, scenario.suites)

    def test_missing_file(self):
        """読めないファイルは ConfigurationError"""
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                load_scenario_file(Path(tmp) / "missing.json")

    def test_parse_suite(self):
        """スイート名の解釈"""
        self.assertEqual(parse_suite("hk"), SuiteEnum.HK)
        with self.assertRaises(UsageError) as ctx:
            parse_suite("obata")
        self.assertIn("minkowski", str(ctx.exception))


class TestScenarioRegistry(unittest.TestCase):
    """同梱シナリオのレジストリのテストクラス"""

    def setUp(self):
        """各テスト前の準備"""
        self.registry = get_scenario_registry()

    def test_golden_scenarios_load(self):
        """同梱シナリオが読めてシードを持つ"""
        self.assertIn("hk_hyperbolic_ball", self.registry.names())
        self.assertEqual(self.registry.seed, 20240611)

    def test_every_suite_has_a_scenario(self):
        """全スイートに少なくとも一つのシナリオがある"""
        for suite in SuiteEnum:
            if suite == SuiteEnum.ALL:
                continue
            with self.subTest(suite=suite.value):
                self.assertTrue(self.registry.names(suite.value))

    def test_unknown_scenario(self):
        """未知の名前は UsageError"""
        with self.assertRaises(UsageError):
            self.registry.get("no_such_scenario")

    def test_singleton(self):
        """シングルトンは同じインスタンス"""
        self.assertIs(get_scenario_registry(), self.registry)

    def test_custom_data_dir(self):
        """データディレクトリを指定できる"""
        with tempfile.TemporaryDirectory() as tmp:
            (Path(tmp) / "golden_scenarios.json").write_text(json.dumps(MINIMAL), encoding="utf-8")
            registry = ScenarioRegistry(Path(tmp))
            self.assertEqual(registry.names(), ["ball"])


if __name__ == "__main__":
    unittest.main()
