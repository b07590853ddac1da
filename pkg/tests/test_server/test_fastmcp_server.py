"""
MCPツールのテスト

ツール関数を直接呼び、返り値のデータクラスと、失敗時に ValueError で
包まれたメッセージを確認する
"""

import math
import sys
import unittest
from pathlib import Path

# プロジェクトルートをパスに追加
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.reilly_fastmcp_server import (
    GeodesicBallCheck,
    ScenarioListing,
    ScenarioRunSummary,
    geodesic_ball_check,
    list_scenarios,
    run_scenario,
)


class TestListScenarios(unittest.TestCase):
    """list_scenarios ツールのテストクラス"""

    def test_all_scenarios(self):
        """絞り込みなしで全シナリオ"""
        listing = list_scenarios()
        self.assertIsInstance(listing, ScenarioListing)
        self.assertEqual(listing.total, len(listing.names))
        self.assertIsNone(listing.suite)
        self.assertIn("screening_poincare", listing.names)
        self.assertEqual(listing.names, sorted(listing.names))

    def test_filter_by_suite(self):
        """スイートで絞り込める"""
        listing = list_scenarios("brendle")
        self.assertEqual(listing.suite, "brendle")
        self.assertIn("brendle_spherical_perturbed", listing.names)
        self.assertNotIn("hk_hyperbolic_ball", listing.names)

    def test_unknown_suite_is_wrapped(self):
        """未知のスイートは ValueError に包まれる"""
        with self.assertRaises(ValueError) as ctx:
            list_scenarios("obata")
        self.assertIn("シナリオ一覧の取得中にエラーが発生しました", str(ctx.exception))
        self.assertIn("unknown suite", str(ctx.exception))


class TestRunScenario(unittest.TestCase):
    """run_scenario ツールのテストクラス"""

    def test_summary(self):
        """要約とレポート本体を返す"""
        summary = run_scenario("rigidity_euclidean_unsupported", levels=[1])
        self.assertIsInstance(summary, ScenarioRunSummary)
        self.assertEqual(summary.name, "rigidity_euclidean_unsupported")
        self.assertTrue(summary.passed)
        self.assertEqual(summary.outcomes, {"rigidity": "unsupported"})
        self.assertEqual(len(summary.config_hash), 64)
        self.assertEqual(summary.report["scenario"]["levels"], [1])
        self.assertNotIn("timings", summary.report)

    def test_unknown_scenario_is_wrapped(self):
        """未知のシナリオ名は ValueError に包まれる"""
        with self.assertRaises(ValueError) as ctx:
            run_scenario("no_such_scenario")
        self.assertIn("シナリオ実行中にエラーが発生しました", str(ctx.exception))
        self.assertIn("unknown scenario", str(ctx.exception))

    def test_bad_levels_are_wrapped(self):
        """範囲外のレベルは ValueError に包まれる"""
        with self.assertRaises(ValueError) as ctx:
            run_scenario("rigidity_euclidean_unsupported", levels=[99])
        self.assertIn("シナリオ実行中にエラーが発生しました", str(ctx.exception))


class TestGeodesicBallCheck(unittest.TestCase):
    """geodesic_ball_check ツールのテストクラス"""

    def test_hyperbolic_ball(self):
        """双曲の測地球で左辺は 2π sinh² R に近く、ギャップとMinkowskiの不一致は小さい"""
        check = geodesic_ball_check("hyperbolic", 0.7, level=2)
        self.assertIsInstance(check, GeodesicBallCheck)
        self.assertEqual(check.kind, "hyperbolic")
        self.assertEqual(check.level, 2)
        self.assertAlmostEqual(check.hk_closed_form, 2.0 * math.pi * math.sinh(0.7) ** 2)
        self.assertAlmostEqual(check.hk_lhs / check.hk_closed_form, 1.0, delta=5e-2)
        self.assertLess(abs(check.hk_relative_gap), 5e-2)
        self.assertLess(abs(check.minkowski_first_discrepancy), 5e-2)
        self.assertLess(abs(check.minkowski_second_discrepancy), 5e-2)
        self.assertGreater(check.h_max, 0.0)

    def test_custom_kind_is_wrapped(self):
        """custom は対象外"""
        with self.assertRaises(ValueError) as ctx:
            geodesic_ball_check("custom", 0.5)
        self.assertIn("測地球の検証中にエラーが発生しました", str(ctx.exception))
        self.assertIn("custom", str(ctx.exception))

    def test_level_out_of_range_is_wrapped(self):
        """レベルの範囲外は ValueError"""
        with self.assertRaises(ValueError) as ctx:
            geodesic_ball_check("euclidean", 1.0, level=99)
        self.assertIn("level", str(ctx.exception))

    def test_unknown_kind_is_wrapped(self):
        """未知のモデル名も ValueError に包まれる"""
        with self.assertRaises(ValueError) as ctx:
            geodesic_ball_check("flat", 1.0)
        self.assertIn("測地球の検証中にエラーが発生しました", str(ctx.exception))


if __name__ == "__main__":
    unittest.main()
