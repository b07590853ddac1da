"""
シナリオ実行エンジンのテスト
"""

import sys
import unittest
from pathlib import Path

import numpy as np
from pydantic import ValidationError

# プロジェクトルートをパスに追加
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.reilly_workbench.calculators.scenario_runner import (
    ScenarioRunner,
    _Sweep,
    config_hash,
    outcome_matches,
    random_monomials,
    resolve_seed,
    run_scenario,
    run_scenarios,
)
from src.reilly_workbench.errors import ConfigurationError
from src.reilly_workbench.models.geometry_models import SpaceFormKind
from src.reilly_workbench.models.report_models import SuiteOutcome
from src.reilly_workbench.schemas.reports import LevelRow
from src.reilly_workbench.schemas.scenario import (
    ConformalFactorConfig,
    ModelConfig,
    MonomialTerm,
    ScenarioConfig,
    SuiteEnum,
)
from src.reilly_workbench.utils.scenario_loader import get_scenario_registry


def scenario(**overrides) -> ScenarioConfig:
    payload = {
        "name": "disk",
        "model": {"kind": "euclidean"},
        "domain": {"profile": {"type": "geodesic_ball", "radius": 1.0}},
        "suites": ["classical_reilly"],
        "fields": {"f": {"source": "polynomial", "monomials": [
            {"exponents": [3, 0], "coefficient": 1.0},
            {"exponents": [1, 2], "coefficient": -3.0},
            {"exponents": [2, 0], "coefficient": 0.5},
        ]}},
        "levels": [1, 2],
    }
    payload.update(overrides)
    return ScenarioConfig.model_validate(payload)


class TestScenarioHelpers(unittest.TestCase):
    """補助関数のテストクラス"""

    def test_outcome_matches_aliases(self):
        """equality / inequality / 結果名の対応"""
        self.assertTrue(outcome_matches("equality", SuiteOutcome.HOLDS))
        self.assertFalse(outcome_matches("equality", SuiteOutcome.STRICT))
        self.assertTrue(outcome_matches("inequality", SuiteOutcome.STRICT))
        self.assertTrue(outcome_matches("inequality", SuiteOutcome.HOLDS))
        self.assertFalse(outcome_matches("inequality", SuiteOutcome.INCONCLUSIVE))
        self.assertTrue(outcome_matches("not_cmc", SuiteOutcome.NOT_CMC))

    def test_random_monomials_are_reproducible(self):
        """同じシードからは同じ係数"""
        first = random_monomials(3, np.random.default_rng(7))
        second = random_monomials(3, np.random.default_rng(7))
        self.assertEqual(len(first), 10)
        self.assertEqual([t.coefficient for t in first], [t.coefficient for t in second])
        self.assertTrue(all(-1.0 <= t.coefficient < 1.0 for t in first))
        self.assertTrue(all(sum(t.exponents) <= 3 for t in first))

    def test_seed_priority(self):
        """--seed > シナリオ > ファイル"""
        config = scenario(seed=5)
        self.assertEqual(resolve_seed(config, 1, 9), 1)
        self.assertEqual(resolve_seed(config, None, 9), 5)
        self.assertEqual(resolve_seed(scenario(), None, 9), 9)
        self.assertIsNone(resolve_seed(scenario()))

    def test_random_fields_need_seed(self):
        """random 場でシードがなければ ConfigurationError"""
        config = scenario(fields={"f": {"source": "random"}})
        with self.assertRaises(ConfigurationError) as ctx:
            resolve_seed(config)
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_config_hash(self):
        """ハッシュは既定値込みの設定で決まる"""
        self.assertEqual(config_hash(scenario()), config_hash(scenario()))
        self.assertNotEqual(config_hash(scenario()), config_hash(scenario(levels=[1, 2, 3])))
        self.assertEqual(len(config_hash(scenario())), 64)


class TestScenarioRunner(unittest.TestCase):
    """シナリオ実行のテストクラス"""

    def test_classical_reilly_rows(self):
        """各レベルの行と名前付きの項がレポートに入る"""
        report = run_scenario(scenario())
        result = report.suites[0]
        self.assertEqual(result.suite, "classical_reilly")
        self.assertEqual([row.level for row in result.rows], [1, 2])
        self.assertEqual(result.quantity_name, "relative_residual")
        self.assertIn("T_lhs", result.rows[0].terms)
        self.assertLess(result.rows[-1].quantity, 5e-2)
        self.assertEqual(report.name, "disk")
        self.assertIn("mesh", report.timings)

    def test_not_cmc_short_circuit(self):
        """楕円の Alexandrov は not_cmc で止まる"""
        config = scenario(
            domain={"profile": {"type": "ellipse", "semi_axes": [1.0, 0.8]}},
            suites=["alexandrov"],
            expectations={"alexandrov": "not_cmc"},
        )
        report = run_scenario(config)
        self.assertEqual(report.suites[0].outcome, SuiteOutcome.NOT_CMC)
        self.assertTrue(report.passed)

    def test_unsupported_is_recorded(self):
        """ユークリッドの剛性は unsupported としてエラーブロックに残る"""
        config = scenario(suites=["rigidity"], levels=[1], expectations={"rigidity": "unsupported"})
        report = run_scenario(config)
        result = report.suites[0]
        self.assertEqual(result.outcome, SuiteOutcome.UNSUPPORTED)
        self.assertEqual(result.error.type, "UnsupportedConfigurationError")
        self.assertTrue(result.matches_expectation)
        self.assertFalse(report.numerical_failure)

    def test_precondition_violation(self):
        """H が負になる領域の HK は precondition_violated"""
        config = scenario(
            domain={"profile": {"type": "fourier", "a0": 0.5, "cos": [0.0, 0.0, 0.0, 0.1]}},
            suites=["hk"],
            expectations={"hk": "precondition_violated"},
        )
        result = run_scenario(config).suites[0]
        self.assertEqual(result.outcome, SuiteOutcome.PRECONDITION_VIOLATED)
        self.assertTrue(any("mean curvature" in note for note in result.notes))

    def test_mismatch_is_reported(self):
        """期待と違えば passed は False"""
        config = scenario(
            domain={"profile": {"type": "ellipse", "semi_axes": [1.0, 0.8]}},
            suites=["alexandrov"],
            expectations={"alexandrov": "equality"},
        )
        report = run_scenario(config)
        self.assertFalse(report.suites[0].matches_expectation)
        self.assertFalse(report.passed)

    def test_random_fields_are_reproducible(self):
        """同じシードなら random 場の結果はビット単位で一致"""
        config = scenario(
            fields={"f": {"source": "random"}, "V": {"source": "random", "degree": 2}, "K": 0.5},
            suites=["reilly"],
            levels=[1],
        )
        first = ScenarioRunner(config, seed=3).run()
        second = ScenarioRunner(config, seed=3).run()
        self.assertEqual(first.suites[0].rows[0].terms, second.suites[0].rows[0].terms)
        other = ScenarioRunner(config, seed=4).run()
        self.assertNotEqual(first.suites[0].rows[0].terms, other.suites[0].rows[0].terms)

    def test_overrides_are_echoed(self):
        """levels・suite の上書きは設定エコーに反映される"""
        config = scenario(suites=["classical_reilly", "minkowski"])
        report = run_scenario(config, levels=[1], suite=SuiteEnum.MINKOWSKI)
        self.assertEqual(report.scenario["levels"], [1])
        self.assertEqual(report.scenario["suites"], ["minkowski"])
        self.assertEqual(len(report.suites), 1)

    def test_run_scenarios_sorted_by_name(self):
        """複数シナリオの結果は名前順"""
        configs = [scenario(name="zeta", levels=[1]), scenario(name="alpha", levels=[1])]
        reports = run_scenarios(configs, [None, None])
        self.assertEqual([r.name for r in reports], ["alpha", "zeta"])


def rigidity_sweep(quantities) -> _Sweep:
    sweep = _Sweep()
    for level, quantity in enumerate(quantities, start=2):
        sweep.rows.append(LevelRow(level=level, h_max=0.1 / 2**level, terms={}, quantity=quantity))
    return sweep


class TestRigidityVerdict(unittest.TestCase):
    """Obata残差の判定のテストクラス"""

    def setUp(self):
        """各テスト前の準備"""
        config = scenario(
            model={"kind": "hyperbolic"},
            domain={"profile": {"type": "geodesic_ball", "radius": 0.7}},
            suites=["rigidity"],
            fields={"f": {"source": "boundary_value", "value": 1.0}},
            expectations={"rigidity": "strict"},
        )
        self.runner = ScenarioRunner(config)

    def test_stable_positive_residual_is_strict(self):
        """下限を超えて 20% 以内に落ち着いた残差は strict（次数の下限は見ない）"""
        result = self.runner._rigidity_result(rigidity_sweep([0.0479, 0.0477, 0.0476]))
        self.assertEqual(result.outcome, SuiteOutcome.STRICT)
        self.assertTrue(result.matches_expectation)

    def test_vanishing_residual_holds(self):
        """2次で消える残差は holds"""
        result = self.runner._rigidity_result(rigidity_sweep([4e-3, 1e-3, 2.5e-4]))
        self.assertEqual(result.outcome, SuiteOutcome.HOLDS)

    def test_drifting_residual_is_inconclusive(self):
        """消えも落ち着きもしない残差は inconclusive"""
        result = self.runner._rigidity_result(rigidity_sweep([0.9, 0.5, 0.45]))
        self.assertEqual(result.outcome, SuiteOutcome.INCONCLUSIVE)
        self.assertIn("residual neither vanishes nor settles", result.notes)

    def test_ball_and_perturbed_ball_are_discriminated(self):
        """レベル 2–4 で測地球の残差は小さく、摂動球の残差は10倍以上で安定"""
        registry = get_scenario_registry()
        ball = run_scenario(registry.get("rigidity_hyperbolic_ball"), levels=[2, 3, 4]).suites[0]
        perturbed = run_scenario(registry.get("rigidity_hyperbolic_perturbed"), levels=[2, 3, 4]).suites[0]
        ball_values = [row.quantity for row in ball.rows]
        perturbed_values = [row.quantity for row in perturbed.rows]
        self.assertLess(ball_values[1], 5e-2)
        for ball_value, perturbed_value in zip(ball_values, perturbed_values):
            self.assertGreater(perturbed_value, 10.0 * ball_value)
        self.assertLessEqual(max(perturbed_values) / min(perturbed_values), 1.2)
        self.assertEqual(perturbed.outcome, SuiteOutcome.STRICT)
        self.assertEqual(ball.outcome, SuiteOutcome.HOLDS)


class TestScenarioSetupFailure(unittest.TestCase):
    """組み立てに失敗するシナリオのテストクラス"""

    def test_malformed_monomial_is_a_configuration_error(self):
        """次元と合わない単項式はスキーマで弾かれる"""
        with self.assertRaises(ValidationError):
            scenario(
                model={
                    "kind": "custom",
                    "conformal_factor": {"monomials": [{"exponents": [2], "coefficient": 0.5}]},
                },
            )

    def test_setup_error_is_recorded_per_scenario(self):
        """検証をすり抜けた不正なモデルはそのシナリオだけエラーになり、他は実行される"""
        broken_model = ModelConfig.model_construct(
            kind=SpaceFormKind.CUSTOM,
            dimension=2,
            conformal_factor=ConformalFactorConfig.model_construct(
                expression=None, monomials=[MonomialTerm(exponents=[2], coefficient=0.5)]
            ),
        )
        broken = scenario(name="broken", levels=[1])
        broken = broken.model_copy(update={"model": broken_model})
        reports = run_scenarios([broken, scenario(name="healthy", levels=[1])], [None, None])
        by_name = {r.name: r for r in reports}
        failed = by_name["broken"].suites[0]
        self.assertEqual(failed.outcome, SuiteOutcome.ERROR)
        self.assertEqual(failed.error.exit_code, 2)
        self.assertTrue(by_name["broken"].configuration_failure)
        self.assertFalse(by_name["healthy"].configuration_failure)
        self.assertTrue(by_name["healthy"].suites[0].rows)


if __name__ == "__main__":
    unittest.main()
