"""
Heintze-Karcher型不等式・Minkowski公式・Alexandrov連鎖・剛性のテスト
"""

import math
import sys
import unittest
from pathlib import Path

# プロジェクトルートをパスに追加
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.reilly_workbench.calculators.elliptic_solver import (
    boundary_value_problem,
    poisson_problem,
    solve_dirichlet,
)
from src.reilly_workbench.calculators.inequality_verifier import (
    InequalityVerifier,
    alexandrov_chain,
    brendle_spherical,
    heintze_karcher,
    minkowski_check,
    rigidity_residual,
)
from src.reilly_workbench.calculators.mesh_builder import geodesic_ball_profile, mesh_levels
from src.reilly_workbench.errors import UnsupportedConfigurationError
from src.reilly_workbench.models.geometry_models import (
    ProfileKind,
    RadialProfile,
    SpaceFormKind,
    SpaceFormModel,
    StarDomainSpec,
)


def mesh_for(kind: SpaceFormKind, profile: RadialProfile, level: int = 2):
    model = SpaceFormModel(kind=kind)
    return next(mesh_levels(StarDomainSpec(profile=profile), model, [level]))


def ball(kind: SpaceFormKind, radius: float, level: int = 2):
    model = SpaceFormModel(kind=kind)
    return mesh_for(kind, geodesic_ball_profile(model, radius), level)


class TestHeintzeKarcher(unittest.TestCase):
    """Heintze-Karcher型不等式のテストクラス"""

    def test_hyperbolic_ball_equality(self):
        """双曲の測地球では ∫cosh r/H = 2π sinh² R で等号"""
        report = heintze_karcher(ball(SpaceFormKind.HYPERBOLIC, 0.7))
        self.assertAlmostEqual(report.lhs / (2.0 * math.pi * math.sinh(0.7) ** 2), 1.0, delta=1e-4)
        self.assertEqual(report.reference_kind, "int_laplacian_V")
        self.assertLess(abs(report.relative_gap), 1e-2)
        self.assertTrue(report.precondition_met)

    def test_flux_matches_bulk(self):
        """発散定理: ∫∇_ν V と ∫ΔV はほぼ一致"""
        report = heintze_karcher(ball(SpaceFormKind.HYPERBOLIC, 0.7))
        self.assertLess(abs(report.flux_vs_bulk), 1e-2 * abs(report.rhs_bulk))

    def test_spherical_cap_equality(self):
        """球冠では ∫cos r/H = 2π sin² R"""
        report = brendle_spherical(ball(SpaceFormKind.SPHERICAL, 0.5))
        self.assertAlmostEqual(report.lhs / (2.0 * math.pi * math.sin(0.5) ** 2), 1.0, delta=1e-4)
        self.assertEqual(report.reference_kind, "n_int_V")
        self.assertTrue(report.precondition_met)
        # 球面では ΔV = −2V
        self.assertAlmostEqual(report.rhs_bulk / report.alt_rhs, -1.0, delta=1e-2)

    def test_ellipse_strict_gap(self):
        """楕円 (1, 0.8) では ∫1/H − 2·面積 ≈ 0.3817 の厳密な隙間"""
        profile = RadialProfile(kind=ProfileKind.ELLIPSE, semi_axes=(1.0, 0.8))
        report = heintze_karcher(mesh_for(SpaceFormKind.EUCLIDEAN, profile))
        self.assertEqual(report.reference_kind, "n_volume")
        self.assertAlmostEqual(report.gap, 0.38170, delta=1e-2)
        self.assertGreater(report.gap, 0.0)

    def test_negative_mean_curvature_precondition(self):
        """H ≤ 0 の点があれば前提不成立で lhs は NaN"""
        profile = RadialProfile(a0=0.5, cos_coefficients=(0.0, 0.0, 0.0, 0.1))
        report = heintze_karcher(mesh_for(SpaceFormKind.EUCLIDEAN, profile))
        self.assertFalse(report.precondition_met)
        self.assertLess(report.min_h, 0.0)
        self.assertTrue(math.isnan(report.lhs))
        self.assertIn("mean curvature", report.precondition_note)

    def test_near_hemisphere_precondition(self):
        """赤道に迫る境界では cos r/H の前提不成立"""
        profile = RadialProfile(a0=0.99)
        report = brendle_spherical(mesh_for(SpaceFormKind.SPHERICAL, profile, level=1))
        self.assertFalse(report.precondition_met)
        self.assertIn("equator", report.precondition_note)

    def test_spherical_inequality_needs_sphere(self):
        """cos r/H の不等式は球面以外では扱わない"""
        with self.assertRaises(UnsupportedConfigurationError):
            brendle_spherical(ball(SpaceFormKind.HYPERBOLIC, 0.7, level=0))


class TestMinkowski(unittest.TestCase):
    """Minkowski公式のテストクラス"""

    def test_perturbed_hyperbolic_domain(self):
        """摂動した双曲領域でも二組の値が一致"""
        profile = RadialProfile(a0=0.35, cos_coefficients=(0.0, 0.03), sin_coefficients=(0.0, 0.0, 0.02))
        report = minkowski_check(mesh_for(SpaceFormKind.HYPERBOLIC, profile))
        self.assertLess(abs(report.first_discrepancy), 1e-2)
        self.assertLess(abs(report.second_discrepancy), 1e-2)

    def test_spherical_ball(self):
        """球冠での ∫V = 2π sin R cos R"""
        report = minkowski_check(ball(SpaceFormKind.SPHERICAL, 0.5))
        self.assertAlmostEqual(report.first_lhs / (math.pi * math.sin(1.0)), 1.0, delta=1e-4)
        self.assertLess(abs(report.first_discrepancy), 1e-2)
        self.assertLess(abs(report.second_discrepancy), 1e-2)

    def test_euclidean_ellipse(self):
        """楕円では ∫p = 2·面積"""
        profile = RadialProfile(kind=ProfileKind.ELLIPSE, semi_axes=(1.0, 0.8))
        report = minkowski_check(mesh_for(SpaceFormKind.EUCLIDEAN, profile))
        self.assertAlmostEqual(report.second_rhs, 2.0 * math.pi * 0.8, delta=1e-2)
        self.assertLess(abs(report.second_discrepancy), 1e-2)


class TestAlexandrovAndRigidity(unittest.TestCase):
    """Alexandrov連鎖と剛性のテストクラス"""

    def setUp(self):
        """各テスト前の準備"""
        self.hyperbolic_ball = ball(SpaceFormKind.HYPERBOLIC, 0.7)

    def test_circle_chain_is_tight(self):
        """測地円では連鎖のすべてのリンクが等号"""
        report = alexandrov_chain(self.hyperbolic_ball)
        self.assertTrue(report.is_cmc)
        self.assertLess(report.worst_slack, 5e-2)
        self.assertAlmostEqual(report.mean_h, 1.0 / math.tanh(0.7), delta=1e-3)

    def test_ellipse_is_not_cmc(self):
        """楕円はCMCでないので連鎖は計算しない"""
        profile = RadialProfile(kind=ProfileKind.ELLIPSE, semi_axes=(1.0, 0.8))
        report = alexandrov_chain(mesh_for(SpaceFormKind.EUCLIDEAN, profile, level=1))
        self.assertFalse(report.is_cmc)
        self.assertIsNone(report.worst_slack)
        self.assertIsNone(report.obata_residual)

    def test_rigidity_on_ball(self):
        """f = c cosh r/cosh R では Obata 残差が小さく最大値原理も成立"""
        solve = solve_dirichlet(boundary_value_problem(self.hyperbolic_ball, c=1.0))
        report = rigidity_residual(self.hyperbolic_ball, None, solve)
        self.assertLess(report.obata_residual, 5e-2)
        self.assertGreater(report.min_f, 0.0)
        self.assertLessEqual(report.max_overshoot, 1e-12)

    def test_rigidity_detects_perturbation(self):
        """摂動領域では Obata 残差が球より大きい"""
        profile = RadialProfile(a0=math.tanh(0.35), cos_coefficients=(0.0, 0.04))
        perturbed = mesh_for(SpaceFormKind.HYPERBOLIC, profile)
        perturbed_report = rigidity_residual(
            perturbed, None, solve_dirichlet(boundary_value_problem(perturbed))
        )
        ball_report = rigidity_residual(
            self.hyperbolic_ball, None, solve_dirichlet(boundary_value_problem(self.hyperbolic_ball))
        )
        self.assertGreater(perturbed_report.obata_residual, ball_report.obata_residual)

    def test_rigidity_unsupported_for_euclidean(self):
        """ユークリッドでは剛性残差を扱わない"""
        mesh = ball(SpaceFormKind.EUCLIDEAN, 1.0, level=0)
        solve = solve_dirichlet(poisson_problem(mesh))
        with self.assertRaises(UnsupportedConfigurationError):
            InequalityVerifier(mesh).rigidity(solve)


if __name__ == "__main__":
    unittest.main()
