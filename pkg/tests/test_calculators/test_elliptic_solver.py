"""
ディリクレ問題ソルバーのテスト

測地球上の閉形式解と比較し、半球近傍での不定値検出を確認
"""

import math
import sys
import unittest
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh
from scipy.spatial import cKDTree

# プロジェクトルートをパスに追加
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.reilly_workbench.calculators.discrete_operators import assemble_laplace_beltrami
from src.reilly_workbench.calculators.elliptic_solver import (
    ConjugateGradientSolver,
    boundary_value_problem,
    interior_problem,
    maximum_principle_margins,
    poisson_problem,
    solve_dirichlet,
)
from src.reilly_workbench.calculators.mesh_builder import geodesic_ball_profile, mesh_levels
from src.reilly_workbench.calculators.space_form import get_calculator
from src.reilly_workbench.errors import (
    IndefiniteSystemError,
    IterationLimitError,
    UnsupportedConfigurationError,
    UsageError,
)
from src.reilly_workbench.models.geometry_models import (
    RadialProfile,
    SpaceFormKind,
    SpaceFormModel,
    StarDomainSpec,
)
from src.reilly_workbench.models.solver_models import Definiteness, DirichletProblem


def ball_mesh(kind: SpaceFormKind, radius: float, level: int):
    model = SpaceFormModel(kind=kind)
    spec = StarDomainSpec(profile=geodesic_ball_profile(model, radius))
    return next(mesh_levels(spec, model, [level]))


def chart_disk_mesh(kind: SpaceFormKind, chart_radius: float, level: int):
    model = SpaceFormModel(kind=kind)
    spec = StarDomainSpec(profile=RadialProfile(a0=chart_radius))
    return next(mesh_levels(spec, model, [level]))


class TestEllipticSolver(unittest.TestCase):
    """ディリクレ問題ソルバーのテストクラス"""

    def setUp(self):
        """各テスト前の準備"""
        self.hyperbolic = ball_mesh(SpaceFormKind.HYPERBOLIC, 0.7, 2)
        self.r = get_calculator(self.hyperbolic.model).distance(self.hyperbolic.vertices)

    def test_hyperbolic_interior_problem(self):
        """Δf − 2f = 1 の解は (cosh r/cosh R − 1)/2"""
        report = solve_dirichlet(interior_problem(self.hyperbolic))
        exact = (np.cosh(self.r) / math.cosh(0.7) - 1.0) / 2.0
        error = np.max(np.abs(report.solution.values - exact))
        self.assertLess(error, 2e-2 * np.max(np.abs(exact)))
        self.assertEqual(report.definiteness, Definiteness.POSITIVE_DEFINITE)
        self.assertLessEqual(report.residual, 1e-10)

    def test_spherical_interior_problem(self):
        """Δf + 2f = 1 の解は (1 − cos r/cos R)/2"""
        mesh = ball_mesh(SpaceFormKind.SPHERICAL, 0.5, 2)
        r = get_calculator(mesh.model).distance(mesh.vertices)
        report = solve_dirichlet(interior_problem(mesh))
        exact = (1.0 - np.cos(r) / math.cos(0.5)) / 2.0
        self.assertLess(np.max(np.abs(report.solution.values - exact)), 2e-2 * np.max(np.abs(exact)))
        self.assertGreater(report.energy_ratio, 0.5)

    def test_euclidean_interior_problem(self):
        """Δf = 1 の解は (|x|² − R²)/4"""
        mesh = ball_mesh(SpaceFormKind.EUCLIDEAN, 1.0, 2)
        report = solve_dirichlet(interior_problem(mesh))
        exact = (np.sum(mesh.vertices**2, axis=1) - 1.0) / 4.0
        self.assertLess(np.max(np.abs(report.solution.values - exact)), 5e-3)

    def test_hyperbolic_boundary_value_problem(self):
        """Δf = 2f, f = c の解は c·cosh r/cosh R"""
        report = solve_dirichlet(boundary_value_problem(self.hyperbolic, c=2.0))
        exact = 2.0 * np.cosh(self.r) / math.cosh(0.7)
        self.assertLess(np.max(np.abs(report.solution.values - exact)), 1e-2)
        min_f, overshoot = maximum_principle_margins(report, 2.0)
        self.assertGreater(min_f, 0.0)
        self.assertLessEqual(overshoot, 1e-12)

    def test_boundary_value_problem_rejects_euclidean(self):
        """ユークリッドでは f = c の問題を扱わない"""
        mesh = ball_mesh(SpaceFormKind.EUCLIDEAN, 1.0, 0)
        with self.assertRaises(UnsupportedConfigurationError):
            boundary_value_problem(mesh)

    def test_boundary_value_must_be_positive(self):
        """c ≤ 0 は UsageError"""
        with self.assertRaises(UsageError):
            boundary_value_problem(self.hyperbolic, c=0.0)

    def test_poisson_problem_positive(self):
        """−Δf = 1, f = 0 の解は内部で正"""
        report = solve_dirichlet(poisson_problem(self.hyperbolic))
        interior = self.hyperbolic.boundary_vertex_map < 0
        self.assertTrue(np.all(report.solution.values[interior] > 0.0))

    def test_tolerance_validation(self):
        """許容値は (0, 1e-6] の範囲"""
        with self.assertRaises(UsageError):
            DirichletProblem(mesh=self.hyperbolic, zeroth_order=0.0, tolerance=1e-3)

    def test_near_hemisphere_is_flagged_indefinite(self):
        """半球に迫る領域では Δf + 2f = 1 が実質的に不定値として検出される"""
        mesh = chart_disk_mesh(SpaceFormKind.SPHERICAL, 0.99, 2)
        with self.assertRaises(IndefiniteSystemError) as ctx:
            solve_dirichlet(interior_problem(mesh))
        self.assertLess(ctx.exception.curvature, 0.05)

    def test_near_hemisphere_report_without_raise(self):
        """raise_on_indefinite=False なら検出結果をレポートに残す"""
        mesh = chart_disk_mesh(SpaceFormKind.SPHERICAL, 0.99, 2)
        report = solve_dirichlet(interior_problem(mesh, raise_on_indefinite=False))
        self.assertEqual(report.definiteness, Definiteness.INDEFINITE_DETECTED)

    def test_first_eigenvalue_near_hemisphere(self):
        """固有値オラクル: 半球に迫る球冠の第一ディリクレ固有値は n=2 に近く 2 より大きい"""
        mesh = chart_disk_mesh(SpaceFormKind.SPHERICAL, 0.99, 2)
        forms = assemble_laplace_beltrami(mesh)
        free = np.flatnonzero(mesh.boundary_vertex_map < 0)
        stiffness = forms.stiffness[free][:, free].tocsc()
        mass = forms.mass[free][:, free].tocsc()
        eigenvalue = float(eigsh(stiffness, k=1, M=mass, sigma=0.0, which="LM")[0][0])
        self.assertGreater(eigenvalue, 2.0)
        self.assertLess(eigenvalue, 2.5)

    def test_conjugate_gradient_detects_negative_curvature(self):
        """対角が正でも不定値な行列では負の曲率を検出する"""
        matrix = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with self.assertRaises(IndefiniteSystemError):
            ConjugateGradientSolver(1e-10, 10).solve(matrix, np.array([1.0, -1.0]))

    def test_conjugate_gradient_iteration_limit(self):
        """反復上限では残差履歴つきの IterationLimitError"""
        matrix = sp.diags(np.linspace(1.0, 100.0, 50)).tocsr()
        # 非対角を足して一回では収束しない系にする
        matrix = (matrix + sp.diags(np.full(49, 0.4), 1) + sp.diags(np.full(49, 0.4), -1)).tocsr()
        with self.assertRaises(IterationLimitError) as ctx:
            ConjugateGradientSolver(1e-12, 2).solve(matrix, np.ones(50))
        self.assertEqual(len(ctx.exception.residual_history), 3)


def observed_max_orders(errors):
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


class TestSolverConvergence(unittest.TestCase):
    """閉形式解に対する最大値ノルム誤差の収束次数のテストクラス"""

    LEVELS = [2, 3, 4]
    MIN_ORDER = 1.8

    def test_hyperbolic_boundary_value_order(self):
        """H² の Δf = 2f, f = 1 の解 cosh r/cosh R を2次で再現する"""
        model = SpaceFormModel(kind=SpaceFormKind.HYPERBOLIC)
        spec = StarDomainSpec(profile=geodesic_ball_profile(model, 0.7))
        errors = []
        for mesh in mesh_levels(spec, model, self.LEVELS):
            report = solve_dirichlet(boundary_value_problem(mesh, c=1.0))
            r = get_calculator(model).distance(mesh.vertices)
            errors.append(float(np.max(np.abs(report.solution.values - np.cosh(r) / math.cosh(0.7)))))
        for order in observed_max_orders(errors):
            self.assertGreaterEqual(order, self.MIN_ORDER, errors)

    def test_poisson_disk_order(self):
        """単位円板の −Δf = 1, f = 0 の解 (1 − |x|²)/4 を2次で再現する"""
        model = SpaceFormModel(kind=SpaceFormKind.EUCLIDEAN)
        spec = StarDomainSpec(profile=geodesic_ball_profile(model, 1.0))
        errors = []
        for mesh in mesh_levels(spec, model, self.LEVELS):
            report = solve_dirichlet(poisson_problem(mesh))
            exact = (1.0 - np.sum(mesh.vertices**2, axis=1)) / 4.0
            errors.append(float(np.max(np.abs(report.solution.values - exact))))
        for order in observed_max_orders(errors):
            self.assertGreaterEqual(order, self.MIN_ORDER, errors)

    def test_zero_solution_is_exact(self):
        """右辺も境界値も 0 なら解は厳密に 0"""
        model = SpaceFormModel(kind=SpaceFormKind.HYPERBOLIC)
        spec = StarDomainSpec(profile=RadialProfile(a0=0.3, cos_coefficients=(0.0, 0.05)))
        for mesh in mesh_levels(spec, model, self.LEVELS):
            report = solve_dirichlet(poisson_problem(mesh, rhs=0.0, bdry=0.0))
            np.testing.assert_array_equal(report.solution.values, np.zeros(mesh.n_vertices))
            self.assertEqual(report.iterations, 0)


class TestSolverDeterminism(unittest.TestCase):
    """解の再現性・対称性・境界値のテストクラス"""

    def setUp(self):
        """各テスト前の準備"""
        self.mesh = ball_mesh(SpaceFormKind.HYPERBOLIC, 0.7, 3)

    def test_repeated_solves_are_identical(self):
        """同じ問題を二度解くとビット単位で同じ解"""
        first = solve_dirichlet(interior_problem(self.mesh)).solution.values
        second = solve_dirichlet(interior_problem(self.mesh)).solution.values
        np.testing.assert_array_equal(first, second)

    def test_solution_respects_mesh_symmetry(self):
        """測地球の解は 60° 回転と鏡映で不変（メッシュの対称性と同じ）"""
        values = solve_dirichlet(boundary_value_problem(self.mesh, c=1.0)).solution.values
        tree = cKDTree(self.mesh.vertices)
        angle = np.pi / 3.0
        rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        for image in (self.mesh.vertices @ rotation.T, self.mesh.vertices * np.array([1.0, -1.0])):
            distance, partner = tree.query(image)
            self.assertLess(float(distance.max()), 1e-12)
            np.testing.assert_allclose(values[partner], values, atol=1e-9)

    def test_assembled_forms_are_symmetric(self):
        """剛性・質量・シフト作用素は対称行列"""
        forms = assemble_laplace_beltrami(self.mesh, zeroth_order=-2.0)
        for matrix in (forms.stiffness, forms.mass, forms.operator):
            asymmetry = abs(matrix - matrix.T).max()
            self.assertLessEqual(asymmetry, 1e-14 * abs(matrix).max())

    def test_boundary_trace_is_exact(self):
        """境界頂点の値は指定した境界値そのもの"""
        report = solve_dirichlet(boundary_value_problem(self.mesh, c=1.5))
        np.testing.assert_array_equal(report.solution.boundary_values, np.full(self.mesh.boundary_vertices.size, 1.5))
        bdry = np.linspace(0.0, 1.0, self.mesh.boundary_vertices.size)
        report = solve_dirichlet(poisson_problem(self.mesh, bdry=bdry))
        np.testing.assert_array_equal(report.solution.boundary_values, bdry)


if __name__ == "__main__":
    unittest.main()
