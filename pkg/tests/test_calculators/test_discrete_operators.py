"""
離散演算子（求積・境界幾何・Hessian回復・Laplace-Beltrami）のテスト
"""

import math
import sys
import unittest
from pathlib import Path

import numpy as np

# プロジェクトルートをパスに追加
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.reilly_workbench.calculators.discrete_operators import (
    assemble_laplace_beltrami,
    boundary_geometry,
    boundary_tangential_ops,
    build_quadrature,
    gradient,
    integrate,
    recovered_hessian,
)
from src.reilly_workbench.calculators.mesh_builder import geodesic_ball_profile, mesh_levels
from src.reilly_workbench.errors import UsageError
from src.reilly_workbench.models.geometry_models import (
    FieldTag,
    Region,
    ScalarField,
    SpaceFormKind,
    SpaceFormModel,
    StarDomainSpec,
)

RADIUS = 0.7


def ball_mesh(kind: SpaceFormKind, radius: float, level: int):
    model = SpaceFormModel(kind=kind)
    spec = StarDomainSpec(profile=geodesic_ball_profile(model, radius))
    return next(mesh_levels(spec, model, [level]))


class TestDiscreteOperators(unittest.TestCase):
    """離散演算子のテストクラス"""

    def setUp(self):
        """各テスト前の準備"""
        self.mesh = ball_mesh(SpaceFormKind.HYPERBOLIC, RADIUS, 2)
        self.bg = boundary_geometry(self.mesh)
        self.scheme = build_quadrature(self.mesh, self.bg)

    def test_hyperbolic_ball_boundary_length(self):
        """境界の長さ 2π sinh R"""
        length = integrate(self.scheme, np.ones_like(self.scheme.boundary_weights), Region.BOUNDARY)
        self.assertAlmostEqual(length / (2.0 * math.pi * math.sinh(RADIUS)), 1.0, delta=1e-5)

    def test_hyperbolic_ball_mean_curvature(self):
        """測地円の平均曲率 coth R と支持関数 sinh R"""
        np.testing.assert_allclose(self.bg.mean_curvature, 1.0 / math.tanh(RADIUS), rtol=1e-4)
        np.testing.assert_allclose(self.bg.support_function, math.sinh(RADIUS), rtol=1e-6)

    def test_hyperbolic_ball_volume(self):
        """体積 2π(cosh R − 1)"""
        volume = integrate(self.scheme, np.ones_like(self.scheme.cell_weights), Region.CELLS)
        self.assertAlmostEqual(volume / (2.0 * math.pi * (math.cosh(RADIUS) - 1.0)), 1.0, delta=1e-2)

    def test_unit_normal(self):
        """ν は計量で単位長、接ベクトルと直交"""
        lam = self.bg.conformal_factor
        norms = lam**2 * np.sum(self.bg.normal**2, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)
        dots = np.sum(self.bg.normal * self.bg.tangent, axis=1)
        np.testing.assert_allclose(dots, 0.0, atol=1e-12)

    def test_recovered_hessian_exact_for_quadratics(self):
        """二次多項式のチャートHessianは厳密に回復される"""
        x, y = self.mesh.vertices[:, 0], self.mesh.vertices[:, 1]
        field = ScalarField(self.mesh, 1.5 * x**2 - 0.4 * x * y + 0.25 * y**2 + x, FieldTag.CUSTOM)
        derivatives = recovered_hessian(field)
        expected = np.array([[3.0, -0.4], [-0.4, 0.5]])
        np.testing.assert_allclose(derivatives.hessian, np.broadcast_to(expected, derivatives.hessian.shape), atol=1e-7)
        np.testing.assert_allclose(derivatives.gradient[:, 0], 3.0 * x - 0.4 * y + 1.0, atol=1e-7)

    def test_metric_gradient_of_linear_field(self):
        """チャートで一次の場の計量勾配は 平坦勾配/λ²"""
        x, y = self.mesh.vertices[:, 0], self.mesh.vertices[:, 1]
        field = ScalarField(self.mesh, 2.0 * x - y, FieldTag.CUSTOM)
        vectors = gradient(field)
        centroids = self.mesh.vertices[self.mesh.cells].mean(axis=1)
        lam = 2.0 / (1.0 - np.sum(centroids**2, axis=1))
        np.testing.assert_allclose(vectors[:, 0] * lam**2, 2.0, atol=1e-10)
        np.testing.assert_allclose(vectors[:, 1] * lam**2, -1.0, atol=1e-10)

    def test_tangential_ops_on_radial_field(self):
        """境界で定数の場は z' = 0, Δz = 0"""
        q = np.sum(self.mesh.vertices**2, axis=1)
        field = ScalarField(self.mesh, q, FieldTag.CUSTOM)
        data = boundary_tangential_ops(field, self.bg)
        np.testing.assert_allclose(data.dz_ds, 0.0, atol=1e-9)
        np.testing.assert_allclose(data.laplacian_z, 0.0, atol=1e-7)

    def test_stiffness_annihilates_constants(self):
        """剛性行列は定数を消し、質量は体積を再現する"""
        forms = assemble_laplace_beltrami(self.mesh)
        ones = np.ones(self.mesh.n_vertices)
        np.testing.assert_allclose(forms.stiffness @ ones, 0.0, atol=1e-10)
        total_mass = float(ones @ (forms.mass @ ones))
        volume = integrate(self.scheme, np.ones_like(self.scheme.cell_weights), Region.CELLS)
        self.assertAlmostEqual(total_mass, volume, places=10)

    def test_integrate_shape_mismatch(self):
        """形状が合わない積分は UsageError"""
        with self.assertRaises(UsageError):
            integrate(self.scheme, np.ones(3), Region.BOUNDARY)

    def test_integrate_unknown_region(self):
        """未知の領域名は UsageError"""
        with self.assertRaises(UsageError):
            integrate(self.scheme, np.ones_like(self.scheme.boundary_weights), "surface")

    def test_spherical_ball_boundary_length(self):
        """球面の測地円の長さ 2π sin R"""
        mesh = ball_mesh(SpaceFormKind.SPHERICAL, 0.5, 1)
        scheme = build_quadrature(mesh, boundary_geometry(mesh))
        length = integrate(scheme, np.ones_like(scheme.boundary_weights), Region.BOUNDARY)
        self.assertAlmostEqual(length / (2.0 * math.pi * math.sin(0.5)), 1.0, delta=1e-4)


if __name__ == "__main__":
    unittest.main()
