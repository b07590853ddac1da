"""
一般化Reilly恒等式の離散評価

f と V の勾配・共変Hessianはパッチ二次フィットで回復し、セルの辺中点へ
線形補間して体積項を、境界の弧長差分で境界項を組み立てる。
空間形のポテンシャル V は閉形式で評価する
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from src.reilly_workbench.calculators.discrete_operators import (
    boundary_geometry,
    boundary_tangential_ops,
    build_quadrature,
    integrate,
    recovered_hessian,
    vertex_to_quadrature,
)
from src.reilly_workbench.calculators.space_form import get_calculator
from src.reilly_workbench.errors import MissingPrerequisiteError, UsageError
from src.reilly_workbench.models.geometry_models import (
    DomainMesh,
    QuadratureScheme,
    Region,
    RecoveredDerivatives,
    ScalarField,
    SpaceFormModel,
)
from src.reilly_workbench.models.report_models import ReillyReport

logger = logging.getLogger(__name__)

PotentialInput = Union[None, float, ScalarField]


@dataclass
class PotentialOnQuadrature:
    """求積点と境界点でのポテンシャルの値"""

    V: np.ndarray  # (M, 3)
    hessian: np.ndarray  # (M, 3, n, n) 共変
    laplacian: np.ndarray  # (M, 3)
    boundary_V: np.ndarray  # (Nb,)
    boundary_normal_derivative: np.ndarray  # (Nb,) ∇_ν V


def sample_potential(mesh: DomainMesh, scheme: QuadratureScheme, V: PotentialInput) -> PotentialOnQuadrature:
    """
    ポテンシャルを求積点と境界点で評価する

    Args:
        V: None（空間形の閉形式）、定数、または頂点上の場（回復微分を使う）

    Raises:
        MissingPrerequisiteError: カスタム計量で V が与えられない場合
    """
    n = mesh.dimension
    bg = scheme.boundary
    cell_shape = scheme.cell_weights.shape
    boundary_count = bg.vertex_indices.size

    if isinstance(V, ScalarField):
        if V.mesh is not mesh:
            raise UsageError("potential field lives on a different mesh")
        derivatives = recovered_hessian(V)
        hessian = vertex_to_quadrature(mesh, derivatives.covariant_hessian)
        return PotentialOnQuadrature(
            V=vertex_to_quadrature(mesh, V.values),
            hessian=hessian,
            laplacian=np.trace(hessian, axis1=-2, axis2=-1) / scheme.cell_conformal_factor**2,
            boundary_V=V.values[bg.vertex_indices],
            boundary_normal_derivative=np.einsum(
                "ij,ij->i", derivatives.gradient[bg.vertex_indices], bg.normal
            ),
        )

    if V is not None:
        value = float(V)
        return PotentialOnQuadrature(
            V=np.full(cell_shape, value),
            hessian=np.zeros(cell_shape + (n, n)),
            laplacian=np.zeros(cell_shape),
            boundary_V=np.full(boundary_count, value),
            boundary_normal_derivative=np.zeros(boundary_count),
        )

    if not mesh.model.is_space_form:
        raise MissingPrerequisiteError(
            "custom metrics need an explicit potential field (V = cosh r from eikonal_distance)"
        )
    calculator = get_calculator(mesh.model)
    bulk = calculator.potential(scheme.cell_points.reshape(-1, n))
    edge = calculator.potential(bg.points)
    return PotentialOnQuadrature(
        V=bulk.V.reshape(cell_shape),
        hessian=bulk.hessian.reshape(cell_shape + (n, n)),
        laplacian=bulk.laplacian.reshape(cell_shape),
        boundary_V=edge.V,
        boundary_normal_derivative=np.einsum("ij,ij->i", edge.differential, bg.normal),
    )


@dataclass
class FieldOnQuadrature:
    """求積点へ補間した f とその回復微分"""

    values: np.ndarray  # (M, 3)
    gradient: np.ndarray  # (M, 3, n) チャート偏微分
    hessian: np.ndarray  # (M, 3, n, n) 共変
    derivatives: RecoveredDerivatives


def sample_field(field: ScalarField) -> FieldOnQuadrature:
    mesh = field.mesh
    derivatives = recovered_hessian(field)
    return FieldOnQuadrature(
        values=vertex_to_quadrature(mesh, field.values),
        gradient=vertex_to_quadrature(mesh, derivatives.gradient),
        hessian=vertex_to_quadrature(mesh, derivatives.covariant_hessian),
        derivatives=derivatives,
    )


def shifted_hessian(sample: FieldOnQuadrature, lam: np.ndarray, K: float) -> np.ndarray:
    """∇²f + Kfg の共変成分（g = λ²δ）"""
    n = sample.hessian.shape[-1]
    return sample.hessian + (K * sample.values * lam**2)[..., None, None] * np.eye(n)


def metric_tensor_norm_sq(tensor: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """共変2-テンソルの g ノルムの二乗 λ⁻⁴ΣT_ij²"""
    return np.einsum("...ij,...ij->...", tensor, tensor) / lam**4


def metric_laplacian(sample: FieldOnQuadrature, lam: np.ndarray) -> np.ndarray:
    return np.trace(sample.hessian, axis1=-2, axis2=-1) / lam**2


class ReillyCalculator:
    """
    一般化Reilly恒等式の計算クラス

    ∫V((Δf+Knf)² − |∇²f+Kfg|²) = B1 + B2 + T3 + T4 の各項を同じ求積で評価する
    """

    def __init__(self, mesh: DomainMesh, model: Optional[SpaceFormModel] = None):
        if model is not None and model != mesh.model:
            raise UsageError("model does not match the model the mesh was built for")
        self.mesh = mesh
        self.model = mesh.model
        self.calculator = get_calculator(self.model)
        self.scheme = build_quadrature(mesh, boundary_geometry(mesh))

    def evaluate(
        self,
        f: ScalarField,
        V: PotentialInput = None,
        K: Optional[float] = None,
        excluded_vertices: Optional[np.ndarray] = None,
    ) -> ReillyReport:
        """
        恒等式の5項を組み立てる

        Args:
            f: 検証するスカラー場
            V: None（空間形の閉形式ポテンシャル）、定数、または頂点上の場
            K: シフト定数。None のときモデルの potential_curvature
            excluded_vertices: V のHessian求積から除く頂点（カットローカス候補）

        Raises:
            MissingPrerequisiteError: カスタム計量で V が与えられない場合
            UnsupportedConfigurationError: Ricci曲率が得られない場合
        """
        mesh = self.mesh
        if f.mesh is not mesh:
            raise UsageError("field f lives on a different mesh")
        n = mesh.dimension
        K = float(self.model.potential_curvature if K is None else K)

        scheme = self.scheme
        lam = scheme.cell_conformal_factor
        potential = sample_potential(mesh, scheme, V)
        ricci = self.calculator.ricci_factor(scheme.cell_points.reshape(-1, n)).reshape(lam.shape)
        sample = sample_field(f)

        shifted_norm_sq = metric_tensor_norm_sq(shifted_hessian(sample, lam, K), lam)
        trace_term = metric_laplacian(sample, lam) + K * n * sample.values
        t_lhs = integrate(scheme, potential.V * (trace_term**2 - shifted_norm_sq), Region.CELLS)

        metric = (lam**2)[..., None, None] * np.eye(n)
        weight_tensor = potential.hessian + (
            -potential.laplacian - (2 * n - 2) * K * potential.V + potential.V * ricci
        )[..., None, None] * metric
        grad_vector = sample.gradient / (lam**2)[..., None]
        t3_density = np.einsum("...i,...ij,...j->...", grad_vector, weight_tensor, grad_vector)
        t4_density = (n - 1) * (K * potential.laplacian + n * K**2 * potential.V) * sample.values**2

        excluded_measure = 0.0
        if excluded_vertices is not None and np.any(excluded_vertices):
            touched = np.asarray(excluded_vertices, dtype=bool)[mesh.cells].any(axis=1)
            t3_density = np.where(touched[:, None], 0.0, t3_density)
            t4_density = np.where(touched[:, None], 0.0, t4_density)
            excluded_measure = float(np.sum(scheme.cell_weights[touched]))
        t3 = integrate(scheme, t3_density, Region.CELLS)
        t4 = integrate(scheme, t4_density, Region.CELLS)

        bg = scheme.boundary
        tangential = boundary_tangential_ops(f, bg, sample.derivatives)
        z, u = tangential.z, tangential.u
        b1 = integrate(
            scheme,
            potential.boundary_V
            * (
                2.0 * u * tangential.laplacian_z
                + (n - 1) * bg.mean_curvature * u**2
                + tangential.h_grad_z
                + (2 * n - 2) * K * u * z
            ),
            Region.BOUNDARY,
        )
        b2 = integrate(
            scheme,
            potential.boundary_normal_derivative * (tangential.grad_z_norm_sq - (n - 1) * K * z**2),
            Region.BOUNDARY,
        )

        report = ReillyReport(
            t_lhs=t_lhs,
            b1=b1,
            b2=b2,
            t3=t3,
            t4=t4,
            h_max=mesh.h_max,
            excluded_measure=excluded_measure,
        )
        logger.info(
            f"Reilly identity on level {mesh.level}: residual/scale {report.relative_residual:.3e} "
            f"(h_max {mesh.h_max:.3e})"
        )
        return report


def reilly_residual(
    mesh: DomainMesh,
    model: Optional[SpaceFormModel],
    f: ScalarField,
    V: PotentialInput = None,
    K: Optional[float] = None,
    excluded_vertices: Optional[np.ndarray] = None,
) -> ReillyReport:
    """便利関数: 一般化Reilly恒等式の残差"""
    return ReillyCalculator(mesh, model).evaluate(f, V=V, K=K, excluded_vertices=excluded_vertices)


def classical_reilly_residual(mesh: DomainMesh, f: ScalarField) -> ReillyReport:
    """便利関数: V ≡ 1, K = 0 の古典的なReilly公式"""
    return ReillyCalculator(mesh).evaluate(f, V=1.0, K=0.0)
