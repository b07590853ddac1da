"""
Heintze-Karcher型不等式・Minkowski公式・Alexandrov連鎖・剛性の検証

どの検証も境界幾何と求積スキームを一度だけ作り、名前付きの数値を
レポートに詰める。判定（holds/violated）は convergence モジュールが
細分割列から下す
"""

import logging
from typing import Optional

import numpy as np

from src.reilly_workbench.calculators.discrete_operators import (
    boundary_geometry,
    build_quadrature,
    integrate,
)
from src.reilly_workbench.calculators.elliptic_solver import (
    interior_problem,
    maximum_principle_margins,
    solve_dirichlet,
)
from src.reilly_workbench.calculators.identity_verifier import (
    metric_laplacian,
    metric_tensor_norm_sq,
    sample_field,
    sample_potential,
    shifted_hessian,
)
from src.reilly_workbench.calculators.metric_screening import (
    curvature_screen,
    potential_field_from_distance,
)
from src.reilly_workbench.errors import (
    MissingPrerequisiteError,
    UnsupportedConfigurationError,
    UsageError,
)
from src.reilly_workbench.models.geometry_models import (
    DomainMesh,
    Region,
    SpaceFormKind,
    SpaceFormModel,
)
from src.reilly_workbench.models.report_models import (
    AlexandrovReport,
    CurvatureScreenResult,
    EikonalResult,
    HKReport,
    MinkowskiReport,
    RigidityReport,
)
from src.reilly_workbench.models.solver_models import SolveReport

logger = logging.getLogger(__name__)

DEFAULT_CMC_TOLERANCE = 1e-3
# 半球の赤道に近づいたとみなす境界上の V の下限
HEMISPHERE_MARGIN = 2e-2


def _check_model(mesh: DomainMesh, model: Optional[SpaceFormModel]) -> SpaceFormModel:
    if model is not None and model != mesh.model:
        raise UsageError("model does not match the model the mesh was built for")
    return mesh.model


def _require_space_form(model: SpaceFormModel, what: str) -> None:
    if not model.is_space_form:
        raise UnsupportedConfigurationError(f"{what} is defined for space forms only")


class InequalityVerifier:
    """
    一つのメッシュ上の境界積分・体積積分をまとめて評価するクラス

    カスタム計量ではeikonal距離場 r から V = cosh r を作り、
    カットローカス候補を含むセルを ΔV の積分から除く
    """

    def __init__(
        self,
        mesh: DomainMesh,
        model: Optional[SpaceFormModel] = None,
        distance: Optional[EikonalResult] = None,
    ):
        self.model = _check_model(mesh, model)
        self.mesh = mesh
        self.distance = distance
        self.boundary = boundary_geometry(mesh, distance=distance)
        self.scheme = build_quadrature(mesh, self.boundary)
        self.excluded_cells = np.zeros(mesh.n_cells, dtype=bool)

        if self.model.is_space_form:
            self.potential = sample_potential(mesh, self.scheme, None)
        elif distance is not None:
            self.potential = sample_potential(mesh, self.scheme, potential_field_from_distance(distance))
            self.excluded_cells = distance.cut_locus_suspects[mesh.cells].any(axis=1)
        else:
            self.potential = None

    def _require_potential(self):
        if self.potential is None:
            raise MissingPrerequisiteError(
                "custom metrics need a distance field from eikonal_distance for V = cosh r"
            )
        return self.potential

    def boundary_integral(self, values: np.ndarray) -> float:
        return integrate(self.scheme, values, Region.BOUNDARY)

    def cell_integral(self, values: np.ndarray) -> float:
        return integrate(self.scheme, values, Region.CELLS)

    @property
    def excluded_measure(self) -> float:
        return float(np.sum(self.scheme.cell_weights[self.excluded_cells]))

    def heintze_karcher(self, screen: Optional[CurvatureScreenResult] = None) -> HKReport:
        """
        ∫_M V/H dA と ∫_Ω ΔV dΩ、∫_M ∇_ν V dA、n∫_Ω V dΩ

        min H ≤ 0 または曲率スクリーン不合格のときは precondition_met = False
        """
        potential = self._require_potential()
        bg = self.boundary
        n = self.mesh.dimension
        min_h = float(bg.mean_curvature.min())

        notes = []
        if min_h <= 0.0:
            notes.append(f"mean curvature is not positive (min H = {min_h:.6g})")
            lhs = float("nan")
        else:
            lhs = self.boundary_integral(potential.boundary_V / bg.mean_curvature)

        if not self.model.is_space_form and screen is None and n == 2:
            screen = curvature_screen(self.mesh, bound=-1.0)
        if screen is not None and not screen.passed:
            notes.append(f"curvature screen failed (min curvature {screen.minimum:.6g} < {screen.bound})")

        laplacian = np.where(self.excluded_cells[:, None], 0.0, potential.laplacian)
        rhs_bulk = self.cell_integral(laplacian)
        rhs_flux = self.boundary_integral(potential.boundary_normal_derivative)
        alt_rhs = n * self.cell_integral(potential.V)

        if self.model.kind == SpaceFormKind.EUCLIDEAN:
            reference_rhs, reference_kind = alt_rhs, "n_volume"
        elif self.model.kind == SpaceFormKind.SPHERICAL:
            reference_rhs, reference_kind = alt_rhs, "n_int_V"
        else:
            reference_rhs, reference_kind = rhs_bulk, "int_laplacian_V"

        report = HKReport(
            lhs=lhs,
            rhs_bulk=rhs_bulk,
            rhs_flux=rhs_flux,
            alt_rhs=alt_rhs,
            reference_rhs=reference_rhs,
            reference_kind=reference_kind,
            min_h=min_h,
            h_max=self.mesh.h_max,
            precondition_met=not notes,
            precondition_note="; ".join(notes),
            screen=screen,
            excluded_measure=self.excluded_measure,
        )
        if notes:
            logger.warning(f"Heintze-Karcher precondition not met on level {self.mesh.level}: {report.precondition_note}")
        else:
            logger.info(
                f"Heintze-Karcher on level {self.mesh.level}: lhs {lhs:.8g}, "
                f"{reference_kind} {reference_rhs:.8g}, gap {report.gap:.3e}"
            )
        return report

    def minkowski(self) -> MinkowskiReport:
        """(∫_M V dA, ∫_M Hp dA) と (∫_M p dA, n∫_Ω V dΩ)"""
        _require_space_form(self.model, "the Minkowski check")
        potential = self._require_potential()
        bg = self.boundary
        n = self.mesh.dimension
        report = MinkowskiReport(
            first_lhs=self.boundary_integral(potential.boundary_V),
            first_rhs=self.boundary_integral(bg.mean_curvature * bg.support_function),
            second_lhs=self.boundary_integral(bg.support_function),
            second_rhs=n * self.cell_integral(potential.V),
            h_max=self.mesh.h_max,
        )
        logger.info(
            f"Minkowski on level {self.mesh.level}: discrepancies "
            f"{report.first_discrepancy:.3e}, {report.second_discrepancy:.3e}"
        )
        return report

    def mean_curvature_statistics(self):
        bg = self.boundary
        length = float(np.sum(bg.weights))
        mean_h = self.boundary_integral(bg.mean_curvature) / length
        deviation = float(np.max(np.abs(bg.mean_curvature - mean_h)) / abs(mean_h))
        return mean_h, deviation

    def alexandrov(
        self,
        cmc_tolerance: float = DEFAULT_CMC_TOLERANCE,
        solve: Optional[SolveReport] = None,
    ) -> AlexandrovReport:
        """
        CMC境界での等式連鎖

        Δf + Knf = 1, f = 0 の解から Schwarz・Green・Minkowski・Hölder の各リンクと
        トレースフリー部分 ∇²f + Kfg − g/n の Obata 残差を求める

        Raises:
            IndefiniteSystemError: 内部問題が不定値の場合
        """
        _require_space_form(self.model, "the Alexandrov chain")
        mean_h, deviation = self.mean_curvature_statistics()
        is_cmc = deviation <= cmc_tolerance
        report = AlexandrovReport(
            mean_h=mean_h,
            max_h_deviation=deviation,
            is_cmc=is_cmc,
            cmc_tolerance=cmc_tolerance,
            h_max=self.mesh.h_max,
        )
        if not is_cmc:
            logger.warning(
                f"Boundary is not CMC on level {self.mesh.level}: relative H deviation {deviation:.3e}"
            )
            return report

        if solve is None:
            solve = solve_dirichlet(interior_problem(self.mesh))
        f = solve.solution
        if f.mesh is not self.mesh:
            raise UsageError("solution lives on a different mesh")

        n = self.mesh.dimension
        K = self.model.curvature
        potential = self.potential
        bg = self.boundary
        lam = self.scheme.cell_conformal_factor
        sample = sample_field(f)
        u = np.einsum("ij,ij->i", sample.derivatives.gradient[bg.vertex_indices], bg.normal)

        volume_V = self.cell_integral(potential.V)
        boundary_V = potential.boundary_V
        u_sq_V = self.boundary_integral(u**2 * boundary_V)

        report.schwarz_lhs = (n - 1) / n * volume_V
        report.schwarz_rhs = (n - 1) * mean_h * u_sq_V
        report.green_boundary = self.boundary_integral(u * boundary_V)
        report.green_bulk = volume_V
        report.minkowski_boundary = self.boundary_integral(boundary_V)
        report.minkowski_bulk = n * mean_h * volume_V
        report.holder_lhs = report.green_boundary**2
        report.holder_rhs = self.boundary_integral(boundary_V / bg.mean_curvature) * self.boundary_integral(
            bg.mean_curvature * u**2 * boundary_V
        )

        shifted = shifted_hessian(sample, lam, K)
        trace_free = shifted - (lam**2 / n)[..., None, None] * np.eye(n)
        denominator = self.cell_integral(metric_tensor_norm_sq(shifted, lam))
        report.obata_residual = self.cell_integral(metric_tensor_norm_sq(trace_free, lam)) / denominator

        logger.info(
            f"Alexandrov chain on level {self.mesh.level}: worst slack {report.worst_slack:.3e}"
        )
        return report

    def rigidity(self, solve: SolveReport) -> RigidityReport:
        """
        境界値 c の問題 Δf + Knf = 0 の解に対する Obata 残差と Schwarz スラック

        残差は ∫|∇²f + Kfg|² / (∫|∇²f|² + ∫f²)

        Raises:
            UnsupportedConfigurationError: ユークリッドの場合
        """
        if self.model.kind == SpaceFormKind.EUCLIDEAN:
            raise UnsupportedConfigurationError(
                "the rigidity residual is defined for K != 0 (euclidean is unsupported)"
            )
        potential = self._require_potential()
        f = solve.solution
        if f.mesh is not self.mesh:
            raise UsageError("solution lives on a different mesh")
        problem = solve.problem
        if problem is not None and np.isscalar(problem.bdry):
            c = float(problem.bdry)
        else:
            c = float(np.mean(f.boundary_values()))

        n = self.mesh.dimension
        K = self.model.potential_curvature
        bg = self.boundary
        lam = self.scheme.cell_conformal_factor
        sample = sample_field(f)

        shifted_sq = metric_tensor_norm_sq(shifted_hessian(sample, lam, K), lam)
        hessian_sq = metric_tensor_norm_sq(sample.hessian, lam)
        denominator = self.cell_integral(hessian_sq) + self.cell_integral(sample.values**2)
        obata = self.cell_integral(shifted_sq) / denominator

        trace_term = metric_laplacian(sample, lam) + K * n * sample.values
        schwarz_lhs = (n - 1) / n * self.cell_integral(potential.V * trace_term**2)

        u = np.einsum("ij,ij->i", sample.derivatives.gradient[bg.vertex_indices], bg.normal)
        V_b = potential.boundary_V
        scale_density = (n - 1) * bg.mean_curvature * u**2 * V_b
        boundary_expression = self.boundary_integral(
            scale_density
            + (2 * n - 2) * K * c * u * V_b
            - (n - 1) * K * c**2 * potential.boundary_normal_derivative
        )
        min_f, overshoot = maximum_principle_margins(solve, c)

        report = RigidityReport(
            obata_residual=obata,
            schwarz_lhs=schwarz_lhs,
            boundary_expression=boundary_expression,
            boundary_scale=self.boundary_integral(scale_density),
            min_f=min_f,
            max_overshoot=overshoot,
            h_max=self.mesh.h_max,
        )
        logger.info(
            f"Rigidity on level {self.mesh.level}: Obata residual {obata:.3e}, "
            f"Schwarz slack {report.schwarz_slack:.3e}"
        )
        return report


def heintze_karcher(
    mesh: DomainMesh,
    model: Optional[SpaceFormModel] = None,
    distance: Optional[EikonalResult] = None,
    screen: Optional[CurvatureScreenResult] = None,
) -> HKReport:
    """便利関数: Heintze-Karcher型不等式の両辺"""
    return InequalityVerifier(mesh, model, distance).heintze_karcher(screen)


def brendle_spherical(mesh: DomainMesh, model: Optional[SpaceFormModel] = None) -> HKReport:
    """
    便利関数: 球面での ∫_M cos r/H dA ≥ n∫_Ω cos r dΩ

    球面では ΔV = −nV なので rhs_bulk = −alt_rhs となる。境界上の V が
    HEMISPHERE_MARGIN 以下なら半球からはみ出しかけているとして前提不成立にする

    Raises:
        UnsupportedConfigurationError: 球面以外の場合
    """
    model = _check_model(mesh, model)
    if model.kind != SpaceFormKind.SPHERICAL:
        raise UnsupportedConfigurationError("the cos r / H inequality needs the spherical space form")
    verifier = InequalityVerifier(mesh, model)
    report = verifier.heintze_karcher()
    min_V = float(verifier.potential.boundary_V.min())
    if min_V <= HEMISPHERE_MARGIN:
        note = f"boundary approaches the equator (min cos r = {min_V:.3e})"
        report.precondition_met = False
        report.precondition_note = "; ".join(filter(None, [report.precondition_note, note]))
        logger.warning(f"Spherical inequality precondition not met: {note}")
    return report


def minkowski_check(mesh: DomainMesh, model: Optional[SpaceFormModel] = None) -> MinkowskiReport:
    """便利関数: Minkowski公式の二組"""
    return InequalityVerifier(mesh, model).minkowski()


def alexandrov_chain(
    mesh: DomainMesh,
    model: Optional[SpaceFormModel] = None,
    cmc_tolerance: float = DEFAULT_CMC_TOLERANCE,
    solve: Optional[SolveReport] = None,
) -> AlexandrovReport:
    """便利関数: Alexandrov連鎖"""
    return InequalityVerifier(mesh, model).alexandrov(cmc_tolerance=cmc_tolerance, solve=solve)


def rigidity_residual(
    mesh: DomainMesh,
    model: Optional[SpaceFormModel],
    solve: SolveReport,
    distance: Optional[EikonalResult] = None,
) -> RigidityReport:
    """便利関数: 剛性の残差（カスタム計量では distance が必要）"""
    return InequalityVerifier(mesh, model, distance).rigidity(solve)
