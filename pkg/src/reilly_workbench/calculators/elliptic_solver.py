"""
楕円型ディリクレ問題のソルバー

標準形 −Δf + c₀f = rhs (Ω), f = bdry (M) を、境界自由度の消去で得た
縮約系に対する Jacobi 前処理付き共役勾配法で解く。
c₀ < 0（球面の内部問題）では共役方向の曲率とエネルギー比を監視し、
不定値または実質的に不定値な系を検出する

問題との対応:
    Δf + Knf = 1, f = 0   →  c₀ = −Kn, rhs = −1, bdry = 0
    Δf + Knf = 0, f = c   →  c₀ = −Kn, rhs = 0,  bdry = c（双曲で Δf = nf）
    −Δf = 1, f = 0        →  c₀ = 0,   rhs = 1,  bdry = 0
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from src.reilly_workbench.calculators.discrete_operators import assemble_laplace_beltrami
from src.reilly_workbench.errors import (
    IndefiniteSystemError,
    IterationLimitError,
    UnsupportedConfigurationError,
    UsageError,
)
from src.reilly_workbench.models.geometry_models import DomainMesh, FieldTag, ScalarField
from src.reilly_workbench.models.solver_models import (
    Definiteness,
    DirichletProblem,
    SolveReport,
)

logger = logging.getLogger(__name__)


@dataclass
class ConjugateGradientResult:
    """共役勾配法の結果"""

    solution: np.ndarray
    iterations: int
    residual_history: List[float] = field(default_factory=list)
    min_curvature_ratio: Optional[float] = None


class ConjugateGradientSolver:
    """
    Jacobi前処理付き共役勾配法

    stiffness を渡すと各反復で pᵀAp / pᵀSp（シフト作用素と剛性のレイリー比）
    の最小値を記録する
    """

    def __init__(self, tolerance: float, max_iterations: int):
        self.tolerance = tolerance
        self.max_iterations = max_iterations

    def solve(
        self,
        matrix: sp.csr_matrix,
        rhs: np.ndarray,
        stiffness: Optional[sp.csr_matrix] = None,
    ) -> ConjugateGradientResult:
        """
        Raises:
            IndefiniteSystemError: 共役方向の曲率 pᵀAp が正でない場合
            IterationLimitError: 反復上限で収束しない場合
        """
        x = np.zeros_like(rhs)
        rhs_norm = float(np.linalg.norm(rhs))
        if rhs_norm == 0.0:
            return ConjugateGradientResult(solution=x, iterations=0, residual_history=[0.0])

        diagonal = matrix.diagonal()
        if np.any(diagonal <= 0.0):
            raise IndefiniteSystemError(
                "system matrix has a non-positive diagonal entry", curvature=float(diagonal.min())
            )
        inverse_diagonal = 1.0 / diagonal

        residual = rhs.copy()
        preconditioned = inverse_diagonal * residual
        direction = preconditioned.copy()
        rz = float(residual @ preconditioned)
        history = [1.0]
        min_ratio: Optional[float] = None

        for iteration in range(1, self.max_iterations + 1):
            product = matrix @ direction
            curvature = float(direction @ product)
            if curvature <= 0.0:
                raise IndefiniteSystemError(
                    f"non-positive conjugate-direction curvature at iteration {iteration}",
                    curvature=curvature / float(direction @ direction),
                )
            if stiffness is not None:
                ratio = curvature / float(direction @ (stiffness @ direction))
                min_ratio = ratio if min_ratio is None else min(min_ratio, ratio)

            alpha = rz / curvature
            x += alpha * direction
            residual -= alpha * product
            relative = float(np.linalg.norm(residual)) / rhs_norm
            history.append(relative)
            if relative <= self.tolerance:
                logger.debug(f"CG converged in {iteration} iterations (residual {relative:.3e})")
                return ConjugateGradientResult(
                    solution=x,
                    iterations=iteration,
                    residual_history=history,
                    min_curvature_ratio=min_ratio,
                )

            preconditioned = inverse_diagonal * residual
            rz_next = float(residual @ preconditioned)
            direction = preconditioned + (rz_next / rz) * direction
            rz = rz_next

        raise IterationLimitError(
            f"conjugate gradients did not reach {self.tolerance:.1e} in {self.max_iterations} iterations",
            residual_history=history,
        )


class EllipticSolver:
    """ディリクレ問題のソルバー"""

    def solve(self, problem: DirichletProblem) -> SolveReport:
        """
        Raises:
            IndefiniteSystemError: 不定値な系を検出し raise_on_indefinite が真の場合
            IterationLimitError: 反復上限で収束しない場合
        """
        mesh = problem.mesh
        forms = assemble_laplace_beltrami(mesh, zeroth_order=problem.zeroth_order)
        operator = forms.operator

        boundary = mesh.boundary_vertices
        free = np.flatnonzero(mesh.boundary_vertex_map < 0)
        boundary_values = np.broadcast_to(
            np.asarray(problem.bdry, dtype=float), boundary.shape
        ).astype(float)

        if isinstance(problem.rhs, ScalarField):
            source = problem.rhs.values
        else:
            source = np.full(mesh.n_vertices, float(problem.rhs))
        load = forms.mass @ source - operator[:, boundary] @ boundary_values

        reduced = operator[free][:, free].tocsr()
        monitored = forms.stiffness[free][:, free].tocsr() if problem.zeroth_order < 0.0 else None
        max_iterations = problem.max_iterations or max(100, 10 * free.size)
        solver = ConjugateGradientSolver(problem.tolerance, max_iterations)

        definiteness = Definiteness.POSITIVE_DEFINITE
        energy_ratio: Optional[float] = None
        try:
            result = solver.solve(reduced, load[free], stiffness=monitored)
        except IndefiniteSystemError as e:
            logger.warning(f"{problem.label}: indefinite system detected ({e})")
            raise

        values = np.empty(mesh.n_vertices)
        values[free] = result.solution
        values[boundary] = boundary_values

        if monitored is not None:
            energy_ratio = self._energy_ratio(reduced, monitored, result.solution)
            candidates = [r for r in (energy_ratio, result.min_curvature_ratio) if r is not None]
            worst = min(candidates) if candidates else None
            if worst is not None and worst < problem.definiteness_margin:
                definiteness = Definiteness.INDEFINITE_DETECTED
                message = (
                    f"{problem.label}: shifted operator is within the definiteness margin "
                    f"{problem.definiteness_margin} of singular"
                )
                if problem.raise_on_indefinite:
                    raise IndefiniteSystemError(message, curvature=worst)
                logger.warning(message)

        residual = result.residual_history[-1]
        logger.info(
            f"Solved {problem.label} on level {mesh.level}: {result.iterations} iterations, "
            f"residual {residual:.2e}"
        )
        return SolveReport(
            solution=ScalarField(mesh, values, FieldTag.SOLUTION),
            residual=residual,
            iterations=result.iterations,
            definiteness=definiteness,
            residual_history=result.residual_history,
            energy_ratio=energy_ratio,
            problem=problem,
        )

    @staticmethod
    def _energy_ratio(matrix: sp.csr_matrix, stiffness: sp.csr_matrix, x: np.ndarray) -> Optional[float]:
        denominator = float(x @ (stiffness @ x))
        if denominator <= 0.0:
            return None
        return float(x @ (matrix @ x)) / denominator


def solve_dirichlet(problem: DirichletProblem) -> SolveReport:
    """便利関数: ディリクレ問題を解く"""
    return EllipticSolver().solve(problem)


def _space_form_curvature(mesh: DomainMesh) -> float:
    curvature = mesh.model.curvature
    if curvature is None:
        raise UnsupportedConfigurationError("this problem is defined for space forms only")
    return curvature


def interior_problem(mesh: DomainMesh, **options) -> DirichletProblem:
    """Δf + Knf = 1 (Ω), f = 0 (M) の標準形"""
    n = mesh.model.dimension
    K = _space_form_curvature(mesh)
    return DirichletProblem(
        mesh=mesh, zeroth_order=-K * n, rhs=-1.0, bdry=0.0, label="interior problem", **options
    )


def boundary_value_problem(mesh: DomainMesh, c: float = 1.0, **options) -> DirichletProblem:
    """
    Δf + Knf = 0 (Ω), f = c (M) の標準形

    双曲（およびカスタム計量、K = −1）では Δf = nf。ユークリッドは対象外
    """
    if c <= 0.0:
        raise UsageError(f"boundary value c must be positive, got {c}")
    K = mesh.model.potential_curvature
    if K == 0.0:
        raise UnsupportedConfigurationError(
            "the boundary-value problem with f = c needs K != 0 (euclidean is unsupported)"
        )
    n = mesh.model.dimension
    return DirichletProblem(
        mesh=mesh, zeroth_order=-K * n, rhs=0.0, bdry=c, label="boundary-value problem", **options
    )


def poisson_problem(mesh: DomainMesh, rhs: float = 1.0, bdry: float = 0.0, **options) -> DirichletProblem:
    """−Δf = rhs (Ω), f = bdry (M)"""
    return DirichletProblem(
        mesh=mesh, zeroth_order=0.0, rhs=rhs, bdry=bdry, label="poisson problem", **options
    )


def maximum_principle_margins(report: SolveReport, c: float) -> Tuple[float, float]:
    """境界値 c の問題の解について (min f, max f/c − 1)"""
    values = report.solution.values
    return float(values.min()), float(values.max() / c - 1.0)
