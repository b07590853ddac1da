"""
楕円型ディリクレ問題のデータモデル
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from src.reilly_workbench.errors import UsageError
from src.reilly_workbench.models.geometry_models import DomainMesh, ScalarField

DEFAULT_TOLERANCE = 1e-10
DEFAULT_DEFINITENESS_MARGIN = 0.05


class Definiteness(str, Enum):
    """ソルバーが観測した作用素の定値性"""

    POSITIVE_DEFINITE = "positive-definite"
    INDEFINITE_DETECTED = "indefinite-detected"


@dataclass
class DirichletProblem:
    """
    −Δf + c₀f = rhs (Ω), f = bdry (M)

    rhs は定数または ScalarField、bdry は定数または境界頂点ごとの値
    """

    mesh: DomainMesh
    zeroth_order: float
    rhs: Union[float, ScalarField] = 0.0
    bdry: Union[float, np.ndarray] = 0.0
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: Optional[int] = None
    definiteness_margin: float = DEFAULT_DEFINITENESS_MARGIN
    raise_on_indefinite: bool = True
    label: str = "dirichlet"

    def __post_init__(self):
        if not (0.0 < self.tolerance <= 1e-6):
            raise UsageError(f"tolerance must lie in (0, 1e-6], got {self.tolerance}")
        if not np.isfinite(self.zeroth_order):
            raise UsageError("zeroth-order coefficient must be finite")
        if isinstance(self.rhs, ScalarField) and self.rhs.mesh is not self.mesh:
            raise UsageError("rhs field lives on a different mesh")
        if not np.isscalar(self.bdry):
            bdry = np.asarray(self.bdry, dtype=float)
            if bdry.shape != self.mesh.boundary_vertices.shape:
                raise UsageError(
                    f"bdry has shape {bdry.shape}, expected {self.mesh.boundary_vertices.shape}"
                )

    @property
    def model(self):
        return self.mesh.model


@dataclass
class SolveReport:
    """ディリクレ問題の解と反復の記録"""

    solution: ScalarField
    residual: float
    iterations: int
    definiteness: Definiteness
    residual_history: List[float] = field(default_factory=list)
    energy_ratio: Optional[float] = None  # c₀ < 0 のときの fᵀAf / fᵀSf
    problem: Optional[DirichletProblem] = None
