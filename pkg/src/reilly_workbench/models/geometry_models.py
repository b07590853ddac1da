"""
幾何関連のデータモデル定義

空間形モデル・星形領域・メッシュ・スカラー場・境界幾何など、
計算モジュール間で受け渡すデータを定義する
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from src.reilly_workbench.errors import SpecError, UsageError


class SpaceFormKind(str, Enum):
    """背景幾何の種類"""

    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"
    SPHERICAL = "spherical"
    CUSTOM = "custom"


class FieldTag(str, Enum):
    """スカラー場の用途タグ"""

    SOLUTION = "f"
    POTENTIAL = "V"
    DISTANCE = "r"
    CUSTOM = "custom"


class ProfileKind(str, Enum):
    """境界の動径プロファイルの種類"""

    FOURIER = "fourier"
    ELLIPSE = "ellipse"


class Region(str, Enum):
    """積分領域"""

    CELLS = "cells"
    BOUNDARY = "boundary"


_SPACE_FORM_CURVATURE = {
    SpaceFormKind.EUCLIDEAN: 0.0,
    SpaceFormKind.HYPERBOLIC: -1.0,
    SpaceFormKind.SPHERICAL: 1.0,
}

MAX_CONFORMAL_DEGREE = 6
MAX_FOURIER_MODE = 8


@dataclass(frozen=True)
class ConformalFactorSpec:
    """
    カスタム共形因子 φ（λ = e^φ）の指定

    多項式の単項式テーブル、または x1, x2, ... を変数とする sympy 式の文字列
    のどちらか一方で与える
    """

    expression: Optional[str] = None
    # ((指数タプル), 係数) の組
    monomials: Tuple[Tuple[Tuple[int, ...], float], ...] = ()

    def __post_init__(self):
        if (self.expression is None) == (len(self.monomials) == 0):
            raise SpecError(
                "conformal factor needs exactly one of 'expression' or 'monomials'"
            )
        for exponents, _ in self.monomials:
            if any(e < 0 for e in exponents):
                raise SpecError(f"negative exponent in monomial {exponents}")
            if sum(exponents) > MAX_CONFORMAL_DEGREE:
                raise SpecError(
                    f"monomial {exponents} exceeds degree {MAX_CONFORMAL_DEGREE}"
                )


@dataclass(frozen=True)
class SpaceFormModel:
    """
    背景幾何モデル

    計量は g = λ²·(平坦内積)。空間形ではλは閉形式、
    カスタムでは λ = e^φ で φ は ConformalFactorSpec から与えられる
    """

    kind: SpaceFormKind
    dimension: int = 2
    conformal_factor: Optional[ConformalFactorSpec] = None

    def __post_init__(self):
        if self.dimension < 2:
            raise SpecError(f"dimension must be >= 2, got {self.dimension}")
        if self.kind == SpaceFormKind.CUSTOM:
            if self.conformal_factor is None:
                raise SpecError("custom model requires a conformal factor")
            for exponents, _ in self.conformal_factor.monomials:
                if len(exponents) != self.dimension:
                    raise SpecError(
                        f"monomial {exponents} does not match dimension {self.dimension}"
                    )
        elif self.conformal_factor is not None:
            raise SpecError(f"{self.kind.value} model has a fixed conformal factor")

    @property
    def is_space_form(self) -> bool:
        return self.kind != SpaceFormKind.CUSTOM

    @property
    def curvature(self) -> Optional[float]:
        """空間形の断面曲率 K（カスタムは None）"""
        return _SPACE_FORM_CURVATURE.get(self.kind)

    @property
    def potential_curvature(self) -> float:
        """ポテンシャル V を作るときの K（カスタムは V = cosh r で K = -1）"""
        curvature = self.curvature
        return -1.0 if curvature is None else curvature

    @property
    def chart_radius(self) -> float:
        """チャート領域の半径"""
        if self.kind in (SpaceFormKind.HYPERBOLIC, SpaceFormKind.SPHERICAL):
            return 1.0
        return float("inf")


@dataclass
class MetricSample:
    """一点での計量データ"""

    point: np.ndarray
    conformal_factor: float  # λ
    g: np.ndarray
    g_inv: np.ndarray
    christoffels: np.ndarray  # [k, i, j] = Γ^k_ij
    vol_density: float  # λ^n


@dataclass
class PotentialSample:
    """
    一点でのポテンシャル V と基点からの距離

    gradV は ∇V のベクトル成分（添字を上げたもの）、
    hessV は共変Hessian ∇²V の成分
    """

    V: float
    gradV: np.ndarray
    hessV: np.ndarray
    r: float
    K: float


@dataclass(frozen=True)
class RadialProfile:
    """境界のチャート半径 ρ(θ)"""

    kind: ProfileKind = ProfileKind.FOURIER
    a0: float = 0.5
    cos_coefficients: Tuple[float, ...] = ()
    sin_coefficients: Tuple[float, ...] = ()
    semi_axes: Tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.kind == ProfileKind.FOURIER:
            if len(self.cos_coefficients) > MAX_FOURIER_MODE or len(
                self.sin_coefficients
            ) > MAX_FOURIER_MODE:
                raise SpecError(f"Fourier profile supports modes k <= {MAX_FOURIER_MODE}")
        elif min(self.semi_axes) <= 0.0:
            raise SpecError(f"ellipse semi-axes must be positive: {self.semi_axes}")

    def radius(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.kind == ProfileKind.ELLIPSE:
            a, b = self.semi_axes
            return a * b / np.sqrt((b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2)

        rho = np.full_like(theta, self.a0)
        for k, a_k in enumerate(self.cos_coefficients, start=1):
            rho = rho + a_k * np.cos(k * theta)
        for k, b_k in enumerate(self.sin_coefficients, start=1):
            rho = rho + b_k * np.sin(k * theta)
        return rho


@dataclass(frozen=True)
class StarDomainSpec:
    """基点（チャート原点）について星形な領域の指定"""

    profile: RadialProfile
    dimension: int = 2
    resolution_level: int = 0
    base_rings: int = 4  # レベル0の六角形リング数

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise SpecError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.resolution_level < 0:
            raise SpecError(f"resolution level must be >= 0, got {self.resolution_level}")
        if self.base_rings < 2:
            raise SpecError(f"base_rings must be >= 2, got {self.base_rings}")


@dataclass(frozen=True, eq=False)
class DomainMesh:
    """
    星形領域の三角形メッシュ

    境界頂点は反時計回りに並び、boundary_facets[k] = (b_k, b_{k+1})。
    reference_vertices は正六角形上の格子座標（境界は六角形ノルム 1）で、
    細分割はこの座標の中点で行う
    """

    vertices: np.ndarray  # (N, 2) チャート座標
    cells: np.ndarray  # (M, 3)
    boundary_facets: np.ndarray  # (Nb, 2)
    boundary_vertex_map: np.ndarray  # (N,) 境界インデックス、内部は -1
    h_max: float
    reference_vertices: np.ndarray
    boundary_vertices: np.ndarray  # (Nb,)
    boundary_angles: np.ndarray  # (Nb,)
    model: SpaceFormModel
    spec: StarDomainSpec
    level: int = 0
    edge_ratio: float = 1.0

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """メッシュ頂点上のスカラー場"""

    mesh: DomainMesh
    values: np.ndarray
    tag: FieldTag = FieldTag.CUSTOM

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_vertices,):
            raise UsageError(
                f"field has {values.shape} values, mesh has {self.mesh.n_vertices} vertices"
            )
        if not np.all(np.isfinite(values)):
            raise UsageError("field values must be finite")
        object.__setattr__(self, "values", values)

    def boundary_values(self) -> np.ndarray:
        return self.values[self.mesh.boundary_vertices]


@dataclass
class RecoveredDerivatives:
    """パッチ二次フィットで回復した頂点ごとの微分"""

    gradient: np.ndarray  # (N, n) チャート偏微分 ∂_k f
    hessian: np.ndarray  # (N, n, n) チャート二階偏微分
    covariant_hessian: np.ndarray  # (N, n, n) ∂_i∂_j f − Γ^k_ij ∂_k f
    patch_sizes: np.ndarray


@dataclass
class BoundaryGeometry:
    """
    境界頂点ごとの幾何量

    normal は計量で正規化された外向き単位法線 ν のチャート成分、
    tangent は反時計回りの単位接ベクトル。
    n=2 では第二基本形式は 1×1 で H = h_11
    """

    vertex_indices: np.ndarray
    points: np.ndarray
    angles: np.ndarray
    angle_step: float
    flat_normal: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    second_fundamental_form: np.ndarray  # (Nb, n-1, n-1)
    mean_curvature: np.ndarray
    support_function: np.ndarray  # カスタム計量で距離場がなければ NaN
    weights: np.ndarray  # dA
    conformal_factor: np.ndarray
    speed: np.ndarray  # 計量での |dx/dθ|
    speed_derivative: np.ndarray
    flat_curvature: np.ndarray


@dataclass
class QuadratureScheme:
    """セル（辺中点3点則）と境界（周期台形則）の求積点と重み"""

    cell_points: np.ndarray  # (M, 3, n)
    cell_flat_weights: np.ndarray  # (M, 3)
    cell_conformal_factor: np.ndarray  # (M, 3)
    cell_weights: np.ndarray  # (M, 3) 体積密度 λ^n 込み
    boundary_points: np.ndarray
    boundary_weights: np.ndarray
    boundary: BoundaryGeometry
    dimension: int = 2

    @property
    def n_cells(self) -> int:
        return self.cell_weights.shape[0]


@dataclass
class TangentialData:
    """境界頂点ごとの z, u と境界上の微分"""

    z: np.ndarray
    u: np.ndarray
    dz_ds: np.ndarray  # 弧長微分
    grad_z: np.ndarray  # ∇z のチャート成分
    grad_z_norm_sq: np.ndarray  # |∇z|²
    laplacian_z: np.ndarray  # Δz
    h_grad_z: np.ndarray  # h(∇z, ∇z)


@dataclass
class LaplaceBeltramiForms:
    """剛性・質量双線形形式と −Δ + c₀ 作用素"""

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    operator: sp.csr_matrix
    zeroth_order: float = 0.0
