"""
空間形・共形計量の幾何カーネル

計量 g = λ²δ（ψ = ln λ）について、Christoffel記号・測地距離・ポテンシャル V
とその解析的な微分を与える。空間形は閉形式、カスタム共形因子は sympy で
記号微分してから numpy 関数に変換する
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np
import sympy
from scipy.linalg import eigh

from src.reilly_workbench.errors import (
    DomainError,
    MissingPrerequisiteError,
    SingularityError,
    SpecError,
    UnsupportedConfigurationError,
)
from src.reilly_workbench.models.geometry_models import (
    ConformalFactorSpec,
    MetricSample,
    PotentialSample,
    SpaceFormKind,
    SpaceFormModel,
)

logger = logging.getLogger(__name__)

# チャート境界からこの距離以内の点は領域外とみなす
CHART_MARGIN = 1e-12


@dataclass
class PotentialBatch:
    """点列上のポテンシャル V とその微分"""

    V: np.ndarray
    differential: np.ndarray  # ∂_k V
    hessian: np.ndarray  # 共変Hessian
    laplacian: np.ndarray
    r: np.ndarray


@dataclass
class _CompiledFactor:
    psi: Callable
    gradient: List[Callable]
    hessian: List[List[Callable]]


@lru_cache(maxsize=32)
def compile_conformal_factor(spec: ConformalFactorSpec, dimension: int) -> _CompiledFactor:
    """
    カスタム共形因子 φ を記号微分して numpy 関数に変換

    Raises:
        SpecError: 式が解釈できない、または未知の変数を含む場合
    """
    symbols = sympy.symbols(f"x1:{dimension + 1}")
    if spec.expression is not None:
        try:
            expr = sympy.sympify(spec.expression, locals={s.name: s for s in symbols})
        except (sympy.SympifyError, SyntaxError, TypeError) as e:
            raise SpecError(f"cannot parse conformal factor '{spec.expression}': {e}")
        unknown = expr.free_symbols - set(symbols)
        if unknown:
            names = ", ".join(sorted(s.name for s in unknown))
            raise SpecError(f"conformal factor uses unknown variables: {names}")
    else:
        expr = sympy.Integer(0)
        for exponents, coefficient in spec.monomials:
            term = sympy.Float(coefficient)
            for symbol, exponent in zip(symbols, exponents):
                term = term * symbol**exponent
            expr = expr + term

    logger.debug(f"Compiling conformal factor phi = {expr}")
    grad = [sympy.diff(expr, s) for s in symbols]
    hess = [[sympy.diff(expr, a, b) for b in symbols] for a in symbols]
    return _CompiledFactor(
        psi=sympy.lambdify(symbols, expr, modules="numpy"),
        gradient=[sympy.lambdify(symbols, d, modules="numpy") for d in grad],
        hessian=[[sympy.lambdify(symbols, d, modules="numpy") for d in row] for row in hess],
    )


def _evaluate(func: Callable, points: np.ndarray) -> np.ndarray:
    # 定数式は lambdify がスカラーを返すので点数に合わせて広げる
    value = np.asarray(func(*points.T), dtype=float)
    return np.broadcast_to(value, points.shape[:-1]).copy()


class SpaceFormCalculator:
    """
    背景幾何の計算クラス

    すべてのメソッドは (N, n) の点列を受け取りベクトル化して評価する
    """

    def __init__(self, model: SpaceFormModel):
        self.model = model
        self.dimension = model.dimension
        self._compiled: Optional[_CompiledFactor] = None
        if model.kind == SpaceFormKind.CUSTOM:
            self._compiled = compile_conformal_factor(model.conformal_factor, model.dimension)

    def validate_points(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[-1] != self.dimension:
            raise DomainError(
                f"points have {points.shape[-1]} coordinates, model dimension is {self.dimension}"
            )
        if np.isfinite(self.model.chart_radius):
            radii = np.linalg.norm(points, axis=-1)
            worst = float(radii.max()) if radii.size else 0.0
            if worst >= self.model.chart_radius - CHART_MARGIN:
                raise DomainError(
                    f"chart point at radius {worst:.6g} lies outside the "
                    f"{self.model.kind.value} chart ball of radius {self.model.chart_radius:g}",
                    radius=worst,
                )
        return points

    def log_factor(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        ψ = ln λ とそのチャート一階・二階偏微分

        Returns:
            (ψ, ∂ψ, ∂∂ψ) 形状は (N,), (N, n), (N, n, n)
        """
        points = self.validate_points(points)
        n = self.dimension
        identity = np.eye(n)

        if self._compiled is not None:
            psi = _evaluate(self._compiled.psi, points)
            dpsi = np.stack([_evaluate(f, points) for f in self._compiled.gradient], axis=-1)
            ddpsi = np.stack(
                [np.stack([_evaluate(f, points) for f in row], axis=-1) for row in self._compiled.hessian],
                axis=-2,
            )
            if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(dpsi))):
                raise DomainError("custom conformal factor is not finite on the sampled points")
            return psi, dpsi, ddpsi

        K = self.model.curvature
        if K == 0.0:
            zeros = np.zeros(points.shape[0])
            return zeros, np.zeros_like(points), np.zeros((points.shape[0], n, n))

        denom = 1.0 + K * np.einsum("...i,...i->...", points, points)
        psi = np.log(2.0) - np.log(denom)
        dpsi = -2.0 * K * points / denom[:, None]
        ddpsi = (
            -2.0 * K * identity[None, :, :] / denom[:, None, None]
            + 4.0 * K**2 * np.einsum("...i,...j->...ij", points, points) / denom[:, None, None] ** 2
        )
        return psi, dpsi, ddpsi

    def log_gradient(self, points: np.ndarray) -> np.ndarray:
        """
        ∂ψ をチャート範囲のチェックなしで評価する

        測地線の積分用。特異点やチャート外では NaN・inf を返しうる
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        with np.errstate(all="ignore"):
            if self._compiled is not None:
                return np.stack([_evaluate(f, points) for f in self._compiled.gradient], axis=-1)
            K = self.model.curvature
            denom = 1.0 + K * np.einsum("...i,...i->...", points, points)
            return -2.0 * K * points / denom[:, None]

    def conformal_factor(self, points: np.ndarray) -> np.ndarray:
        psi, _, _ = self.log_factor(points)
        return np.exp(psi)

    def christoffel_symbols(self, points: np.ndarray) -> np.ndarray:
        """Γ^k_ij = δ_ik ∂_jψ + δ_jk ∂_iψ − δ_ij ∂_kψ を [..., k, i, j] で返す"""
        _, dpsi, _ = self.log_factor(points)
        return christoffel_from_log_gradient(dpsi)

    def covariant_hessian(
        self, points: np.ndarray, differential: np.ndarray, hessian: np.ndarray
    ) -> np.ndarray:
        """チャート二階偏微分を共変Hessianに補正"""
        gamma = self.christoffel_symbols(points)
        return hessian - np.einsum("...kij,...k->...ij", gamma, differential)

    def distance(self, points: np.ndarray) -> np.ndarray:
        """基点（原点）からの測地距離（空間形のみ）"""
        points = self.validate_points(points)
        rho = np.linalg.norm(points, axis=-1)
        if self.model.kind == SpaceFormKind.HYPERBOLIC:
            return 2.0 * np.arctanh(rho)
        if self.model.kind == SpaceFormKind.SPHERICAL:
            return 2.0 * np.arctan(rho)
        if self.model.kind == SpaceFormKind.EUCLIDEAN:
            return rho
        raise MissingPrerequisiteError(
            "custom metrics need a precomputed distance field (see eikonal_distance)"
        )

    def potential(self, points: np.ndarray) -> PotentialBatch:
        """
        空間形のポテンシャル V = (1 − K|x|²)/(1 + K|x|²)

        双曲で cosh r、球面で cos r、ユークリッドで 1 に一致する
        """
        if not self.model.is_space_form:
            raise MissingPrerequisiteError(
                "custom metrics need a precomputed distance field (see eikonal_distance)"
            )
        points = self.validate_points(points)
        n = self.dimension
        K = self.model.curvature
        q = np.einsum("...i,...i->...", points, points)
        denom = 1.0 + K * q

        V = (1.0 - K * q) / denom
        differential = -4.0 * K * points / denom[:, None] ** 2
        chart_hessian = (
            -4.0 * K * np.eye(n)[None, :, :] / denom[:, None, None] ** 2
            + 16.0 * K**2 * np.einsum("...i,...j->...ij", points, points) / denom[:, None, None] ** 3
        )
        hessian = self.covariant_hessian(points, differential, chart_hessian)
        lam = self.conformal_factor(points)
        laplacian = np.trace(hessian, axis1=-2, axis2=-1) / lam**2
        return PotentialBatch(
            V=V,
            differential=differential,
            hessian=hessian,
            laplacian=laplacian,
            r=self.distance(points),
        )

    def gauss_curvature(self, points: np.ndarray) -> np.ndarray:
        """2次元共形計量のGauss曲率 −λ⁻²·Δ_flat ln λ"""
        if self.dimension != 2:
            raise UnsupportedConfigurationError(
                f"Gauss curvature is defined for n=2 only, got n={self.dimension}"
            )
        psi, _, ddpsi = self.log_factor(points)
        return -np.exp(-2.0 * psi) * np.trace(ddpsi, axis1=-2, axis2=-1)

    def ricci_factor(self, points: np.ndarray) -> np.ndarray:
        """Ric = ρ·g となる係数 ρ"""
        points = self.validate_points(points)
        if self.model.is_space_form:
            return np.full(points.shape[0], (self.dimension - 1) * self.model.curvature)
        if self.dimension != 2:
            raise UnsupportedConfigurationError(
                "Ricci tensor of custom metrics is only available for n=2"
            )
        return self.gauss_curvature(points)


def christoffel_from_log_gradient(dpsi: np.ndarray) -> np.ndarray:
    n = dpsi.shape[-1]
    identity = np.eye(n)
    return (
        np.einsum("ki,...j->...kij", identity, dpsi)
        + np.einsum("kj,...i->...kij", identity, dpsi)
        - np.einsum("ij,...k->...kij", identity, dpsi)
    )


# カスタム共形因子を空間形と照合する標本点（半径 0.45 以内）
_MATCH_RADII = (0.05, 0.15, 0.25, 0.35, 0.45)
_MATCH_ANGLES = 7
MATCH_TOLERANCE = 1e-10


@lru_cache(maxsize=32)
def matching_space_form(model: SpaceFormModel) -> Optional[SpaceFormModel]:
    """
    カスタム共形因子が空間形の因子と一致すれば、その空間形モデルを返す

    標本点で ψ とその勾配を比べる。空間形自身はそのまま返す。
    一致すれば閉形式の距離を参照解に使える
    """
    if model.is_space_form:
        return model
    if model.dimension != 2:
        return None
    angles = 2.0 * np.pi * np.arange(_MATCH_ANGLES) / _MATCH_ANGLES
    samples = np.array([(r * np.cos(a), r * np.sin(a)) for r in _MATCH_RADII for a in angles])
    try:
        psi, dpsi, _ = get_calculator(model).log_factor(samples)
    except DomainError:
        return None
    for kind in (SpaceFormKind.HYPERBOLIC, SpaceFormKind.SPHERICAL, SpaceFormKind.EUCLIDEAN):
        candidate = SpaceFormModel(kind=kind, dimension=model.dimension)
        ref_psi, ref_dpsi, _ = get_calculator(candidate).log_factor(samples)
        if np.max(np.abs(psi - ref_psi)) <= MATCH_TOLERANCE and np.max(np.abs(dpsi - ref_dpsi)) <= MATCH_TOLERANCE:
            logger.info(f"Custom conformal factor matches the {kind.value} space form")
            return candidate
    return None


@lru_cache(maxsize=32)
def get_calculator(model: SpaceFormModel) -> SpaceFormCalculator:
    """モデルごとの計算インスタンスを取得（sympy のコンパイル結果を共有）"""
    return SpaceFormCalculator(model)


def metric_at(model: SpaceFormModel, x) -> MetricSample:
    """
    一点での計量・逆計量・Christoffel記号・体積密度

    Raises:
        DomainError: 点がチャート領域外の場合
    """
    calculator = get_calculator(model)
    point = np.asarray(x, dtype=float).reshape(1, -1)
    psi, dpsi, _ = calculator.log_factor(point)
    lam = float(np.exp(psi[0]))
    n = model.dimension
    return MetricSample(
        point=point[0].copy(),
        conformal_factor=lam,
        g=lam**2 * np.eye(n),
        g_inv=np.eye(n) / lam**2,
        christoffels=christoffel_from_log_gradient(dpsi)[0],
        vol_density=lam**n,
    )


def distance_and_potential(model: SpaceFormModel, x, distance=None) -> PotentialSample:
    """
    基点からの距離 r とポテンシャル V（∇V, ∇²V 付き）

    カスタム計量では eikonal_distance の結果を distance に渡す。
    その場合は最近傍頂点での回復微分を返す

    Raises:
        MissingPrerequisiteError: カスタム計量で距離場がない場合
    """
    point = np.asarray(x, dtype=float).reshape(1, -1)
    calculator = get_calculator(model)

    if model.is_space_form:
        batch = calculator.potential(point)
        lam = calculator.conformal_factor(point)[0]
        return PotentialSample(
            V=float(batch.V[0]),
            gradV=batch.differential[0] / lam**2,
            hessV=batch.hessian[0],
            r=float(batch.r[0]),
            K=float(model.curvature),
        )

    if distance is None:
        raise MissingPrerequisiteError(
            "custom metric potential requires a distance field from eikonal_distance"
        )
    # 循環importを避けるため遅延import
    from src.reilly_workbench.calculators.metric_screening import potential_field_from_distance
    from src.reilly_workbench.calculators.discrete_operators import recovered_hessian

    mesh = distance.field.mesh
    calculator.validate_points(point)
    vertex = int(np.argmin(np.linalg.norm(mesh.vertices - point[0], axis=1)))
    potential = potential_field_from_distance(distance)
    derivatives = recovered_hessian(potential)
    lam = calculator.conformal_factor(mesh.vertices[vertex : vertex + 1])[0]
    return PotentialSample(
        V=float(potential.values[vertex]),
        gradV=derivatives.gradient[vertex] / lam**2,
        hessV=derivatives.covariant_hessian[vertex],
        r=float(distance.field.values[vertex]),
        K=model.potential_curvature,
    )


def _cn_over_sn(kind: SpaceFormKind, r: float) -> float:
    if kind == SpaceFormKind.HYPERBOLIC:
        return 1.0 / np.tanh(r)
    if kind == SpaceFormKind.SPHERICAL:
        return 1.0 / np.tan(r)
    return 1.0 / r


def hessian_comparison_residual(model: SpaceFormModel, x) -> float:
    """
    ∇²r − (cn_K(r)/sn_K(r))(g − dr⊗dr) の絶対値最大の固有値（g に関する一般化固有値）

    空間形では比較定理が等号で成り立つので、丸め誤差の診断量になる

    Raises:
        UnsupportedConfigurationError: カスタム計量の場合
        SingularityError: 基点で評価した場合
    """
    if not model.is_space_form:
        raise UnsupportedConfigurationError("Hessian comparison residual needs a space form")
    calculator = get_calculator(model)
    point = calculator.validate_points(np.asarray(x, dtype=float).reshape(1, -1))
    rho = float(np.linalg.norm(point[0]))
    if rho < 1e-12:
        raise SingularityError("Hessian comparison is singular at the base point (r = 0)")

    n = model.dimension
    K = model.curvature
    unit = point[0] / rho
    lam = float(calculator.conformal_factor(point)[0])
    lam_prime = -K * rho * lam**2
    r = float(calculator.distance(point)[0])

    radial = np.outer(unit, unit)
    dr = lam * unit
    chart_hessian = lam_prime * radial + lam * (np.eye(n) - radial) / rho
    hessian = calculator.covariant_hessian(point, dr[None, :], chart_hessian[None, :, :])[0]

    g = lam**2 * np.eye(n)
    comparison = hessian - _cn_over_sn(model.kind, r) * (g - np.outer(dr, dr))
    eigenvalues = eigh(comparison, g, eigvals_only=True)
    return float(np.max(np.abs(eigenvalues)))
