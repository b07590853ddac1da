"""
計量付き離散微分作用素

P1有限要素の剛性・質量形式、パッチ二次フィットによる勾配・Hessian回復、
セル（辺中点3点則）と境界（周期台形則）の求積、境界の法線・曲率・
支持関数、境界上の接方向微分を提供する
"""

import logging
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from src.reilly_workbench.calculators.mesh_builder import cell_edges
from src.reilly_workbench.calculators.space_form import get_calculator
from src.reilly_workbench.errors import GeometryError, RecoveryError, UsageError
from src.reilly_workbench.models.geometry_models import (
    BoundaryGeometry,
    DomainMesh,
    LaplaceBeltramiForms,
    QuadratureScheme,
    RecoveredDerivatives,
    Region,
    ScalarField,
    SpaceFormKind,
    SpaceFormModel,
    TangentialData,
)

logger = logging.getLogger(__name__)

# 辺中点 (0,1), (1,2), (2,0) での P1 基底関数の値 [q, a]
EDGE_MIDPOINT_BASIS = np.array(
    [
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ]
)

# 二次フィットの未知数（勾配2 + Hessian3）
QUADRATIC_FIT_UNKNOWNS = 5
PATCH_CONDITION_LIMIT = 1e-12
BOUNDARY_SPACING_TOLERANCE = 1e-9


def _model_of(mesh: DomainMesh, model: Optional[SpaceFormModel]) -> SpaceFormModel:
    if model is None:
        return mesh.model
    if model != mesh.model:
        raise UsageError("model does not match the model the mesh was built for")
    return model


@lru_cache(maxsize=16)
def cell_basis_gradients(mesh: DomainMesh) -> Tuple[np.ndarray, np.ndarray]:
    """セル面積 (M,) と P1 基底の平坦勾配 (M, 3, 2)"""
    p = mesh.vertices[mesh.cells]
    jacobian = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    areas = 0.5 * np.abs(np.linalg.det(jacobian))
    inverse = np.linalg.inv(jacobian)
    grads = np.empty((mesh.n_cells, 3, 2))
    grads[:, 1] = inverse[:, 0, :]
    grads[:, 2] = inverse[:, 1, :]
    grads[:, 0] = -(grads[:, 1] + grads[:, 2])
    return areas, grads


def vertex_to_quadrature(mesh: DomainMesh, values: np.ndarray) -> np.ndarray:
    """頂点データをセルの求積点（辺中点）へ線形補間する"""
    return np.einsum("qa,ma...->mq...", EDGE_MIDPOINT_BASIS, values[mesh.cells])


@lru_cache(maxsize=16)
def _cell_quadrature(mesh: DomainMesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    areas, _ = cell_basis_gradients(mesh)
    points = vertex_to_quadrature(mesh, mesh.vertices)
    lam = get_calculator(mesh.model).conformal_factor(points.reshape(-1, mesh.dimension))
    flat_weights = np.repeat(areas[:, None] / 3.0, 3, axis=1)
    return points, flat_weights, lam.reshape(mesh.n_cells, 3)


def gradient(field: ScalarField) -> np.ndarray:
    """
    セルごとの計量勾配ベクトル g⁻¹·(平坦勾配)

    λ はセル重心で評価する。チャートで一次の場に対して厳密
    """
    mesh = field.mesh
    _, grads = cell_basis_gradients(mesh)
    flat = np.einsum("mad,ma->md", grads, field.values[mesh.cells])
    centroids = mesh.vertices[mesh.cells].mean(axis=1)
    lam = get_calculator(mesh.model).conformal_factor(centroids)
    return flat / lam[:, None] ** 2


def metric_norm_squared(mesh: DomainMesh, vectors: np.ndarray, points: np.ndarray) -> np.ndarray:
    """g(X, X) = λ²|X|²"""
    lam = get_calculator(mesh.model).conformal_factor(points)
    return lam**2 * np.einsum("...i,...i->...", vectors, vectors)


def patch_least_squares_operator(
    points: np.ndarray, indices: np.ndarray, mask: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    頂点パッチ上の二次最小二乗フィットの作用素

    f(x_j) − f(x_i) ≈ a·ξ + ½b₁₁ξ₁² + b₁₂ξ₁ξ₂ + ½b₂₂ξ₂²（ξ = (x_j − x_i)/s_i）

    Args:
        points: 頂点座標 (N, 2)
        indices: パッチの頂点番号 (N, P)、パディングは自分自身
        mask: 有効なパッチ要素 (N, P)

    Returns:
        (operator, scale): 係数 = operator @ 差分値 となる (N, 5, P) 行列と
        各パッチの長さスケール (N,)

    Raises:
        RecoveryError: パッチが小さすぎる、または退化している場合
    """
    counts = mask.sum(axis=1)
    if np.any(counts < QUADRATIC_FIT_UNKNOWNS):
        worst = int(np.argmin(counts))
        raise RecoveryError(
            f"vertex {worst} has {int(counts[worst])} patch neighbours, "
            f"quadratic recovery needs {QUADRATIC_FIT_UNKNOWNS}"
        )
    offsets = (points[indices] - points[:, None, :]) * mask[..., None]
    scale = np.sqrt(np.einsum("npd,npd->n", offsets, offsets) / counts)
    xi = offsets / scale[:, None, None]
    design = np.stack(
        [
            xi[..., 0],
            xi[..., 1],
            0.5 * xi[..., 0] ** 2,
            xi[..., 0] * xi[..., 1],
            0.5 * xi[..., 1] ** 2,
        ],
        axis=-1,
    ) * mask[..., None]

    normal = np.einsum("npi,npj->nij", design, design)
    eigenvalues = np.linalg.eigvalsh(normal)
    conditioning = eigenvalues[:, 0] / eigenvalues[:, -1]
    if np.any(conditioning < PATCH_CONDITION_LIMIT):
        worst = int(np.argmin(conditioning))
        raise RecoveryError(f"vertex {worst} has a rank-deficient recovery patch")
    operator = np.linalg.solve(normal, np.swapaxes(design, 1, 2))
    return operator, scale


@lru_cache(maxsize=16)
def _vertex_patches(mesh: DomainMesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """2-ringパッチとその最小二乗作用素"""
    edges, _, _ = cell_edges(mesh.cells)
    n = mesh.n_vertices
    ones = np.ones(edges.shape[0])
    adjacency = sp.coo_matrix((ones, (edges[:, 0], edges[:, 1])), shape=(n, n)).tocsr()
    adjacency = adjacency + adjacency.T
    two_ring = (adjacency + adjacency @ adjacency).tocsr()
    two_ring = two_ring - sp.diags(two_ring.diagonal())
    two_ring.eliminate_zeros()
    two_ring.sort_indices()

    counts = np.diff(two_ring.indptr)
    width = int(counts.max())
    mask = np.arange(width)[None, :] < counts[:, None]
    indices = np.repeat(np.arange(n)[:, None], width, axis=1)
    indices[mask] = two_ring.indices
    operator, scale = patch_least_squares_operator(mesh.vertices, indices, mask)
    logger.debug(f"Recovery patches: {n} vertices, patch size {counts.min()}..{width}")
    return indices, mask, operator, scale


def recovered_hessian(field: ScalarField, model: Optional[SpaceFormModel] = None) -> RecoveredDerivatives:
    """
    頂点ごとの勾配・Hessianをパッチ二次フィットで回復し、共変補正する

    (∇²f)_ij = ∂_i∂_j f − Γ^k_ij ∂_k f
    """
    mesh = field.mesh
    model = _model_of(mesh, model)
    indices, mask, operator, scale = _vertex_patches(mesh)
    differences = (field.values[indices] - field.values[:, None]) * mask
    coefficients = np.einsum("nip,np->ni", operator, differences)

    grad = coefficients[:, :2] / scale[:, None]
    hess = np.empty((mesh.n_vertices, 2, 2))
    hess[:, 0, 0] = coefficients[:, 2]
    hess[:, 0, 1] = hess[:, 1, 0] = coefficients[:, 3]
    hess[:, 1, 1] = coefficients[:, 4]
    hess /= scale[:, None, None] ** 2

    covariant = get_calculator(model).covariant_hessian(mesh.vertices, grad, hess)
    return RecoveredDerivatives(
        gradient=grad,
        hessian=hess,
        covariant_hessian=covariant,
        patch_sizes=mask.sum(axis=1),
    )


def assemble_laplace_beltrami(
    mesh: DomainMesh, model: Optional[SpaceFormModel] = None, zeroth_order: float = 0.0
) -> LaplaceBeltramiForms:
    """
    剛性 ∫λ^{n−2}∇φ_i·∇φ_j dx、質量 ∫λⁿφ_iφ_j dx と −Δ + c₀ の弱形式

    質量は辺中点3点則（2次まで厳密）で積分する
    """
    model = _model_of(mesh, model)
    n = model.dimension
    areas, grads = cell_basis_gradients(mesh)
    _, flat_weights, lam = _cell_quadrature(mesh)

    stiffness_weight = areas * np.mean(lam ** (n - 2), axis=1)
    local_stiffness = stiffness_weight[:, None, None] * np.einsum("mad,mbd->mab", grads, grads)
    local_mass = np.einsum(
        "mq,qa,qb->mab", flat_weights * lam**n, EDGE_MIDPOINT_BASIS, EDGE_MIDPOINT_BASIS
    )

    rows = np.repeat(mesh.cells[:, :, None], 3, axis=2).ravel()
    cols = np.repeat(mesh.cells[:, None, :], 3, axis=1).ravel()
    shape = (mesh.n_vertices, mesh.n_vertices)
    stiffness = sp.coo_matrix((local_stiffness.ravel(), (rows, cols)), shape=shape).tocsr()
    mass = sp.coo_matrix((local_mass.ravel(), (rows, cols)), shape=shape).tocsr()
    return LaplaceBeltramiForms(
        stiffness=stiffness,
        mass=mass,
        operator=(stiffness + zeroth_order * mass).tocsr(),
        zeroth_order=float(zeroth_order),
    )


def periodic_derivative(values: np.ndarray, step: float) -> np.ndarray:
    """周期データの4次中心差分による一階微分（先頭軸）"""
    return (
        -np.roll(values, -2, axis=0)
        + 8.0 * np.roll(values, -1, axis=0)
        - 8.0 * np.roll(values, 1, axis=0)
        + np.roll(values, 2, axis=0)
    ) / (12.0 * step)


def periodic_second_derivative(values: np.ndarray, step: float) -> np.ndarray:
    """周期データの4次中心差分による二階微分（先頭軸）"""
    return (
        -np.roll(values, -2, axis=0)
        + 16.0 * np.roll(values, -1, axis=0)
        - 30.0 * values
        + 16.0 * np.roll(values, 1, axis=0)
        - np.roll(values, 2, axis=0)
    ) / (12.0 * step**2)


def _sn(kind: SpaceFormKind, r: np.ndarray) -> np.ndarray:
    if kind == SpaceFormKind.HYPERBOLIC:
        return np.sinh(r)
    if kind == SpaceFormKind.SPHERICAL:
        return np.sin(r)
    return r


def boundary_geometry(
    mesh: DomainMesh, model: Optional[SpaceFormModel] = None, distance=None
) -> BoundaryGeometry:
    """
    境界頂点ごとの法線・第二基本形式・平均曲率・支持関数・境界測度

    境界曲線を角度 θ で周期的に差分し、平坦曲率 κ を共形変換する:
    H = (κ + ∂_N ln λ)/λ。カスタム計量の支持関数は distance
    （eikonal_distance の結果）があるときだけ計算し、なければ NaN

    Raises:
        GeometryError: 接ベクトルが消える、または境界角が等間隔でない場合
    """
    model = _model_of(mesh, model)
    calculator = get_calculator(model)
    indices = mesh.boundary_vertices
    count = indices.size
    if count < 5:
        raise GeometryError(f"boundary has {count} vertices, at least 5 are required")

    step = 2.0 * np.pi / count
    angles = mesh.boundary_angles
    expected = angles[0] + step * np.arange(count)
    if np.max(np.abs(angles - expected)) > BOUNDARY_SPACING_TOLERANCE:
        raise GeometryError("boundary vertices are not uniformly spaced in angle")

    points = mesh.vertices[indices]
    first = periodic_derivative(points, step)
    second = periodic_second_derivative(points, step)
    flat_speed = np.linalg.norm(first, axis=1)
    if float(flat_speed.min()) <= 1e-14 * max(1.0, float(flat_speed.max())):
        raise GeometryError("boundary tangent vanishes (degenerate facet)")

    flat_curvature = (first[:, 0] * second[:, 1] - first[:, 1] * second[:, 0]) / flat_speed**3
    flat_tangent = first / flat_speed[:, None]
    flat_normal = np.stack([flat_tangent[:, 1], -flat_tangent[:, 0]], axis=1)

    psi, dpsi, _ = calculator.log_factor(points)
    lam = np.exp(psi)
    normal_log_derivative = np.einsum("ij,ij->i", dpsi, flat_normal)
    mean_curvature = (flat_curvature + normal_log_derivative) / lam

    speed = lam * flat_speed
    speed_derivative = lam * (
        np.einsum("ij,ij->i", dpsi, first) * flat_speed
        + np.einsum("ij,ij->i", first, second) / flat_speed
    )

    if model.is_space_form:
        r = calculator.distance(points)
        radial = points / np.linalg.norm(points, axis=1)[:, None]
        support = _sn(model.kind, r) * np.einsum("ij,ij->i", radial, flat_normal)
    elif distance is not None:
        r_field = distance.field
        r_derivatives = recovered_hessian(r_field)
        normal_derivative = np.einsum("ij,ij->i", r_derivatives.gradient[indices], flat_normal) / lam
        support = np.sinh(r_field.values[indices]) * normal_derivative
    else:
        support = np.full(count, np.nan)

    return BoundaryGeometry(
        vertex_indices=indices,
        points=points,
        angles=angles,
        angle_step=step,
        flat_normal=flat_normal,
        normal=flat_normal / lam[:, None],
        tangent=flat_tangent / lam[:, None],
        second_fundamental_form=mean_curvature[:, None, None],
        mean_curvature=mean_curvature,
        support_function=support,
        weights=speed * step,
        conformal_factor=lam,
        speed=speed,
        speed_derivative=speed_derivative,
        flat_curvature=flat_curvature,
    )


@lru_cache(maxsize=16)
def _cached_boundary_geometry(mesh: DomainMesh) -> BoundaryGeometry:
    return boundary_geometry(mesh)


def build_quadrature(mesh: DomainMesh, bg: Optional[BoundaryGeometry] = None) -> QuadratureScheme:
    """セルと境界の求積スキームを組み立てる"""
    if bg is None:
        bg = _cached_boundary_geometry(mesh)
    points, flat_weights, lam = _cell_quadrature(mesh)
    return QuadratureScheme(
        cell_points=points,
        cell_flat_weights=flat_weights,
        cell_conformal_factor=lam,
        cell_weights=flat_weights * lam**mesh.dimension,
        boundary_points=bg.points,
        boundary_weights=bg.weights,
        boundary=bg,
        dimension=mesh.dimension,
    )


def boundary_tangential_ops(
    field: ScalarField,
    bg: BoundaryGeometry,
    derivatives: Optional[RecoveredDerivatives] = None,
) -> TangentialData:
    """
    境界上の z = f|_M, u = ∇_ν f と弧長微分による ∇z, Δz, h(∇z,∇z)

    u は境界頂点の2-ringパッチ（片側）の二次フィットから求める
    """
    if derivatives is None:
        derivatives = recovered_hessian(field)
    z = field.values[bg.vertex_indices]
    u = np.einsum("ij,ij->i", derivatives.gradient[bg.vertex_indices], bg.normal)

    z_theta = periodic_derivative(z, bg.angle_step)
    z_theta_theta = periodic_second_derivative(z, bg.angle_step)
    dz_ds = z_theta / bg.speed
    laplacian = (z_theta_theta - z_theta * bg.speed_derivative / bg.speed) / bg.speed**2
    return TangentialData(
        z=z,
        u=u,
        dz_ds=dz_ds,
        grad_z=dz_ds[:, None] * bg.tangent,
        grad_z_norm_sq=dz_ds**2,
        laplacian_z=laplacian,
        h_grad_z=bg.mean_curvature * dz_ds**2,
    )


def integrate(scheme: QuadratureScheme, integrand: np.ndarray, region: Union[Region, str]) -> float:
    """
    求積点上の値の重み付き和

    Raises:
        UsageError: 値の形状が領域の求積点と合わない場合
    """
    try:
        region = Region(region)
    except ValueError:
        raise UsageError(f"unknown integration region '{region}'")
    weights = scheme.cell_weights if region == Region.CELLS else scheme.boundary_weights
    integrand = np.asarray(integrand, dtype=float)
    if integrand.shape != weights.shape:
        raise UsageError(
            f"integrand shape {integrand.shape} does not match {region.value} "
            f"quadrature shape {weights.shape}"
        )
    return float(np.sum(integrand * weights))
