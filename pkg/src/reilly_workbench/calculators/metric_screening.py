"""
カスタム共形計量のスクリーニング

基点からの測地距離（三角形上の fast marching と、それを初期値にした
測地線の shooting による精密化）と、Gauss曲率の下限チェックを提供する
"""

import heapq
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from src.reilly_workbench.calculators.discrete_operators import (
    cell_basis_gradients,
    gradient,
    metric_norm_squared,
    recovered_hessian,
    vertex_to_quadrature,
)
from src.reilly_workbench.calculators.space_form import SpaceFormCalculator, get_calculator
from src.reilly_workbench.errors import DomainError, UnsupportedConfigurationError
from src.reilly_workbench.models.geometry_models import DomainMesh, FieldTag, ScalarField
from src.reilly_workbench.models.report_models import CurvatureScreenResult, EikonalResult

logger = logging.getLogger(__name__)

# 基点からこの何倍の h_max 以内は事後チェックから除く
BASE_POINT_EXCLUSION = 3.0
# |∇²r|_g · h がこれを超える頂点をカットローカス候補とする
HESSIAN_BLOWUP = 1.0
DEFAULT_SCREEN_TOLERANCE = 1e-8
NEWTON_STEPS = 30

# 測地線 shooting の設定
SHOOTING_STEPS = 64
SHOOTING_ITERATIONS = 12
SHOOTING_TOLERANCE = 1e-11
ANGLE_INCREMENT = 1e-6
# fast marching の値とこの何倍の h_max 以上ずれた解は採用しない
SHOOTING_MISMATCH = 2.0


def _triangle_update(
    target: Tuple[float, float],
    a: Tuple[float, float],
    b: Tuple[float, float],
    u_a: float,
    u_b: float,
    speed: float,
    source_speed: float,
) -> float:
    """
    辺 AB 上の点からの到達時間の最小値（点源で因子分解した形）

    T = λ₀|x| + u とおき、u を辺上で線形補間して
    f(t) = λ₀|A + te| + (1−t)u_a + tu_b + F|C − A − te|（e = B − A）を
    t∈[0,1] で最小化する。f は凸なので f' の符号で区間を絞りながら Newton 法で解く
    """
    ex, ey = b[0] - a[0], b[1] - a[1]
    ee = ex * ex + ey * ey
    du = u_b - u_a

    def value(t: float) -> float:
        px, py = a[0] + t * ex, a[1] + t * ey
        return source_speed * math.hypot(px, py) + u_a + t * du + speed * math.hypot(target[0] - px, target[1] - py)

    def derivatives(t: float) -> Tuple[float, float]:
        px, py = a[0] + t * ex, a[1] + t * ey
        qx, qy = target[0] - px, target[1] - py
        p, q = math.hypot(px, py), math.hypot(qx, qy)
        pe, qe = px * ex + py * ey, qx * ex + qy * ey
        first = du - speed * qe / q
        second = speed * (ee * q * q - qe * qe) / q**3
        if p > 1e-300:
            first += source_speed * pe / p
            second += source_speed * (ee * p * p - pe * pe) / p**3
        else:
            first += source_speed * math.sqrt(ee)
        return first, second

    low, high = 0.0, 1.0
    if derivatives(low)[0] >= 0.0:
        return value(low)
    if derivatives(high)[0] <= 0.0:
        return value(high)
    t = 0.5
    for _ in range(NEWTON_STEPS):
        first, second = derivatives(t)
        if first > 0.0:
            high = t
        else:
            low = t
        step = t - first / second if second > 0.0 else -1.0
        moved = step if low < step < high else 0.5 * (low + high)
        if abs(moved - t) < 1e-13:
            t = moved
            break
        t = moved
    return min(value(t), value(0.0), value(1.0))


def _vertex_cells(mesh: DomainMesh) -> List[List[int]]:
    incidence: List[List[int]] = [[] for _ in range(mesh.n_vertices)]
    for c, cell in enumerate(mesh.cells.tolist()):
        for v in cell:
            incidence[v].append(c)
    return incidence


def _origin_vertex(mesh: DomainMesh) -> int:
    origin = int(np.argmin(np.linalg.norm(mesh.vertices, axis=1)))
    if float(np.linalg.norm(mesh.vertices[origin])) > 1e-12:
        raise DomainError("base point (chart origin) is not a mesh vertex")
    return origin


def fast_marching(mesh: DomainMesh) -> np.ndarray:
    """
    原点の頂点から計量 λ²δ での到達時間を計算する

    セル内の速度 F は重心での λ。三角形の更新は基点の λ₀ で T = λ₀|x| + u と
    因子分解して u を線形補間するので、点源付近の特異性で精度が落ちない

    Raises:
        DomainError: 原点がメッシュ頂点でない場合
    """
    origin = _origin_vertex(mesh)
    calculator = get_calculator(mesh.model)
    source_speed = float(calculator.conformal_factor(np.zeros((1, mesh.dimension)))[0])

    centroids = mesh.vertices[mesh.cells].mean(axis=1)
    speeds = calculator.conformal_factor(centroids).tolist()
    cells = mesh.cells.tolist()
    points = [tuple(p) for p in mesh.vertices.tolist()]
    planar = (source_speed * np.linalg.norm(mesh.vertices, axis=1)).tolist()
    incidence = _vertex_cells(mesh)

    times = np.full(mesh.n_vertices, np.inf)
    accepted = np.zeros(mesh.n_vertices, dtype=bool)
    times[origin] = 0.0
    heap: List[Tuple[float, int]] = [(0.0, origin)]

    while heap:
        t_v, v = heapq.heappop(heap)
        if accepted[v]:
            continue
        accepted[v] = True
        for c in incidence[v]:
            cell = cells[c]
            speed = speeds[c]
            for w in cell:
                if accepted[w]:
                    continue
                candidate = t_v + speed * math.hypot(points[w][0] - points[v][0], points[w][1] - points[v][1])
                for u in cell:
                    if u != v and u != w and accepted[u]:
                        candidate = min(
                            candidate,
                            _triangle_update(
                                points[w],
                                points[v],
                                points[u],
                                t_v - planar[v],
                                float(times[u]) - planar[u],
                                speed,
                                source_speed,
                            ),
                        )
                if candidate < times[w]:
                    times[w] = candidate
                    heapq.heappush(heap, (candidate, w))
    return times


def _distance_report(mesh: DomainMesh, times: np.ndarray, label: str) -> EikonalResult:
    """距離場 r の事後チェック（eikonal 残差とカットローカス候補）"""
    r = ScalarField(mesh, times, FieldTag.DISTANCE)

    areas, _ = cell_basis_gradients(mesh)
    centroids = mesh.vertices[mesh.cells].mean(axis=1)
    lam = get_calculator(mesh.model).conformal_factor(centroids)
    metric_norm = np.sqrt(metric_norm_squared(mesh, gradient(r), centroids))
    cell_r = times[mesh.cells].mean(axis=1)
    away = cell_r > BASE_POINT_EXCLUSION * mesh.h_max
    residual = np.abs(metric_norm - 1.0)[away]
    metric_area = (areas * lam**2)[away]
    max_residual = float(residual.max()) if residual.size else 0.0
    mean_residual = float(np.sum(residual * metric_area) / np.sum(metric_area)) if residual.size else 0.0

    derivatives = recovered_hessian(r)
    vertex_lam = get_calculator(mesh.model).conformal_factor(mesh.vertices)
    hessian_norm = np.linalg.norm(derivatives.covariant_hessian, axis=(1, 2)) / vertex_lam**2
    suspects = (hessian_norm * mesh.h_max > HESSIAN_BLOWUP) & (times > BASE_POINT_EXCLUSION * mesh.h_max)
    touched = suspects[mesh.cells].any(axis=1)
    excluded = float(np.sum((areas * lam**2)[touched]))
    if np.any(suspects):
        logger.warning(
            f"{int(np.count_nonzero(suspects))} cut-locus suspects, excluded measure {excluded:.3e}"
        )
    logger.info(f"{label}: max eikonal residual {max_residual:.3e}, mean {mean_residual:.3e}")
    return EikonalResult(
        field=r,
        max_eikonal_residual=max_residual,
        mean_eikonal_residual=mean_residual,
        cut_locus_suspects=suspects,
        excluded_measure=excluded,
    )


def eikonal_distance(mesh: DomainMesh) -> EikonalResult:
    """
    基点からの測地距離場 r（fast marching）と事後チェック

    基点近傍を除いたセルで ||∇r|_g − 1| の最大値と面積平均を報告し、
    回復Hessianが h に比べて大きい頂点をカットローカス候補とする
    """
    return _distance_report(mesh, fast_marching(mesh), "Eikonal distance")


def _geodesic_endpoints(
    calculator: SpaceFormCalculator, origin_scale: float, angle: np.ndarray, length: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    基点から方向角 angle・長さ length の測地線の終点と、終点での単位速度

    y(τ) = X(β, sτ) を τ∈[0,1] で y'' = −2(∇ψ·y')y' + |y'|²∇ψ として RK4 で積分する
    """

    def acceleration(x: np.ndarray, w: np.ndarray) -> np.ndarray:
        dpsi = calculator.log_gradient(x)
        along = np.einsum("ij,ij->i", dpsi, w)
        return -2.0 * along[:, None] * w + np.einsum("ij,ij->i", w, w)[:, None] * dpsi

    x = np.zeros((angle.size, 2))
    w = (length * origin_scale)[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    dt = 1.0 / SHOOTING_STEPS
    for _ in range(SHOOTING_STEPS):
        k1x, k1w = w, acceleration(x, w)
        k2x, k2w = w + 0.5 * dt * k1w, acceleration(x + 0.5 * dt * k1x, w + 0.5 * dt * k1w)
        k3x, k3w = w + 0.5 * dt * k2w, acceleration(x + 0.5 * dt * k2x, w + 0.5 * dt * k2w)
        k4x, k4w = w + dt * k3w, acceleration(x + dt * k3x, w + dt * k3w)
        x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        w = w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    return x, w / length[:, None]


def geodesic_distance(mesh: DomainMesh, initial: Optional[EikonalResult] = None) -> EikonalResult:
    """
    fast marching の距離を測地線の shooting で精密化する

    各頂点について、fast marching の値と頂点の偏角を初期値に、基点からの
    測地線の (方向角, 長さ) を減衰付き Newton 法で頂点に合わせる。
    ヤコビアンの長さ成分は終点の単位速度、角度成分は中心差分。
    収束しない頂点と fast marching から大きくずれた頂点は元の値のまま
    """
    if mesh.dimension != 2:
        raise UnsupportedConfigurationError("geodesic shooting is available for n=2 only")
    if initial is None:
        initial = eikonal_distance(mesh)
    origin = _origin_vertex(mesh)
    calculator = get_calculator(mesh.model)
    origin_scale = float(1.0 / calculator.conformal_factor(np.zeros((1, 2)))[0])

    times = initial.field.values.copy()
    targets_all = np.flatnonzero(np.arange(mesh.n_vertices) != origin)
    targets = mesh.vertices[targets_all]
    target_lam = calculator.conformal_factor(targets)
    angle = np.arctan2(targets[:, 1], targets[:, 0])
    length = times[targets_all].copy()

    converged = np.zeros(targets_all.size, dtype=bool)
    failed = np.zeros(targets_all.size, dtype=bool)
    for iteration in range(SHOOTING_ITERATIONS):
        active = np.flatnonzero(~converged & ~failed)
        if active.size == 0:
            break
        end, velocity = _geodesic_endpoints(calculator, origin_scale, angle[active], length[active])
        residual = end - targets[active]
        error = target_lam[active] * np.linalg.norm(residual, axis=1)
        bad = ~np.all(np.isfinite(end), axis=1) | ~np.all(np.isfinite(velocity), axis=1)
        failed[active[bad]] = True
        done = ~bad & (error < SHOOTING_TOLERANCE)
        converged[active[done]] = True
        step_ids = ~bad & ~done
        active, residual, velocity = active[step_ids], residual[step_ids], velocity[step_ids]
        if active.size == 0:
            break

        plus, _ = _geodesic_endpoints(calculator, origin_scale, angle[active] + ANGLE_INCREMENT, length[active])
        minus, _ = _geodesic_endpoints(calculator, origin_scale, angle[active] - ANGLE_INCREMENT, length[active])
        d_angle = (plus - minus) / (2.0 * ANGLE_INCREMENT)
        # [d_angle, velocity] の 2×2 系を頂点ごとに解く
        det = d_angle[:, 0] * velocity[:, 1] - d_angle[:, 1] * velocity[:, 0]
        singular = ~np.isfinite(det) | (np.abs(det) < 1e-14)
        failed[active[singular]] = True
        det = np.where(singular, 1.0, det)
        delta_angle = -(velocity[:, 1] * residual[:, 0] - velocity[:, 0] * residual[:, 1]) / det
        delta_length = -(-d_angle[:, 1] * residual[:, 0] + d_angle[:, 0] * residual[:, 1]) / det

        damping = np.minimum(
            1.0,
            np.minimum(
                0.25 / np.maximum(np.abs(delta_angle), 1e-300),
                0.5 * length[active] / np.maximum(np.abs(delta_length), 1e-300),
            ),
        )
        keep = ~singular
        angle[active[keep]] += (damping * delta_angle)[keep]
        length[active[keep]] += (damping * delta_length)[keep]
        logger.debug(
            f"Shooting iteration {iteration + 1}: {int(converged.sum())} converged, "
            f"{int(np.count_nonzero(~converged & ~failed))} active"
        )

    agrees = np.abs(length - times[targets_all]) <= SHOOTING_MISMATCH * mesh.h_max
    accepted = converged & agrees
    times[targets_all[accepted]] = length[accepted]
    rejected = targets_all.size - int(accepted.sum())
    if rejected:
        logger.warning(f"Geodesic shooting kept the fast-marching value at {rejected} vertices")
    return _distance_report(mesh, times, "Geodesic distance")


def potential_field_from_distance(distance: EikonalResult) -> ScalarField:
    """V = cosh r"""
    return ScalarField(distance.field.mesh, np.cosh(distance.field.values), FieldTag.POTENTIAL)


def curvature_screen(
    mesh: DomainMesh, bound: float = -1.0, tolerance: float = DEFAULT_SCREEN_TOLERANCE
) -> CurvatureScreenResult:
    """
    求積点と頂点での Gauss曲率の最小値が bound − tolerance 以上か調べる

    Raises:
        UnsupportedConfigurationError: n != 2 の場合
    """
    if mesh.model.dimension != 2:
        raise UnsupportedConfigurationError("curvature screen is available for n=2 only")
    calculator = get_calculator(mesh.model)
    samples = np.concatenate(
        [mesh.vertices, vertex_to_quadrature(mesh, mesh.vertices).reshape(-1, 2)]
    )
    minimum = float(calculator.gauss_curvature(samples).min())
    passed = minimum >= bound - tolerance
    if not passed:
        logger.warning(f"Curvature screen failed: min curvature {minimum:.6g} < bound {bound}")
    return CurvatureScreenResult(minimum=minimum, bound=bound, tolerance=tolerance, passed=passed)
