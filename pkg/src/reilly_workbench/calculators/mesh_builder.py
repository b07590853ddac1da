"""
星形領域のメッシュ生成・細分割

正六角形上の三角格子（リング k に 6k 頂点）を参照メッシュとし、
格子座標を滑らかな写像で単位円板の座標 ŷ へ、さらにチャート座標
x = ρ(θ(ŷ))·ŷ へ写す。細分割は格子座標で各三角形を中点で4分割するので、
細分割後も格子は一様なまま境界頂点は単位円上の等角度点になる
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence, Tuple, Union

import numpy as np

from src.reilly_workbench.calculators.space_form import get_calculator
from src.reilly_workbench.errors import (
    DomainError,
    GeometryError,
    SpecError,
    UnsupportedConfigurationError,
)
from src.reilly_workbench.models.geometry_models import (
    DomainMesh,
    ProfileKind,
    RadialProfile,
    SpaceFormKind,
    SpaceFormModel,
    StarDomainSpec,
)

logger = logging.getLogger(__name__)

PROFILE_SAMPLES = 4096
MAX_EDGE_RATIO = 8.0
MESH_DUMP_HEADER = "# reilly-workbench mesh dump 1"

HEX_CORNERS = np.array([[np.cos(k * np.pi / 3.0), np.sin(k * np.pi / 3.0)] for k in range(6)])
HEX_SIDE_NORMALS = np.array(
    [[np.cos((k + 0.5) * np.pi / 3.0), np.sin((k + 0.5) * np.pi / 3.0)] for k in range(6)]
)
HEX_APOTHEM = float(np.cos(np.pi / 6.0))
# 六角形ノルムでこの範囲の帯で恒等写像から円板への写像へ切り替える
BLEND_START = 0.35
BLEND_END = 0.85


def geodesic_ball_profile(model: SpaceFormModel, geodesic_radius: float) -> RadialProfile:
    """基点中心・測地半径 R の球のチャート半径を持つプロファイル"""
    if geodesic_radius <= 0.0:
        raise SpecError(f"geodesic radius must be positive, got {geodesic_radius}")
    if model.kind == SpaceFormKind.HYPERBOLIC:
        chart_radius = float(np.tanh(geodesic_radius / 2.0))
    elif model.kind == SpaceFormKind.SPHERICAL:
        if geodesic_radius >= np.pi / 2.0:
            raise DomainError(
                f"geodesic radius {geodesic_radius} reaches the hemisphere boundary",
                radius=geodesic_radius,
            )
        chart_radius = float(np.tan(geodesic_radius / 2.0))
    elif model.kind == SpaceFormKind.EUCLIDEAN:
        chart_radius = float(geodesic_radius)
    else:
        raise UnsupportedConfigurationError("geodesic balls need a space form model")
    return RadialProfile(kind=ProfileKind.FOURIER, a0=chart_radius)


def _check_profile(profile: RadialProfile, model: SpaceFormModel) -> None:
    theta = np.linspace(0.0, 2.0 * np.pi, PROFILE_SAMPLES, endpoint=False)
    rho = profile.radius(theta)
    if float(rho.min()) <= 0.0:
        raise SpecError(
            f"radial profile is not positive (min rho = {float(rho.min()):.6g})"
        )
    if float(rho.max()) >= model.chart_radius:
        raise DomainError(
            f"radial profile reaches radius {float(rho.max()):.6g}, outside the "
            f"{model.kind.value} chart of radius {model.chart_radius:g}",
            radius=float(rho.max()),
        )


def _hexagonal_lattice(rings: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    外接半径 1 の正六角形上の三角格子（6N² セル）

    リング k は六角形の相似形で 6k 頂点を持つ。隣接リングの間は
    辺上の位置の小さい方を進めて三角形で埋め、これが格子の三角形分割と一致する
    """
    points: List[Tuple[float, float]] = [(0.0, 0.0)]
    ring_indices: List[List[int]] = [[0]]
    for k in range(1, rings + 1):
        start = len(points)
        for side in range(6):
            corner, following = HEX_CORNERS[side], HEX_CORNERS[(side + 1) % 6]
            for s in range(k):
                points.append(tuple(k / rings * ((1.0 - s / k) * corner + s / k * following)))
        ring_indices.append(list(range(start, start + 6 * k)))

    cells: List[Tuple[int, int, int]] = []
    for k in range(1, rings + 1):
        outer = ring_indices[k]
        if k == 1:
            cells.extend((0, outer[j], outer[(j + 1) % 6]) for j in range(6))
            continue
        inner = ring_indices[k - 1]
        n_in, n_out = len(inner), len(outer)
        i = j = 0
        # (i+1)/n_in <= (j+1)/n_out を整数で比べる
        while i < n_in or j < n_out:
            if j >= n_out or (i < n_in and (i + 1) * n_out <= (j + 1) * n_in):
                cells.append((inner[i % n_in], outer[j % n_out], inner[(i + 1) % n_in]))
                i += 1
            else:
                cells.append((inner[i % n_in], outer[j % n_out], outer[(j + 1) % n_out]))
                j += 1
    return np.array(points, dtype=float), np.array(cells, dtype=np.int64)


def hexagon_norm(lattice: np.ndarray) -> np.ndarray:
    """六角形ノルム（正六角形の境界で 1）"""
    return np.max(lattice @ HEX_SIDE_NORMALS.T, axis=1) / HEX_APOTHEM


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


def reference_disk_coordinates(lattice: np.ndarray) -> np.ndarray:
    """
    六角形格子の座標を単位円板へ写す

    外側の帯では六角形ノルムを半径に、辺上の位置を一様な角度に写し、
    六角形の境界は単位円上の等角度点になる。中心付近は恒等写像で、
    その間は5次の smoothstep で混ぜる。写像は各扇形（格子の三角形を
    またがない）の中で滑らか
    """
    t = hexagon_norm(lattice)
    radius = np.linalg.norm(lattice, axis=1)
    alpha = np.arctan2(lattice[:, 1], lattice[:, 0])

    side = np.argmax(lattice @ HEX_SIDE_NORMALS.T, axis=1)
    scaled = lattice / np.maximum(t, 1e-300)[:, None]
    corner = HEX_CORNERS[side]
    along = np.einsum("ij,ij->i", scaled - corner, HEX_CORNERS[(side + 1) % 6] - corner)
    uniform = (side + np.clip(along, 0.0, 1.0)) * np.pi / 3.0

    w = _smoothstep((t - BLEND_START) / (BLEND_END - BLEND_START))
    turn = np.angle(np.exp(1j * (uniform - alpha)))
    mapped_radius = (1.0 - w) * radius + w * t
    mapped_angle = alpha + w * turn
    return np.stack([mapped_radius * np.cos(mapped_angle), mapped_radius * np.sin(mapped_angle)], axis=1)


def _star_map(reference: np.ndarray, profile: RadialProfile) -> np.ndarray:
    theta = np.arctan2(reference[:, 1], reference[:, 0])
    return reference * profile.radius(theta)[:, None]


def _signed_areas(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (vertices[cells[:, k]] for k in range(3))
    e1, e2 = p1 - p0, p2 - p0
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def cell_edges(cells: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    セルの辺を一意化する

    Returns:
        (edges, cell_edge_ids, counts): edges は (E, 2) の昇順頂点対、
        cell_edge_ids[c] は辺 (0,1), (1,2), (2,0) の番号
    """
    local = cells[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    local = np.sort(local, axis=1)
    edges, inverse, counts = np.unique(local, axis=0, return_inverse=True, return_counts=True)
    return edges, inverse.reshape(-1, 3), counts


def _assemble(
    lattice: np.ndarray,
    cells: np.ndarray,
    spec: StarDomainSpec,
    model: SpaceFormModel,
    level: int,
) -> DomainMesh:
    disk = reference_disk_coordinates(lattice)
    vertices = _star_map(disk, spec.profile)
    calculator = get_calculator(model)
    calculator.validate_points(vertices)

    areas = _signed_areas(vertices, cells)
    flipped = areas < 0.0
    if np.any(flipped):
        cells = cells.copy()
        cells[flipped] = cells[flipped][:, [0, 2, 1]]
        areas = np.abs(areas)
    if float(areas.min()) <= 0.0:
        raise GeometryError("mesh contains a cell with non-positive area")

    edges, cell_edge_ids, counts = cell_edges(cells)

    # 境界頂点は格子座標で六角形の辺上にある
    boundary_vertices = np.flatnonzero(hexagon_norm(lattice) > 1.0 - 1e-9)
    # 角度 0 の頂点が丸め誤差で 2π 側へ回らないよう半ステップずらして折り返す
    half_step = np.pi / max(boundary_vertices.size, 1)
    raw = np.arctan2(disk[boundary_vertices, 1], disk[boundary_vertices, 0])
    angles = np.mod(raw + half_step, 2.0 * np.pi) - half_step
    order = np.argsort(angles, kind="stable")
    boundary_vertices = boundary_vertices[order]
    boundary_angles = angles[order]
    boundary_facets = np.stack([boundary_vertices, np.roll(boundary_vertices, -1)], axis=1)

    facet_keys = np.sort(boundary_facets, axis=1)
    boundary_edges = edges[counts == 1]
    if np.any(counts > 2) or not np.array_equal(
        np.unique(facet_keys, axis=0), boundary_edges
    ):
        raise GeometryError("boundary facets do not form a single closed loop")

    boundary_vertex_map = np.full(vertices.shape[0], -1, dtype=np.int64)
    boundary_vertex_map[boundary_vertices] = np.arange(boundary_vertices.size)

    _check_outward_orientation(vertices, cells, cell_edge_ids, edges, counts, boundary_facets)

    midpoints = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    lengths = calculator.conformal_factor(midpoints) * np.linalg.norm(
        vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1
    )
    edge_ratio = float(lengths.max() / lengths.min())
    if edge_ratio > MAX_EDGE_RATIO:
        logger.warning(f"Mesh level {level} edge ratio {edge_ratio:.2f} exceeds {MAX_EDGE_RATIO}")

    for array in (vertices, cells, boundary_facets, boundary_vertex_map, lattice, boundary_vertices, boundary_angles):
        array.setflags(write=False)

    logger.debug(
        f"Mesh level {level}: {vertices.shape[0]} vertices, {cells.shape[0]} cells, "
        f"{boundary_vertices.size} boundary vertices, h_max={lengths.max():.4g}"
    )
    return DomainMesh(
        vertices=vertices,
        cells=cells,
        boundary_facets=boundary_facets,
        boundary_vertex_map=boundary_vertex_map,
        h_max=float(lengths.max()),
        reference_vertices=lattice,
        boundary_vertices=boundary_vertices,
        boundary_angles=boundary_angles,
        model=model,
        spec=spec,
        level=level,
        edge_ratio=edge_ratio,
    )


def _check_outward_orientation(
    vertices: np.ndarray,
    cells: np.ndarray,
    cell_edge_ids: np.ndarray,
    edges: np.ndarray,
    counts: np.ndarray,
    boundary_facets: np.ndarray,
) -> None:
    owner = np.full(edges.shape[0], -1, dtype=np.int64)
    flat_ids = cell_edge_ids.ravel()
    owner[flat_ids] = np.repeat(np.arange(cells.shape[0]), 3)

    keys = np.sort(boundary_facets, axis=1)
    # edges は辞書順に並んでいるので二分探索で辺番号を引く
    edge_keys = edges[:, 0] * vertices.shape[0] + edges[:, 1]
    facet_ids = np.searchsorted(edge_keys, keys[:, 0] * vertices.shape[0] + keys[:, 1])
    cell_ids = owner[facet_ids]

    tangent = vertices[boundary_facets[:, 1]] - vertices[boundary_facets[:, 0]]
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
    facet_centroid = 0.5 * (vertices[boundary_facets[:, 0]] + vertices[boundary_facets[:, 1]])
    cell_centroid = vertices[cells[cell_ids]].mean(axis=1)
    if np.any(np.einsum("ij,ij->i", normal, facet_centroid - cell_centroid) <= 0.0):
        raise GeometryError("boundary facet normals are not outward")


def build_mesh(spec: StarDomainSpec, model: SpaceFormModel) -> DomainMesh:
    """
    星形領域のメッシュを生成

    Raises:
        UnsupportedConfigurationError: n=3 の場合
        DomainError: プロファイルがチャート半径を超える場合
        SpecError: ρ が正でない場合
    """
    if spec.dimension != model.dimension:
        raise SpecError(
            f"domain dimension {spec.dimension} does not match model dimension {model.dimension}"
        )
    if spec.dimension != 2:
        raise UnsupportedConfigurationError("only n=2 meshes are built by this workbench")
    _check_profile(spec.profile, model)

    lattice, cells = _hexagonal_lattice(spec.base_rings)
    mesh = _assemble(lattice, cells, spec, model, level=0)
    for _ in range(spec.resolution_level):
        mesh = refine(mesh)
    logger.info(
        f"Built {model.kind.value} mesh level {mesh.level}: {mesh.n_cells} cells, h_max={mesh.h_max:.4g}"
    )
    return mesh


def refine(mesh: DomainMesh) -> DomainMesh:
    """各セルを格子座標の辺中点で4分割する（境界の中点も六角形の辺上に残る）"""
    lattice = mesh.reference_vertices
    cells = mesh.cells
    edges, cell_edge_ids, _ = cell_edges(cells)
    midpoints = 0.5 * (lattice[edges[:, 0]] + lattice[edges[:, 1]])

    offset = lattice.shape[0]
    m01, m12, m20 = (offset + cell_edge_ids[:, k] for k in range(3))
    a, b, c = cells[:, 0], cells[:, 1], cells[:, 2]
    new_cells = np.concatenate(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([m01, b, m12], axis=1),
            np.stack([m20, m12, c], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    new_lattice = np.concatenate([lattice, midpoints])
    return _assemble(new_lattice, new_cells, mesh.spec, mesh.model, level=mesh.level + 1)


def mesh_levels(spec: StarDomainSpec, model: SpaceFormModel, levels: Sequence[int]) -> Iterator[DomainMesh]:
    """指定レベルのメッシュを昇順に順次細分割しながら返す"""
    wanted = sorted(set(levels))
    base = StarDomainSpec(
        profile=spec.profile,
        dimension=spec.dimension,
        resolution_level=wanted[0],
        base_rings=spec.base_rings,
    )
    mesh = build_mesh(base, model)
    for level in wanted:
        while mesh.level < level:
            mesh = refine(mesh)
        yield mesh


@dataclass
class MeshDump:
    """メッシュダンプの読み込み結果"""

    dimension: int
    level: int
    model_kind: str
    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: np.ndarray


def write_mesh_dump(mesh: DomainMesh, path: Union[str, Path]) -> Path:
    """頂点表・セル表・境界ファセット表のテキストダンプを書き出す"""
    path = Path(path)
    lines = [
        MESH_DUMP_HEADER,
        f"dimension {mesh.dimension}",
        f"level {mesh.level}",
        f"model {mesh.model.kind.value}",
        f"vertices {mesh.n_vertices}",
    ]
    lines.extend(f"{i} " + " ".join(f"{c:.17g}" for c in row) for i, row in enumerate(mesh.vertices))
    lines.append(f"cells {mesh.n_cells}")
    lines.extend(" ".join(str(int(v)) for v in row) for row in mesh.cells)
    lines.append(f"boundary_facets {mesh.boundary_facets.shape[0]}")
    lines.extend(" ".join(str(int(v)) for v in row) for row in mesh.boundary_facets)
    lines.append("end")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_mesh_dump(path: Union[str, Path]) -> MeshDump:
    """write_mesh_dump の出力を読み込む"""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != MESH_DUMP_HEADER:
        raise GeometryError(f"{path}: missing mesh dump header")

    header = {}
    cursor = 1
    while not lines[cursor].startswith("vertices"):
        key, value = lines[cursor].split(maxsplit=1)
        header[key] = value
        cursor += 1

    def block(name: str, dtype) -> np.ndarray:
        nonlocal cursor
        key, count = lines[cursor].split()
        if key != name:
            raise GeometryError(f"{path}: expected block '{name}', found '{key}'")
        rows = [line.split() for line in lines[cursor + 1 : cursor + 1 + int(count)]]
        cursor += 1 + int(count)
        return np.array(rows, dtype=dtype)

    vertices = block("vertices", float)[:, 1:]
    cells = block("cells", np.int64)
    facets = block("boundary_facets", np.int64)
    return MeshDump(
        dimension=int(header["dimension"]),
        level=int(header["level"]),
        model_kind=header["model"],
        vertices=vertices,
        cells=cells,
        boundary_facets=facets,
    )
