#!/usr/bin/env python3
"""
Reilly Workbench FastMCP Server

Reilly型恒等式・Heintze-Karcher型不等式の数値検証を
FastMCPを使用してModel Context Protocol (MCP) ツールとして提供します。

提供ツール:
- list_scenarios: 同梱シナリオの一覧
- run_scenario: 同梱シナリオの実行
- geodesic_ball_check: 測地球一つでのHK・Minkowskiの数値
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from mcp.server.fastmcp import FastMCP

from src.reilly_workbench.calculators.inequality_verifier import heintze_karcher, minkowski_check
from src.reilly_workbench.calculators.mesh_builder import geodesic_ball_profile, mesh_levels
from src.reilly_workbench.calculators.scenario_runner import resolve_seed, run_scenario as run_one
from src.reilly_workbench.models.geometry_models import SpaceFormKind, SpaceFormModel, StarDomainSpec
from src.reilly_workbench.schemas.scenario import MAX_LEVEL
from src.reilly_workbench.utils.report_writer import json_safe
from src.reilly_workbench.utils.scenario_loader import get_scenario_registry

# ログ設定
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger("reilly-workbench-fastmcp")

# FastMCPサーバー作成
mcp = FastMCP("reilly-workbench")


@dataclass
class ScenarioListing:
    """シナリオ一覧"""

    names: List[str]
    total: int
    suite: Optional[str]


@dataclass
class ScenarioRunSummary:
    """シナリオ実行結果の要約"""

    name: str
    passed: bool
    outcomes: Dict[str, str]
    config_hash: str
    report: Dict[str, Any]


@dataclass
class GeodesicBallCheck:
    """測地球でのHK型不等式とMinkowski公式の数値"""

    kind: str
    radius: float
    level: int
    h_max: float
    hk_lhs: float
    hk_closed_form: float
    hk_reference_rhs: float
    hk_relative_gap: float
    minkowski_first_discrepancy: float
    minkowski_second_discrepancy: float


def _ball_lhs(kind: SpaceFormKind, radius: float) -> float:
    """∫_M V/H dA の閉形式（n=2）"""
    if kind == SpaceFormKind.HYPERBOLIC:
        return 2.0 * math.pi * math.sinh(radius) ** 2
    if kind == SpaceFormKind.SPHERICAL:
        return 2.0 * math.pi * math.sin(radius) ** 2
    return 2.0 * math.pi * radius**2


@mcp.tool()
def list_scenarios(suite: Optional[str] = None) -> ScenarioListing:
    """
    同梱のゴールデンシナリオ名を返します

    Args:
        suite: このスイートを含むシナリオだけに絞る（reilly, hk, brendle, minkowski,
            alexandrov, rigidity, screening, classical_reilly）

    Returns:
        ScenarioListing: シナリオ名の一覧
    """
    try:
        names = get_scenario_registry().names(suite)
        return ScenarioListing(names=names, total=len(names), suite=suite)
    except Exception as e:
        logger.error(f"Scenario listing error: {e}")
        raise ValueError(f"シナリオ一覧の取得中にエラーが発生しました: {str(e)}")


@mcp.tool()
def run_scenario(name: str, levels: Optional[List[int]] = None, seed: Optional[int] = None) -> ScenarioRunSummary:
    """
    同梱シナリオを一つ実行します

    Args:
        name: シナリオ名（list_scenarios で確認）
        levels: 細分割レベルの上書き（例: [1, 2, 3]）
        seed: random 場のシードの上書き

    Returns:
        ScenarioRunSummary: スイートごとの結果とレポート本体
    """
    try:
        registry = get_scenario_registry()
        scenario = registry.get(name)
        resolved = resolve_seed(scenario, override=seed, file_seed=registry.seed)
        report = run_one(scenario, seed=resolved, levels=levels)
        return ScenarioRunSummary(
            name=report.name,
            passed=report.passed,
            outcomes={s.suite: s.outcome.value for s in report.suites},
            config_hash=report.config_hash,
            report=json_safe(report.model_dump(mode="python", exclude={"timings"})),
        )
    except Exception as e:
        logger.error(f"Scenario run error: {e}")
        raise ValueError(f"シナリオ実行中にエラーが発生しました: {str(e)}")


@mcp.tool()
def geodesic_ball_check(kind: str, radius: float, level: int = 2) -> GeodesicBallCheck:
    """
    空間形の測地球（n=2）でHK型不等式の左辺・ギャップとMinkowski公式の不一致を計算します

    Args:
        kind: euclidean / hyperbolic / spherical
        radius: 測地半径 R（球面では R < π/2）
        level: 細分割レベル

    Returns:
        GeodesicBallCheck: 数値と閉形式 2π·sinh²R（双曲）/ 2π·sin²R（球面）/ 2πR²
    """
    try:
        space_form = SpaceFormKind(kind)
        if space_form == SpaceFormKind.CUSTOM:
            raise ValueError("custom モデルは対象外です")
        if not (0 <= level <= MAX_LEVEL):
            raise ValueError(f"level は0~{MAX_LEVEL}の範囲である必要があります")
        model = SpaceFormModel(kind=space_form, dimension=2)
        spec = StarDomainSpec(profile=geodesic_ball_profile(model, radius), dimension=2)
        mesh = next(mesh_levels(spec, model, [level]))

        hk = heintze_karcher(mesh)
        minkowski = minkowski_check(mesh)
        return GeodesicBallCheck(
            kind=space_form.value,
            radius=radius,
            level=level,
            h_max=float(mesh.h_max),
            hk_lhs=hk.lhs,
            hk_closed_form=_ball_lhs(space_form, radius),
            hk_reference_rhs=hk.reference_rhs,
            hk_relative_gap=hk.relative_gap,
            minkowski_first_discrepancy=minkowski.first_discrepancy,
            minkowski_second_discrepancy=minkowski.second_discrepancy,
        )
    except Exception as e:
        logger.error(f"Geodesic ball check error: {e}")
        raise ValueError(f"測地球の検証中にエラーが発生しました: {str(e)}")


if __name__ == "__main__":
    import sys

    print("Starting Reilly Workbench MCP Server...", file=sys.stderr)
    print(f"Working directory: {os.getcwd()}", file=sys.stderr)

    try:
        mcp.run()
    except Exception as e:
        print(f"Error starting MCP server: {e}", file=sys.stderr)
        import traceback

        traceback.print_exc(file=sys.stderr)
        sys.exit(1)
