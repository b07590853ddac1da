"""
Reilly Workbench - コマンドラインエントリポイント

使い方:
    python -m src.reilly_workbench.main run --config scenarios.json --out reports/
    python -m src.reilly_workbench.main list-scenarios --suite hk
    python -m src.reilly_workbench.main convergence --levels 1..4 --suite hk

終了コード: 0 成功 / 2 設定・使い方の誤り / 3 期待と異なる判定 / 4 数値計算の失敗
"""

import logging
import re
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import click

from src.reilly_workbench import __version__
from src.reilly_workbench.calculators.scenario_runner import resolve_seed, run_scenarios
from src.reilly_workbench.errors import UsageError, WorkbenchError
from src.reilly_workbench.schemas.scenario import MAX_LEVEL, ScenarioConfig, SuiteEnum
from src.reilly_workbench.utils.report_writer import write_report, write_timings
from src.reilly_workbench.utils.scenario_loader import (
    get_scenario_registry,
    load_scenario_file,
    parse_suite,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERDICT = 3
EXIT_NUMERICAL = 4

_LEVEL_RANGE = re.compile(r"^\s*(\d+)\s*(?:\.\.\s*(\d+))?\s*$")


def parse_levels(text: str) -> List[int]:
    """
    "a..b" または "a" を細分割レベルの列にする

    Raises:
        UsageError: 形式が不正、または範囲外の場合
    """
    match = _LEVEL_RANGE.match(text)
    if not match:
        raise UsageError(f"--levels expects 'a..b' or 'a', got '{text}'")
    start = int(match.group(1))
    stop = int(match.group(2)) if match.group(2) is not None else start
    if stop < start or stop > MAX_LEVEL:
        raise UsageError(f"--levels must satisfy 0 <= a <= b <= {MAX_LEVEL}, got '{text}'")
    return list(range(start, stop + 1))


def _collect(
    config: Optional[Path], suite: Optional[str], names: Tuple[str, ...]
) -> Tuple[List[ScenarioConfig], Optional[int], Optional[SuiteEnum]]:
    """設定ファイル（省略時は同梱シナリオ）からシナリオを選ぶ"""
    if config is not None:
        scenario_file = load_scenario_file(config)
        scenarios, file_seed = list(scenario_file.scenarios), scenario_file.seed
    else:
        registry = get_scenario_registry()
        scenarios, file_seed = [registry.get(n) for n in registry.names()], registry.seed

    if names:
        known = {s.name for s in scenarios}
        unknown = sorted(set(names) - known)
        if unknown:
            raise UsageError(f"unknown scenario(s): {', '.join(unknown)}")
        scenarios = [s for s in scenarios if s.name in names]

    wanted = None
    if suite is not None:
        wanted = parse_suite(suite)
        if wanted != SuiteEnum.ALL:
            scenarios = [s for s in scenarios if wanted in s.suites]
        else:
            wanted = None
    if not scenarios:
        raise UsageError("no scenario matches the selection")
    return scenarios, file_seed, wanted


def execute(
    config: Optional[Path],
    out: Path,
    suite: Optional[str],
    levels: Optional[str],
    seed: Optional[int],
    jobs: int,
    names: Tuple[str, ...] = (),
) -> int:
    """run / convergence の本体。終了コードを返す"""
    try:
        scenarios, file_seed, wanted = _collect(config, suite, names)
        level_list = parse_levels(levels) if levels is not None else None
        seeds = [resolve_seed(s, override=seed, file_seed=file_seed) for s in scenarios]
    except WorkbenchError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_CONFIG

    if jobs < 1:
        click.echo("error: --jobs must be >= 1", err=True)
        return EXIT_CONFIG

    logger.info(f"Running {len(scenarios)} scenario(s) with {jobs} job(s)")
    reports = run_scenarios(scenarios, seeds, jobs=jobs, levels=level_list, suite=wanted)

    for report in reports:
        write_report(report, out)
        for result in report.suites:
            status = "ok" if result.matches_expectation else "FAIL"
            click.echo(
                f"{report.name:40s} {result.suite:16s} {result.outcome.value:22s} "
                f"expected={result.expected:22s} {status}"
            )
    write_timings(reports, out)

    failing = [r.name for r in reports if not r.passed]
    broken = [r.name for r in reports if r.configuration_failure]
    if broken:
        click.echo(f"configuration error in: {', '.join(broken)}", err=True)
        return EXIT_CONFIG
    if any(r.numerical_failure for r in reports):
        click.echo(f"numerical failure in: {', '.join(failing)}", err=True)
        return EXIT_NUMERICAL
    if failing:
        click.echo(f"verdict mismatch in: {', '.join(failing)}", err=True)
        return EXIT_VERDICT
    return EXIT_OK


_config_option = click.option(
    "--config", "config", type=click.Path(path_type=Path), default=None,
    help="Scenario file (JSON). Defaults to the built-in golden scenarios.",
)
_suite_option = click.option("--suite", default=None, help="Run only this suite.")
_seed_option = click.option("--seed", type=int, default=None, help="Seed for randomized fields.")
_jobs_option = click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes.")
_out_option = click.option(
    "--out", "out", type=click.Path(file_okay=False, path_type=Path), default=Path("reports"),
    show_default=True, help="Output directory.",
)
_scenario_option = click.option(
    "--scenario", "names", multiple=True, help="Run only the named scenario (repeatable)."
)


@click.group()
@click.version_option(__version__, prog_name="reilly-workbench")
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def cli(verbose: bool) -> None:
    """Numerical verification of Reilly-type identities and Heintze-Karcher inequalities."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO)


@cli.command()
@_config_option
@_out_option
@_suite_option
@click.option("--levels", default=None, help="Refinement levels 'a..b' overriding the scenarios.")
@_seed_option
@_jobs_option
@_scenario_option
@click.pass_context
def run(ctx, config, out, suite, levels, seed, jobs, names) -> None:
    """Run scenarios and write reports."""
    ctx.exit(execute(config, out, suite, levels, seed, jobs, names))


@cli.command()
@_config_option
@_out_option
@_suite_option
@click.option("--levels", default="1..4", show_default=True, help="Refinement levels 'a..b'.")
@_seed_option
@_jobs_option
@_scenario_option
@click.pass_context
def convergence(ctx, config, out, suite, levels, seed, jobs, names) -> None:
    """Run scenarios over a level sweep (run with --levels)."""
    ctx.exit(execute(config, out, suite, levels, seed, jobs, names))


@cli.command("list-scenarios")
@_config_option
@_suite_option
@click.pass_context
def list_scenarios(ctx, config, suite) -> None:
    """List scenario names with their suites and claims."""
    try:
        scenarios, _, _ = _collect(config, suite, ())
    except WorkbenchError as e:
        click.echo(f"error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
        return
    for scenario in sorted(scenarios, key=lambda s: s.name):
        suites = ",".join(s.value for s in scenario.suites)
        click.echo(f"{scenario.name:40s} {suites:28s} {scenario.claim}")


def main() -> None:
    cli(standalone_mode=True)


if __name__ == "__main__":
    sys.exit(main())
