"""
シナリオ実行エンジン

シナリオ一つにつき、指定レベルのメッシュを昇順に作り、各スイートを
レベルごとに評価して RunReport にまとめる。ソルバーの解と距離場は
レベル単位でキャッシュし、スイート間で共有する
"""

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.reilly_workbench import __version__
from src.reilly_workbench.calculators.convergence import (
    inequality_verdict,
    observed_orders,
    order_gate_applies,
    order_satisfied,
    richardson_extrapolate,
    vanishing_verdict,
)
from src.reilly_workbench.calculators.elliptic_solver import (
    boundary_value_problem,
    interior_problem,
    poisson_problem,
    solve_dirichlet,
)
from src.reilly_workbench.calculators.identity_verifier import (
    classical_reilly_residual,
    reilly_residual,
)
from src.reilly_workbench.calculators.inequality_verifier import (
    InequalityVerifier,
    brendle_spherical,
)
from src.reilly_workbench.calculators.mesh_builder import mesh_levels
from src.reilly_workbench.calculators.metric_screening import (
    BASE_POINT_EXCLUSION,
    curvature_screen,
    eikonal_distance,
    geodesic_distance,
    potential_field_from_distance,
)
from src.reilly_workbench.calculators.space_form import get_calculator, matching_space_form
from src.reilly_workbench.errors import (
    ConfigurationError,
    IndefiniteSystemError,
    UnsupportedConfigurationError,
    WorkbenchError,
)
from src.reilly_workbench.models.geometry_models import DomainMesh, FieldTag, ScalarField
from src.reilly_workbench.models.report_models import EikonalResult, SuiteOutcome, Verdict
from src.reilly_workbench.models.solver_models import SolveReport
from src.reilly_workbench.schemas.reports import (
    ErrorBlock,
    ExtrapolationResult,
    LevelRow,
    RunReport,
    SuiteResult,
)
from src.reilly_workbench.schemas.scenario import (
    FieldSourceEnum,
    FieldSpecConfig,
    MonomialTerm,
    ScenarioConfig,
    SuiteEnum,
)

logger = logging.getLogger(__name__)


def outcome_matches(expected: str, outcome: SuiteOutcome) -> bool:
    """期待結果（equality / strict / inequality または結果名）と一致するか"""
    if expected == "equality":
        return outcome == SuiteOutcome.HOLDS
    if expected == "inequality":
        return outcome in (SuiteOutcome.HOLDS, SuiteOutcome.STRICT)
    return outcome.value == expected


def random_monomials(degree: int, rng: np.random.Generator) -> List[MonomialTerm]:
    """次数 degree 以下の2変数単項式に [-1, 1) の一様乱数係数を付ける"""
    exponents = [(i, total - i) for total in range(degree + 1) for i in range(total, -1, -1)]
    coefficients = rng.uniform(-1.0, 1.0, size=len(exponents))
    return [
        MonomialTerm(exponents=list(e), coefficient=float(c)) for e, c in zip(exponents, coefficients)
    ]


def polynomial_field(mesh: DomainMesh, monomials: Sequence[MonomialTerm], tag: FieldTag) -> ScalarField:
    values = np.zeros(mesh.n_vertices)
    for term in monomials:
        values += term.coefficient * np.prod(mesh.vertices ** np.asarray(term.exponents), axis=1)
    return ScalarField(mesh, values, tag)


def config_hash(scenario: ScenarioConfig) -> str:
    canonical = json.dumps(scenario.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def resolve_seed(
    scenario: ScenarioConfig, override: Optional[int] = None, file_seed: Optional[int] = None
) -> Optional[int]:
    """
    --seed > シナリオの seed > ファイル共通の seed の順に採用する

    Raises:
        ConfigurationError: random 場を使うのにシードがない場合
    """
    for candidate in (override, scenario.seed, file_seed):
        if candidate is not None:
            return int(candidate)
    if scenario.fields.is_random:
        raise ConfigurationError(
            "randomized fields need an explicit seed (config 'seed' or --seed)",
            location=f"scenarios.{scenario.name}.seed",
        )
    return None


@dataclass
class LevelContext:
    """一つの細分割レベルで共有する計算結果"""

    mesh: DomainMesh
    solver_tolerance: float
    definiteness_margin: float
    _solves: Dict[Tuple[str, float], SolveReport] = field(default_factory=dict)
    _distance: Optional[EikonalResult] = None
    _geodesic: Optional[EikonalResult] = None

    def solve(self, source: FieldSourceEnum, c: float = 1.0) -> SolveReport:
        key = (source.value, float(c))
        if key not in self._solves:
            options = dict(tolerance=self.solver_tolerance, definiteness_margin=self.definiteness_margin)
            if source == FieldSourceEnum.INTERIOR:
                problem = interior_problem(self.mesh, **options)
            elif source == FieldSourceEnum.BOUNDARY_VALUE:
                problem = boundary_value_problem(self.mesh, c=c, **options)
            else:
                problem = poisson_problem(self.mesh, **options)
            self._solves[key] = solve_dirichlet(problem)
        return self._solves[key]

    def distance(self) -> EikonalResult:
        if self._distance is None:
            self._distance = eikonal_distance(self.mesh)
        return self._distance

    def geodesic(self) -> EikonalResult:
        """fast marching を測地線の shooting で精密化した距離場"""
        if self._geodesic is None:
            self._geodesic = geodesic_distance(self.mesh, self.distance())
        return self._geodesic

    def custom_distance(self) -> Optional[EikonalResult]:
        return None if self.mesh.model.is_space_form else self.geodesic()


@dataclass
class _Sweep:
    """レベルごとの数値の集計"""

    rows: List[LevelRow] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def add(self, mesh: DomainMesh, terms: Dict[str, float], quantity: float) -> None:
        self.rows.append(
            LevelRow(
                level=mesh.level,
                h_max=float(mesh.h_max),
                terms={k: float(v) for k, v in terms.items()},
                quantity=float(quantity),
            )
        )

    @property
    def quantities(self) -> List[float]:
        return [row.quantity for row in self.rows]


class ScenarioRunner:
    """
    シナリオ実行クラス

    スイートの失敗はそのスイートのエラーブロックとして記録し、
    残りのスイートは続けて実行する
    """

    def __init__(self, scenario: ScenarioConfig, seed: Optional[int] = None):
        self.scenario = scenario
        self.seed = seed
        self.tolerances = scenario.tolerances
        self.model = scenario.model.to_model()
        self.timings: Dict[str, float] = {}
        self._contexts: Optional[List[LevelContext]] = None

        rng = np.random.default_rng(seed) if seed is not None else None
        self._f_monomials = self._monomials_for(scenario.fields.f, rng)
        self._V_monomials = self._monomials_for(scenario.fields.V, rng)

    @staticmethod
    def _monomials_for(spec: FieldSpecConfig, rng: Optional[np.random.Generator]) -> List[MonomialTerm]:
        if spec.source == FieldSourceEnum.RANDOM:
            return random_monomials(spec.degree, rng)
        return list(spec.monomials)

    def contexts(self) -> List[LevelContext]:
        if self._contexts is None:
            start = time.perf_counter()
            spec = self.scenario.domain.to_spec(self.model)
            self._contexts = [
                LevelContext(
                    mesh=mesh,
                    solver_tolerance=self.tolerances.solver,
                    definiteness_margin=self.tolerances.definiteness_margin,
                )
                for mesh in mesh_levels(spec, self.model, self.scenario.levels)
            ]
            self.timings["mesh"] = time.perf_counter() - start
        return self._contexts

    # 入力場

    def field_f(self, ctx: LevelContext) -> ScalarField:
        spec = self.scenario.fields.f
        if spec.source in (FieldSourceEnum.POLYNOMIAL, FieldSourceEnum.RANDOM):
            return polynomial_field(ctx.mesh, self._f_monomials, FieldTag.SOLUTION)
        return ctx.solve(spec.source, spec.value).solution

    def field_V(self, ctx: LevelContext):
        spec = self.scenario.fields.V
        if spec.source == FieldSourceEnum.SPACE_FORM:
            return None
        if spec.source == FieldSourceEnum.CONSTANT:
            return float(spec.value)
        if spec.source == FieldSourceEnum.DISTANCE:
            return potential_field_from_distance(ctx.geodesic())
        return polynomial_field(ctx.mesh, self._V_monomials, FieldTag.POTENTIAL)

    # スイート

    def _vanishing_result(self, suite: SuiteEnum, sweep: _Sweep, name: str, tolerance: float) -> SuiteResult:
        estimate = richardson_extrapolate(sweep.quantities)
        orders = observed_orders(sweep.quantities)
        verdict = vanishing_verdict(estimate, tolerance)
        outcome = SuiteOutcome(verdict_outcome(verdict, strict=False))
        if outcome == SuiteOutcome.HOLDS and not self._order_ok(sweep, orders, tolerance):
            sweep.notes.append(f"observed order below {self.tolerances.min_order}")
            outcome = SuiteOutcome.INCONCLUSIVE
        return self._result(suite, sweep, name, tolerance, estimate, orders, verdict, outcome)

    def _inequality_result(self, suite: SuiteEnum, sweep: _Sweep, name: str, tolerance: float) -> SuiteResult:
        estimate = richardson_extrapolate(sweep.quantities)
        orders = observed_orders(sweep.quantities)
        verdict, strict = inequality_verdict(estimate, tolerance)
        outcome = SuiteOutcome(verdict_outcome(verdict, strict))
        if outcome == SuiteOutcome.HOLDS and not self._order_ok(sweep, orders, tolerance):
            sweep.notes.append(f"observed order below {self.tolerances.min_order}")
            outcome = SuiteOutcome.INCONCLUSIVE
        return self._result(suite, sweep, name, tolerance, estimate, orders, verdict, outcome)

    def _order_ok(self, sweep: _Sweep, orders, tolerance: float) -> bool:
        if not order_gate_applies(sweep.quantities, tolerance):
            return True
        return order_satisfied(orders, self.tolerances.min_order)

    def _result(self, suite, sweep, name, tolerance, estimate, orders, verdict, outcome) -> SuiteResult:
        expected = self.scenario.expectation_for(suite)
        return SuiteResult(
            suite=suite.value,
            quantity_name=name,
            rows=sweep.rows,
            orders=orders,
            extrapolation=ExtrapolationResult(
                value=estimate.value, error_estimate=estimate.error_estimate, order=estimate.order
            ),
            tolerance=tolerance,
            verdict=verdict,
            outcome=outcome,
            expected=expected,
            matches_expectation=outcome_matches(expected, outcome),
            notes=sweep.notes,
        )

    def _short_circuit(self, suite: SuiteEnum, sweep: _Sweep, outcome: SuiteOutcome, name: str) -> SuiteResult:
        expected = self.scenario.expectation_for(suite)
        return SuiteResult(
            suite=suite.value,
            quantity_name=name,
            rows=sweep.rows,
            outcome=outcome,
            expected=expected,
            matches_expectation=outcome_matches(expected, outcome),
            notes=sweep.notes,
        )

    def run_reilly(self) -> SuiteResult:
        fields = self.scenario.fields
        sweep = _Sweep()
        analytic = (
            self.model.is_space_form
            and fields.V.source == FieldSourceEnum.SPACE_FORM
            and (fields.K is None or fields.K == self.model.curvature)
        )
        vanishing_failed = False
        for ctx in self.contexts():
            excluded = None
            if fields.V.source == FieldSourceEnum.DISTANCE:
                excluded = ctx.geodesic().cut_locus_suspects
            report = reilly_residual(
                ctx.mesh, None, self.field_f(ctx), self.field_V(ctx), fields.K, excluded
            )
            terms = report.terms()
            terms.update(residual=report.residual, relative_residual=report.relative_residual)
            sweep.add(ctx.mesh, terms, report.relative_residual)
            if analytic:
                bound = self.tolerances.term_vanishing * report.scale
                if abs(report.t3) > bound or abs(report.t4) > bound:
                    vanishing_failed = True
                    sweep.notes.append(
                        f"level {ctx.mesh.level}: T3={report.t3:.3e}, T4={report.t4:.3e} exceed "
                        f"{self.tolerances.term_vanishing:g}*scale"
                    )
        result = self._vanishing_result(
            SuiteEnum.REILLY, sweep, "relative_residual", self.tolerances.identity
        )
        if vanishing_failed:
            result.outcome = SuiteOutcome.VIOLATED
            result.matches_expectation = outcome_matches(result.expected, result.outcome)
        return result

    def run_classical_reilly(self) -> SuiteResult:
        sweep = _Sweep()
        for ctx in self.contexts():
            report = classical_reilly_residual(ctx.mesh, self.field_f(ctx))
            terms = report.terms()
            terms.update(residual=report.residual, relative_residual=report.relative_residual)
            sweep.add(ctx.mesh, terms, report.relative_residual)
        return self._vanishing_result(
            SuiteEnum.CLASSICAL_REILLY, sweep, "relative_residual", self.tolerances.identity
        )

    def _run_hk_like(self, suite: SuiteEnum, evaluate: Callable[[LevelContext], object]) -> SuiteResult:
        sweep = _Sweep()
        precondition_failed = False
        for ctx in self.contexts():
            report = evaluate(ctx)
            terms = report.terms()
            terms.update(gap=report.gap, relative_gap=report.relative_gap)
            sweep.add(ctx.mesh, terms, report.relative_gap)
            if not report.precondition_met:
                precondition_failed = True
                sweep.notes.append(f"level {ctx.mesh.level}: {report.precondition_note}")
        if precondition_failed:
            return self._short_circuit(suite, sweep, SuiteOutcome.PRECONDITION_VIOLATED, "relative_gap")
        alt_gap = sweep.rows[-1].terms["alt_gap"]
        sweep.notes.append(
            f"lhs - n*int(V) at finest level is {'non-negative' if alt_gap >= 0.0 else 'negative'} ({alt_gap:.6e})"
        )
        return self._inequality_result(suite, sweep, "relative_gap", self.tolerances.gap)

    def run_hk(self) -> SuiteResult:
        def evaluate(ctx: LevelContext):
            return InequalityVerifier(ctx.mesh, distance=ctx.custom_distance()).heintze_karcher()

        return self._run_hk_like(SuiteEnum.HK, evaluate)

    def run_brendle(self) -> SuiteResult:
        return self._run_hk_like(SuiteEnum.BRENDLE, lambda ctx: brendle_spherical(ctx.mesh))

    def run_minkowski(self) -> SuiteResult:
        sweep = _Sweep()
        for ctx in self.contexts():
            report = InequalityVerifier(ctx.mesh).minkowski()
            quantity = max(abs(report.first_discrepancy), abs(report.second_discrepancy))
            sweep.add(ctx.mesh, report.terms(), quantity)
        return self._vanishing_result(
            SuiteEnum.MINKOWSKI, sweep, "max_discrepancy", self.tolerances.minkowski
        )

    def run_alexandrov(self) -> SuiteResult:
        sweep = _Sweep()
        not_cmc = False
        for ctx in self.contexts():
            verifier = InequalityVerifier(ctx.mesh)
            _, deviation = verifier.mean_curvature_statistics()
            if deviation > self.tolerances.cmc:
                report = verifier.alexandrov(cmc_tolerance=self.tolerances.cmc)
                not_cmc = True
                sweep.add(ctx.mesh, report.terms(), deviation)
                continue
            solve = ctx.solve(FieldSourceEnum.INTERIOR)
            report = verifier.alexandrov(cmc_tolerance=self.tolerances.cmc, solve=solve)
            terms = report.terms()
            terms.update(energy_ratio=solve.energy_ratio if solve.energy_ratio is not None else float("nan"))
            sweep.add(ctx.mesh, terms, report.worst_slack)
        if not_cmc:
            sweep.notes.append(f"relative H deviation exceeds {self.tolerances.cmc:g}; chain skipped")
            return self._short_circuit(SuiteEnum.ALEXANDROV, sweep, SuiteOutcome.NOT_CMC, "H_deviation")
        return self._vanishing_result(SuiteEnum.ALEXANDROV, sweep, "worst_slack", self.tolerances.chain)

    def run_rigidity(self) -> SuiteResult:
        c = self.scenario.fields.f.value if self.scenario.fields.f.source == FieldSourceEnum.BOUNDARY_VALUE else 1.0
        sweep = _Sweep()
        for ctx in self.contexts():
            solve = ctx.solve(FieldSourceEnum.BOUNDARY_VALUE, c)
            report = InequalityVerifier(ctx.mesh, distance=ctx.custom_distance()).rigidity(solve)
            sweep.add(ctx.mesh, report.terms(), report.obata_residual)
        return self._rigidity_result(sweep)

    def _rigidity_result(self, sweep: _Sweep) -> SuiteResult:
        """
        Obata残差の判定

        最後の3水準（なければある分）の残差が下限を超えて相対幅 stability 以内に
        収まっていれば、消えない正の残差として strict。そうでなければ 0 への収束を
        判定し、消えもせず落ち着きもしない残差は inconclusive とする
        """
        tolerances = self.tolerances
        quantities = sweep.quantities
        estimate = richardson_extrapolate(quantities)
        orders = observed_orders(quantities)
        residuals = quantities[-3:]
        if len(residuals) >= 2 and min(residuals) > tolerances.rigidity_floor:
            spread = max(residuals) / min(residuals)
            sweep.notes.append(f"Obata residual spread over last levels: {spread:.4f}")
            if spread <= 1.0 + tolerances.stability:
                return self._result(
                    SuiteEnum.RIGIDITY, sweep, "obata_residual", tolerances.rigidity,
                    estimate, orders, Verdict.HOLDS, SuiteOutcome.STRICT,
                )

        verdict = vanishing_verdict(estimate, tolerances.rigidity)
        outcome = SuiteOutcome(verdict_outcome(verdict, strict=False))
        if outcome == SuiteOutcome.VIOLATED:
            sweep.notes.append("residual neither vanishes nor settles")
            outcome = SuiteOutcome.INCONCLUSIVE
        elif outcome == SuiteOutcome.HOLDS and not self._order_ok(sweep, orders, tolerances.rigidity):
            sweep.notes.append(f"observed order below {tolerances.min_order}")
            outcome = SuiteOutcome.INCONCLUSIVE
        return self._result(
            SuiteEnum.RIGIDITY, sweep, "obata_residual", tolerances.rigidity, estimate, orders, verdict, outcome
        )

    def run_screening(self) -> SuiteResult:
        sweep = _Sweep()
        screen_failed = False
        # カスタム因子が空間形と一致すれば閉形式の距離との誤差で判定する
        reference = matching_space_form(self.model)
        for ctx in self.contexts():
            distance = ctx.distance()
            terms = distance.terms()
            if self.model.dimension == 2:
                screen = curvature_screen(ctx.mesh, bound=-1.0, tolerance=self.tolerances.curvature)
                terms.update(screen.terms())
                if not screen.passed:
                    screen_failed = True
                    sweep.notes.append(f"level {ctx.mesh.level}: min curvature {screen.minimum:.6g} < -1")
            quantity = distance.mean_eikonal_residual
            if reference is not None:
                exact = get_calculator(reference).distance(ctx.mesh.vertices)
                away = exact > BASE_POINT_EXCLUSION * ctx.mesh.h_max
                quantity = float(np.max(np.abs(distance.field.values - exact)[away]))
                terms["distance_error"] = quantity
            sweep.add(ctx.mesh, terms, quantity)
        name = "mean_eikonal_residual" if reference is None else "distance_error"
        if reference is not None and not self.model.is_space_form:
            sweep.notes.append(f"conformal factor matches the {reference.kind.value} space form")
        if screen_failed:
            return self._short_circuit(SuiteEnum.SCREENING, sweep, SuiteOutcome.SCREEN_FAILED, name)
        return self._vanishing_result(SuiteEnum.SCREENING, sweep, name, self.tolerances.eikonal)

    def run_suite(self, suite: SuiteEnum) -> SuiteResult:
        handlers = {
            SuiteEnum.REILLY: self.run_reilly,
            SuiteEnum.CLASSICAL_REILLY: self.run_classical_reilly,
            SuiteEnum.HK: self.run_hk,
            SuiteEnum.BRENDLE: self.run_brendle,
            SuiteEnum.MINKOWSKI: self.run_minkowski,
            SuiteEnum.ALEXANDROV: self.run_alexandrov,
            SuiteEnum.RIGIDITY: self.run_rigidity,
            SuiteEnum.SCREENING: self.run_screening,
        }
        start = time.perf_counter()
        try:
            result = handlers[suite]()
        except IndefiniteSystemError as e:
            result = self._failure(suite, SuiteOutcome.INDEFINITE, e)
        except UnsupportedConfigurationError as e:
            result = self._failure(suite, SuiteOutcome.UNSUPPORTED, e)
        except WorkbenchError as e:
            logger.error(f"{self.scenario.name}/{suite.value} failed: {e}")
            result = self._failure(suite, SuiteOutcome.ERROR, e)
        except Exception as e:
            logger.error(f"Unexpected error in {self.scenario.name}/{suite.value}: {e}")
            result = self._failure(suite, SuiteOutcome.ERROR, e)
        self.timings[suite.value] = time.perf_counter() - start
        logger.info(
            f"{self.scenario.name}/{suite.value}: {result.outcome.value} "
            f"(expected {result.expected}, {'ok' if result.matches_expectation else 'MISMATCH'})"
        )
        return result

    def _failure(self, suite: SuiteEnum, outcome: SuiteOutcome, error: Exception) -> SuiteResult:
        expected = self.scenario.expectation_for(suite)
        return SuiteResult(
            suite=suite.value,
            outcome=outcome,
            expected=expected,
            matches_expectation=outcome_matches(expected, outcome),
            error=ErrorBlock(
                type=type(error).__name__,
                message=str(error),
                exit_code=getattr(error, "exit_code", 4),
            ),
        )

    def run(self) -> RunReport:
        suites = [self.run_suite(suite) for suite in self.scenario.suites]
        return RunReport(
            workbench_version=__version__,
            config_hash=config_hash(self.scenario),
            scenario=self.scenario.model_dump(mode="json"),
            seed=self.seed,
            suites=suites,
            passed=all(s.matches_expectation for s in suites),
            timings=dict(self.timings),
        )


def verdict_outcome(verdict: Verdict, strict: bool) -> str:
    if verdict == Verdict.HOLDS:
        return SuiteOutcome.STRICT.value if strict else SuiteOutcome.HOLDS.value
    if verdict == Verdict.VIOLATED:
        return SuiteOutcome.VIOLATED.value
    return SuiteOutcome.INCONCLUSIVE.value


def run_scenario(
    scenario: ScenarioConfig,
    seed: Optional[int] = None,
    levels: Optional[Sequence[int]] = None,
    suite: Optional[SuiteEnum] = None,
) -> RunReport:
    """
    便利関数: シナリオを一つ実行する

    levels・suite を指定するとシナリオの設定を上書きする（上書き後の設定がエコーされる）
    """
    updates = {}
    if levels is not None:
        updates["levels"] = list(levels)
    if suite is not None:
        updates["suites"] = [suite]
    if updates:
        scenario = ScenarioConfig.model_validate({**scenario.model_dump(), **updates})
    try:
        runner = ScenarioRunner(scenario, seed=seed)
    except WorkbenchError as e:
        logger.error(f"Scenario {scenario.name} could not be set up: {e}")
        return failed_report(scenario, seed, ConfigurationError(str(e), location=f"scenarios.{scenario.name}"))
    return runner.run()


def failed_report(scenario: ScenarioConfig, seed: Optional[int], error: WorkbenchError) -> RunReport:
    """組み立てに失敗したシナリオの全スイートをエラーとして記録したレポート"""
    block = ErrorBlock(type=type(error).__name__, message=str(error), exit_code=error.exit_code)
    suites = [
        SuiteResult(
            suite=suite.value,
            outcome=SuiteOutcome.ERROR,
            expected=scenario.expectation_for(suite),
            matches_expectation=outcome_matches(scenario.expectation_for(suite), SuiteOutcome.ERROR),
            error=block,
        )
        for suite in scenario.suites
    ]
    return RunReport(
        workbench_version=__version__,
        config_hash=config_hash(scenario),
        scenario=scenario.model_dump(mode="json"),
        seed=seed,
        suites=suites,
        passed=all(s.matches_expectation for s in suites),
    )


def _run_job(job: Tuple[ScenarioConfig, Optional[int], Optional[List[int]], Optional[SuiteEnum]]) -> RunReport:
    scenario, seed, levels, suite = job
    return run_scenario(scenario, seed=seed, levels=levels, suite=suite)


def run_scenarios(
    scenarios: Sequence[ScenarioConfig],
    seeds: Sequence[Optional[int]],
    jobs: int = 1,
    levels: Optional[Sequence[int]] = None,
    suite: Optional[SuiteEnum] = None,
) -> List[RunReport]:
    """
    複数シナリオを実行し、シナリオ名順に並べて返す

    jobs > 1 ならプロセスプールで並列実行する（各シナリオの中は逐次）
    """
    work = [
        (scenario, seed, list(levels) if levels is not None else None, suite)
        for scenario, seed in zip(scenarios, seeds)
    ]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_job, work))
    else:
        reports = [_run_job(job) for job in work]
    return sorted(reports, key=lambda r: r.name)
