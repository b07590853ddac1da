"""
シナリオ設定スキーマ定義

Pydanticモデルを使用して設定ファイル（JSON）の形式を定義
"""

import re
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from src.reilly_workbench.calculators.mesh_builder import geodesic_ball_profile
from src.reilly_workbench.calculators.space_form import compile_conformal_factor
from src.reilly_workbench.models.geometry_models import (
    MAX_CONFORMAL_DEGREE,
    ConformalFactorSpec,
    ProfileKind,
    RadialProfile,
    SpaceFormKind,
    SpaceFormModel,
    StarDomainSpec,
)

SCHEMA_VERSION = 1
MAX_LEVEL = 7

_NAME_PATTERN = re.compile(r"^[a-z0-9][a-z0-9_]*$")


class SuiteEnum(str, Enum):
    """検証スイートの種類"""

    REILLY = "reilly"
    CLASSICAL_REILLY = "classical_reilly"
    HK = "hk"
    BRENDLE = "brendle"
    MINKOWSKI = "minkowski"
    ALEXANDROV = "alexandrov"
    RIGIDITY = "rigidity"
    SCREENING = "screening"
    ALL = "all"


# "all" を展開したときの順序
CONCRETE_SUITES = [s for s in SuiteEnum if s != SuiteEnum.ALL]


class ProfileTypeEnum(str, Enum):
    """境界プロファイルの指定方法"""

    FOURIER = "fourier"
    ELLIPSE = "ellipse"
    GEODESIC_BALL = "geodesic_ball"


class FieldSourceEnum(str, Enum):
    """恒等式に入れる場の作り方"""

    INTERIOR = "interior"  # Δf + Knf = 1, f = 0 の解
    BOUNDARY_VALUE = "boundary_value"  # Δf + Knf = 0, f = c の解
    POISSON = "poisson"  # −Δf = 1, f = 0 の解
    POLYNOMIAL = "polynomial"  # 係数を指定した多項式
    RANDOM = "random"  # シードから生成した多項式
    SPACE_FORM = "space_form"  # 空間形の閉形式ポテンシャル
    CONSTANT = "constant"
    DISTANCE = "distance"  # V = cosh r（eikonal距離場）


F_SOURCES = {
    FieldSourceEnum.INTERIOR,
    FieldSourceEnum.BOUNDARY_VALUE,
    FieldSourceEnum.POISSON,
    FieldSourceEnum.POLYNOMIAL,
    FieldSourceEnum.RANDOM,
}
V_SOURCES = {
    FieldSourceEnum.SPACE_FORM,
    FieldSourceEnum.CONSTANT,
    FieldSourceEnum.DISTANCE,
    FieldSourceEnum.POLYNOMIAL,
    FieldSourceEnum.RANDOM,
}

EXPECTATION_ALIASES = {"equality", "strict", "inequality"}
OUTCOME_NAMES = {
    "holds",
    "strict",
    "violated",
    "inconclusive",
    "precondition_violated",
    "not_cmc",
    "indefinite",
    "unsupported",
    "screen_failed",
    "error",
}


class MonomialTerm(BaseModel):
    """単項式 c·x1^i·x2^j"""

    exponents: List[int] = Field(..., description="各変数の指数", examples=[[2, 0]])
    coefficient: float = Field(..., description="係数")

    @field_validator("exponents")
    @classmethod
    def validate_exponents(cls, v):
        if any(e < 0 for e in v):
            raise ValueError(f"指数は0以上である必要があります: {v}")
        return v


class ConformalFactorConfig(BaseModel):
    """カスタム共形因子 φ（λ = e^φ）"""

    expression: Optional[str] = Field(
        None, description="x1, x2 の sympy 式", examples=["log(2/(1 - x1**2 - x2**2))"]
    )
    monomials: Optional[List[MonomialTerm]] = Field(None, description="多項式の単項式表")

    @model_validator(mode="after")
    def exactly_one_form(self):
        if (self.expression is None) == (self.monomials is None):
            raise ValueError("expression と monomials のどちらか一方を指定してください")
        if self.monomials is not None:
            if not self.monomials:
                raise ValueError("monomials は空にできません（φ ≡ 0 は expression \"0\" で指定）")
            for term in self.monomials:
                if sum(term.exponents) > MAX_CONFORMAL_DEGREE:
                    raise ValueError(
                        f"多項式の次数は{MAX_CONFORMAL_DEGREE}以下である必要があります: {term.exponents}"
                    )
        return self

    def to_spec(self) -> ConformalFactorSpec:
        if self.expression is not None:
            return ConformalFactorSpec(expression=self.expression)
        return ConformalFactorSpec(
            monomials=tuple((tuple(t.exponents), float(t.coefficient)) for t in self.monomials)
        )


class ModelConfig(BaseModel):
    """背景幾何"""

    kind: SpaceFormKind = Field(..., description="euclidean / hyperbolic / spherical / custom")
    dimension: int = Field(2, ge=2, le=3, description="次元 n")
    conformal_factor: Optional[ConformalFactorConfig] = Field(None, description="カスタム共形因子")

    @model_validator(mode="after")
    def custom_needs_factor(self):
        if self.kind == SpaceFormKind.CUSTOM and self.conformal_factor is None:
            raise ValueError("custom モデルには conformal_factor が必要です")
        if self.kind != SpaceFormKind.CUSTOM and self.conformal_factor is not None:
            raise ValueError(f"{self.kind.value} モデルに conformal_factor は指定できません")
        factor = self.conformal_factor
        if factor is not None and factor.monomials is not None:
            for term in factor.monomials:
                if len(term.exponents) != self.dimension:
                    raise ValueError(
                        f"単項式の指数の数は次元 {self.dimension} と一致する必要があります: {term.exponents}"
                    )
        if factor is not None and factor.expression is not None:
            compile_conformal_factor(factor.to_spec(), self.dimension)
        return self

    def to_model(self) -> SpaceFormModel:
        return SpaceFormModel(
            kind=self.kind,
            dimension=self.dimension,
            conformal_factor=self.conformal_factor.to_spec() if self.conformal_factor else None,
        )


class ProfileConfig(BaseModel):
    """境界の動径プロファイル ρ(θ)"""

    type: ProfileTypeEnum = Field(ProfileTypeEnum.FOURIER, description="プロファイルの種類")
    a0: Optional[float] = Field(None, description="Fourier の定数項")
    cos: List[float] = Field(default_factory=list, description="cos kθ の係数（k=1..8）")
    sin: List[float] = Field(default_factory=list, description="sin kθ の係数（k=1..8）")
    semi_axes: Optional[Tuple[float, float]] = Field(None, description="楕円の半軸 (a, b)")
    radius: Optional[float] = Field(None, gt=0.0, description="測地球の測地半径 R")

    @model_validator(mode="after")
    def required_fields(self):
        if self.type == ProfileTypeEnum.FOURIER and self.a0 is None:
            raise ValueError("fourier プロファイルには a0 が必要です")
        if self.type == ProfileTypeEnum.ELLIPSE and self.semi_axes is None:
            raise ValueError("ellipse プロファイルには semi_axes が必要です")
        if self.type == ProfileTypeEnum.GEODESIC_BALL and self.radius is None:
            raise ValueError("geodesic_ball プロファイルには radius が必要です")
        return self

    def to_profile(self, model: SpaceFormModel) -> RadialProfile:
        if self.type == ProfileTypeEnum.GEODESIC_BALL:
            return geodesic_ball_profile(model, self.radius)
        if self.type == ProfileTypeEnum.ELLIPSE:
            return RadialProfile(kind=ProfileKind.ELLIPSE, semi_axes=tuple(self.semi_axes))
        return RadialProfile(
            kind=ProfileKind.FOURIER,
            a0=self.a0,
            cos_coefficients=tuple(self.cos),
            sin_coefficients=tuple(self.sin),
        )


class DomainConfig(BaseModel):
    """星形領域"""

    profile: ProfileConfig
    base_rings: int = Field(4, ge=2, le=16, description="レベル0の六角形リング数")

    def to_spec(self, model: SpaceFormModel) -> StarDomainSpec:
        return StarDomainSpec(
            profile=self.profile.to_profile(model),
            dimension=model.dimension,
            base_rings=self.base_rings,
        )


class FieldSpecConfig(BaseModel):
    """場 f または V の指定"""

    source: FieldSourceEnum = Field(..., description="場の作り方")
    monomials: List[MonomialTerm] = Field(default_factory=list, description="polynomial の単項式表")
    degree: int = Field(3, ge=1, le=6, description="random 多項式の次数")
    value: float = Field(1.0, description="constant の値、または boundary_value の c")


class FieldsConfig(BaseModel):
    """恒等式スイートの入力場"""

    f: FieldSpecConfig = Field(
        default_factory=lambda: FieldSpecConfig(source=FieldSourceEnum.INTERIOR),
        description="検証するスカラー場",
    )
    V: FieldSpecConfig = Field(
        default_factory=lambda: FieldSpecConfig(source=FieldSourceEnum.SPACE_FORM),
        description="ポテンシャル",
    )
    K: Optional[float] = Field(None, description="シフト定数（省略時はモデルから）")

    @model_validator(mode="after")
    def validate_sources(self):
        if self.f.source not in F_SOURCES:
            raise ValueError(f"f に使えない source です: {self.f.source.value}")
        if self.V.source not in V_SOURCES:
            raise ValueError(f"V に使えない source です: {self.V.source.value}")
        return self

    @property
    def is_random(self) -> bool:
        return FieldSourceEnum.RANDOM in (self.f.source, self.V.source)


class ToleranceConfig(BaseModel):
    """判定に使う許容値（既定値はレポートにそのまま書き出す）"""

    identity: float = Field(5e-2, gt=0.0, description="恒等式の residual/scale")
    term_vanishing: float = Field(1e-8, gt=0.0, description="T3, T4 の消滅（scale 比）")
    gap: float = Field(1e-3, gt=0.0, description="HK型の相対ギャップ")
    minkowski: float = Field(5e-2, gt=0.0, description="Minkowski公式の相対不一致")
    chain: float = Field(5e-2, gt=0.0, description="Alexandrov連鎖の最大スラック")
    rigidity: float = Field(5e-2, gt=0.0, description="正規化Obata残差")
    stability: float = Field(0.2, gt=0.0, description="Obata残差が最後の3水準で安定とみなす相対幅")
    rigidity_floor: float = Field(1e-3, gt=0.0, description="安定した正のObata残差とみなす下限")
    cmc: float = Field(1e-3, gt=0.0, description="H の相対偏差")
    eikonal: float = Field(1e-1, gt=0.0, description="||∇r|_g − 1| の面積平均")
    curvature: float = Field(1e-8, gt=0.0, description="曲率スクリーンの許容")
    min_order: float = Field(0.8, gt=0.0, description="観測次数の下限")
    solver: float = Field(1e-10, gt=0.0, le=1e-6, description="CG の相対残差")
    definiteness_margin: float = Field(0.05, gt=0.0, lt=1.0, description="定値性マージン")


class ScenarioConfig(BaseModel):
    """一つの検証シナリオ"""

    name: str = Field(..., description="シナリオID（小文字・数字・_）")
    description: str = Field("", description="一行説明")
    claim: str = Field("", description="検証する主張")
    model: ModelConfig
    domain: DomainConfig
    suites: List[SuiteEnum] = Field(..., min_length=1, description="実行するスイート")
    fields: FieldsConfig = Field(default_factory=FieldsConfig)
    levels: List[int] = Field(default_factory=lambda: [1, 2, 3], description="細分割レベル")
    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)
    expectations: Dict[str, str] = Field(default_factory=dict, description="スイートごとの期待結果")
    seed: Optional[int] = Field(None, ge=0, description="random 場のシード")

    @field_validator("name")
    @classmethod
    def validate_name(cls, v):
        if not _NAME_PATTERN.match(v):
            raise ValueError(f"シナリオ名は小文字・数字・_ のみ使えます: {v}")
        return v

    @field_validator("levels")
    @classmethod
    def validate_levels(cls, v):
        if not v:
            raise ValueError("levels は空にできません")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"levels は狭義単調増加である必要があります: {v}")
        if v[0] < 0 or v[-1] > MAX_LEVEL:
            raise ValueError(f"levels は0~{MAX_LEVEL}の範囲である必要があります: {v}")
        return v

    @field_validator("suites")
    @classmethod
    def expand_all(cls, v):
        if SuiteEnum.ALL in v:
            return list(CONCRETE_SUITES)
        return list(dict.fromkeys(v))

    @model_validator(mode="after")
    def validate_field_monomials(self):
        for name, spec in (("f", self.fields.f), ("V", self.fields.V)):
            for term in spec.monomials:
                if len(term.exponents) != self.model.dimension:
                    raise ValueError(
                        f"fields.{name} の単項式の指数の数は次元 {self.model.dimension} と一致する必要があります: "
                        f"{term.exponents}"
                    )
        return self

    @model_validator(mode="after")
    def validate_expectations(self):
        for suite, expected in self.expectations.items():
            if suite not in {s.value for s in CONCRETE_SUITES}:
                raise ValueError(f"expectations に未知のスイートがあります: {suite}")
            if expected not in EXPECTATION_ALIASES | OUTCOME_NAMES:
                raise ValueError(f"未知の期待結果です: {suite}={expected}")
        return self

    def expectation_for(self, suite: SuiteEnum) -> str:
        return self.expectations.get(suite.value, "inequality")


class ScenarioFile(BaseModel):
    """設定ファイル全体"""

    schema_version: int = Field(SCHEMA_VERSION, description="設定スキーマのバージョン")
    seed: Optional[int] = Field(None, ge=0, description="全シナリオ共通のシード")
    scenarios: List[ScenarioConfig] = Field(..., min_length=1, description="シナリオ一覧")

    @field_validator("schema_version")
    @classmethod
    def validate_version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"schema_version {v} には対応していません（{SCHEMA_VERSION} のみ）")
        return v

    @model_validator(mode="after")
    def unique_names(self):
        names = [s.name for s in self.scenarios]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"シナリオ名が重複しています: {', '.join(duplicates)}")
        return self
