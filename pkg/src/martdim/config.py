"""Experiment configuration: YAML on disk, validated with pydantic.

Unknown keys are rejected, and every error names the dotted key path that
caused it. Integrand dimensions are checked against the driver before any
simulation runs.
"""
from __future__ import annotations

import os
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from martdim import integrand as itg
from martdim.errors import ConfigError, MartdimError
from martdim.rank_dim import RankTolerance

OUT_ENV = "MARTDIM_OUT"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# -- integrand specs -------------------------------------------------------------

class FrameSpec(_Strict):
    kind: Literal["standard", "constant", "random"] = "standard"
    matrix: list[list[float]] | None = None
    seed: int = 0

    def build(self, d: int) -> itg.FrameField:
        if self.kind == "standard":
            return itg.standard_frame(d)
        if self.kind == "random":
            return itg.random_frame(d, self.seed)
        if self.matrix is None:
            raise ValueError("constant frame needs 'matrix'")
        return itg.constant_frame(self.matrix)


class ConstantSpec(_Strict):
    kind: Literal["constant"]
    matrix: list[list[float]]

    def build(self, d):
        return itg.constant(self.matrix)


class CoordinateRowSpec(_Strict):
    kind: Literal["coordinate_row"]
    index: int = Field(ge=1)

    def build(self, d):
        return itg.coordinate_row(self.index, d)


class StateSpec(_Strict):
    kind: Literal["state"]
    name: Literal["z2_dz1", "swap", "sign_z2", "sigmoid", "polynomial", "running_max"]
    weights: list[list[float]] | None = None
    coefficients: list[list[list[float]]] | None = None

    def build(self, d):
        if self.name == "z2_dz1":
            return itg.z2_dz1(d)
        if self.name == "swap":
            return itg.swap_row(d)
        if self.name == "sign_z2":
            return itg.sign_z2(d)
        if self.name == "running_max":
            return itg.running_max_row(d)
        if self.name == "sigmoid":
            if self.weights is None:
                raise ValueError("sigmoid needs 'weights'")
            return itg.sigmoid(self.weights)
        if self.coefficients is None:
            raise ValueError("polynomial needs 'coefficients'")
        return itg.polynomial(self.coefficients)


class RandomConstantSpec(_Strict):
    kind: Literal["random_constant"]
    n: int = Field(ge=1)
    rank: int = Field(ge=0)
    seed: int = 0

    def build(self, d):
        return random_constant(self.n, d, self.rank, self.seed)


class FrameProjectionSpec(_Strict):
    kind: Literal["frame_projection"]
    index: int = Field(ge=1)
    frame: FrameSpec = FrameSpec()

    def build(self, d):
        return itg.frame_projection(self.index, self.frame.build(d))


class HomotopySpec(_Strict):
    kind: Literal["homotopy"]
    s: float = Field(ge=0.0, le=1.0)

    def build(self, d):
        if d != 2:
            raise ValueError(f"homotopy needs d = 2, got d = {d}")
        return itg.constant(np.diag([np.sqrt(self.s), np.sqrt(1.0 - self.s)]))


class SumSpec(_Strict):
    kind: Literal["sum"]
    terms: list["IntegrandSpec"] = Field(min_length=1)

    def build(self, d):
        return itg.sum_of(*(t.build(d) for t in self.terms))


class ScaleSpec(_Strict):
    kind: Literal["scale"]
    factor: float
    of: "IntegrandSpec"

    def build(self, d):
        return itg.scaled(self.factor, self.of.build(d))


class LeftSpec(_Strict):
    kind: Literal["left"]
    matrix: list[list[float]]
    of: "IntegrandSpec"

    def build(self, d):
        return itg.left_multiply(self.matrix, self.of.build(d))


class RightSpec(_Strict):
    kind: Literal["right"]
    matrix: list[list[float]]
    of: "IntegrandSpec"

    def build(self, d):
        inner = self.of.build(len(self.matrix))
        return itg.right_multiply(inner, self.matrix)


class StackSpec(_Strict):
    kind: Literal["stack"]
    blocks: list["IntegrandSpec"] = Field(min_length=1)

    def build(self, d):
        return itg.stack(*(b.build(d) for b in self.blocks))


class GraphSpec(_Strict):
    kind: Literal["graph"]
    of: "IntegrandSpec"

    def build(self, d):
        return itg.graph_of(self.of.build(d))


IntegrandSpec = Annotated[
    Union[ConstantSpec, CoordinateRowSpec, StateSpec, RandomConstantSpec, FrameProjectionSpec,
          HomotopySpec, SumSpec, ScaleSpec, LeftSpec, RightSpec, StackSpec, GraphSpec],
    Field(discriminator="kind"),
]

for _m in (SumSpec, ScaleSpec, LeftSpec, RightSpec, StackSpec, GraphSpec):
    _m.model_rebuild()


def random_constant(n: int, d: int, rank: int, seed: int) -> itg.MatrixIntegrand:
    """Constant ``n x d`` matrix of the given rank: product of seeded Gaussian factors."""
    if rank > min(n, d):
        raise ValueError(f"rank {rank} exceeds min(n, d) = {min(n, d)}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, rank)) @ rng.standard_normal((rank, d))
    out = itg.constant(A)
    out.name = f"random_constant(n={n}, rank={rank}, seed={seed})"
    return out


# -- experiment config -------------------------------------------------------------

class GridConfig(_Strict):
    T: float = Field(1.0, gt=0)
    N: int = Field(4096, ge=1)


class DriverConfig(_Strict):
    d: int = Field(2, ge=1)
    M: int = Field(2000, ge=1)
    seed: int = Field(20240611, ge=0, lt=2**64)


class ToleranceConfig(_Strict):
    eps_rel: float = Field(1e-10, gt=0, lt=1)
    covariation_floor: float = Field(1e-13, ge=0, lt=1)
    dimension_threshold: float = Field(0.999, gt=0, le=1)
    exact: float = Field(1e-12, gt=0)
    residual: float = Field(1e-10, gt=0)
    z: float = Field(3.0, gt=0)
    z_hard: float = Field(5.0, gt=0)
    max_soft_failures: int = Field(1, ge=0)

    def rank(self) -> RankTolerance:
        return RankTolerance(self.eps_rel, self.covariation_floor)


class SuiteConfig(_Strict):
    names: list[str] = ["all"]
    # fractions of the horizon T
    checkpoints: list[float] = Field([0.25, 0.5, 1.0], min_length=1)
    blocks: list[int] | None = None
    frame: FrameSpec = FrameSpec(kind="random", seed=7)
    split_k: int = Field(1, ge=1)
    homotopy_s: list[float] = [0.0, 0.5, 1.0]
    basis_pairs: int = Field(20, ge=1)
    basis_max_dim: int = Field(6, ge=2)
    small_paths: int = Field(16, ge=1)


class OutputConfig(_Strict):
    directory: str | None = None
    csv_paths: int = Field(3, ge=0)


class ExperimentConfig(_Strict):
    grid: GridConfig = GridConfig()
    driver: DriverConfig = DriverConfig()
    integrand: IntegrandSpec = StateSpec(kind="state", name="z2_dz1")
    tolerance: ToleranceConfig = ToleranceConfig()
    suite: SuiteConfig = SuiteConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _dimensions(self):
        try:
            h = self.integrand.build(self.driver.d)
        except (ValueError, MartdimError) as exc:
            raise ValueError(f"integrand: {exc}") from exc
        if h.d != self.driver.d:
            raise ValueError(f"integrand: runs on a {h.d}-dimensional driver but driver.d = {self.driver.d}")
        if self.suite.blocks is not None and sum(self.suite.blocks) > self.driver.d:
            raise ValueError(f"suite.blocks: {self.suite.blocks} exceed driver.d = {self.driver.d}")
        if any(not 0 < c <= 1 for c in self.suite.checkpoints):
            raise ValueError("suite.checkpoints: fractions of T must lie in (0, 1]")
        return self

    def build_integrand(self) -> itg.MatrixIntegrand:
        return self.integrand.build(self.driver.d)

    def blocks(self) -> tuple[int, ...]:
        if self.suite.blocks is not None:
            return tuple(self.suite.blocks)
        d = self.driver.d
        return (1, d - 1) if d > 1 else (1,)

    def out_dir(self, override: str | None = None) -> Path:
        return Path(override or self.output.directory or os.environ.get(OUT_ENV) or "martdim-out")

    def effective(self) -> dict:
        return self.model_dump(mode="json")


def _format_errors(exc: ValidationError) -> tuple[str, str]:
    lines = []
    first = None
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        msg = err["msg"].removeprefix("Value error, ")
        if err["type"] == "extra_forbidden":
            msg = "unknown key"
        if first is None:
            first = loc
        lines.append(f"{loc}: {msg}" if loc else msg)
    return "; ".join(lines), first or ""


def config_from_dict(data: dict | None) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data or {})
    except ValidationError as exc:
        msg, key = _format_errors(exc)
        raise ConfigError(f"invalid config: {msg}", key) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return config_from_dict(data)


def default_config_text() -> str:
    return resources.files("martdim").joinpath("data/default.yaml").read_text(encoding="utf-8")


def default_config() -> ExperimentConfig:
    return config_from_dict(yaml.safe_load(default_config_text()))


def json_schema() -> dict:
    return ExperimentConfig.model_json_schema()


def with_overrides(cfg: ExperimentConfig, seed=None, tolerance=None, paths=None,
                   steps=None, out=None) -> ExperimentConfig:
    data = cfg.effective()
    if seed is not None:
        data["driver"]["seed"] = seed
    if tolerance is not None:
        data["tolerance"]["eps_rel"] = tolerance
    if paths is not None:
        data["driver"]["M"] = paths
    if steps is not None:
        data["grid"]["N"] = steps
    if out is not None:
        data["output"]["directory"] = str(out)
    return config_from_dict(data)
