import os
import sys
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, field_validator, model_validator

from eckhaus_kdv.constants import *
from eckhaus_kdv.exception import ConfigValidationError

TIMESTAMP: str = datetime.now().strftime("%m_%d_%Y_%H_%M_%S")


@dataclass
class PipelineConfig:
    pipeline_name: str = PIPELINE_NAME
    artifact_dir: str = os.path.join(ARTIFACT_DIR, TIMESTAMP)
    timestamp: str = TIMESTAMP


pipeline_config: PipelineConfig = PipelineConfig()


def stage_dir(stage: str, output_dir: Optional[str] = None) -> str:
    """Output directory of a stage: the configured one, or artifact/<timestamp>/<stage>."""
    return output_dir if output_dir else os.path.join(pipeline_config.artifact_dir, stage)


class Scheme(str, Enum):
    ETD_RK4 = "ETD-RK4"
    IMEX_BDF2 = "IMEX-BDF2"


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    t_end: float
    scheme: Scheme = Scheme.ETD_RK4
    dealias: bool = True
    record_stride: int = 1


# ---------------------------------------------------------------- experiment documents


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsSchema(_Strict):
    alpha: float
    beta: float
    epsilon: Optional[float] = Field(default=None, ge=0.0)
    zeta: Optional[float] = None
    c: Optional[float] = None

    @model_validator(mode="after")
    def _zeta_range(self):
        if self.zeta is not None and not 0.0 < abs(self.zeta) < 1.0:
            raise ValueError(f"zeta={self.zeta} must lie in (-1,1) without 0")
        return self


def carrier_fits(periods: int, epsilon: float) -> bool:
    """The carrier winds periods / eps times around the lab domain."""
    winding = periods / epsilon
    return abs(winding - round(winding)) <= 1e-9 * max(1.0, winding)


def carrier_periods(epsilons: List[float], minimum: int = DEFAULT_PERIODS) -> int:
    """Smallest period count >= minimum that makes periods / eps an integer for every eps."""
    for periods in range(minimum, MAX_DERIVED_PERIODS + 1):
        if all(carrier_fits(periods, eps) for eps in epsilons):
            return periods
    raise ValueError(f"no period count in [{minimum}, {MAX_DERIVED_PERIODS}] fits the carrier for epsilons {epsilons}")


class GridSchema(_Strict):
    n_xi: PositiveInt = DEFAULT_N_XI
    periods: Optional[PositiveInt] = None
    x_refine: Optional[PositiveInt] = None

    @field_validator("n_xi", "x_refine")
    @classmethod
    def _power_of_two(cls, value):
        if value is not None and value & (value - 1):
            raise ValueError(f"{value} is not a power of two")
        return value


class StepperSchema(_Strict):
    dt: PositiveFloat = 0.1
    scheme: Scheme = Scheme.ETD_RK4
    dealias: bool = True
    record_stride: PositiveInt = 1
    kdv_dt: PositiveFloat = 1e-3


class ProfileSchema(_Strict):
    name: Literal["gaussian-periodic", "cosine", "sech2"] = "gaussian-periodic"
    amplitude: float = 1.0
    width: PositiveFloat = 1.0
    center: Optional[float] = None
    mean_free: bool = True


class NormsSchema(_Strict):
    m: float = Field(default=1.0, ge=0.0)
    mu: float = Field(default=0.0, ge=0.0)
    s: float = Field(default=0.0, ge=0.0)


class HierarchySchema(_Strict):
    order: int = Field(default=1, ge=0)
    eta: PositiveFloat = DEFAULT_ETA
    mu_upper: PositiveFloat = 0.5
    mu_lower: PositiveFloat = 0.1
    mu_star: PositiveFloat = DEFAULT_MU_STAR
    sweep_eta: bool = True
    table: str = HIERARCHY_TABLE_FILE_PATH

    @model_validator(mode="after")
    def _nested_strips(self):
        if not self.mu_upper >= self.mu_lower > self.mu_star:
            raise ValueError(
                f"strips need mu_upper >= mu_lower > mu_star, got {self.mu_upper}, {self.mu_lower}, {self.mu_star}"
            )
        return self


class ControlSchema(_Strict):
    alpha: float = 1.0
    beta: float = 0.0


class SpectrumConfig(_Strict):
    params: ParamsSchema
    k_max: PositiveFloat = 10.0
    n_k: PositiveInt = 2001
    eta: PositiveFloat = DEFAULT_ETA
    bounds_epsilons: List[PositiveFloat] = Field(default_factory=list)
    bounds_n_k: PositiveInt = 10001
    output_dir: Optional[str] = None


class CoeffsConfig(_Strict):
    params: ParamsSchema
    output_dir: Optional[str] = None


class SimulateConfig(_Strict):
    system: Literal["modulation", "cgl"]
    initial: Literal["zero", "kdv-ansatz", "wave-train", "modulated-ansatz"]
    params: ParamsSchema
    t_end: float = Field(ge=0.0)
    grid: GridSchema = GridSchema()
    stepper: StepperSchema = StepperSchema()
    profile: ProfileSchema = ProfileSchema()
    order: Literal[0, 1] = 1
    phase_track: bool = False
    X0: float = 0.0
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _initial_matches_system(self):
        allowed = {
            "modulation": ("zero", "kdv-ansatz"),
            "cgl": ("zero", "wave-train", "modulated-ansatz"),
        }[self.system]
        if self.initial not in allowed:
            raise ValueError(f"initial={self.initial!r} is not available for system={self.system!r}")
        if self.initial in ("kdv-ansatz", "modulated-ansatz") and not self.params.epsilon:
            raise ValueError("an ansatz initial condition needs params.epsilon > 0")
        if self.phase_track and self.system != "modulation":
            raise ValueError("phase_track integrates the phase of a modulation run only")
        return self

    @model_validator(mode="after")
    def _carrier_periods(self):
        carrier = self.initial == "modulated-ansatz"
        if self.grid.periods is None:
            periods = carrier_periods([self.params.epsilon]) if carrier else DEFAULT_PERIODS
            self.grid = self.grid.model_copy(update={"periods": periods})
        elif carrier and not carrier_fits(self.grid.periods, self.params.epsilon):
            raise ValueError(f"periods={self.grid.periods} / eps={self.params.epsilon} is not an integer")
        return self


class ValidateConfig(_Strict):
    mode: Literal["sweep", "failure", "end_to_end"] = "sweep"
    params: ParamsSchema
    epsilons: List[PositiveFloat]
    order: Literal[0, 1] = 1
    tau0: PositiveFloat = 1.0
    tau1: Optional[float] = Field(default=None, ge=0.0)
    grid: GridSchema = GridSchema()
    stepper: StepperSchema = StepperSchema()
    profile: ProfileSchema = ProfileSchema()
    norms: NormsSchema = NormsSchema()
    kappa_source: Literal["error", "residual"] = "residual"
    locked_residual_slope: Optional[float] = None
    max_workers: Optional[PositiveInt] = None
    refinement_check: bool = False
    compare_orders: bool = False
    control: ControlSchema = ControlSchema()
    X0: float = 0.0
    windows: List[float] = Field(default_factory=lambda: [0.0, 5.0, 10.0, 20.0, 40.0])
    hierarchy: Optional[HierarchySchema] = None
    output_dir: Optional[str] = None

    @field_validator("epsilons")
    @classmethod
    def _sorted_unique(cls, value):
        if not value:
            raise ValueError("at least one epsilon is required")
        if len(set(value)) != len(value):
            raise ValueError("epsilons must be distinct")
        return sorted(value, reverse=True)

    @model_validator(mode="after")
    def _carrier_periods(self):
        """end_to_end runs at the smallest eps and needs the carrier periodic there."""
        carried = [min(self.epsilons)] if self.mode == "end_to_end" else list(self.epsilons)
        if self.grid.periods is None:
            try:
                periods = carrier_periods(carried)
            except ValueError:
                if self.mode == "end_to_end":
                    raise
                periods = DEFAULT_PERIODS
            self.grid = self.grid.model_copy(update={"periods": periods})
        elif self.mode == "end_to_end" and not carrier_fits(self.grid.periods, carried[0]):
            raise ValueError(f"periods={self.grid.periods} / eps={carried[0]} is not an integer")
        return self


# ---------------------------------------------------------------- sweep plan


@dataclass(frozen=True)
class SweepPlan:
    alpha: float
    beta: float
    epsilons: List[float]
    tau0: float
    tau1: float
    norms: NormsSchema
    profile: ProfileSchema
    grid: GridSchema
    stepper: StepperSchema
    order: int = 1
    kappa_source: str = "residual"
    locked_residual_slope: Optional[float] = None
    max_workers: Optional[int] = None

    @classmethod
    def from_config(cls, config: ValidateConfig) -> "SweepPlan":
        tau1 = config.tau0 / 2.0 if config.tau1 is None else config.tau1
        if tau1 > config.tau0:
            raise ConfigValidationError(f"tau1={tau1} exceeds the KdV window tau0={config.tau0}", sys)
        return cls(
            alpha=config.params.alpha,
            beta=config.params.beta,
            epsilons=list(config.epsilons),
            tau0=config.tau0,
            tau1=tau1,
            norms=config.norms,
            profile=config.profile,
            grid=config.grid,
            stepper=config.stepper,
            order=config.order,
            kappa_source=config.kappa_source,
            locked_residual_slope=config.locked_residual_slope,
            max_workers=config.max_workers,
        )

    def replace(self, **changes) -> "SweepPlan":
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return SweepPlan(**values)


# ---------------------------------------------------------------- hierarchy coefficient table


class ForcingTermSchema(_Strict):
    """coeff * prod(symbols) * d_xi^dx (prod(factors)), factors named A<i> / B<i>."""

    coeff: float
    dx: int = Field(default=0, ge=0)
    factors: List[str]
    symbols: List[str] = Field(default_factory=list)


class CoefficientTableSchema(_Strict):
    forcing: Dict[Literal["A", "B"], Dict[int, List[ForcingTermSchema]]]
