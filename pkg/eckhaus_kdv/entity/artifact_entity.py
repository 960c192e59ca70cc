from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np


class Region(str, Enum):
    SIDEBAND_AS = "SidebandAs"
    HOPF_TURING_AH = "HopfTuringAh"
    UNSTABLE_HALF_PLANE = "UnstableHalfPlane"
    BOUNDARY_INDETERMINATE = "BoundaryIndeterminate"


@dataclass(frozen=True)
class DispersionSample:
    k: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    gamma: np.ndarray
    upsilon: np.ndarray


@dataclass(frozen=True)
class ExpansionCoefficients:
    c1: float
    c2: float
    c3: float
    c4: float
    c3s: float
    c4s: float
    J: float


@dataclass(frozen=True)
class RegionVerdict:
    region: Region
    r_of_z: Optional[float] = None


@dataclass
class SpectralBoundsReport:
    holds: bool
    epsilon: float
    lambda_minus_margin: float
    lambda_plus_constant: float
    violating_k: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class UnstableBand:
    k_low: Optional[float]
    k_high: Optional[float]
    max_growth: float
    k_max_growth: float


@dataclass(frozen=True)
class AnsatzCoefficients:
    nu0: float
    nu1: float
    nu2: float
    nu3: float
    gamma_lin: float
    gamma_non: float
    c: float
    sigma: float
    alpha: float
    beta: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "nu0": self.nu0,
            "nu1": self.nu1,
            "nu2": self.nu2,
            "nu3": self.nu3,
            "gamma_lin": self.gamma_lin,
            "gamma_non": self.gamma_non,
            "c": self.c,
            "sigma": self.sigma,
        }


@dataclass
class Trajectory:
    """Recorded states of one run; ``states`` hold whatever the stepped type is."""

    times: np.ndarray
    states: list
    steps: int
    wall_time: float
    guard_tripped: bool = False
    guard_time: Optional[float] = None
    phase: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.states)

    @property
    def final(self):
        return self.states[-1]


@dataclass
class ResidualSeries:
    times: np.ndarray
    sup: np.ndarray
    hm: np.ndarray
    analytic: np.ndarray
    epsilon: float
    order: int
    derivative_check: Optional[float] = None


@dataclass
class HierarchyTrajectory:
    times: np.ndarray
    levels: list
    mu: np.ndarray
    weighted_norms: np.ndarray
    eta: float
    strip_exhausted_at: Optional[float] = None
    mu_star: float = 0.0


@dataclass
class SlopeFit:
    slope: Optional[float]
    intercept: Optional[float] = None
    stderr: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    n_points: int = 0
    note: str = ""


@dataclass
class EnergyTrace:
    times: np.ndarray
    energy: np.ndarray
    c_hat: float
    kappa: float
    epsilon: float
    noisy: bool = False
    note: str = ""


@dataclass
class SweepPointResult:
    epsilon: float
    tau1: float
    sup_error: float
    hm_error: float
    analytic_error: float
    residual_sup: float
    residual_hm: float
    runtime: float
    guard_tripped: bool = False
    guard_time: Optional[float] = None
    times: Optional[np.ndarray] = None
    sup_series: Optional[np.ndarray] = None
    hm_series: Optional[np.ndarray] = None
    error_states: Optional[list] = None
    ansatz_difference_hm: float = 0.0


@dataclass
class ValidationReport:
    alpha: float
    beta: float
    order: int
    points: List[SweepPointResult]
    slopes: Dict[str, SlopeFit]
    verdicts: Dict[str, str]
    energy: Dict[float, EnergyTrace] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)
    hierarchy: Optional[dict] = None
    refinement: Optional[dict] = None


@dataclass
class FailureDemoReport:
    alpha: float
    beta: float
    region: str
    max_growth: float
    k_max_growth: float
    control_max_growth: float
    failure_detected: bool
    escape_factor: float
    guard_tripped: bool
    guard_time: Optional[float]
    control_failure_detected: bool
    verdict: str
    c_hat: Dict[float, float] = field(default_factory=dict)
    points: List[SweepPointResult] = field(default_factory=list)


@dataclass
class EndToEndReport:
    epsilon: float
    X0: float
    windows: List[float]
    window_errors: List[float]
    fit_a: Optional[float]
    fit_b: Optional[float]
    point_error: float
    modulation_point_error: float
    phase_drift_max: float
    phase_drift_scaled: float
    masked_points: int
    chain_error: float
    verdict: str
    times: Optional[np.ndarray] = None
    phase: Optional[np.ndarray] = None


@dataclass
class SpectrumArtifact:
    dispersion_file_path: str
    summary_file_path: str
    manifest_file_path: str


@dataclass
class CoefficientsArtifact:
    json_file_path: str
    csv_file_path: str


@dataclass
class SimulationArtifact:
    snapshot_dir: str
    manifest_file_path: str
    trajectory_file_path: str
    field_dump_file_paths: List[str]
    drift: Optional[float] = None


@dataclass
class ValidationArtifact:
    report_file_path: str
    errors_file_path: Optional[str]
    loglog_file_path: Optional[str]
    fit_lines_file_path: Optional[str]
    verdict: str
