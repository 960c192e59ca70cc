import os

PIPELINE_NAME: str = "eckhaus_kdv"
ARTIFACT_DIR: str = "artifact"

CONFIG_DIR: str = "config"
HIERARCHY_TABLE_FILE_PATH: str = os.path.join(CONFIG_DIR, "hierarchy_coefficients.yaml")

MANIFEST_FILE_NAME: str = "manifest.json"
RESOLVED_CONFIG_FILE_NAME: str = "config_resolved.yaml"
ERROR_FILE_NAME: str = "error.json"

SPECTRUM_DIR_NAME: str = "spectrum"
SPECTRUM_DISPERSION_FILE_NAME: str = "dispersion.csv"
SPECTRUM_SUMMARY_FILE_NAME: str = "summary.json"

COEFFICIENTS_DIR_NAME: str = "coefficients"
COEFFICIENTS_JSON_FILE_NAME: str = "coefficients.json"
COEFFICIENTS_CSV_FILE_NAME: str = "coefficients.csv"

SIMULATION_DIR_NAME: str = "simulation"
SIMULATION_SNAPSHOT_DIR: str = "snapshots"
SIMULATION_TRAJECTORY_OBJECT_FILE_NAME: str = "trajectory.pkl"
SIMULATION_FIELD_DUMP_PREFIX: str = "final_"
SIMULATION_TIMES_FILE_NAME: str = "times.csv"

VALIDATION_DIR_NAME: str = "validation"
VALIDATION_REPORT_FILE_NAME: str = "report.json"
VALIDATION_ERRORS_FILE_NAME: str = "errors.csv"
VALIDATION_LOGLOG_POINTS_FILE_NAME: str = "loglog_points.csv"
VALIDATION_FIT_LINES_FILE_NAME: str = "fit_lines.csv"

FIELD_DUMP_MAGIC: bytes = b"EKDVFLD1"
FIELD_DUMP_DTYPE: bytes = b"c16 "
CSV_FLOAT_FORMAT: str = "%.17g"

# classifier and transforms
REGION_BOUNDARY_TOL: float = 1e-9
UPSILON_SINGULAR_TOL: float = 1e-8
OVERFLOW_EXPONENT: float = 700.0
WINDING_TOL: float = 1e-8

# time stepping
DEALIAS_FRACTION: float = 2.0 / 3.0
ETD_CONTOUR_POINTS: int = 32
ETD_MAX_GROWTH: float = 5.0
IMEX_MAX_GROWTH: float = 0.5
MODULATION_BLOWUP_GUARD: float = 2.0
CGL_BLOWUP_GUARD: float = 10.0
KDV_BLOWUP_GUARD: float = 1e3
AMPLITUDE_MASK_THRESHOLD: float = 1e-8

# ansatz and hierarchy
TIME_DERIVATIVE_CHECK_TOL: float = 1e-6
TIME_DERIVATIVE_CHECK_STEP: float = 1e-4
DEFAULT_ETA: float = 8.0
ETA_SWEEP: tuple = (1.0, 2.0, 4.0, 8.0)
ETA_BOUND_FACTOR: float = 1.05
DEFAULT_MU_STAR: float = 0.025

# reference desk-scale configuration
DEFAULT_N_XI: int = 256
DEFAULT_PERIODS: int = 6
MAX_DERIVED_PERIODS: int = 64
MAX_X_POINTS: int = 2 ** 14

# verdicts
THEORY_HM_SLOPE: float = 2.5
THEORY_SUP_SLOPE: float = 3.0
HM_SLOPE_THRESHOLD: float = 2.2
SUP_SLOPE_THRESHOLD: float = 2.6
DIFFERENCE_SLOPE_THRESHOLD: float = 2.2
RESIDUAL_SLOPE_FLOOR: float = 4.5
LOCKED_SLOPE_TOL: float = 0.2
FAILURE_ESCAPE_FACTOR: float = 10.0
ENERGY_STABILITY_FACTOR: float = 2.0
ENERGY_RATE_FLOOR: float = 1e-12
REFINEMENT_TOL: float = 0.05
MIN_FIT_POINTS: int = 3
CHAIN_TOL: float = 1e-5
TAU1_HALVINGS: int = 3
