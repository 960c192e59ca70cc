import dataclasses
import os
import sys
from typing import List, Optional

import pandas as pd

from eckhaus_kdv.components.validation import ModulationValidation, fitted_value
from eckhaus_kdv.configuration import ExperimentConfiguration
from eckhaus_kdv.constants import (
    MANIFEST_FILE_NAME,
    THEORY_HM_SLOPE,
    THEORY_SUP_SLOPE,
    VALIDATION_ERRORS_FILE_NAME,
    VALIDATION_FIT_LINES_FILE_NAME,
    VALIDATION_LOGLOG_POINTS_FILE_NAME,
    VALIDATION_REPORT_FILE_NAME,
)
from eckhaus_kdv.entity.artifact_entity import (
    EndToEndReport,
    FailureDemoReport,
    SweepPointResult,
    ValidationArtifact,
    ValidationReport,
)
from eckhaus_kdv.exception import EckhausKdVException
from eckhaus_kdv.logger import logging
from eckhaus_kdv.utils.main_utils import write_csv_table, write_json_file, write_manifest

THEORY_SLOPES = {"sup_error": THEORY_SUP_SLOPE, "hm_error": THEORY_HM_SLOPE}

POINT_COLUMNS = [
    "epsilon",
    "tau1",
    "sup_error",
    "hm_error",
    "analytic_error",
    "residual_sup",
    "residual_hm",
    "ansatz_difference_hm",
    "guard_tripped",
    "guard_time",
    "runtime",
]


def points_frame(points: List[SweepPointResult]) -> pd.DataFrame:
    return pd.DataFrame([{name: getattr(p, name) for name in POINT_COLUMNS} for p in points], columns=POINT_COLUMNS)


def loglog_frames(report: ValidationReport):
    """(norm, epsilon, value) points and the fitted lines through them, next to the expected slope."""
    points, lines = [], []
    for name, fit in report.slopes.items():
        for p in report.points:
            points.append({"norm": name, "epsilon": p.epsilon, "value": getattr(p, name)})
            if fit.slope is not None:
                lines.append(
                    {
                        "norm": name,
                        "epsilon": p.epsilon,
                        "fitted": fitted_value(fit, p.epsilon),
                        "slope": fit.slope,
                        "theory_slope": THEORY_SLOPES.get(name),
                    }
                )
    return (
        pd.DataFrame(points, columns=["norm", "epsilon", "value"]),
        pd.DataFrame(lines, columns=["norm", "epsilon", "fitted", "slope", "theory_slope"]),
    )


def strip_error_states(report):
    """Copy of the report without the error fields, which only feed the energy diagnostic."""
    if not hasattr(report, "points"):
        return report
    points = [dataclasses.replace(p, error_states=None) for p in report.points]
    return dataclasses.replace(report, points=points)


def report_verdict(report) -> str:
    if isinstance(report, ValidationReport):
        return report.verdicts.get("overall", "pass")
    return report.verdict


class ValidationPipeline:
    def __init__(self, configuration: ExperimentConfiguration):
        self.configuration = configuration
        self.config = configuration.config
        self.output_dir = configuration.output_dir

    def start_validation(self):
        """
        This method of ValidationPipeline class runs the experiment selected by the config mode
        """
        try:
            logging.info("Entered the start_validation method of ValidationPipeline class")
            report = ModulationValidation(validate_config=self.config).initiate_validation()
            logging.info("Exited the start_validation method of ValidationPipeline class")
            return report
        except Exception as e:
            raise EckhausKdVException(e, sys) from e

    def start_report_export(self, report) -> ValidationArtifact:
        """
        This method of ValidationPipeline class writes the report, its tables and the manifest
        """
        try:
            os.makedirs(self.output_dir, exist_ok=True)
            files = []
            errors_file_path: Optional[str] = None
            loglog_file_path: Optional[str] = None
            fit_lines_file_path: Optional[str] = None

            if isinstance(report, (ValidationReport, FailureDemoReport)):
                errors_file_path = os.path.join(self.output_dir, VALIDATION_ERRORS_FILE_NAME)
                write_csv_table(errors_file_path, points_frame(report.points))
                files.append(errors_file_path)
            elif isinstance(report, EndToEndReport):
                errors_file_path = os.path.join(self.output_dir, VALIDATION_ERRORS_FILE_NAME)
                write_csv_table(
                    errors_file_path, pd.DataFrame({"window": report.windows, "error": report.window_errors})
                )
                files.append(errors_file_path)

            if isinstance(report, ValidationReport):
                points, lines = loglog_frames(report)
                loglog_file_path = os.path.join(self.output_dir, VALIDATION_LOGLOG_POINTS_FILE_NAME)
                fit_lines_file_path = os.path.join(self.output_dir, VALIDATION_FIT_LINES_FILE_NAME)
                write_csv_table(loglog_file_path, points)
                write_csv_table(fit_lines_file_path, lines)
                files += [loglog_file_path, fit_lines_file_path]

            verdict = report_verdict(report)
            resolved_file_path = self.configuration.write_resolved(self.output_dir)
            report_file_path = os.path.join(self.output_dir, VALIDATION_REPORT_FILE_NAME)
            files += [resolved_file_path, report_file_path]
            manifest = write_manifest(
                os.path.join(self.output_dir, MANIFEST_FILE_NAME),
                "validate",
                self.configuration.resolved(),
                files,
                {"mode": self.config.mode, "verdict": verdict},
            )

            exported = strip_error_states(report)
            if isinstance(exported, ValidationReport):
                exported.manifest = manifest
            write_json_file(report_file_path, exported)
            logging.info(f"validation report written to {report_file_path} (verdict {verdict})")

            return ValidationArtifact(
                report_file_path=report_file_path,
                errors_file_path=errors_file_path,
                loglog_file_path=loglog_file_path,
                fit_lines_file_path=fit_lines_file_path,
                verdict=verdict,
            )
        except Exception as e:
            raise EckhausKdVException(e, sys) from e

    def run_pipeline(self) -> ValidationArtifact:
        """
        This method of ValidationPipeline class is responsible for running complete validation
        """
        try:
            report = self.start_validation()
            return self.start_report_export(report)
        except Exception as e:
            raise EckhausKdVException(e, sys) from e
