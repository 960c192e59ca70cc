"""Command line entry: ``eckhaus-kdv {spectrum|simulate|validate|coeffs} CONFIG.yaml``."""
import argparse
import json
import os
import sys
from typing import Optional, Sequence

from eckhaus_kdv.configuration import COMMAND_SCHEMAS, STAGE_DIRS, ExperimentConfiguration
from eckhaus_kdv.constants import ERROR_FILE_NAME
from eckhaus_kdv.entity.config_entity import stage_dir
from eckhaus_kdv.exception import EckhausKdVException
from eckhaus_kdv.logger import logging
from eckhaus_kdv.pipeline.analysis_pipeline import CoefficientsPipeline, SpectrumPipeline
from eckhaus_kdv.pipeline.simulation_pipeline import SimulationPipeline
from eckhaus_kdv.pipeline.validation_pipeline import ValidationPipeline
from eckhaus_kdv.utils.main_utils import write_json_file


def cmd_spectrum(configuration: ExperimentConfiguration):
    artifact = SpectrumPipeline(configuration).run_pipeline()
    print(f"spectrum written to {os.path.dirname(artifact.summary_file_path)}")
    return artifact


def cmd_coeffs(configuration: ExperimentConfiguration):
    artifact = CoefficientsPipeline(configuration).run_pipeline()
    print(f"coefficients written to {artifact.json_file_path}")
    return artifact


def cmd_simulate(configuration: ExperimentConfiguration):
    artifact = SimulationPipeline(configuration).run_pipeline()
    drift = "" if artifact.drift is None else f" (equilibrium drift {artifact.drift:.6e})"
    print(f"simulation written to {os.path.dirname(artifact.manifest_file_path)}{drift}")
    return artifact


def cmd_validate(configuration: ExperimentConfiguration):
    artifact = ValidationPipeline(configuration).run_pipeline()
    print(f"validation verdict: {artifact.verdict} ({artifact.report_file_path})")
    return artifact


COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "coeffs": cmd_coeffs,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eckhaus-kdv",
        description="KdV modulation of marginally stable CGL wave trains: spectra, simulations and validation sweeps",
    )
    parser.add_argument("command", choices=sorted(COMMAND_SCHEMAS), help="experiment to run")
    parser.add_argument("config", help="YAML experiment document")
    return parser


def write_error(error: Exception, output_dir: str) -> dict:
    """error.json in the output directory and the same document on stderr."""
    if isinstance(error, EckhausKdVException):
        document = {"error": error.category, "message": str(error), "exit_code": error.exit_code}
    else:
        document = {"error": type(error).__name__, "message": str(error), "exit_code": 3}
    try:
        write_json_file(os.path.join(output_dir, ERROR_FILE_NAME), document)
    except EckhausKdVException:
        logging.exception(f"could not write {ERROR_FILE_NAME} to {output_dir}")
    print(json.dumps(document), file=sys.stderr)
    return document


def run_command(command: str, config_file_path: str) -> int:
    output_dir = stage_dir(STAGE_DIRS.get(command, command))
    try:
        configuration = ExperimentConfiguration(command, config_file_path)
        output_dir = configuration.output_dir
        COMMANDS[command](configuration)
        return 0
    except Exception as e:
        logging.exception(f"{command} failed")
        return write_error(e, output_dir)["exit_code"]


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run_command(args.command, args.config)
