import os
import sys
from typing import Union

from pydantic import ValidationError

from eckhaus_kdv.constants import (
    COEFFICIENTS_DIR_NAME,
    RESOLVED_CONFIG_FILE_NAME,
    SIMULATION_DIR_NAME,
    SPECTRUM_DIR_NAME,
    VALIDATION_DIR_NAME,
)
from eckhaus_kdv.entity.config_entity import (
    CoeffsConfig,
    ParamsSchema,
    SimulateConfig,
    SpectrumConfig,
    ValidateConfig,
    stage_dir,
)
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import ConfigValidationError, EckhausKdVException
from eckhaus_kdv.logger import logging
from eckhaus_kdv.utils.main_utils import read_yaml_file, write_yaml_file

ExperimentConfig = Union[SpectrumConfig, SimulateConfig, ValidateConfig, CoeffsConfig]

COMMAND_SCHEMAS = {
    "spectrum": SpectrumConfig,
    "simulate": SimulateConfig,
    "validate": ValidateConfig,
    "coeffs": CoeffsConfig,
}

STAGE_DIRS = {
    "spectrum": SPECTRUM_DIR_NAME,
    "simulate": SIMULATION_DIR_NAME,
    "validate": VALIDATION_DIR_NAME,
    "coeffs": COEFFICIENTS_DIR_NAME,
}


class ExperimentConfiguration:
    """
    Class Name :   ExperimentConfiguration
    Description :   Reads the YAML experiment document of a command and validates it
                    against the command's schema before anything is computed

    Output      :   validated experiment config in ``self.config``
    On Failure  :   raises ConfigValidationError
    """

    def __init__(self, command: str, config_file_path: str) -> None:
        if command not in COMMAND_SCHEMAS:
            raise ConfigValidationError(f"unknown command {command!r}; expected one of {list(COMMAND_SCHEMAS)}", sys)
        if not os.path.exists(config_file_path):
            raise ConfigValidationError(f"config file {config_file_path} does not exist", sys)
        try:
            document = read_yaml_file(config_file_path)
        except EckhausKdVException as e:
            raise ConfigValidationError(f"config file {config_file_path} is not valid YAML: {e}", sys) from e
        if not isinstance(document, dict):
            raise ConfigValidationError(f"config file {config_file_path} must hold a key-value document", sys)
        try:
            self.config: ExperimentConfig = COMMAND_SCHEMAS[command].model_validate(document)
        except ValidationError as e:
            raise ConfigValidationError(f"invalid {command} config {config_file_path}: {e}", sys) from e
        self.command = command
        self.config_file_path = config_file_path
        logging.info(f"loaded {command} config from {config_file_path}")

    @property
    def output_dir(self) -> str:
        return stage_dir(STAGE_DIRS[self.command], self.config.output_dir)

    def resolved(self) -> dict:
        return self.config.model_dump(mode="json")

    def write_resolved(self, output_dir: str) -> str:
        file_path = os.path.join(output_dir, RESOLVED_CONFIG_FILE_NAME)
        write_yaml_file(file_path, self.resolved(), replace=True)
        return file_path


def params_from_schema(schema: ParamsSchema) -> CGLParams:
    """Explicit zeta wins; otherwise the marginal wave train sigma = sigma_s - eps^2."""
    if schema.zeta is not None:
        return CGLParams(
            alpha=schema.alpha, beta=schema.beta, zeta=schema.zeta, epsilon=schema.epsilon or 0.0, c=schema.c
        )
    if schema.epsilon:
        return CGLParams.marginal(schema.alpha, schema.beta, schema.epsilon, c=schema.c)
    raise ConfigValidationError("params need either zeta or epsilon > 0", sys)
