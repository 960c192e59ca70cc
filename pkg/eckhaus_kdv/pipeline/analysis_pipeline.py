import os
import sys

import numpy as np
import pandas as pd

from eckhaus_kdv.components.kdv_approx import make_coefficients, marginal_defect, tilde_coefficients
from eckhaus_kdv.components.spectral_analysis import (
    check_spectral_bounds,
    classify_region,
    damped_dispersion,
    eckhaus_boundary,
    eval_dispersion,
    expansion_coeffs,
    sideband_threshold,
    unstable_band,
)
from eckhaus_kdv.configuration import ExperimentConfiguration, params_from_schema
from eckhaus_kdv.constants import (
    COEFFICIENTS_CSV_FILE_NAME,
    COEFFICIENTS_JSON_FILE_NAME,
    MANIFEST_FILE_NAME,
    SPECTRUM_DISPERSION_FILE_NAME,
    SPECTRUM_SUMMARY_FILE_NAME,
)
from eckhaus_kdv.entity.artifact_entity import CoefficientsArtifact, Region, SpectrumArtifact
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import EckhausKdVException, ParameterDomainError
from eckhaus_kdv.logger import logging
from eckhaus_kdv.utils.main_utils import to_jsonable, write_csv_table, write_json_file, write_manifest


class SpectrumPipeline:
    def __init__(self, configuration: ExperimentConfiguration):
        self.configuration = configuration
        self.config = configuration.config
        self.output_dir = configuration.output_dir

    def start_dispersion_scan(self, params: CGLParams) -> str:
        """
        This method of SpectrumPipeline class writes the dispersion curves and the damped curves on a symmetric k-range
        """
        try:
            logging.info("Entered the start_dispersion_scan method of SpectrumPipeline class")
            k = np.linspace(-self.config.k_max, self.config.k_max, self.config.n_k)
            sample = eval_dispersion(params, k)
            damped_plus, damped_minus = damped_dispersion(params, k, self.config.eta)
            table = pd.DataFrame(
                {
                    "k": k,
                    "re_lambda_plus": sample.lambda_plus.real,
                    "im_lambda_plus": sample.lambda_plus.imag,
                    "re_lambda_minus": sample.lambda_minus.real,
                    "im_lambda_minus": sample.lambda_minus.imag,
                    "re_lambda2_plus": damped_plus.real,
                    "im_lambda2_plus": damped_plus.imag,
                    "re_lambda2_minus": damped_minus.real,
                    "im_lambda2_minus": damped_minus.imag,
                }
            )
            file_path = os.path.join(self.output_dir, SPECTRUM_DISPERSION_FILE_NAME)
            write_csv_table(file_path, table)
            logging.info("Exited the start_dispersion_scan method of SpectrumPipeline class")
            return file_path
        except Exception as e:
            raise EckhausKdVException(e, sys) from e

    def start_summary(self, params: CGLParams) -> dict:
        """
        This method of SpectrumPipeline class collects thresholds, region, expansion coefficients and bounds
        """
        try:
            alpha, beta = params.alpha, params.beta
            notes = []
            verdict = classify_region(alpha, beta)
            try:
                sigma_s, zeta_s = sideband_threshold(alpha, beta)
            except ParameterDomainError:
                sigma_s = zeta_s = None
                notes.append("1 + alpha*beta <= 0: no sideband threshold")

            zeta_bd = None if zeta_s is None else eckhaus_boundary(alpha, beta)

            bounds = []
            if verdict.region == Region.SIDEBAND_AS and alpha != beta:
                for eps in self.config.bounds_epsilons:
                    marginal = CGLParams.marginal(alpha, beta, eps, c=params.c)
                    bounds.append(check_spectral_bounds(marginal, kmax=self.config.k_max, n=self.config.bounds_n_k))
            elif self.config.bounds_epsilons:
                notes.append(f"spectral bounds skipped: region {verdict.region.value}")

            return {
                "params": params.as_dict(),
                "sigma": params.sigma,
                "sigma_s": sigma_s,
                "zeta_s": zeta_s,
                "zeta_bd_sq": None if zeta_bd is None else zeta_bd ** 2,
                "region": verdict.region.value,
                "r_of_z": verdict.r_of_z,
                "expansion": expansion_coeffs(params),
                "unstable_band": unstable_band(params, kmax=self.config.k_max),
                "bounds": bounds,
                "notes": notes,
            }
        except Exception as e:
            raise EckhausKdVException(e, sys) from e

    def run_pipeline(self) -> SpectrumArtifact:
        try:
            params = params_from_schema(self.config.params)
            dispersion_file_path = self.start_dispersion_scan(params)
            summary = self.start_summary(params)
            summary_file_path = os.path.join(self.output_dir, SPECTRUM_SUMMARY_FILE_NAME)
            write_json_file(summary_file_path, summary)
            resolved_file_path = self.configuration.write_resolved(self.output_dir)
            manifest_file_path = os.path.join(self.output_dir, MANIFEST_FILE_NAME)
            write_manifest(
                manifest_file_path,
                "spectrum",
                self.configuration.resolved(),
                [dispersion_file_path, summary_file_path, resolved_file_path],
                {"region": summary["region"], "zeta_bd_sq": summary["zeta_bd_sq"]},
            )
            return SpectrumArtifact(
                dispersion_file_path=dispersion_file_path,
                summary_file_path=summary_file_path,
                manifest_file_path=manifest_file_path,
            )
        except Exception as e:
            raise EckhausKdVException(e, sys) from e


class CoefficientsPipeline:
    def __init__(self, configuration: ExperimentConfiguration):
        self.configuration = configuration
        self.config = configuration.config
        self.output_dir = configuration.output_dir

    def start_coefficients(self, params: CGLParams) -> dict:
        """
        This method of CoefficientsPipeline class evaluates the ansatz and expansion coefficients
        """
        try:
            logging.info("Entered the start_coefficients method of CoefficientsPipeline class")
            coeffs = make_coefficients(params)
            expansion = expansion_coeffs(params)
            gamma_lin_tilde, gamma_non_tilde = tilde_coefficients(params)
            return {
                "params": params.as_dict(),
                "ansatz": coeffs,
                "expansion": expansion,
                "marginal_defect": marginal_defect(coeffs),
                "tilde": {"gamma_lin": gamma_lin_tilde, "gamma_non": gamma_non_tilde},
                "gamma_lin_plus_c3s": coeffs.gamma_lin + expansion.c3s,
            }
        except Exception as e:
            raise EckhausKdVException(e, sys) from e

    def run_pipeline(self) -> CoefficientsArtifact:
        try:
            params = params_from_schema(self.config.params)
            result = self.start_coefficients(params)
            json_file_path = os.path.join(self.output_dir, COEFFICIENTS_JSON_FILE_NAME)
            write_json_file(json_file_path, result)

            plain = to_jsonable(result)
            rows = [("ansatz", name, value) for name, value in result["ansatz"].as_dict().items()]
            rows += [("expansion", name, value) for name, value in plain["expansion"].items()]
            rows += [("tilde", name, value) for name, value in plain["tilde"].items()]
            rows.append(("checks", "marginal_defect", plain["marginal_defect"]))
            table = pd.DataFrame(rows, columns=["table", "name", "value"])
            csv_file_path = os.path.join(self.output_dir, COEFFICIENTS_CSV_FILE_NAME)
            write_csv_table(csv_file_path, table)
            for name, group in table.groupby("table", sort=False):
                print(f"[{name}]")
                print(group[["name", "value"]].to_string(index=False, float_format=lambda v: f"{v:.17g}"))

            resolved_file_path = self.configuration.write_resolved(self.output_dir)
            write_manifest(
                os.path.join(self.output_dir, MANIFEST_FILE_NAME),
                "coeffs",
                self.configuration.resolved(),
                [json_file_path, csv_file_path, resolved_file_path],
            )
            return CoefficientsArtifact(json_file_path=json_file_path, csv_file_path=csv_file_path)
        except Exception as e:
            raise EckhausKdVException(e, sys) from e
