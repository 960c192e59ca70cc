import os
import sys
from typing import Optional

import numpy as np

from eckhaus_kdv.components.fourier_core import SpectralGrid
from eckhaus_kdv.components.kdv_approx import ansatz_state, kdv_profile, make_coefficients, x_grid_for
from eckhaus_kdv.components.pde_solvers import (
    CGLField,
    ModulationState,
    build_modulated_cgl,
    simulate,
    wave_train,
)
from eckhaus_kdv.components.validation import xi_grid_for
from eckhaus_kdv.configuration import ExperimentConfiguration, params_from_schema
from eckhaus_kdv.constants import (
    MANIFEST_FILE_NAME,
    SIMULATION_SNAPSHOT_DIR,
    SIMULATION_TRAJECTORY_OBJECT_FILE_NAME,
)
from eckhaus_kdv.data_access.field_store import FieldStore
from eckhaus_kdv.entity.artifact_entity import SimulationArtifact, Trajectory
from eckhaus_kdv.entity.config_entity import SimulateConfig, StepperConfig
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import EckhausKdVException
from eckhaus_kdv.logger import logging
from eckhaus_kdv.utils.main_utils import save_object, write_manifest


class SimulationPipeline:
    def __init__(self, configuration: ExperimentConfiguration):
        self.configuration = configuration
        self.config: SimulateConfig = configuration.config
        self.output_dir = configuration.output_dir

    def _x_grid(self, params: CGLParams) -> SpectralGrid:
        grid = self.config.grid
        refine = grid.x_refine or 1
        if params.epsilon > 0.0:
            return x_grid_for(xi_grid_for(grid), params.epsilon, refine)
        return SpectralGrid(grid.n_xi * refine, 2.0 * np.pi * grid.periods)

    def _ansatz(self, params: CGLParams) -> ModulationState:
        profile = self.config.profile
        a0 = kdv_profile(
            profile.name, xi_grid_for(self.config.grid), profile.amplitude, profile.width, profile.center,
            profile.mean_free,
        )
        return ansatz_state(a0, make_coefficients(params), params, self.config.order, self._x_grid(params))

    def start_initial_state(self, params: CGLParams):
        """
        This method of SimulationPipeline class builds the initial state named in the config
        """
        try:
            logging.info(f"Entered the start_initial_state method ({self.config.system}, {self.config.initial})")
            initial = self.config.initial
            if self.config.system == "modulation":
                if initial == "kdv-ansatz":
                    return self._ansatz(params)
                return ModulationState.zeros(self._x_grid(params))

            if initial == "modulated-ansatz":
                return build_modulated_cgl(params, self._ansatz(params), X0=self.config.X0)
            grid = self.config.grid
            lab_grid = SpectralGrid(
                grid.n_xi * (grid.x_refine or 1), 2.0 * np.pi * grid.periods / abs(params.zeta)
            )
            if initial == "wave-train":
                return wave_train(params, lab_grid)
            return CGLField.zeros(lab_grid)
        except Exception as e:
            raise EckhausKdVException(e, sys) from e

    def start_simulation(self, initial, params: CGLParams) -> Trajectory:
        stepper = self.config.stepper
        config = StepperConfig(
            dt=stepper.dt,
            t_end=self.config.t_end,
            scheme=stepper.scheme,
            dealias=stepper.dealias,
            record_stride=stepper.record_stride,
        )
        tracker = self.config.X0 if self.config.phase_track else None
        return simulate(initial, params, config, phase_track=tracker)

    def equilibrium_drift(self, trajectory: Trajectory, params: CGLParams) -> Optional[float]:
        """sup distance from the equilibrium the run started on, over all records."""
        if self.config.initial == "wave-train":
            grid = trajectory.states[0].grid
            return max(
                float(np.max(np.abs(state.psi.physical() - wave_train(params, grid, t).psi.physical())))
                for t, state in zip(trajectory.times, trajectory.states)
            )
        if self.config.initial == "zero":
            return max(state.sup() for state in trajectory.states)
        return None

    def start_export(self, trajectory: Trajectory, params: CGLParams) -> SimulationArtifact:
        try:
            snapshot_dir = os.path.join(self.output_dir, SIMULATION_SNAPSHOT_DIR)
            store = FieldStore(snapshot_dir)
            snapshots = store.export_trajectory(trajectory)
            dumps = store.dump_final(trajectory.final, self.output_dir)
            trajectory_file_path = os.path.join(self.output_dir, SIMULATION_TRAJECTORY_OBJECT_FILE_NAME)
            save_object(trajectory_file_path, trajectory)
            drift = self.equilibrium_drift(trajectory, params)
            resolved_file_path = self.configuration.write_resolved(self.output_dir)

            manifest_file_path = os.path.join(self.output_dir, MANIFEST_FILE_NAME)
            write_manifest(
                manifest_file_path,
                "simulate",
                self.configuration.resolved(),
                dumps + [trajectory_file_path, resolved_file_path],
                {
                    "params": params.as_dict(),
                    "steps": trajectory.steps,
                    "records": len(trajectory),
                    "snapshots": len(snapshots),
                    "wall_time": trajectory.wall_time,
                    "guard_tripped": trajectory.guard_tripped,
                    "drift": drift,
                },
            )
            return SimulationArtifact(
                snapshot_dir=snapshot_dir,
                manifest_file_path=manifest_file_path,
                trajectory_file_path=trajectory_file_path,
                field_dump_file_paths=dumps,
                drift=drift,
            )
        except Exception as e:
            raise EckhausKdVException(e, sys) from e

    def run_pipeline(self) -> SimulationArtifact:
        try:
            params = params_from_schema(self.config.params)
            initial = self.start_initial_state(params)
            trajectory = self.start_simulation(initial, params)
            artifact = self.start_export(trajectory, params)
            logging.info(f"simulation artifact: {artifact}")
            return artifact
        except Exception as e:
            raise EckhausKdVException(e, sys) from e
