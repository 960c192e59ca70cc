import os
import struct
import sys
from typing import Dict, List

import numpy as np
import pandas as pd

from eckhaus_kdv.components.fourier_core import SpectralField, SpectralGrid
from eckhaus_kdv.components.kdv_approx import KdVState
from eckhaus_kdv.components.pde_solvers import CGLField, ModulationState
from eckhaus_kdv.constants import (
    FIELD_DUMP_DTYPE,
    FIELD_DUMP_MAGIC,
    SIMULATION_FIELD_DUMP_PREFIX,
    SIMULATION_TIMES_FILE_NAME,
)
from eckhaus_kdv.entity.artifact_entity import Trajectory
from eckhaus_kdv.exception import EckhausKdVException, GridMismatchError
from eckhaus_kdv.logger import logging
from eckhaus_kdv.utils.main_utils import write_csv_table

_HEADER = struct.Struct("<8sqd4s")


def state_fields(state) -> Dict[str, SpectralField]:
    """Named fields of a recorded state."""
    if isinstance(state, ModulationState):
        return {"psi": state.psi_w, "s": state.s}
    if isinstance(state, CGLField):
        return {"Psi": state.psi}
    if isinstance(state, KdVState):
        return {"A": state.a}
    raise EckhausKdVException(f"no field layout for {type(state).__name__}", sys)


def state_frame(state) -> pd.DataFrame:
    fields = state_fields(state)
    grid = next(iter(fields.values())).grid
    columns = {"x": grid.x}
    for name, u in fields.items():
        values = u.physical()
        if u.is_real:
            columns[name] = values
        else:
            columns[f"re_{name}"] = values.real
            columns[f"im_{name}"] = values.imag
            columns[f"abs_{name}"] = np.abs(values)
    return pd.DataFrame(columns)


class FieldStore:
    """
    This class writes recorded trajectories as CSV snapshots and final fields as binary dumps
    """

    def __init__(self, directory: str):
        self.directory = directory

    def export_trajectory(self, trajectory: Trajectory) -> List[str]:
        try:
            os.makedirs(self.directory, exist_ok=True)
            paths = []
            for i, state in enumerate(trajectory.states):
                path = os.path.join(self.directory, f"snapshot_{i:05d}.csv")
                write_csv_table(path, state_frame(state))
                paths.append(path)
            index = pd.DataFrame({"record": np.arange(len(trajectory)), "t": trajectory.times})
            if trajectory.phase is not None:
                index["phase"] = trajectory.phase
            write_csv_table(os.path.join(self.directory, SIMULATION_TIMES_FILE_NAME), index)
            logging.info(f"exported {len(paths)} snapshots to {self.directory}")
            return paths
        except Exception as e:
            raise EckhausKdVException(e, sys) from e

    def dump_final(self, state, directory: str) -> List[str]:
        paths = []
        for name, u in state_fields(state).items():
            path = os.path.join(directory, f"{SIMULATION_FIELD_DUMP_PREFIX}{name}.bin")
            write_field_dump(path, u)
            paths.append(path)
        return paths


def write_field_dump(file_path: str, u: SpectralField) -> None:
    """magic, n (int64), L (float64), dtype code, then n interleaved (Re, Im) float64 coefficient pairs; little endian."""
    try:
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        pairs = np.empty(2 * u.grid.n, dtype="<f8")
        pairs[0::2] = u.coeffs.real
        pairs[1::2] = u.coeffs.imag
        with open(file_path, "wb") as file_obj:
            file_obj.write(_HEADER.pack(FIELD_DUMP_MAGIC, u.grid.n, u.grid.length, FIELD_DUMP_DTYPE))
            file_obj.write(pairs.tobytes())
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def read_field_dump(file_path: str, is_real: bool = False) -> SpectralField:
    try:
        with open(file_path, "rb") as file_obj:
            magic, n, length, dtype = _HEADER.unpack(file_obj.read(_HEADER.size))
            if magic != FIELD_DUMP_MAGIC or dtype != FIELD_DUMP_DTYPE:
                raise GridMismatchError(f"{file_path} is not a field dump (magic {magic!r}, dtype {dtype!r})", sys)
            pairs = np.frombuffer(file_obj.read(), dtype="<f8")
        if pairs.size != 2 * n:
            raise GridMismatchError(f"{file_path}: expected {2 * n} values, found {pairs.size}", sys)
        return SpectralField(SpectralGrid(int(n), float(length)), pairs[0::2] + 1j * pairs[1::2], is_real=is_real)
    except Exception as e:
        raise EckhausKdVException(e, sys) from e
