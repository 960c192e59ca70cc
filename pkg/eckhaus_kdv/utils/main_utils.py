import dataclasses
import json
import os
import platform
import sys
from enum import Enum
from typing import List, Optional

import dill
import numpy as np
import pandas as pd
import scipy
import yaml
from pandas import DataFrame

from eckhaus_kdv.constants import CSV_FLOAT_FORMAT
from eckhaus_kdv.exception import EckhausKdVException
from eckhaus_kdv.logger import logging


def read_yaml_file(file_path: str) -> dict:
    try:
        with open(file_path, "rb") as yaml_file:
            return yaml.safe_load(yaml_file)

    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def write_yaml_file(file_path: str, content: object, replace: bool = False) -> None:
    try:
        if replace:
            if os.path.exists(file_path):
                os.remove(file_path)
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, "w") as file:
            yaml.safe_dump(to_jsonable(content), file, sort_keys=False)
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def to_jsonable(obj):
    """Plain python structure of dataclasses, enums, numpy scalars/arrays and complex numbers."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "model_dump"):
        return to_jsonable(obj.model_dump(mode="json"))
    return obj


def write_json_file(file_path: str, content: object) -> None:
    """JSON with shortest round-trip float repr; non-finite values are written as null."""
    try:
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, "w") as file:
            json.dump(_finite_or_none(to_jsonable(content)), file, indent=2)
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def _finite_or_none(obj):
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {key: _finite_or_none(value) for key, value in obj.items()}
    if isinstance(obj, list):
        return [_finite_or_none(value) for value in obj]
    return obj


def write_manifest(file_path: str, command: str, config: dict, files: List[str], results: Optional[dict] = None) -> dict:
    """Everything needed to re-run an experiment: the resolved config, produced files and library versions."""
    manifest = {
        "command": command,
        "config": config,
        "files": sorted(os.path.basename(f) for f in files),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
        "results": results or {},
    }
    write_json_file(file_path, manifest)
    logging.info(f"manifest written to {file_path}")
    return manifest


def read_json_file(file_path: str) -> dict:
    try:
        with open(file_path, "r") as file:
            return json.load(file)
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def write_csv_table(file_path: str, table: DataFrame) -> None:
    try:
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        table.to_csv(file_path, index=False, float_format=CSV_FLOAT_FORMAT)
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def load_object(file_path: str) -> object:
    logging.info("Entered the load_object method of utils")

    try:

        with open(file_path, "rb") as file_obj:
            obj = dill.load(file_obj)

        logging.info("Exited the load_object method of utils")

        return obj

    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def save_object(file_path: str, obj: object) -> None:
    logging.info("Entered the save_object method of utils")

    try:
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, "wb") as file_obj:
            dill.dump(obj, file_obj)

        logging.info("Exited the save_object method of utils")

    except Exception as e:
        raise EckhausKdVException(e, sys) from e
