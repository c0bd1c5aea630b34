"""
Helper utilities for the reconstruction pipeline
"""

import json
import os
from typing import Any, Dict, List

import numpy as np


def load_config_file(file_path: str) -> Dict[str, Any]:
    """Load configuration from JSON file"""
    try:
        with open(file_path, 'r') as f:
            return json.load(f)
    except FileNotFoundError:
        return {}
    except json.JSONDecodeError:
        return {}


def chunk_slices(total: int, chunk_size: int) -> List[slice]:
    """Split a row count into contiguous slices"""
    return [slice(i, min(i + chunk_size, total)) for i in range(0, total, chunk_size)]


def write_key_values(file_path: str, values: Dict[str, Any]) -> None:
    """Write a plain-text key=value file, keys in insertion order"""
    lines = []
    for key, value in values.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            value = ",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                             for v in np.ravel(value))
        elif isinstance(value, (float, np.floating)):
            value = repr(float(value))
        lines.append(f"{key}={value}")
    with open(file_path, 'w') as f:
        f.write("\n".join(lines) + "\n")


def read_key_values(file_path: str) -> Dict[str, str]:
    """Read a plain-text key=value file; blank lines and '#' comments are skipped"""
    values = {}
    with open(file_path, 'r') as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            if '=' not in line:
                raise ValueError(f"Malformed line in {file_path}: {line!r}")
            key, value = line.split('=', 1)
            values[key.strip()] = value.strip()
    return values


def parse_float_list(value: str) -> List[float]:
    """Parse a comma separated float list written by write_key_values"""
    return [float(v) for v in value.split(',') if v.strip()]


def ensure_dir(path: str) -> str:
    """Create a directory if needed and return it"""
    os.makedirs(path, exist_ok=True)
    return path
