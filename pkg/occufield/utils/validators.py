"""
Validation utilities for pipeline inputs
"""

import os
import re
from typing import Any, Union

import numpy as np


def validate_positive_int(name: str, value: Any) -> int:
    """Validate a strictly positive count"""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValueError(f"Invalid type for {name}: {type(value)}")
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return int(value)


def validate_non_negative(name: str, value: Union[int, float]) -> float:
    """Validate a non-negative scalar such as a loss weight"""
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"Invalid value for {name}: {value!r}")
    if not np.isfinite(number) or number < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value}")
    return number


def validate_creatable_dir(path: str) -> str:
    """Validate that a directory exists or can be created"""
    if not path or not isinstance(path, str):
        raise ValueError(f"Invalid directory path: {path!r}")
    if os.path.exists(path) and not os.path.isdir(path):
        raise ValueError(f"Path exists and is not a directory: {path}")
    parent = os.path.dirname(os.path.abspath(path))
    while parent and not os.path.exists(parent):
        parent = os.path.dirname(parent)
    if not os.access(parent, os.W_OK):
        raise ValueError(f"Directory is not creatable: {path}")
    return path


def validate_view_spec(spec: str) -> float:
    """Validate a view spec: 'front', 'back' or an azimuth in degrees; returns the azimuth"""
    if not spec or not isinstance(spec, str):
        raise ValueError(f"Invalid view spec: {spec!r}")
    spec = spec.strip().lower()
    if spec == 'front':
        return 0.0
    if spec == 'back':
        return 180.0
    if re.match(r'^-?\d+(\.\d+)?$', spec):
        return float(spec) % 360.0
    raise ValueError(f"Invalid view spec: {spec!r}")
