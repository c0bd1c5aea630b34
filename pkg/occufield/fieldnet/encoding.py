"""
Sinusoidal positional encoding of 3-D points
"""

import numpy as np


def encoded_size(frequencies: int) -> int:
    return 3 + 6 * frequencies


def positional_encode(points: np.ndarray, frequencies: int = 6) -> np.ndarray:
    """
    [p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(L-1) pi p), cos(2^(L-1) pi p)]

    points: (N, 3) or (3,). Returns (N, 3 + 6L); a single point keeps a
    leading batch axis of 1.
    """
    if frequencies < 0:
        raise ValueError(f"Frequency count must be >= 0, got {frequencies}")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[-1] != 3:
        raise ValueError(f"positional_encode expects 3-vectors, got shape {points.shape}")
    parts = [points]
    for k in range(frequencies):
        scaled = (2.0 ** k) * np.pi * points
        parts.append(np.sin(scaled))
        parts.append(np.cos(scaled))
    return np.concatenate(parts, axis=-1)
