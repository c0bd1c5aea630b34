"""
Image reading and writing (PNG or binary PPM, chosen by file suffix)

Images are float arrays in [0, 1] with shape (H, W, 3), row-major, top-left
origin. Normalized coordinate (-1, -1) is the top-left pixel center.
"""

import os

import numpy as np
from PIL import Image


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_image(path: str, image: np.ndarray) -> str:
    """Write an (H, W, 3) RGB or (H, W) gray image in [0, 1]"""
    array = to_uint8(image)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    suffix = os.path.splitext(path)[1].lower()
    if suffix not in ('.png', '.ppm', '.pgm'):
        raise ValueError(f"Unsupported image format: {path}")
    Image.fromarray(array).save(path, format='PNG' if suffix == '.png' else 'PPM')
    return path


def write_mask(path: str, mask: np.ndarray) -> str:
    return write_image(path, np.asarray(mask, dtype=np.float64))


def read_image(path: str) -> np.ndarray:
    """Read an image as float (H, W, 3) in [0, 1]"""
    with Image.open(path) as img:
        return np.asarray(img.convert('RGB'), dtype=np.float64) / 255.0


def read_mask(path: str) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert('L')) >= 128


def to_chw(image: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(np.asarray(image, dtype=np.float64), -1, 0))


def to_hwc(image: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(np.asarray(image, dtype=np.float64), 0, -1))
