"""
OCCF1 checkpoint format

    magic  b"OCCF1"
    per record:
        int64  name length (bytes)
        bytes  UTF-8 name
        int64  rank
        int64  dims[rank]
        float64 values[prod(dims)]

All integers and floats are little-endian. Records run to end of file.
"""

import logging
import os
import struct
from collections import OrderedDict
from typing import Dict, Mapping, Union

import numpy as np

from .tensor import Tensor

MAGIC = b"OCCF1"

logger = logging.getLogger(__name__)


def save_checkpoint(path: str, tensors: Mapping[str, Union[np.ndarray, Tensor]]) -> str:
    """Write tensors to `path` atomically (temp file + rename)"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, 'wb') as f:
        f.write(MAGIC)
        for name, value in tensors.items():
            array = value.data if isinstance(value, Tensor) else np.asarray(value)
            array = np.ascontiguousarray(array, dtype='<f8')
            encoded = name.encode('utf-8')
            f.write(struct.pack('<q', len(encoded)))
            f.write(encoded)
            f.write(struct.pack('<q', array.ndim))
            if array.ndim:
                f.write(struct.pack(f'<{array.ndim}q', *array.shape))
            f.write(array.tobytes())
    os.replace(tmp_path, path)
    logger.info(f"Checkpoint saved: {path} ({len(tensors)} tensors)")
    return path


def load_checkpoint(path: str) -> Dict[str, np.ndarray]:
    """Read an OCCF1 file into an ordered name -> array map"""
    with open(path, 'rb') as f:
        blob = f.read()
    if not blob.startswith(MAGIC):
        raise ValueError(f"Not an OCCF1 checkpoint: {path} (magic {blob[:len(MAGIC)]!r})")
    tensors: Dict[str, np.ndarray] = OrderedDict()
    offset = len(MAGIC)
    try:
        while offset < len(blob):
            (name_len,) = struct.unpack_from('<q', blob, offset)
            offset += 8
            name = blob[offset:offset + name_len].decode('utf-8')
            offset += name_len
            (rank,) = struct.unpack_from('<q', blob, offset)
            offset += 8
            dims = struct.unpack_from(f'<{rank}q', blob, offset) if rank else ()
            offset += 8 * rank
            count = int(np.prod(dims)) if rank else 1
            values = np.frombuffer(blob, dtype='<f8', count=count, offset=offset)
            offset += 8 * count
            tensors[name] = values.astype(np.float64).reshape(dims)
    except (struct.error, ValueError) as e:
        raise ValueError(f"Truncated or corrupt checkpoint {path}: {e}")
    return tensors


def select_prefix(tensors: Mapping[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    """Entries under `prefix`, with the prefix kept"""
    return OrderedDict((k, v) for k, v in tensors.items() if k.startswith(prefix))
