"""
Seeded counter-based random streams

Every stochastic operation takes an explicit numpy Generator. Streams are
derived from (seed, path) through a SeedSequence spawn key feeding the
Philox counter-based bit generator, so two different paths never share
state and the same path always reproduces the same draws.
"""

import zlib

import numpy as np


def _path_key(path) -> tuple:
    return tuple(zlib.crc32(str(part).encode('utf-8')) for part in path)


def make_stream(seed: int, *path) -> np.random.Generator:
    """Independent generator for (seed, *path)"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=_path_key(path))
    return np.random.Generator(np.random.Philox(sequence))
