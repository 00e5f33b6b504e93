"""Seeded random substreams.

Every random draw in the package comes from a generator derived from a
root seed plus a purpose tag and integer indices, so adding new grid
points or repetitions never shifts the streams of existing ones.
"""

import zlib

import numpy as np


def _tag_key(tag):
    return zlib.crc32(str(tag).encode("utf-8"))


def substream(seed, tag, *indices):
    """Return an independent ``numpy.random.Generator`` for ``(seed, tag, *indices)``.

    ``indices`` may be ints or strings; strings are hashed with CRC32.
    """
    key = [_tag_key(tag)]
    for i in indices:
        key.append(int(i) if isinstance(i, (int, np.integer)) else _tag_key(i))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))
