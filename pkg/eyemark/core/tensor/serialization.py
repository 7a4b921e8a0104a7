"""Flat binary tensor format.

Layout of one record::

    b"EYEMARK1" | u32 rank | u32 extent * rank | f64 payload (row-major)

All integers and floats are little-endian.
"""

from pathlib import Path
from typing import BinaryIO

import numpy as np

from core.errors import EyemarkError

MAGIC = b"EYEMARK1"
_U32 = np.dtype("<u4")
_F64 = np.dtype("<f8")


def tensor_to_bytes(array : np.ndarray) -> bytes:
    """Encodes an array as one tensor record."""
    values = np.ascontiguousarray(array, dtype = _F64)
    header = np.asarray([values.ndim, *values.shape], dtype = _U32).tobytes()
    return MAGIC + header + values.tobytes()


def read_tensor(stream : BinaryIO) -> np.ndarray:
    """Reads one tensor record from a binary stream.

    Raises:
        EyemarkError: If the magic does not match or the stream is truncated.
    """
    magic = stream.read(len(MAGIC))
    if magic != MAGIC:
        raise EyemarkError(f"bad tensor magic {magic!r}")
    rank = int(np.frombuffer(_read_exact(stream, 4), dtype = _U32)[0])
    shape = tuple(int(v) for v in np.frombuffer(_read_exact(stream, 4 * rank), dtype = _U32))
    count = int(np.prod(shape, dtype = np.int64))
    payload = _read_exact(stream, 8 * count)
    return np.frombuffer(payload, dtype = _F64).astype(np.float64).reshape(shape)


def write_tensor(stream : BinaryIO, array : np.ndarray) -> int:
    """Writes one tensor record and returns the number of bytes written."""
    record = tensor_to_bytes(array)
    stream.write(record)
    return len(record)


def save_tensor(path : Path, array : np.ndarray):
    path.parent.mkdir(parents = True, exist_ok = True)
    with path.open("wb") as stream:
        write_tensor(stream, array)


def load_tensor(path : Path) -> np.ndarray:
    with path.open("rb") as stream:
        return read_tensor(stream)


def _read_exact(stream : BinaryIO, count : int) -> bytes:
    data = stream.read(count)
    if len(data) != count:
        raise EyemarkError("truncated tensor record")
    return data
