"""
LWM1 parameter files.

Layout (little-endian):
    b"LWM1" | count u32 | count x [name_len u32 | name utf-8 | rank u32 | dims u32*rank | float64 payload]

Readers work on open binary streams so callers may append their own
trailing blocks (the world-model file adds its configuration after the
parameter table).
"""

import struct
from pathlib import Path
from typing import BinaryIO, Dict, Mapping, Optional

import numpy as np

from utils.error_handler import FormatVersionError, DimensionMismatchError, TruncatedFileError

MAGIC = b"LWM1"


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise TruncatedFileError(f"Unexpected end of file while reading {what}")
    return data


def write_params(stream: BinaryIO, params: Mapping[str, np.ndarray]) -> None:
    stream.write(MAGIC)
    stream.write(struct.pack("<I", len(params)))
    for name in sorted(params):
        array = np.asarray(params[name], dtype="<f8")
        encoded = name.encode("utf-8")
        stream.write(struct.pack("<I", len(encoded)))
        stream.write(encoded)
        stream.write(struct.pack("<I", array.ndim))
        if array.ndim:
            stream.write(struct.pack(f"<{array.ndim}I", *array.shape))
        stream.write(np.ascontiguousarray(array).tobytes())


def read_params(stream: BinaryIO,
                expected_shapes: Optional[Mapping[str, tuple]] = None) -> Dict[str, np.ndarray]:
    """
    Read one parameter table; when `expected_shapes` is given every name
    must be present with exactly that shape and no extra names are allowed.
    """
    if _read_exact(stream, 4, "magic") != MAGIC:
        raise FormatVersionError("Not an LWM1 parameter file (bad magic bytes)")
    (count,) = struct.unpack("<I", _read_exact(stream, 4, "parameter count"))

    params: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", _read_exact(stream, 4, "name length"))
        name = _read_exact(stream, name_len, "parameter name").decode("utf-8")
        (rank,) = struct.unpack("<I", _read_exact(stream, 4, "rank"))
        dims = struct.unpack(f"<{rank}I", _read_exact(stream, 4 * rank, "dims")) if rank else ()
        size = int(np.prod(dims)) if dims else 1
        payload = _read_exact(stream, 8 * size, f"payload of '{name}'")
        params[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)

    if expected_shapes is not None:
        missing = sorted(set(expected_shapes) - set(params))
        extra = sorted(set(params) - set(expected_shapes))
        if missing or extra:
            raise DimensionMismatchError(f"Parameter names differ from configuration (missing={missing}, extra={extra})")
        for name, shape in expected_shapes.items():
            if params[name].shape != tuple(shape):
                raise DimensionMismatchError(
                    f"Parameter '{name}' has shape {params[name].shape}, configuration expects {tuple(shape)}")
    return params


def save_params(path, params: Mapping[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        write_params(f, params)


def load_params(path, expected_shapes: Optional[Mapping[str, tuple]] = None) -> Dict[str, np.ndarray]:
    with open(Path(path), "rb") as f:
        return read_params(f, expected_shapes)
