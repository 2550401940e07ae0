"""
fileio.py
---------
Binary and CSV matrix codecs.

MVF1 layout: magic ``MVF1``, u32 LE rows, u32 LE cols, then rows*cols f64 LE
values in row-major order. The same payload encoding is reused for every
matrix stored inside a model checkpoint.
"""

import io
import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
import pandas as pd

from .errors import DatasetError

MVF_MAGIC = b"MVF1"
_HEADER = struct.Struct("<4sII")

PathLike = Union[str, Path]


# ---------------------------------------------------------
# MVF1 payloads (stream level)
# ---------------------------------------------------------

def write_mvf_payload(stream: BinaryIO, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DatasetError(f"MVF1 stores 2-D matrices, got shape {matrix.shape}")
    rows, cols = matrix.shape
    stream.write(_HEADER.pack(MVF_MAGIC, rows, cols))
    stream.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def read_mvf_payload(stream: BinaryIO, source: str = "<stream>") -> np.ndarray:
    header = stream.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise DatasetError(f"{source}: truncated MVF1 header")
    magic, rows, cols = _HEADER.unpack(header)
    if magic != MVF_MAGIC:
        raise DatasetError(f"{source}: bad magic {magic!r}, expected {MVF_MAGIC!r}")
    n_bytes = rows * cols * 8
    body = stream.read(n_bytes)
    if len(body) != n_bytes:
        raise DatasetError(f"{source}: expected {rows}x{cols} values, file is truncated")
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)


# ---------------------------------------------------------
# Files
# ---------------------------------------------------------

def write_mvf(path: PathLike, matrix: np.ndarray) -> None:
    with open(path, "wb") as f:
        write_mvf_payload(f, matrix)


def read_mvf(path: PathLike) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        data = f.read()
    stream = io.BytesIO(data)
    matrix = read_mvf_payload(stream, source=str(path))
    if stream.read(1):
        raise DatasetError(f"{path}: trailing bytes after MVF1 payload")
    return matrix


def read_numeric_csv(path: PathLike) -> np.ndarray:
    """Headerless numeric CSV, one row per sample."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, header=None, float_precision="round_trip")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise DatasetError(f"{path}: cannot parse CSV ({exc})") from exc
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    if np.isnan(values).any():
        row = int(np.argmax(np.isnan(values).any(axis=1)))
        raise DatasetError(f"{path}: missing or non-numeric value at row {row}")
    return values


def write_numeric_csv(path: PathLike, matrix: np.ndarray, integer: bool = False) -> None:
    values = np.asarray(matrix)
    frame = pd.DataFrame(values.astype(np.int64) if integer else values)
    if integer:
        frame.to_csv(path, header=False, index=False)
    else:
        frame.to_csv(path, header=False, index=False, float_format="%.17g")
