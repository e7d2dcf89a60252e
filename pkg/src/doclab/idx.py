"""Reader and writer for the big-endian IDX container used by MNIST.

Layout: 2 zero bytes, a type byte (0x08 = unsigned byte), a dimension-count
byte, one big-endian uint32 size per dimension, then the payload. Files ending
in ``.gz`` are transparently decompressed.
"""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Base class for malformed IDX input."""

    def __init__(self, message: str, field: str, offset: int):
        super().__init__(f"{message} (field {field!r} at byte offset {offset})")
        self.field = field
        self.offset = offset


class BadMagicError(IdxFormatError):
    pass


class TruncatedPayloadError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def parse_idx(raw: bytes, expected_magic: int, name: str = "idx") -> np.ndarray:
    """Decode one IDX blob into a uint8 array of the declared shape."""
    if len(raw) < 4:
        raise TruncatedPayloadError(f"{name}: file shorter than the 4-byte magic", "magic", 0)
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise BadMagicError(f"{name}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}", "magic", 0)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedPayloadError(f"{name}: header needs {header} bytes, file has {len(raw)}", "dims", 4)
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header < size:
        raise TruncatedPayloadError(
            f"{name}: payload needs {size} bytes, found {len(raw) - header}", "payload", header)
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Load an image/label IDX pair.

    Returns images flattened to float64 rows scaled to [0, 1] and int64 labels.
    """
    images = parse_idx(_read_bytes(images_path), IMAGES_MAGIC, str(images_path))
    labels = parse_idx(_read_bytes(labels_path), LABELS_MAGIC, str(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels", "count", 4)
    flat = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return flat, labels.astype(np.int64)


def encode_idx(array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    return struct.pack(f">I{array.ndim}I", magic, *array.shape) + array.tobytes()


def write_idx(path, array: np.ndarray) -> None:
    Path(path).write_bytes(encode_idx(array))
