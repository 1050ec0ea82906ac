"""Binary file formats for bit streams and pulse trains.

Bit stream (``.bits``)::

    b"SPB1" | uint64 LE bit count | bits packed 8 per byte, first bit in the LSB

Pulse train (``.pulses``)::

    b"SPP1" | uint64 LE pulse count | float64 LE timestamps in ns
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

BITS_MAGIC = b"SPB1"
PULSES_MAGIC = b"SPP1"
_COUNT = struct.Struct("<Q")


class FormatError(ValueError):
    pass


def _read_header(data: bytes, magic: bytes, path) -> tuple[int, memoryview]:
    head = len(magic) + _COUNT.size
    if len(data) < head or data[:len(magic)] != magic:
        raise FormatError(f"{path}: missing {magic!r} header")
    (count,) = _COUNT.unpack_from(data, len(magic))
    return count, memoryview(data)[head:]


def write_bits(path, bits) -> None:
    bits = np.asarray(getattr(bits, "bits", bits), dtype=np.uint8)
    if bits.size and bits.max() > 1:
        raise ValueError("bit stream may only contain 0 and 1")
    payload = np.packbits(bits, bitorder="little").tobytes()
    Path(path).write_bytes(BITS_MAGIC + _COUNT.pack(bits.size) + payload)


def read_bits(path) -> np.ndarray:
    data = Path(path).read_bytes()
    count, body = _read_header(data, BITS_MAGIC, path)
    if len(body) != (count + 7) // 8:
        raise FormatError(f"{path}: expected {(count + 7) // 8} payload bytes, got {len(body)}")
    raw = np.frombuffer(body, dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little", count=count)


def write_pulses(path, timestamps) -> None:
    ts = np.asarray(getattr(timestamps, "timestamps", timestamps), dtype="<f8")
    Path(path).write_bytes(PULSES_MAGIC + _COUNT.pack(ts.size) + ts.tobytes())


def read_pulses(path) -> np.ndarray:
    data = Path(path).read_bytes()
    count, body = _read_header(data, PULSES_MAGIC, path)
    if len(body) != 8 * count:
        raise FormatError(f"{path}: expected {8 * count} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f8").astype(np.float64)
