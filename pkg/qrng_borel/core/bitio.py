"""
File formats for bit sequences, bin series and timestamps.

Packed layout: ``b"QBIN"`` magic, bit count as little-endian uint32, then the
bits packed little-endian within bytes (bit k is bit ``k % 8`` of byte
``k // 8``). ASCII layout: ``'0'``/``'1'`` characters, newlines ignored.
Timestamps: CSV of integer nanoseconds, one per line, no header.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import fsspec
import numpy as np
import pandas as pd

from qrng_borel.core.common import (
    BitFormatError,
    LengthMismatchError,
    QrngError,
    as_bit_array,
    safe_file_url,
)
from qrng_borel.core.extract import BitSequence
from qrng_borel.core.source_sim import BinSeries, TimestampSeries

MAGIC = b"QBIN"
HEADER = struct.Struct("<4sI")

FORMAT_EXTENSIONS = {".txt": "ascii", ".bits": "packed"}
FORMATS = ("ascii", "packed")
TIMESTAMP_EXTENSIONS = (".csv",)

_NEWLINES = (ord("\n"), ord("\r"))


def detect_format(path, fmt: str | None = None) -> str:
    """
    Resolve the bit file format from an explicit choice or the file extension.

    Raises:
        BitFormatError: If neither is conclusive
    """
    if fmt:
        if fmt not in FORMATS:
            raise BitFormatError(f"unknown bit format {fmt!r}; choose ascii or packed")
        return fmt
    suffix = Path(str(path)).suffix.lower()
    if suffix in FORMAT_EXTENSIONS:
        return FORMAT_EXTENSIONS[suffix]
    raise BitFormatError(
        f"cannot infer bit format from {str(path)!r}; use a .txt or .bits extension or --format"
    )


def extension_for(fmt: str) -> str:
    return {v: k for k, v in FORMAT_EXTENSIONS.items()}[fmt]


def _read_bytes(path) -> bytes:
    url = safe_file_url(path)
    try:
        with fsspec.open(url, "rb") as f:
            return f.read()
    except OSError as e:
        raise QrngError(f"Cannot read {path}: {e}") from e


def _write_bytes(path, data: bytes) -> None:
    try:
        with fsspec.open(str(path), "wb") as f:
            f.write(data)
    except OSError as e:
        raise QrngError(f"Cannot write {path}: {e}") from e


def decode_ascii(data: bytes) -> np.ndarray:
    raw = np.frombuffer(data, dtype=np.uint8)
    symbols = raw[~np.isin(raw, _NEWLINES)]
    bad = (symbols != ord("0")) & (symbols != ord("1"))
    if bad.any():
        # Report the offset within the original file, newlines included.
        offset = int(np.flatnonzero(~np.isin(raw, (*_NEWLINES, ord("0"), ord("1"))))[0])
        bad_byte = data[offset : offset + 1]
        raise BitFormatError(f"unexpected byte {bad_byte!r} in ASCII bit file", offset)
    return (symbols - ord("0")).astype(np.uint8)


def encode_ascii(bits: np.ndarray, line_length: int = 0) -> bytes:
    text = (bits + ord("0")).astype(np.uint8).tobytes()
    if line_length <= 0:
        return text + b"\n"
    lines = [text[i : i + line_length] for i in range(0, len(text), line_length)]
    return b"\n".join(lines) + b"\n"


def _unpack_header(data: bytes) -> tuple[int, bytes]:
    if len(data) < HEADER.size:
        raise BitFormatError(f"packed file shorter than its {HEADER.size}-byte header", len(data))
    magic, length = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BitFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    payload = data[HEADER.size :]
    expected = (length + 7) // 8
    if len(payload) != expected:
        raise LengthMismatchError(
            f"header declares {length} bits ({expected} payload bytes) "
            f"but payload has {len(payload)} bytes",
            HEADER.size + min(len(payload), expected),
        )
    return length, payload


def decode_packed(data: bytes) -> np.ndarray:
    length, payload = _unpack_header(data)
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")
    return bits[:length].astype(np.uint8)


def encode_packed(bits: np.ndarray) -> bytes:
    if bits.size > 0xFFFFFFFF:
        raise BitFormatError(f"{bits.size:,} bits exceed the 32-bit length header")
    payload = np.packbits(bits.astype(np.uint8), bitorder="little").tobytes()
    return HEADER.pack(MAGIC, int(bits.size)) + payload


def read_bits(path, fmt: str | None = None) -> BitSequence:
    """
    Read a bit sequence from an ASCII (.txt) or packed (.bits) file.

    Raises:
        BitFormatError: Malformed content, with the byte offset of the problem
        LengthMismatchError: Packed payload inconsistent with the header
    """
    fmt = detect_format(path, fmt)
    data = _read_bytes(path)
    if fmt == "ascii":
        return BitSequence(decode_ascii(data))
    return BitSequence(decode_packed(data))


def write_bits(bits, path, fmt: str | None = None) -> Path:
    """Write a bit sequence; the format follows ``fmt`` or the extension."""
    fmt = detect_format(path, fmt)
    arr = as_bit_array(bits)
    data = encode_ascii(arr) if fmt == "ascii" else encode_packed(arr)
    _write_bytes(path, data)
    return Path(str(path))


def write_bin_series(series: BinSeries, path) -> Path:
    """Persist a BinSeries in the packed format without materializing dense bins."""
    if series.length > 0xFFFFFFFF:
        raise BitFormatError(f"{series.length:,} bins exceed the 32-bit length header")
    payload = np.zeros((series.length + 7) // 8, dtype=np.uint8)
    idx = series.indices
    np.bitwise_or.at(payload, idx >> 3, (1 << (idx & 7)).astype(np.uint8))
    _write_bytes(path, HEADER.pack(MAGIC, series.length) + payload.tobytes())
    return Path(str(path))


def read_bin_series(path, bin_width: float) -> BinSeries:
    """Load a packed BinSeries; the bin width is not stored in the file."""
    length, payload = _unpack_header(_read_bytes(path))
    raw = np.frombuffer(payload, dtype=np.uint8)
    nonzero = np.flatnonzero(raw)
    values = raw[nonzero]
    pieces = [nonzero[(values >> j) & 1 == 1] * 8 + j for j in range(8)]
    indices = np.sort(np.concatenate(pieces).astype(np.int64))
    return BinSeries(indices[indices < length], length, bin_width)


def read_timestamps(path) -> TimestampSeries:
    """Read a timestamp CSV of integer nanoseconds."""
    data = _read_bytes(path)
    if not data.strip():
        return TimestampSeries(np.empty(0, dtype=np.int64))
    try:
        frame = pd.read_csv(io.BytesIO(data), header=None, dtype=np.int64, comment="#")
    except ValueError as e:
        raise BitFormatError(f"timestamp CSV {path} must hold one integer per line: {e}") from e
    return TimestampSeries(frame.iloc[:, 0].to_numpy(dtype=np.int64))


def write_timestamps(ts: TimestampSeries, path) -> Path:
    """Write detection times as integer nanoseconds, one per line."""
    buf = io.StringIO()
    pd.DataFrame({"t_ns": ts.ns}).to_csv(buf, header=False, index=False, lineterminator="\n")
    _write_bytes(path, buf.getvalue().encode("ascii"))
    return Path(str(path))
