"""Reading and writing tag streams.

Binary layout (little endian)::

    b"ETT1"
    uint32      header length in bytes
    bytes       UTF-8 JSON metadata
    records     {uint8 channel, uint64 t_ps}, packed, 9 bytes each

The CSV form has the header ``channel,t_ps`` and one tag per row.
"""

from __future__ import annotations

import json
import struct
import warnings
from pathlib import Path

import numpy as np

from .specs import TagStream

MAGIC = b"ETT1"
RECORD = np.dtype([("channel", "u1"), ("t_ps", "<u8")])
assert RECORD.itemsize == 9


class TagFormatError(ValueError):
    """Malformed or unrecognized tag file."""


def _header_bytes(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_bin(stream: TagStream, path) -> None:
    head = _header_bytes(stream.header)
    rec = np.empty(len(stream), dtype=RECORD)
    rec["channel"] = stream.channels
    rec["t_ps"] = stream.t_ps
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(rec.tobytes())


def read_bin(path) -> TagStream:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise TagFormatError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 8:
        raise TagFormatError(f"{path}: truncated header")
    (n,) = struct.unpack_from("<I", data, 4)
    body = 8 + n
    if len(data) < body:
        raise TagFormatError(f"{path}: truncated header")
    try:
        header = json.loads(data[8:body].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TagFormatError(f"{path}: unreadable metadata: {exc}") from None
    if (len(data) - body) % RECORD.itemsize:
        raise TagFormatError(f"{path}: record block is not a multiple of {RECORD.itemsize} bytes")
    rec = np.frombuffer(data, dtype=RECORD, offset=body)
    if rec.size and rec["t_ps"].max() > np.iinfo(np.int64).max:
        raise TagFormatError(f"{path}: timestamp out of range")
    try:
        return TagStream(rec["channel"], rec["t_ps"].astype(np.int64), header)
    except ValueError as exc:
        raise TagFormatError(f"{path}: {exc}") from None


def write_csv(stream: TagStream, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("channel,t_ps\n")
        if len(stream):
            np.savetxt(fh, np.column_stack((stream.channels, stream.t_ps)), fmt="%d", delimiter=",")


def read_csv(path, header=None) -> TagStream:
    with open(path) as fh:
        first = fh.readline().strip()
        if first != "channel,t_ps":
            raise TagFormatError(f"{path}: expected header 'channel,t_ps', got {first!r}")
        try:
            with warnings.catch_warnings():
                # a header-only file is a valid empty stream
                warnings.simplefilter("ignore", UserWarning)
                arr = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise TagFormatError(f"{path}: {exc}") from None
    if arr.size == 0:
        arr = np.empty((0, 2), dtype=np.int64)
    if arr.shape[1] != 2:
        raise TagFormatError(f"{path}: expected two columns")
    if np.any((arr[:, 0] < 0) | (arr[:, 0] > 255)):
        raise TagFormatError(f"{path}: channel out of range")
    try:
        return TagStream(arr[:, 0], arr[:, 1], header)
    except ValueError as exc:
        raise TagFormatError(f"{path}: {exc}") from None


def write_tags(stream: TagStream, path, fmt: str | None = None) -> None:
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "bin")
    if fmt == "csv":
        write_csv(stream, path)
    elif fmt == "bin":
        write_bin(stream, path)
    else:
        raise ValueError(f"unknown tag format {fmt!r}")


def read_tags(path) -> TagStream:
    """Read either format, sniffing the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_bin(path)
    if head.startswith(b"chan"):
        return read_csv(path)
    raise TagFormatError(f"{path}: not an ETT1 or channel,t_ps CSV tag file")
