"""EMBT: the byte-exact binary interchange format for embedding tracks.

Layout (all little-endian, no padding):

    offset  size  field
    0       4     magic, the ASCII bytes "EMBT"
    4       4     version, unsigned 32-bit, must be 1
    8       1     kind code, unsigned 8-bit (1=visual_sync, 2=audio_sync,
                  3=identity, 4=distribution)
    9       4     dim, unsigned 32-bit, >= 1
    13      4     count, unsigned 32-bit, >= 0
    17      4     rate_fps_milli, unsigned 32-bit (frames per second x 1000)
    21      -     payload: count * dim IEEE-754 binary32 values, row-major

The 21-byte header is followed by exactly count*dim*4 payload bytes; any
other length is a truncation/overrun error.  Values must be finite.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import TrackFormatError
from .model import EmbeddingTrack

MAGIC = b"EMBT"
VERSION = 1
HEADER_FORMAT = "<4sIBIII"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)  # 21 bytes

KIND_CODES = {"visual_sync": 1, "audio_sync": 2, "identity": 3, "distribution": 4}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}


def write_embedding_track(track: EmbeddingTrack, path: str | Path) -> None:
    """Serialize a track; byte-exact for a given track."""
    rate_milli = round(track.rate_fps * 1000.0)
    if not 0 < rate_milli <= 0xFFFFFFFF:
        raise TrackFormatError(f"rate_fps {track.rate_fps} not encodable as milli-fps")
    header = struct.pack(
        HEADER_FORMAT,
        MAGIC,
        VERSION,
        KIND_CODES[track.kind],
        track.dim,
        track.count,
        rate_milli,
    )
    payload = np.ascontiguousarray(track.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_embedding_track(path: str | Path) -> EmbeddingTrack:
    """Parse and validate an EMBT file (inverse of write_embedding_track)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise TrackFormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) < HEADER_SIZE:
        raise TrackFormatError(
            f"{path}: file too short for header ({len(raw)} < {HEADER_SIZE} bytes)"
        )
    magic, version, kind_code, dim, count, rate_milli = struct.unpack_from(
        HEADER_FORMAT, raw, 0
    )
    if magic != MAGIC:
        raise TrackFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise TrackFormatError(f"{path}: unsupported version {version}")
    if kind_code not in CODE_KINDS:
        raise TrackFormatError(f"{path}: unknown kind code {kind_code}")
    if dim < 1:
        raise TrackFormatError(f"{path}: dim must be >= 1, got {dim}")
    if rate_milli == 0:
        raise TrackFormatError(f"{path}: rate_fps_milli must be positive")
    expected = count * dim * 4
    actual = len(raw) - HEADER_SIZE
    if actual != expected:
        raise TrackFormatError(
            f"{path}: payload is {actual} bytes, header implies {expected}"
        )
    data = np.frombuffer(raw, dtype="<f4", count=count * dim, offset=HEADER_SIZE)
    data = data.reshape(count, dim)
    if data.size:
        finite_rows = np.isfinite(data).all(axis=1)
        if not finite_rows.all():
            bad = int(np.argwhere(~finite_rows)[0, 0])
            raise TrackFormatError(f"{path}: non-finite value in row {bad}")
    return EmbeddingTrack(
        kind=CODE_KINDS[kind_code],
        dim=dim,
        count=count,
        rate_fps=rate_milli / 1000.0,
        data=data.copy(),
    )
