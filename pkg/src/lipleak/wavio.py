"""Minimal RIFF/WAVE reader and writer for PCM 16-bit little-endian mono audio.

Only the subset of the format the harness needs is supported; files written
here are byte-exact: a 12-byte RIFF header, a 16-byte PCM ``fmt `` chunk, and
a ``data`` chunk, nothing else.  The reader tolerates (skips) extra chunks in
third-party files but rejects anything that is not 16-bit PCM mono.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import WavFormatError

_PCM_TAG = 1


@dataclass(frozen=True)
class WavInfo:
    """Header facts about a PCM wav file."""

    sample_rate: int
    n_samples: int
    n_channels: int
    bits_per_sample: int

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate


def _scan_chunks(raw: bytes, path: Path):
    """Yield (chunk_id, payload_offset, payload_size) for every RIFF sub-chunk."""
    pos = 12
    while pos + 8 <= len(raw):
        cid, size = struct.unpack_from("<4sI", raw, pos)
        payload = pos + 8
        if payload + size > len(raw):
            raise WavFormatError(f"{path}: chunk {cid!r} overruns the file")
        yield cid, payload, size
        pos = payload + size + (size & 1)  # chunks are word-aligned


def read_info(path: str | Path) -> WavInfo:
    """Parse the header of a wav file without loading the samples."""
    info, _, _ = _parse(Path(path))
    return info


def read_samples(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a mono PCM wav file; returns (int16 array, sample_rate)."""
    path = Path(path)
    info, raw, data_span = _parse(path)
    off, size = data_span
    samples = np.frombuffer(raw, dtype="<i2", count=size // 2, offset=off)
    return samples.copy(), info.sample_rate


def _parse(path: Path) -> tuple[WavInfo, bytes, tuple[int, int]]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise WavFormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data_span = None
    for cid, off, size in _scan_chunks(raw, path):
        if cid == b"fmt " and fmt is None:
            if size < 16:
                raise WavFormatError(f"{path}: fmt chunk too short ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", raw, off)
        elif cid == b"data" and data_span is None:
            data_span = (off, size)

    if fmt is None or data_span is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")

    audio_format, channels, sample_rate, _byte_rate, block_align, bits = fmt
    if audio_format != _PCM_TAG:
        raise WavFormatError(f"{path}: not PCM (format tag {audio_format})")
    if bits != 16:
        raise WavFormatError(f"{path}: expected 16-bit samples, got {bits}-bit")
    if channels != 1:
        raise WavFormatError(f"{path}: expected mono audio, got {channels} channels")
    if block_align != 2:
        raise WavFormatError(f"{path}: unexpected block alignment {block_align}")

    _, data_size = data_span
    if data_size % 2 != 0:
        raise WavFormatError(f"{path}: data chunk size {data_size} is not sample-aligned")
    info = WavInfo(
        sample_rate=sample_rate,
        n_samples=data_size // 2,
        n_channels=channels,
        bits_per_sample=bits,
    )
    return info, raw, data_span


def write_pcm16(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    """Write a mono int16 array as a canonical 44-byte-header PCM wav file."""
    if sample_rate <= 0:
        raise WavFormatError(f"sample rate must be positive, got {sample_rate}")
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise WavFormatError(f"expected a 1-D sample array, got shape {samples.shape}")
    payload = samples.astype("<i2").tobytes()
    data_size = len(payload)
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + data_size,
        b"WAVE",
        b"fmt ",
        16,
        _PCM_TAG,
        1,
        sample_rate,
        sample_rate * 2,
        2,
        16,
        b"data",
        data_size,
    )
    Path(path).write_bytes(header + payload)
