"""Writers for the harness interchange formats, implemented independently.

This package talks to the evaluation harness only through its documented
file formats (EMBT tracks, landmark text, the job-file JSON), so the encoders
here are written against the harness's format documentation rather than
imported from it; the harness's readers are the compatibility oracle in the
tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EMBT_MAGIC = b"EMBT"
EMBT_VERSION = 1
EMBT_KIND_CODES = {"visual_sync": 1, "audio_sync": 2, "identity": 3, "distribution": 4}

ARTIFACT_KINDS = ("visual_sync", "audio_sync", "identity", "distribution", "landmarks")


@dataclass
class ExtractorJob:
    """One extraction request: media in, interchange artifacts out."""

    frames_dir: Path
    audio_path: Path | None
    output_dir: Path
    kinds: tuple[str, ...]
    checkpoints: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        unknown = [k for k in self.kinds if k not in ARTIFACT_KINDS]
        if unknown:
            raise ValueError(f"unknown artifact kinds requested: {unknown}")


def write_embt(path: Path, kind: str, data: np.ndarray, rate_fps: float) -> None:
    """Encode a count x dim float32 matrix per the EMBT layout."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise ValueError("refusing to write non-finite embeddings")
    count, dim = data.shape
    header = struct.pack(
        "<4sIBIII",
        EMBT_MAGIC,
        EMBT_VERSION,
        EMBT_KIND_CODES[kind],
        dim,
        count,
        round(rate_fps * 1000.0),
    )
    Path(path).write_bytes(header + data.tobytes())


def write_landmarks(
    path: Path,
    frames: list[np.ndarray | None],
    scheme: str,
    points_per_frame: int,
    mouth_indices: tuple[int, ...],
) -> None:
    """Encode per-frame landmarks; None marks a failed detection."""
    lines = [
        "landmarks v1",
        f"scheme {scheme}",
        f"points {points_per_frame}",
        "mouth " + " ".join(str(i) for i in mouth_indices),
    ]
    for idx, pts in enumerate(frames):
        if pts is None:
            lines.append(f"frame {idx} missing")
        else:
            coords = " ".join(repr(float(v)) for v in np.asarray(pts).ravel())
            lines.append(f"frame {idx} {coords}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_wav_mono16(path: Path) -> tuple[np.ndarray, int]:
    """Minimal PCM 16-bit mono RIFF reader; returns (samples, sample_rate)."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = data = None
    while pos + 8 <= len(raw):
        cid, size = struct.unpack_from("<4sI", raw, pos)
        body = raw[pos + 8 : pos + 8 + size]
        if cid == b"fmt " and fmt is None:
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data" and data is None:
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise ValueError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if (audio_format, channels, bits) != (1, 1, 16):
        raise ValueError(f"{path}: need PCM 16-bit mono, got {fmt}")
    return np.frombuffer(data, dtype="<i2").copy(), sample_rate


def list_frames(frames_dir: Path) -> list[Path]:
    exts = (".png", ".jpg", ".jpeg", ".bmp")
    return sorted(
        (p for p in Path(frames_dir).iterdir() if p.suffix.lower() in exts),
        key=lambda p: p.name,
    )
