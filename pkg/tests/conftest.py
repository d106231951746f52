"""Shared fixtures: synthetic clips whose frames and audio encode one latent signal.

Each synthetic clip has a per-frame latent vector s_t (8 bands in [0.2, 1]).
Frame t paints band i as a horizontal stripe of intensity s_t[i] * 255; the
audio window of frame t holds 8 constant-amplitude chunks of s_t[i] * 8000.
Band-mean features of either medium therefore recover (a quantized) s_t, so
sync, identity and landmark behavior is fully controllable from the tests.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from lipleak import wavio

BANDS = 8
FRAME_SIZE = 48
DEFAULT_FPS = 25.0
DEFAULT_RATE = 16000


def clip_signal(clip_id: str, n_frames: int, bands: int = BANDS) -> np.ndarray:
    """Deterministic latent signal for a clip, rows in [0.2, 1.0]."""
    seed = zlib.crc32(f"clip-signal:{clip_id}".encode())
    rng = np.random.default_rng(seed)
    return rng.uniform(0.2, 1.0, size=(n_frames, bands))


def render_frame(signal_row: np.ndarray, size: int = FRAME_SIZE) -> np.ndarray:
    """Paint one frame: horizontal stripes, one per band."""
    bands = signal_row.shape[0]
    frame = np.zeros((size, size, 3), dtype=np.uint8)
    band_h = size // bands
    for i, v in enumerate(signal_row):
        frame[i * band_h : (i + 1) * band_h, :, :] = int(round(float(v) * 255.0))
    return frame


def render_audio(
    signal: np.ndarray, fps: float = DEFAULT_FPS, sample_rate: int = DEFAULT_RATE
) -> np.ndarray:
    """Step-pattern waveform: per frame, one constant chunk per band."""
    spf = int(round(sample_rate / fps))
    chunk = spf // signal.shape[1]
    samples = np.zeros(signal.shape[0] * spf, dtype=np.int16)
    for t in range(signal.shape[0]):
        for i in range(signal.shape[1]):
            start = t * spf + i * chunk
            samples[start : start + chunk] = int(round(float(signal[t, i]) * 8000.0))
    return samples


def write_clip(
    root: Path,
    clip_id: str,
    n_frames: int,
    fps: float = DEFAULT_FPS,
    sample_rate: int = DEFAULT_RATE,
    size: int = FRAME_SIZE,
) -> dict:
    """Materialize one clip on disk; returns its manifest record."""
    signal = clip_signal(clip_id, n_frames)
    frame_dir = root / clip_id / "frames"
    frame_dir.mkdir(parents=True, exist_ok=True)
    for t in range(n_frames):
        Image.fromarray(render_frame(signal[t], size)).save(
            frame_dir / f"frame_{t:05d}.png"
        )
    audio_path = root / clip_id / "audio.wav"
    wavio.write_pcm16(audio_path, render_audio(signal, fps, sample_rate), sample_rate)
    return {
        "clip_id": clip_id,
        "frame_dir": str(frame_dir),
        "audio_path": str(audio_path),
        "fps": fps,
        "sample_rate": sample_rate,
        "frame_count": n_frames,
    }


def write_manifest(root: Path, records: list[dict]) -> Path:
    path = root / "manifest.jsonl"
    path.write_text(
        "\n".join(json.dumps(r, sort_keys=True) for r in records) + "\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def tiny_corpus(tmp_path) -> tuple[Path, list[dict]]:
    """Two small consistent clips plus their manifest."""
    records = [
        write_clip(tmp_path, "clip_a", n_frames=40),
        write_clip(tmp_path, "clip_b", n_frames=35),
    ]
    manifest_path = write_manifest(tmp_path, records)
    return manifest_path, records
