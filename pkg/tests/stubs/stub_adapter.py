#!/usr/bin/env python3
"""Deterministic stub adapter: synthetic generation plus feature extraction.

Implements the adapter contract end to end with two contrasting behaviors:

  --mode audio   lips follow the driving audio: generated frames are rendered
                 from band features of the driving audio, so matched and
                 mismatched audio score equally well and silent input yields
                 no sync against the original audio (an honest model).
  --mode echo    lips copy the identity reference: generated frames reproduce
                 the reference frame content (per the reference strategy), so
                 silent input still mouths the original speech under CR (a
                 maximally leaking model).
  --mode gt      extractor-only pass over the input frames, used to produce
                 ground-truth feature files.

Feature spaces are shared 8-band means (see tests/conftest.py), so visual and
audio sync embeddings are directly comparable.  Everything is a pure function
of the inputs: reruns are bitwise identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from lipleak import wavio
from lipleak.embt import write_embedding_track
from lipleak.landmarks_io import write_landmark_track
from lipleak.model import EmbeddingTrack, LandmarkTrack, list_frames

BANDS = 8
OFFSET = 0.1  # keeps embeddings away from the zero vector


def frame_band_features(frames: np.ndarray) -> np.ndarray:
    """(T, BANDS) band means of the green channel, scaled to [0, 1]."""
    t, h = frames.shape[0], frames.shape[1]
    band_h = h // BANDS
    out = np.zeros((t, BANDS), dtype=np.float64)
    for i in range(BANDS):
        out[:, i] = frames[:, i * band_h : (i + 1) * band_h, :, 1].mean(axis=(1, 2))
    return out / 255.0


def audio_band_features(samples: np.ndarray, n_frames: int, spf: int) -> np.ndarray:
    """(T, BANDS) mean absolute chunk amplitudes, scaled to [0, 1]."""
    chunk = spf // BANDS
    out = np.zeros((n_frames, BANDS), dtype=np.float64)
    for t in range(n_frames):
        window = samples[t * spf : (t + 1) * spf].astype(np.float64)
        if window.size < spf:
            window = np.pad(window, (0, spf - window.size))
        for i in range(BANDS):
            out[t, i] = np.abs(window[i * chunk : (i + 1) * chunk]).mean()
    return out / 8000.0


def render_frames(features: np.ndarray, size: int) -> np.ndarray:
    """Inverse of frame_band_features: paint band stripes from features."""
    t = features.shape[0]
    frames = np.zeros((t, size, size, 3), dtype=np.uint8)
    band_h = size // BANDS
    values = np.clip(np.round(features * 255.0), 0, 255).astype(np.uint8)
    for i in range(BANDS):
        frames[:, i * band_h : (i + 1) * band_h, :, :] = values[:, i][
            :, None, None, None
        ]
    return frames


def reference_content(frames: np.ndarray, reference: str, n_out: int) -> np.ndarray:
    """Frame content selected by the reference strategy, repeated to n_out."""
    if reference == "CR":
        return frames[:n_out]
    parts = reference.split(":")
    detail = parts[1] if len(parts) > 1 else "first_frame"
    if detail == "multi_frame":
        k = min(int(parts[2]), frames.shape[0])
        ref = frames[:k].astype(np.float64).mean(axis=0).astype(np.uint8)
    else:  # first_frame, random_frame, custom: use the first frame
        ref = frames[0]
    return np.repeat(ref[None, :, :, :], n_out, axis=0)


def synthetic_landmarks(features: np.ndarray) -> LandmarkTrack:
    """68-point layout whose mouth rows move with the frame's band content."""
    frames = []
    for row in features:
        pts = np.zeros((68, 2), dtype=np.float64)
        for i in range(68):
            pts[i, 0] = 10.0 + (i % 10) * 3.0
            pts[i, 1] = 8.0 + (i // 10) * 4.0
        mouth_drive = float(row[BANDS - 2])  # band covering the mouth region
        pts[48:68, 1] += mouth_drive * 6.0
        frames.append(pts)
    return LandmarkTrack(
        scheme="stub68",
        points_per_frame=68,
        frames=tuple(frames),
        mouth_indices=tuple(range(48, 68)),
    )


def track(kind: str, data: np.ndarray, fps: float) -> EmbeddingTrack:
    return EmbeddingTrack(
        kind=kind,
        dim=data.shape[1],
        count=data.shape[0],
        rate_fps=fps,
        data=data.astype(np.float32),
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--job-file", required=True)
    parser.add_argument("--frames", required=True)
    parser.add_argument("--audio", required=True)
    parser.add_argument("--reference", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--mode", choices=("audio", "echo", "gt"), required=True)
    parser.add_argument("--fps", type=float, default=25.0)
    args = parser.parse_args()

    job = json.loads(Path(args.job_file).read_text(encoding="utf-8"))
    n_out = int(job["effective_frame_count"])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    frame_paths = list_frames(Path(args.frames))
    input_frames = np.stack([np.asarray(Image.open(p).convert("RGB")) for p in frame_paths])
    samples, sample_rate = wavio.read_samples(args.audio)
    spf = int(round(sample_rate / args.fps))
    size = input_frames.shape[1]

    audio_features = audio_band_features(samples, n_out, spf)

    if args.mode == "gt":
        gen = input_frames[:n_out]
    elif args.mode == "audio":
        gen = render_frames(audio_features, size)
    else:  # echo
        gen = reference_content(input_frames, args.reference, n_out)

    gen_features = frame_band_features(gen)

    if args.mode != "gt":
        frames_dir = out_dir / "frames"
        frames_dir.mkdir(exist_ok=True)
        for t in range(n_out):
            Image.fromarray(gen[t]).save(frames_dir / f"frame_{t:05d}.png")
        write_embedding_track(
            track("visual_sync", gen_features + OFFSET, args.fps),
            out_dir / "visual_sync.embt",
        )
        write_embedding_track(
            track("audio_sync", audio_features + OFFSET, args.fps),
            out_dir / "audio_sync.embt",
        )
    write_embedding_track(
        track("identity", gen_features + OFFSET, args.fps), out_dir / "identity.embt"
    )
    write_embedding_track(
        track("distribution", gen_features + OFFSET, args.fps),
        out_dir / "distribution.embt",
    )
    write_landmark_track(synthetic_landmarks(gen_features), out_dir / "landmarks.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
