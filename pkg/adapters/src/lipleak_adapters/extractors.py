"""The four extraction passes: sync tracks, identity, distribution, landmarks.

Each function is thin by design: load inputs, run the selected backend over
the frames/audio, write interchange files plus a small sidecar JSON recording
the backend, layer label, normalization and checkpoint used.  No metric
logic lives here.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import backends
from .interchange import (
    ExtractorJob,
    list_frames,
    read_wav_mono16,
    write_embt,
    write_landmarks,
)

SYNC_DIM = 64
SYNC_MIN_FRAMES = 5  # visual windowing needs 5 consecutive frames
_PROJ_SEED_AUDIO = 101
_PROJ_SEED_VISUAL = 202


def _write_meta(out_dir: Path, name: str, payload: dict) -> None:
    (out_dir / f"{name}.meta.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def extract_sync_tracks(
    job: ExtractorJob,
    fps: float = 25.0,
    backend: str = "handcrafted",
) -> tuple[Path, Path]:
    """Write visual_sync.embt and audio_sync.embt, one row per frame index.

    Both tracks share dimension and rate; counts are aligned to the shorter
    medium.  The handcrafted backend pools a 5-frame grayscale window per
    index and log-mel energies per audio window, each behind a fixed
    projection into the shared space.
    """
    frames = list_frames(job.frames_dir)
    if len(frames) < SYNC_MIN_FRAMES:
        raise ValueError(
            f"need at least {SYNC_MIN_FRAMES} frames for sync windows, "
            f"got {len(frames)}"
        )
    if job.audio_path is None:
        raise ValueError("sync extraction needs an audio path")
    samples, sample_rate = read_wav_mono16(job.audio_path)
    spf = int(round(sample_rate / fps))
    n = min(len(frames), samples.size // spf)
    if n < SYNC_MIN_FRAMES:
        raise ValueError(f"audio too short: {n} aligned frame indices")

    if backend == "handcrafted":
        gray = np.stack([backends.load_frame_gray(p) for p in frames[:n]])
        pooled = np.stack([backends.block_pool(g, blocks=8) for g in gray])
        half = SYNC_MIN_FRAMES // 2
        windowed = np.empty_like(pooled)
        for t in range(n):
            lo = max(0, t - half)
            hi = min(n, t + half + 1)
            windowed[t] = pooled[lo:hi].mean(axis=0)
        vis = backends.l2_normalize(
            windowed @ backends.fixed_projection(pooled.shape[1], SYNC_DIM,
                                                 _PROJ_SEED_VISUAL)
        )
        mel = backends.log_mel_frames(samples, sample_rate, n, spf)
        aud = backends.l2_normalize(
            mel @ backends.fixed_projection(mel.shape[1], SYNC_DIM, _PROJ_SEED_AUDIO)
        )
        layer = "blockpool8x8-5frame / logmel32"
        checkpoint = None
    else:
        module = backends.load_torchscript(
            job.checkpoints.get("sync"), "sync extraction"
        )
        vis, aud = _torchscript_sync(module, frames[:n], samples, spf)
        layer = "torchscript"
        checkpoint = job.checkpoints.get("sync")

    out_v = job.output_dir / "visual_sync.embt"
    out_a = job.output_dir / "audio_sync.embt"
    write_embt(out_v, "visual_sync", vis.astype(np.float32), fps)
    write_embt(out_a, "audio_sync", aud.astype(np.float32), fps)
    _write_meta(job.output_dir, "sync", {
        "backend": backend, "layer": layer, "normalized": True,
        "checkpoint": checkpoint, "dim": SYNC_DIM, "min_frames": SYNC_MIN_FRAMES,
    })
    return out_v, out_a


def _torchscript_sync(module, frame_paths, samples, spf):
    import torch

    frames = np.stack([backends.load_frame_rgb(p, size=96) for p in frame_paths])
    video = torch.from_numpy(frames).permute(0, 3, 1, 2).float()
    audio = torch.from_numpy(samples.astype(np.float32) / 32768.0)
    with torch.no_grad():
        vis, aud = module(video, audio, spf)
    return vis.numpy(), aud.numpy()


def extract_identity_track(
    job: ExtractorJob, fps: float = 25.0, backend: str = "handcrafted"
) -> Path:
    """Write identity.embt: one identity embedding per frame."""
    frames = list_frames(job.frames_dir)
    if not frames:
        raise ValueError(f"no frames in {job.frames_dir}")
    if backend == "handcrafted":
        rows = []
        for p in frames:
            rgb = backends.load_frame_rgb(p)
            rows.append(
                np.concatenate([backends.block_pool(rgb[:, :, c]) for c in range(3)])
            )
        data = backends.l2_normalize(np.stack(rows))
        layer = "blockpool8x8-rgb"
        checkpoint = None
        normalized = True
    else:
        module = backends.load_torchscript(
            job.checkpoints.get("identity"), "identity extraction"
        )
        data = _torchscript_frames(module, frames, size=112)
        layer = "torchscript"
        checkpoint = job.checkpoints.get("identity")
        normalized = False
    out = job.output_dir / "identity.embt"
    write_embt(out, "identity", data.astype(np.float32), fps)
    _write_meta(job.output_dir, "identity", {
        "backend": backend, "layer": layer, "normalized": normalized,
        "checkpoint": checkpoint,
    })
    return out


def extract_distribution_track(
    job: ExtractorJob, fps: float = 25.0, backend: str = "handcrafted"
) -> Path:
    """Write distribution.embt: pooled image features, one row per frame."""
    frames = list_frames(job.frames_dir)
    if not frames:
        raise ValueError(f"no frames in {job.frames_dir}")
    if backend == "handcrafted":
        rows = []
        for p in frames:
            rgb = backends.load_frame_rgb(p)
            gray = rgb.mean(axis=2)
            pooled = backends.block_pool(gray, blocks=8)
            stats = np.concatenate(
                [rgb.mean(axis=(0, 1)), rgb.std(axis=(0, 1))]
            )
            rows.append(np.concatenate([pooled, stats]))
        data = np.stack(rows)
        layer = "blockpool8x8+channelstats"
        checkpoint = None
    else:
        module = backends.load_torchscript(
            job.checkpoints.get("distribution"), "distribution extraction"
        )
        data = _torchscript_frames(module, frames, size=299)
        layer = "torchscript"
        checkpoint = job.checkpoints.get("distribution")
    out = job.output_dir / "distribution.embt"
    write_embt(out, "distribution", data.astype(np.float32), fps)
    _write_meta(job.output_dir, "distribution", {
        "backend": backend, "layer": layer, "checkpoint": checkpoint,
    })
    return out


def _torchscript_frames(module, frame_paths, size):
    import torch

    frames = np.stack([backends.load_frame_rgb(p, size=size) for p in frame_paths])
    batch = torch.from_numpy(frames).permute(0, 3, 1, 2).float()
    with torch.no_grad():
        out = module(batch)
    return out.numpy()


def extract_landmarks(
    job: ExtractorJob, backend: str = "handcrafted"
) -> Path:
    """Write landmarks.txt (68-point scheme); failed detections become
    explicit missing markers, never synthesized coordinates."""
    frames = list_frames(job.frames_dir)
    if not frames:
        raise ValueError(f"no frames in {job.frames_dir}")
    if backend == "handcrafted":
        per_frame: list[np.ndarray | None] = []
        for p in frames:
            gray = backends.load_frame_gray(p, size=64)
            pts = backends.locate_landmarks(gray)
            if pts is None:
                per_frame.append(None)
                continue
            # scale from the 64x64 analysis raster to source pixels
            from PIL import Image

            with Image.open(p) as img:
                w, h = img.size
            scaled = pts * np.array([w / 64.0, h / 64.0])
            per_frame.append(scaled)
        scheme = "intensity68"
        checkpoint = None
    else:
        module = backends.load_torchscript(
            job.checkpoints.get("landmarks"), "landmark extraction"
        )
        per_frame = _torchscript_landmarks(module, frames)
        scheme = "fan68"
        checkpoint = job.checkpoints.get("landmarks")
    detected = sum(1 for p in per_frame if p is not None)
    if detected == 0:
        raise ValueError("zero successful landmark detections")
    out = job.output_dir / "landmarks.txt"
    write_landmarks(out, per_frame, scheme, 68, tuple(range(48, 68)))
    _write_meta(job.output_dir, "landmarks", {
        "backend": backend, "scheme": scheme, "checkpoint": checkpoint,
        "detected": detected, "missing": len(per_frame) - detected,
    })
    return out


def _torchscript_landmarks(module, frame_paths):
    import torch

    out = []
    for p in frame_paths:
        rgb = backends.load_frame_rgb(p, size=256)
        batch = torch.from_numpy(rgb).permute(2, 0, 1).unsqueeze(0).float()
        with torch.no_grad():
            pts = module(batch)
        pts = pts.squeeze(0).numpy()
        out.append(pts if np.isfinite(pts).all() else None)
    return out
