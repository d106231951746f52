"""lipleak-adapt: run extractor passes per the harness adapter contract.

Examples:

    lipleak-adapt sync --frames F --audio A --out O
    lipleak-adapt all --frames F --audio A --out O --backend handcrafted
    lipleak-adapt identity --frames F --out O --backend model \\
        --checkpoint identity=arcface_ts.pt

A nonzero exit means the harness marks the job failed; stderr carries the
reason.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backends import CheckpointError
from .extractors import (
    extract_distribution_track,
    extract_identity_track,
    extract_landmarks,
    extract_sync_tracks,
)
from .interchange import ExtractorJob

KIND_CHOICES = ("sync", "identity", "distribution", "landmarks", "all")


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="lipleak-adapt", description=__doc__)
    parser.add_argument("kind", choices=KIND_CHOICES)
    parser.add_argument("--frames", required=True, help="input frame directory")
    parser.add_argument("--audio", default=None, help="driving audio wav (sync/all)")
    parser.add_argument("--out", required=True, help="artifact output directory")
    parser.add_argument("--fps", type=float, default=25.0)
    parser.add_argument("--backend", choices=("handcrafted", "model"),
                        default="handcrafted")
    parser.add_argument("--checkpoint", action="append", default=[],
                        metavar="KIND=PATH",
                        help="TorchScript checkpoint per kind (model backend)")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    checkpoints = {}
    for item in args.checkpoint:
        if "=" not in item:
            print(f"error: --checkpoint expects KIND=PATH, got {item!r}",
                  file=sys.stderr)
            return 2
        k, v = item.split("=", 1)
        checkpoints[k] = v

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = {
        "sync": ("visual_sync", "audio_sync"),
        "identity": ("identity",),
        "distribution": ("distribution",),
        "landmarks": ("landmarks",),
        "all": ("visual_sync", "audio_sync", "identity", "distribution", "landmarks"),
    }[args.kind]
    job = ExtractorJob(
        frames_dir=Path(args.frames),
        audio_path=Path(args.audio) if args.audio else None,
        output_dir=out_dir,
        kinds=kinds,
        checkpoints=checkpoints,
    )
    backend = args.backend if args.backend == "handcrafted" else "model"
    try:
        if args.kind in ("sync", "all"):
            extract_sync_tracks(job, fps=args.fps, backend=backend)
        if args.kind in ("identity", "all"):
            extract_identity_track(job, fps=args.fps, backend=backend)
        if args.kind in ("distribution", "all"):
            extract_distribution_track(job, fps=args.fps, backend=backend)
        if args.kind in ("landmarks", "all"):
            extract_landmarks(job, backend=backend)
    except (CheckpointError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
