"""Experiment grid construction: AM / XM / SI setups crossed with CR / AR.

The mismatched-audio pairing is a derangement produced by Sattolo's
single-cycle shuffle driven by the SplitMix64 stream (see ``rng``), so the
same seed and clip order always yield the same pairing with zero fixed
points, in O(n) and without rejection sampling.  Silent driving audio is
digital zero; a low-amplitude noise floor is available behind an explicit
option for generators that reject all-zero input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import wavio
from .errors import LipleakError, PairingError
from .model import (
    AR_FIRST_FRAME,
    CR,
    ClipManifest,
    GenerationJob,
    ReferenceStrategy,
    SetupKind,
)
from .rng import SplitMix64

SETUP_ORDER = (SetupKind.AM, SetupKind.XM, SetupKind.SI)


@dataclass(frozen=True)
class PairingMap:
    """Fixed-point-free bijection clip_id -> partner clip_id for XM."""

    seed: int
    pairs: dict[str, str]

    def __post_init__(self):
        if sorted(self.pairs) != sorted(self.pairs.values()):
            raise PairingError("pairing is not a permutation of the clip set")
        fixed = [c for c, p in self.pairs.items() if c == p]
        if fixed:
            raise PairingError(f"pairing has fixed points: {fixed}")


@dataclass(frozen=True)
class AudioFileHandle:
    """A silent wav file written by make_silent_audio."""

    path: Path
    sample_rate: int
    n_samples: int


@dataclass(frozen=True)
class SetupGrid:
    """The full job matrix: setups x references x clips x methods."""

    methods: tuple[tuple[str, ReferenceStrategy], ...]
    jobs: tuple[GenerationJob, ...]
    pairing: PairingMap
    seed: int

    def jobs_for(self, method: Optional[str] = None, setup: Optional[SetupKind] = None):
        out = []
        for job in self.jobs:
            if method is not None and job.method_name != method:
                continue
            if setup is not None and job.setup is not setup:
                continue
            out.append(job)
        return out


def derange_pairing(clip_ids: Sequence[str], seed: int) -> PairingMap:
    """Deterministic derangement of the clip set (single-cycle permutation).

    Sattolo's shuffle draws ``j = rng.next_below(i)`` for ``i = n-1 .. 1``
    and swaps positions i and j, which always produces one n-cycle, hence no
    fixed point for n >= 2.
    """
    ids = list(clip_ids)
    if len(ids) < 2:
        raise PairingError(
            f"need at least 2 clips to build a mismatched pairing, got {len(ids)}"
        )
    if len(set(ids)) != len(ids):
        raise PairingError("duplicate clip ids in pairing input")
    rng = SplitMix64(seed)
    perm = list(range(len(ids)))
    for i in range(len(ids) - 1, 0, -1):
        j = rng.next_below(i)
        perm[i], perm[j] = perm[j], perm[i]
    return PairingMap(seed=seed, pairs={ids[i]: ids[perm[i]] for i in range(len(ids))})


def make_silent_audio(
    duration_s: float,
    sample_rate: int,
    out_path: str | Path,
    noise_floor: float = 0.0,
    noise_seed: int = 0,
) -> AudioFileHandle:
    """Write a mono 16-bit PCM wav of round(duration_s * sample_rate) zeros.

    With ``noise_floor`` > 0 the samples are a deterministic int16 noise
    floor of that peak amplitude (fraction of full scale) instead of digital
    zero, for generators that reject all-zero input.
    """
    if sample_rate <= 0:
        raise LipleakError(f"sample_rate must be positive, got {sample_rate}")
    n_samples = round(duration_s * sample_rate)
    if n_samples < 1:
        raise LipleakError(
            f"duration {duration_s} s at {sample_rate} Hz yields no samples"
        )
    if noise_floor > 0.0:
        rng = np.random.default_rng(noise_seed)
        peak = noise_floor * 32767.0
        samples = np.round(rng.uniform(-peak, peak, n_samples)).astype(np.int16)
    else:
        samples = np.zeros(n_samples, dtype=np.int16)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    wavio.write_pcm16(out_path, samples, sample_rate)
    return AudioFileHandle(path=out_path, sample_rate=sample_rate, n_samples=n_samples)


def align_lengths(
    frame_count: int, fps: float, audio_samples: int, sample_rate: int
) -> int:
    """Truncate to the shorter of video/audio: min(frames, floor(audio_s * fps)).

    The epsilon absorbs float error when the audio duration is an exact
    multiple of the frame period.
    """
    if frame_count < 1 or fps <= 0 or audio_samples < 1 or sample_rate <= 0:
        raise LipleakError(
            "align_lengths needs positive frame_count, fps, audio_samples, sample_rate"
        )
    audio_frames = math.floor(audio_samples / sample_rate * fps + 1e-9)
    effective = min(frame_count, audio_frames)
    if effective < 1:
        raise LipleakError(
            f"no overlap: {frame_count} frames at {fps} fps vs "
            f"{audio_samples} samples at {sample_rate} Hz"
        )
    return effective


def build_setup_grid(
    manifest: ClipManifest,
    methods: Sequence[tuple[str, Optional[ReferenceStrategy]]],
    seed: int,
    out_dir: str | Path,
    silence_noise_floor: float = 0.0,
) -> SetupGrid:
    """Materialize the 3 x 2 experiment matrix for every clip and method.

    Silent wavs are written under ``out_dir/silent``; job output directories
    are laid out as ``out_dir/artifacts/<method>/<setup>/<reference>/<clip>``.
    A method with no AR detail defaults to the first frame.  One pairing is
    shared by all methods (recorded in the grid so reports can state it).
    """
    if not methods:
        raise LipleakError("methods list is empty")
    out_dir = Path(out_dir)
    pairing = derange_pairing(manifest.clip_ids, seed)

    resolved: list[tuple[str, ReferenceStrategy]] = []
    for name, detail in methods:
        if detail is None:
            detail = AR_FIRST_FRAME
        if detail.family != "AR":
            raise LipleakError(f"method {name!r}: AR detail must be an AR strategy")
        resolved.append((name, detail))

    silent_dir = out_dir / "silent"
    silent_paths: dict[str, Path] = {}
    for entry in manifest.entries:
        handle = make_silent_audio(
            entry.duration_s,
            entry.sample_rate,
            silent_dir / f"{entry.clip_id}.wav",
            noise_floor=silence_noise_floor,
        )
        silent_paths[entry.clip_id] = handle.path

    jobs = []
    for method_name, ar_detail in resolved:
        for entry in manifest.entries:
            partner = manifest[pairing.pairs[entry.clip_id]]
            partner_info = wavio.read_info(partner.audio_path)
            own_info = wavio.read_info(entry.audio_path)
            for setup in SETUP_ORDER:
                if setup is SetupKind.AM:
                    audio = entry.audio_path
                    effective = align_lengths(
                        entry.frame_count, entry.fps, own_info.n_samples, own_info.sample_rate
                    )
                elif setup is SetupKind.XM:
                    audio = partner.audio_path
                    effective = align_lengths(
                        entry.frame_count,
                        entry.fps,
                        partner_info.n_samples,
                        partner_info.sample_rate,
                    )
                else:
                    audio = silent_paths[entry.clip_id]
                    effective = entry.frame_count
                for reference in (CR, ar_detail):
                    jobs.append(
                        GenerationJob(
                            method_name=method_name,
                            clip_id=entry.clip_id,
                            setup=setup,
                            reference=reference,
                            driving_audio_path=audio,
                            output_dir=out_dir
                            / "artifacts"
                            / method_name
                            / setup.value
                            / reference.path_tag()
                            / entry.clip_id,
                            effective_frame_count=effective,
                        )
                    )
    return SetupGrid(
        methods=tuple(resolved), jobs=tuple(jobs), pairing=pairing, seed=seed
    )


def write_grid(grid: SetupGrid, path: str | Path) -> None:
    """Serialize a grid as JSON lines: one meta record, then one record per job."""
    lines = [
        json.dumps(
            {
                "record": "meta",
                "seed": grid.seed,
                "pairing": dict(sorted(grid.pairing.pairs.items())),
                "methods": [
                    {"name": name, "ar_detail": detail.serialize()}
                    for name, detail in grid.methods
                ],
            },
            sort_keys=True,
        )
    ]
    for job in grid.jobs:
        lines.append(json.dumps({"record": "job", **job.to_dict()}, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_grid(path: str | Path) -> SetupGrid:
    path = Path(path)
    meta = None
    jobs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        if record.get("record") == "meta":
            meta = record
        elif record.get("record") == "job":
            jobs.append(GenerationJob.from_dict(record))
        else:
            raise LipleakError(f"{path}:{lineno}: unknown record type")
    if meta is None:
        raise LipleakError(f"{path}: missing grid meta record")
    methods = tuple(
        (m["name"], ReferenceStrategy.parse(m["ar_detail"])) for m in meta["methods"]
    )
    pairing = PairingMap(seed=meta["seed"], pairs=dict(meta["pairing"]))
    return SetupGrid(methods=methods, jobs=tuple(jobs), pairing=pairing, seed=meta["seed"])
