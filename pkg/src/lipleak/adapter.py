"""Subprocess adapter protocol: the boundary to generators and extractors.

An adapter is an external command describing one generation/extraction step.
Its command template may use the placeholders {input_frames}, {input_audio},
{reference_spec}, {output_dir} and {job_file}; the harness substitutes them,
runs the process, and validates that every declared artifact kind exists
under the job's output directory with the fixed names below and parses under
the interchange formats.  Exit code 0 means success; anything else (or a
timeout) fails the job with stderr captured into the run log.

Artifact names inside a job's output directory:

    frames/              generated frames (ordered image files)
    visual_sync.embt     per-frame visual sync embeddings
    audio_sync.embt      per-frame audio sync embeddings
    identity.embt        per-frame identity embeddings
    distribution.embt    per-frame distribution-level embeddings
    landmarks.txt        landmark track
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from PIL import Image

from .embt import read_embedding_track
from .errors import AdapterError, LandmarkFormatError, TrackFormatError
from .landmarks_io import read_landmark_track
from .model import GenerationJob, list_frames

ARTIFACT_KINDS = (
    "generated_frames",
    "visual_sync",
    "audio_sync",
    "identity",
    "distribution",
    "landmarks",
)

ARTIFACT_NAMES = {
    "generated_frames": "frames",
    "visual_sync": "visual_sync.embt",
    "audio_sync": "audio_sync.embt",
    "identity": "identity.embt",
    "distribution": "distribution.embt",
    "landmarks": "landmarks.txt",
}

_PLACEHOLDERS = ("input_frames", "input_audio", "reference_spec", "output_dir", "job_file")


@dataclass(frozen=True)
class AdapterSpec:
    """External command template plus the artifact kinds it promises to write."""

    name: str
    command_template: str
    produces: tuple[str, ...]
    timeout_s: int = 600

    def __post_init__(self):
        if "{output_dir}" not in self.command_template:
            raise AdapterError(f"adapter {self.name!r}: template lacks {{output_dir}}")
        if not self.produces:
            raise AdapterError(f"adapter {self.name!r}: produces is empty")
        unknown = [k for k in self.produces if k not in ARTIFACT_KINDS]
        if unknown:
            raise AdapterError(f"adapter {self.name!r}: unknown artifact kinds {unknown}")
        if self.timeout_s <= 0:
            raise AdapterError(f"adapter {self.name!r}: timeout must be positive")


@dataclass(frozen=True)
class ArtifactSet:
    """Validated artifact paths for one job; absent entirely on any failure."""

    job_key: tuple[str, str, str, str]
    paths: dict[str, Path]


def artifact_path(output_dir: Path, kind: str) -> Path:
    return Path(output_dir) / ARTIFACT_NAMES[kind]


def validate_artifacts(
    output_dir: Path,
    produces: tuple[str, ...],
    expected_frames: Optional[int] = None,
) -> dict[str, Path]:
    """Check that every declared artifact exists and parses; returns kind->path.

    Raises AdapterError naming the first missing or invalid artifact, so a
    caller never sees a partially-valid set.
    """
    output_dir = Path(output_dir)
    paths: dict[str, Path] = {}
    for kind in produces:
        target = artifact_path(output_dir, kind)
        if kind == "generated_frames":
            if not target.is_dir():
                raise AdapterError(f"missing artifact generated_frames: {target}")
            frames = list_frames(target)
            if not frames:
                raise AdapterError(f"generated_frames is empty: {target}")
            if expected_frames is not None and len(frames) != expected_frames:
                raise AdapterError(
                    f"generated_frames has {len(frames)} frames, job expects "
                    f"{expected_frames}: {target}"
                )
            dims = None
            for frame in frames:
                try:
                    with Image.open(frame) as img:
                        size = img.size
                except Exception as exc:
                    raise AdapterError(f"unreadable generated frame {frame}: {exc}") from exc
                if dims is None:
                    dims = size
                elif size != dims:
                    raise AdapterError(
                        f"generated frame dimensions differ within {target}"
                    )
        elif kind == "landmarks":
            if not target.is_file():
                raise AdapterError(f"missing artifact landmarks: {target}")
            try:
                read_landmark_track(target)
            except LandmarkFormatError as exc:
                raise AdapterError(f"invalid landmarks artifact: {exc}") from exc
        else:
            if not target.is_file():
                raise AdapterError(f"missing artifact {kind}: {target}")
            try:
                track = read_embedding_track(target)
            except TrackFormatError as exc:
                raise AdapterError(f"invalid {kind} artifact: {exc}") from exc
            if track.kind != kind:
                raise AdapterError(
                    f"{target}: contains a {track.kind} track, expected {kind}"
                )
        paths[kind] = target
    return paths


def build_command(spec: AdapterSpec, substitutions: dict[str, str]) -> list[str]:
    """Token-wise placeholder substitution (placeholders survive spaces in paths)."""
    tokens = shlex.split(spec.command_template)
    out = []
    for token in tokens:
        try:
            out.append(token.format(**substitutions))
        except (KeyError, IndexError) as exc:
            raise AdapterError(
                f"adapter {spec.name!r}: unknown placeholder in {token!r}: {exc}"
            ) from exc
    return out


def run_adapter(
    spec: AdapterSpec,
    job: GenerationJob,
    input_frames: Path,
    env: Optional[dict] = None,
) -> ArtifactSet:
    """Execute one adapter process for one job and validate its artifacts.

    The job record is written to ``<output_dir>/job.json`` before the process
    starts so adapters can read every job field through {job_file}.
    """
    output_dir = Path(job.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    job_file = output_dir / "job.json"
    job_file.write_text(json.dumps(job.to_dict(), sort_keys=True), encoding="utf-8")

    command = build_command(
        spec,
        {
            "input_frames": str(input_frames),
            "input_audio": str(job.driving_audio_path),
            "reference_spec": job.reference.serialize(),
            "output_dir": str(output_dir),
            "job_file": str(job_file),
        },
    )
    try:
        proc = subprocess.run(
            command,
            capture_output=True,
            text=True,
            timeout=spec.timeout_s,
            env=env,
        )
    except subprocess.TimeoutExpired as exc:
        raise AdapterError(
            f"adapter {spec.name!r} timed out after {spec.timeout_s}s on job {job.key()}"
        ) from exc
    except OSError as exc:
        raise AdapterError(f"adapter {spec.name!r}: cannot execute {command[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        stderr_tail = (proc.stderr or "").strip()[-2000:]
        raise AdapterError(
            f"adapter {spec.name!r} exited {proc.returncode} on job {job.key()}: "
            f"{stderr_tail}"
        )
    paths = validate_artifacts(output_dir, spec.produces, job.effective_frame_count)
    return ArtifactSet(job_key=job.key(), paths=paths)
