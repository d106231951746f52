"""Core data model: clips, setups, reference strategies, tracks, and records.

Everything here is immutable after construction and safe to share across
workers.  The manifest is a UTF-8 JSON-lines document, one object per clip
with fields ``clip_id``, ``frame_dir``, ``audio_path``, ``fps``,
``sample_rate`` and ``frame_count``; relative paths are resolved against the
manifest's own directory.  Blank lines and ``#`` comments are permitted.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from . import wavio
from .errors import LipleakError, ManifestError, MetricError, TrackError, WavFormatError

FRAME_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")

# Sentinel clip id for corpus-level records (FID is fitted across clips).
CORPUS_CLIP_ID = "ALL"


class SetupKind(enum.Enum):
    """The three generation setups: matched, mismatched, and silent audio."""

    AM = "AM"
    XM = "XM"
    SI = "SI"


AR_DETAILS = ("first_frame", "random_frame", "multi_frame", "custom")


@dataclass(frozen=True)
class ReferenceStrategy:
    """Identity-reference selection: current frame (CR) or an alternative (AR).

    AR always carries a detail: ``first_frame``, ``random_frame``,
    ``multi_frame`` (with ``k`` >= 2) or ``custom`` (with a free-form label).
    Serialized forms: ``CR``, ``AR:first_frame``, ``AR:multi_frame:3``,
    ``AR:custom:<label>``.
    """

    family: str  # "CR" or "AR"
    detail: Optional[str] = None
    k: Optional[int] = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.family == "CR":
            if self.detail is not None or self.k is not None or self.label is not None:
                raise LipleakError("CR carries no detail")
        elif self.family == "AR":
            if self.detail not in AR_DETAILS:
                raise LipleakError(f"unknown AR detail {self.detail!r}")
            if self.detail == "multi_frame":
                if self.k is None or self.k < 2:
                    raise LipleakError(f"multi_frame needs k >= 2, got {self.k}")
            elif self.k is not None:
                raise LipleakError(f"k is only valid for multi_frame, not {self.detail}")
            if self.detail == "custom":
                if not self.label:
                    raise LipleakError("custom AR detail needs a label")
            elif self.label is not None:
                raise LipleakError(f"label is only valid for custom, not {self.detail}")
        else:
            raise LipleakError(f"unknown reference family {self.family!r}")

    def serialize(self) -> str:
        if self.family == "CR":
            return "CR"
        if self.detail == "multi_frame":
            return f"AR:multi_frame:{self.k}"
        if self.detail == "custom":
            return f"AR:custom:{self.label}"
        return f"AR:{self.detail}"

    @staticmethod
    def parse(text: str) -> "ReferenceStrategy":
        parts = text.split(":")
        if parts == ["CR"]:
            return CR
        if parts[0] != "AR" or len(parts) < 2:
            raise LipleakError(f"cannot parse reference strategy {text!r}")
        detail = parts[1]
        if detail == "multi_frame":
            if len(parts) != 3:
                raise LipleakError(f"multi_frame needs a count: {text!r}")
            return ReferenceStrategy("AR", "multi_frame", k=int(parts[2]))
        if detail == "custom":
            if len(parts) < 3 or not parts[2]:
                raise LipleakError(f"custom detail needs a label: {text!r}")
            return ReferenceStrategy("AR", "custom", label=":".join(parts[2:]))
        if len(parts) != 2:
            raise LipleakError(f"cannot parse reference strategy {text!r}")
        return ReferenceStrategy("AR", detail)

    def path_tag(self) -> str:
        """Filesystem-safe form used in artifact directory names."""
        return self.serialize().replace(":", "-")


CR = ReferenceStrategy("CR")
AR_FIRST_FRAME = ReferenceStrategy("AR", "first_frame")


@dataclass(frozen=True)
class ClipEntry:
    """One ground-truth clip: an ordered frame directory plus its audio track."""

    clip_id: str
    frame_dir: Path
    audio_path: Path
    fps: float
    sample_rate: int
    frame_count: int

    @property
    def duration_s(self) -> float:
        return self.frame_count / self.fps


@dataclass(frozen=True)
class ClipManifest:
    """Validated inventory of clips; entry order is the manifest file order."""

    entries: tuple[ClipEntry, ...]

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if entry.clip_id in seen:
                raise ManifestError(f"duplicate clip_id {entry.clip_id!r}")
            seen.add(entry.clip_id)

    @property
    def clip_ids(self) -> list[str]:
        return [e.clip_id for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, clip_id: str) -> ClipEntry:
        for entry in self.entries:
            if entry.clip_id == clip_id:
                return entry
        raise KeyError(clip_id)


@dataclass(frozen=True)
class GenerationJob:
    """One unit of work for a model adapter: (method, clip, setup, reference)."""

    method_name: str
    clip_id: str
    setup: SetupKind
    reference: ReferenceStrategy
    driving_audio_path: Path
    output_dir: Path
    effective_frame_count: int

    def key(self) -> tuple[str, str, str, str]:
        return (self.method_name, self.clip_id, self.setup.value, self.reference.serialize())

    def to_dict(self) -> dict:
        return {
            "method_name": self.method_name,
            "clip_id": self.clip_id,
            "setup": self.setup.value,
            "reference": self.reference.serialize(),
            "driving_audio_path": str(self.driving_audio_path),
            "output_dir": str(self.output_dir),
            "effective_frame_count": self.effective_frame_count,
        }

    @staticmethod
    def from_dict(d: dict) -> "GenerationJob":
        return GenerationJob(
            method_name=d["method_name"],
            clip_id=d["clip_id"],
            setup=SetupKind(d["setup"]),
            reference=ReferenceStrategy.parse(d["reference"]),
            driving_audio_path=Path(d["driving_audio_path"]),
            output_dir=Path(d["output_dir"]),
            effective_frame_count=int(d["effective_frame_count"]),
        )


TRACK_KINDS = ("visual_sync", "audio_sync", "identity", "distribution")


@dataclass(frozen=True)
class EmbeddingTrack:
    """A count x dim float32 matrix of per-frame features with rate metadata."""

    kind: str
    dim: int
    count: int
    rate_fps: float
    data: np.ndarray

    def __post_init__(self):
        if self.kind not in TRACK_KINDS:
            raise TrackError(f"unknown track kind {self.kind!r}")
        if self.dim < 1:
            raise TrackError(f"dim must be >= 1, got {self.dim}")
        if self.count < 0:
            raise TrackError(f"count must be >= 0, got {self.count}")
        if self.rate_fps <= 0:
            raise TrackError(f"rate_fps must be positive, got {self.rate_fps}")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.shape != (self.count, self.dim):
            raise TrackError(
                f"data shape {data.shape} does not match count x dim "
                f"({self.count} x {self.dim})"
            )
        if data.size and not np.isfinite(data).all():
            bad = int(np.argwhere(~np.isfinite(data).all(axis=1))[0, 0])
            raise TrackError(f"non-finite value in track row {bad}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class LandmarkTrack:
    """Per-frame (x, y) landmark coordinates in pixels.

    A frame entry of ``None`` marks a failed detection; such frames are
    excluded pairwise from landmark metrics.  Coordinates may be negative
    (points can fall outside the crop) but must be finite.
    """

    scheme: str
    points_per_frame: int
    frames: tuple[Optional[np.ndarray], ...]
    mouth_indices: tuple[int, ...]

    def __post_init__(self):
        if self.points_per_frame < 1:
            raise TrackError(f"points_per_frame must be >= 1, got {self.points_per_frame}")
        for i in self.mouth_indices:
            if not 0 <= i < self.points_per_frame:
                raise TrackError(f"mouth index {i} outside [0, {self.points_per_frame})")
        frozen = []
        for idx, pts in enumerate(self.frames):
            if pts is None:
                frozen.append(None)
                continue
            pts = np.ascontiguousarray(pts, dtype=np.float64)
            if pts.shape != (self.points_per_frame, 2):
                raise TrackError(
                    f"frame {idx} has shape {pts.shape}, expected "
                    f"({self.points_per_frame}, 2)"
                )
            if not np.isfinite(pts).all():
                raise TrackError(f"non-finite coordinate in frame {idx}")
            pts.flags.writeable = False
            frozen.append(pts)
        object.__setattr__(self, "frames", tuple(frozen))

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def missing_frames(self) -> list[int]:
        return [i for i, pts in enumerate(self.frames) if pts is None]


@dataclass(frozen=True)
class SyncScores:
    """Lip-sync scores: confidence (higher = better) and distance (lower = better)."""

    lse_c: float
    lse_d: float

    def __post_init__(self):
        for name, v in (("lse_c", self.lse_c), ("lse_d", self.lse_d)):
            if not math.isfinite(v) or v < 0:
                raise MetricError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class MetricRecord:
    """One metric value keyed by (method, clip, setup, reference, metric)."""

    method_name: str
    clip_id: str
    setup: SetupKind
    reference: ReferenceStrategy
    metric_name: str
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise MetricError(
                f"non-finite value for {self.metric_name} on "
                f"{self.method_name}/{self.clip_id}"
            )

    def key(self) -> tuple[str, str, str, str, str]:
        return (
            self.method_name,
            self.clip_id,
            self.setup.value,
            self.reference.serialize(),
            self.metric_name,
        )


@dataclass
class ValidationReport:
    """Machine-readable list of failed invariants; empty means valid."""

    clip_id: str
    issues: list[tuple[str, str]] = field(default_factory=list)

    def add(self, code: str, message: str) -> None:
        self.issues.append((code, message))

    @property
    def ok(self) -> bool:
        return not self.issues

    def codes(self) -> list[str]:
        return [code for code, _ in self.issues]


def list_frames(frame_dir: Path) -> list[Path]:
    """Ordered frame files of a clip (lexicographic filename order)."""
    return sorted(
        (p for p in Path(frame_dir).iterdir() if p.suffix.lower() in FRAME_EXTENSIONS),
        key=lambda p: p.name,
    )


def _parse_fps(value) -> float:
    if isinstance(value, str):
        if "/" in value:
            num, den = value.split("/", 1)
            return float(num) / float(den)
        return float(value)
    return float(value)


def parse_manifest(path: str | Path) -> ClipManifest:
    """Parse a manifest document without touching frame dirs or audio files.

    Structural problems (missing file, malformed JSON, missing fields,
    duplicate ids, non-positive numerics) raise ManifestError.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    entries = []
    required = ("clip_id", "frame_dir", "audio_path", "fps", "sample_rate", "frame_count")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise ManifestError(f"{path}:{lineno}: expected an object per line")
        missing = [k for k in required if k not in record]
        if missing:
            raise ManifestError(f"{path}:{lineno}: missing fields {missing}")
        clip_id = str(record["clip_id"])
        if not clip_id:
            raise ManifestError(f"{path}:{lineno}: empty clip_id")
        fps = _parse_fps(record["fps"])
        sample_rate = int(record["sample_rate"])
        frame_count = int(record["frame_count"])
        if fps <= 0:
            raise ManifestError(f"{path}:{lineno}: clip {clip_id!r}: fps must be positive")
        if sample_rate <= 0:
            raise ManifestError(
                f"{path}:{lineno}: clip {clip_id!r}: sample_rate must be positive"
            )
        if frame_count < 1:
            raise ManifestError(
                f"{path}:{lineno}: clip {clip_id!r}: frame_count must be >= 1"
            )
        entries.append(
            ClipEntry(
                clip_id=clip_id,
                frame_dir=(base / record["frame_dir"]).resolve(),
                audio_path=(base / record["audio_path"]).resolve(),
                fps=fps,
                sample_rate=sample_rate,
                frame_count=frame_count,
            )
        )
    try:
        return ClipManifest(entries=tuple(entries))
    except ManifestError as exc:
        raise ManifestError(f"{path}: {exc}") from exc


def check_clip_invariants(entry: ClipEntry) -> list[tuple[str, str]]:
    """Filesystem-backed invariant checks shared by load_manifest and validate_clip."""
    issues: list[tuple[str, str]] = []
    if entry.fps <= 0:
        issues.append(("nonpositive-fps", f"fps={entry.fps}"))
    if entry.sample_rate <= 0:
        issues.append(("nonpositive-sample-rate", f"sample_rate={entry.sample_rate}"))
    if entry.frame_count < 1:
        issues.append(("nonpositive-frame-count", f"frame_count={entry.frame_count}"))

    if not entry.frame_dir.is_dir():
        issues.append(("missing-frame-dir", str(entry.frame_dir)))
        n_frames = None
    else:
        n_frames = len(list_frames(entry.frame_dir))
        if n_frames != entry.frame_count:
            issues.append(
                (
                    "frame-count-mismatch",
                    f"manifest says {entry.frame_count}, found {n_frames} frame files",
                )
            )

    if not entry.audio_path.is_file():
        issues.append(("missing-audio", str(entry.audio_path)))
        info = None
    else:
        try:
            info = wavio.read_info(entry.audio_path)
        except WavFormatError as exc:
            issues.append(("bad-audio-format", str(exc)))
            info = None

    if info is not None:
        if info.sample_rate != entry.sample_rate:
            issues.append(
                (
                    "audio-rate-mismatch",
                    f"manifest says {entry.sample_rate} Hz, file is {info.sample_rate} Hz",
                )
            )
        if entry.fps > 0 and entry.frame_count >= 1:
            video_s = entry.frame_count / entry.fps
            audio_s = info.n_samples / info.sample_rate
            # tolerance: one frame period of sub-frame audio padding
            if abs(video_s - audio_s) > 1.0 / entry.fps + 1e-9:
                issues.append(
                    (
                        "duration-mismatch",
                        f"clip {entry.clip_id!r}: video {video_s:.6f} s vs "
                        f"audio {audio_s:.6f} s exceeds one frame period",
                    )
                )
    return issues


def validate_clip(entry: ClipEntry) -> ValidationReport:
    """Full per-clip validation; all failures land in the report, nothing raises."""
    report = ValidationReport(clip_id=entry.clip_id)
    for code, message in check_clip_invariants(entry):
        report.add(code, message)

    # Frame files must be 8-bit RGB with identical dimensions within the clip.
    if entry.frame_dir.is_dir():
        dims = None
        for frame in list_frames(entry.frame_dir):
            try:
                with Image.open(frame) as img:
                    size, mode = img.size, img.mode
            except Exception as exc:
                report.add("frame-unreadable", f"{frame.name}: {exc}")
                continue
            if mode != "RGB":
                report.add("frame-not-rgb", f"{frame.name}: mode {mode}")
            if dims is None:
                dims = size
            elif size != dims:
                report.add(
                    "frame-dims-mismatch",
                    f"{frame.name}: {size[0]}x{size[1]} differs from {dims[0]}x{dims[1]}",
                )
    return report


def load_manifest(path: str | Path, check_clips: bool = True) -> ClipManifest:
    """Load and validate a manifest; raises ManifestError on any violation.

    With ``check_clips=False`` only the document structure is validated,
    which is what the ``validate`` command uses to produce per-clip reports
    instead of failing on the first bad clip.
    """
    manifest = parse_manifest(path)
    if check_clips:
        failures = []
        for entry in manifest.entries:
            for code, message in check_clip_invariants(entry):
                failures.append(f"{entry.clip_id}: {code}: {message}")
        if failures:
            raise ManifestError(
                f"{path}: {len(failures)} clip invariant violation(s):\n  "
                + "\n  ".join(failures)
            )
    return manifest


def validate_job(
    job: GenerationJob,
    manifest: ClipManifest,
    check_silence: bool = True,
) -> list[str]:
    """Check the setup/audio-source invariants of a job; returns violations."""
    problems = []
    try:
        clip = manifest[job.clip_id]
    except KeyError:
        return [f"unknown clip_id {job.clip_id!r}"]

    if job.effective_frame_count < 1:
        problems.append("effective_frame_count < 1")
    elif job.effective_frame_count > clip.frame_count:
        problems.append(
            f"effective_frame_count {job.effective_frame_count} exceeds "
            f"clip frame_count {clip.frame_count}"
        )

    driving = Path(job.driving_audio_path).resolve()
    if job.setup is SetupKind.AM:
        if driving != clip.audio_path.resolve():
            problems.append("AM job does not use the clip's own audio")
    elif job.setup is SetupKind.XM:
        if driving == clip.audio_path.resolve():
            problems.append("XM job uses the clip's own audio")
        else:
            owners = [
                e.clip_id for e in manifest.entries if e.audio_path.resolve() == driving
            ]
            if not owners:
                problems.append("XM driving audio does not belong to any manifest clip")
    elif job.setup is SetupKind.SI:
        try:
            samples, rate = wavio.read_samples(driving)
        except WavFormatError as exc:
            return problems + [f"SI audio unreadable: {exc}"]
        if check_silence and samples.size and np.any(samples != 0):
            problems.append("SI driving audio contains non-zero samples")
        expected = clip.duration_s
        actual = samples.size / rate
        if abs(expected - actual) > 1.0 / clip.fps + 1e-9:
            problems.append(
                f"SI audio duration {actual:.6f} s differs from clip duration "
                f"{expected:.6f} s by more than one frame period"
            )
    return problems
