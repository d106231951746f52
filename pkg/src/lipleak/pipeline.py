"""Per-job metric computation over a generated artifact tree.

Given a setup grid, a manifest and the artifact directories written by the
adapters, this module turns everything into MetricRecords:

  - lse_c / lse_d per clip for AM and XM (generated visuals vs driving audio)
    and for SI (generated visuals vs the clip's own audio, taken from the AM
    job's audio track, which is the original audio by construction),
  - ssim / psnr frame-wise against GT frames at the same index,
  - csim against GT identity embeddings (optionally against the reference
    image's embedding where that is well-defined),
  - fid corpus-level per (method, setup, reference),
  - lmd in the AM setup only.

Ground-truth feature files live in a directory produced by running an
extractor adapter over the GT clips (``lipleak extract-gt``): per clip,
``<clip_id>/identity.embt``, ``<clip_id>/distribution.embt`` and
``<clip_id>/landmarks.txt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from . import syncmetrics, visualmetrics
from .adapter import artifact_path
from .embt import read_embedding_track
from .errors import LipleakError, MetricError, TrackFormatError
from .landmarks_io import read_landmark_track
from .model import (
    CORPUS_CLIP_ID,
    ClipManifest,
    EmbeddingTrack,
    GenerationJob,
    MetricRecord,
    SetupKind,
    list_frames,
)
from .setups import SetupGrid

ALL_METRICS = ("lse", "ssim", "psnr", "csim", "fid", "lmd")


@dataclass(frozen=True)
class MetricsConfig:
    metrics: tuple[str, ...] = ALL_METRICS
    max_offset: int = syncmetrics.DEFAULT_MAX_OFFSET
    region_mask: Optional[tuple[int, int, int, int]] = None  # x0, y0, x1, y1
    lmd_normalize: bool = False
    csim_reference: bool = False
    ssim_params: visualmetrics.SsimParams = visualmetrics.SsimParams()

    def __post_init__(self):
        unknown = [m for m in self.metrics if m not in ALL_METRICS]
        if unknown:
            raise LipleakError(f"unknown metrics {unknown}; valid: {list(ALL_METRICS)}")


@dataclass
class MetricsResult:
    records: list[MetricRecord] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def _load_frame(path: Path, mask) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"))
    if mask is not None:
        x0, y0, x1, y1 = mask
        arr = arr[y0:y1, x0:x1]
        if arr.size == 0:
            raise MetricError(f"region mask {mask} leaves no pixels for {path}")
    return arr


def _gt_feature(gt_dir: Path, clip_id: str, name: str) -> Path:
    return gt_dir / clip_id / name


def compute_metrics(
    grid: SetupGrid,
    manifest: ClipManifest,
    config: MetricsConfig,
    gt_features_dir: Optional[Path] = None,
    parallelism: int = 1,
) -> MetricsResult:
    """Compute all enabled metrics for every job in the grid.

    Per-job work may run in parallel; results are merged in grid job order so
    the output is independent of scheduling.
    """
    result = MetricsResult()
    jobs_by_key = {job.key(): job for job in grid.jobs}

    if parallelism > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            partials = list(
                pool.map(
                    lambda job: _job_metrics(
                        job, manifest, jobs_by_key, config, gt_features_dir
                    ),
                    grid.jobs,
                )
            )
    else:
        partials = [
            _job_metrics(job, manifest, jobs_by_key, config, gt_features_dir)
            for job in grid.jobs
        ]

    lmd_excluded = 0
    for partial in partials:
        result.records.extend(partial.records)
        result.problems.extend(partial.problems)
        result.notices.extend(partial.notices)
        lmd_excluded += partial.lmd_excluded

    if "fid" in set(config.metrics):
        _corpus_fid(grid, gt_features_dir, result)

    if lmd_excluded:
        result.notices.append(
            f"lmd: {lmd_excluded} frame pair(s) excluded for missing landmarks"
        )
    return result


@dataclass
class _JobPartial:
    records: list[MetricRecord] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)
    lmd_excluded: int = 0


def _job_metrics(job, manifest, jobs_by_key, config, gt_features_dir) -> _JobPartial:
    out = _JobPartial()
    clip = manifest[job.clip_id]
    tag = "/".join(job.key())
    want = set(config.metrics)

    if "lse" in want:
        try:
            scores = _sync_scores(job, jobs_by_key, config.max_offset)
            out.records.append(_rec(job, "lse_c", scores.lse_c))
            out.records.append(_rec(job, "lse_d", scores.lse_d))
        except (LipleakError, OSError) as exc:
            out.problems.append(f"{tag}: lse: {exc}")

    if want & {"ssim", "psnr"}:
        try:
            ssim_mean, psnr_mean = _frame_quality(job, clip, config)
            if "ssim" in want:
                out.records.append(_rec(job, "ssim", ssim_mean))
            if "psnr" in want:
                out.records.append(_rec(job, "psnr", psnr_mean))
        except (LipleakError, OSError) as exc:
            out.problems.append(f"{tag}: ssim/psnr: {exc}")

    if "csim" in want:
        try:
            for name, value in _identity_similarity(job, gt_features_dir, config):
                out.records.append(_rec(job, name, value))
        except (LipleakError, OSError) as exc:
            out.problems.append(f"{tag}: csim: {exc}")

    if "lmd" in want:
        if job.setup is not SetupKind.AM:
            out.notices.append(f"{tag}: lmd is defined for the AM setup only, skipped")
        else:
            try:
                value, excluded = _landmark_distance(job, gt_features_dir, config)
                out.lmd_excluded += excluded
                out.records.append(_rec(job, "lmd", value))
            except (LipleakError, OSError) as exc:
                out.problems.append(f"{tag}: lmd: {exc}")
    return out


def _rec(job: GenerationJob, metric: str, value: float) -> MetricRecord:
    return MetricRecord(
        method_name=job.method_name,
        clip_id=job.clip_id,
        setup=job.setup,
        reference=job.reference,
        metric_name=metric,
        value=float(value),
    )


def _sync_scores(job, jobs_by_key, max_offset):
    visual = read_embedding_track(artifact_path(job.output_dir, "visual_sync"))
    if job.setup is SetupKind.SI:
        # score silent-input visuals against the clip's original audio, which
        # is exactly the AM job's driving audio track
        am_key = (job.method_name, job.clip_id, SetupKind.AM.value, job.reference.serialize())
        am_job = jobs_by_key.get(am_key)
        if am_job is None:
            raise MetricError("no AM job to source the original audio track from")
        audio = read_embedding_track(artifact_path(am_job.output_dir, "audio_sync"))
        return syncmetrics.lse_silent(visual, audio, max_offset)
    audio = read_embedding_track(artifact_path(job.output_dir, "audio_sync"))
    return syncmetrics.lse_scores(visual, audio, max_offset)


def _frame_quality(job, clip, config):
    gen_dir = artifact_path(job.output_dir, "generated_frames")
    if not gen_dir.is_dir():
        raise MetricError(f"missing generated_frames: {gen_dir}")
    gen_frames = list_frames(gen_dir)
    gt_frames = list_frames(clip.frame_dir)
    n = min(job.effective_frame_count, len(gen_frames), len(gt_frames))
    if n < 1:
        raise MetricError("no overlapping frames to compare")
    ssim_values = []
    psnr_values = []
    for i in range(n):
        a = _load_frame(gen_frames[i], config.region_mask)
        b = _load_frame(gt_frames[i], config.region_mask)
        ssim_values.append(visualmetrics.ssim(a, b, config.ssim_params))
        psnr_values.append(visualmetrics.psnr(a, b))
    return float(np.mean(ssim_values)), float(np.mean(psnr_values))


def _identity_similarity(job, gt_dir, config):
    if gt_dir is None:
        raise MetricError("csim needs --gt-features (identity embeddings of GT clips)")
    gen = read_embedding_track(artifact_path(job.output_dir, "identity"))
    gt_path = _gt_feature(gt_dir, job.clip_id, "identity.embt")
    if not gt_path.is_file():
        raise MetricError(f"missing GT identity track: {gt_path}")
    gt = read_embedding_track(gt_path)
    out = [("csim", visualmetrics.csim_track_mean(gen, gt))]
    if config.csim_reference:
        ref = job.reference
        if ref.family == "CR":
            out.append(("csim_ref", out[0][1]))
        elif ref.detail == "first_frame":
            if gt.count < 1:
                raise MetricError("empty GT identity track")
            first = EmbeddingTrack(
                kind="identity",
                dim=gt.dim,
                count=gen.count,
                rate_fps=gt.rate_fps,
                data=np.repeat(gt.data[:1], gen.count, axis=0),
            )
            out.append(("csim_ref", visualmetrics.csim_track_mean(gen, first)))
        # other AR details: the reference set is method-internal, so a
        # reference-image CSIM is not well-defined from harness data
    return out


def _landmark_distance(job, gt_dir, config):
    if gt_dir is None:
        raise MetricError("lmd needs --gt-features (landmarks of GT clips)")
    gen = read_landmark_track(artifact_path(job.output_dir, "landmarks"))
    gt_path = _gt_feature(gt_dir, job.clip_id, "landmarks.txt")
    if not gt_path.is_file():
        raise MetricError(f"missing GT landmark track: {gt_path}")
    gt = read_landmark_track(gt_path)
    n = min(gen.frame_count, gt.frame_count)
    gen_trimmed = _trim_track(gen, n)
    gt_trimmed = _trim_track(gt, n)
    excluded = sum(
        1
        for a, b in zip(gen_trimmed.frames, gt_trimmed.frames)
        if a is None or b is None
    )
    value = visualmetrics.lmd(gen_trimmed, gt_trimmed, config.lmd_normalize)
    return value, excluded


def _trim_track(track, n):
    if track.frame_count == n:
        return track
    from .model import LandmarkTrack

    return LandmarkTrack(
        scheme=track.scheme,
        points_per_frame=track.points_per_frame,
        frames=track.frames[:n],
        mouth_indices=track.mouth_indices,
    )


def _corpus_fid(grid: SetupGrid, gt_dir, result: MetricsResult) -> None:
    if gt_dir is None:
        result.problems.append("fid: needs --gt-features (distribution embeddings)")
        return
    groups: dict[tuple[str, str, str], list[GenerationJob]] = {}
    for job in grid.jobs:
        key = (job.method_name, job.setup.value, job.reference.serialize())
        groups.setdefault(key, []).append(job)

    ridge_events = 0
    for (method, setup, reference), jobs in sorted(groups.items()):
        gen_rows = []
        gt_rows = []
        missing = []
        for job in jobs:
            gen_path = artifact_path(job.output_dir, "distribution")
            gt_path = _gt_feature(gt_dir, job.clip_id, "distribution.embt")
            if not gen_path.is_file():
                missing.append(str(gen_path))
                continue
            if not gt_path.is_file():
                missing.append(str(gt_path))
                continue
            try:
                gen_rows.append(read_embedding_track(gen_path).data)
                gt_rows.append(read_embedding_track(gt_path).data)
            except TrackFormatError as exc:
                missing.append(str(exc))
        tag = f"{method}/{setup}/{reference}"
        if missing:
            result.problems.append(f"{tag}: fid: missing/invalid inputs: {missing}")
            continue
        if not gen_rows:
            result.problems.append(f"{tag}: fid: no distribution tracks")
            continue
        try:
            gen_track = _stack_distribution(gen_rows)
            gt_track = _stack_distribution(gt_rows)
            g_gen = visualmetrics.fit_gaussian(gen_track)
            g_gt = visualmetrics.fit_gaussian(gt_track)
            if g_gen.is_near_singular() or g_gt.is_near_singular():
                ridge_events += 1
            value = visualmetrics.frechet_distance(g_gen, g_gt)
        except (MetricError, TrackFormatError) as exc:
            result.problems.append(f"{tag}: fid: {exc}")
            continue
        job0 = jobs[0]
        result.records.append(
            MetricRecord(
                method_name=method,
                clip_id=CORPUS_CLIP_ID,
                setup=job0.setup,
                reference=job0.reference,
                metric_name="fid",
                value=value,
            )
        )
    if ridge_events:
        result.notices.append(
            f"fid: {ridge_events} group(s) needed an epsilon ridge on a "
            "near-singular covariance"
        )


def _stack_distribution(rows: list[np.ndarray]) -> EmbeddingTrack:
    data = np.concatenate(rows, axis=0)
    return EmbeddingTrack(
        kind="distribution",
        dim=data.shape[1],
        count=data.shape[0],
        rate_fps=1.0,
        data=data,
    )
