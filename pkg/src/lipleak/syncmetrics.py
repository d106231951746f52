"""Lip-sync scoring from paired audio/visual embedding tracks.

The LSE convention adopted here (and stated in every report) is the de facto
standard offset-scan procedure: slide the visual track against the audio
track over offsets -W..+W, take the mean Euclidean embedding distance at
each offset, and score

    LSE-D = min over offsets of the mean distance
    LSE-C = median of the profile - LSE-D

so a flat profile (no audio-visual coupling) gives confidence near zero.
The offset sign is oriented so that an audio track which is a k-shifted copy
of the visual track (a_t = v_{t-k}) is recovered at offset -k.

LSD is the leakage discrepancy: half the summed absolute AM-XM differences
of LSE-C and LSE-D under one reference strategy.  Corpus scores are
unweighted means of per-clip scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MetricError
from .model import EmbeddingTrack, SyncScores

DEFAULT_MAX_OFFSET = 15


@dataclass(frozen=True)
class OffsetProfile:
    """Mean embedding distance per offset; index i holds offset i - max_offset."""

    max_offset: int
    distances: np.ndarray

    def __post_init__(self):
        if self.max_offset < 1:
            raise MetricError(f"max_offset must be >= 1, got {self.max_offset}")
        d = np.ascontiguousarray(self.distances, dtype=np.float64)
        if d.shape != (2 * self.max_offset + 1,):
            raise MetricError(
                f"profile needs {2 * self.max_offset + 1} entries, got {d.shape}"
            )
        if not np.isfinite(d).all() or (d < 0).any():
            raise MetricError("profile distances must be finite and >= 0")
        d.flags.writeable = False
        object.__setattr__(self, "distances", d)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.max_offset, self.max_offset + 1)

    def offset_of_min(self) -> int:
        return int(np.argmin(self.distances)) - self.max_offset


@dataclass(frozen=True)
class LsdInputs:
    """LSE-C and LSE-D under AM and XM for one reference strategy."""

    c_am: float
    c_xm: float
    d_am: float
    d_xm: float

    def __post_init__(self):
        for name in ("c_am", "c_xm", "d_am", "d_xm"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise MetricError(f"{name} must be finite and >= 0, got {v}")


def offset_distance_profile(
    visual: EmbeddingTrack, audio: EmbeddingTrack, max_offset: int = DEFAULT_MAX_OFFSET
) -> OffsetProfile:
    """Scan offsets -W..+W; at each offset average ||v_{t+o} - a_t|| over valid t.

    Each offset's mean uses only the alignment positions that exist at that
    offset.  Requires both tracks to share kind pairing (visual_sync vs
    audio_sync), dimension and rate, and min(counts) > 2 * max_offset so
    every offset has overlap.
    """
    if visual.kind != "visual_sync":
        raise MetricError(f"expected a visual_sync track, got {visual.kind}")
    if audio.kind != "audio_sync":
        raise MetricError(f"expected an audio_sync track, got {audio.kind}")
    if visual.dim != audio.dim:
        raise MetricError(f"dim mismatch: {visual.dim} vs {audio.dim}")
    if visual.rate_fps != audio.rate_fps:
        raise MetricError(f"rate mismatch: {visual.rate_fps} vs {audio.rate_fps}")
    if max_offset < 1:
        raise MetricError(f"max_offset must be >= 1, got {max_offset}")
    if min(visual.count, audio.count) <= 2 * max_offset:
        raise MetricError(
            f"tracks too short for max_offset={max_offset}: "
            f"counts {visual.count}/{audio.count} need > {2 * max_offset}"
        )

    v = visual.data.astype(np.float64)
    a = audio.data.astype(np.float64)
    tv, ta = visual.count, audio.count
    distances = np.empty(2 * max_offset + 1, dtype=np.float64)
    for i, o in enumerate(range(-max_offset, max_offset + 1)):
        # valid t: 0 <= t < ta and 0 <= t + o < tv
        t0 = max(0, -o)
        t1 = min(ta, tv - o)
        diffs = v[t0 + o : t1 + o] - a[t0:t1]
        distances[i] = float(np.linalg.norm(diffs, axis=1).mean())
    return OffsetProfile(max_offset=max_offset, distances=distances)


def lse_from_profile(profile: OffsetProfile) -> SyncScores:
    """LSE-D = min of the profile; LSE-C = median - min (>= 0 by construction)."""
    d = profile.distances
    lse_d = float(np.min(d))
    # even-length medians (possible for non-default W handling) are the mean
    # of the two central elements, which np.median pins down
    lse_c = float(np.median(d) - lse_d)
    return SyncScores(lse_c=lse_c, lse_d=max(lse_d, 0.0))


def lse_scores(
    visual: EmbeddingTrack, audio: EmbeddingTrack, max_offset: int = DEFAULT_MAX_OFFSET
) -> SyncScores:
    """Convenience composition: profile + LSE scoring."""
    return lse_from_profile(offset_distance_profile(visual, audio, max_offset))


def lse_silent(
    si_visual: EmbeddingTrack,
    original_audio: EmbeddingTrack,
    max_offset: int = DEFAULT_MAX_OFFSET,
) -> SyncScores:
    """Silent-input leakage scores: SI-generated visuals vs the clip's own audio.

    High confidence here means the silent generation still mouths the
    original speech, i.e. lip content leaked from the identity reference.
    """
    return lse_scores(si_visual, original_audio, max_offset)


def lsd(inputs: LsdInputs) -> float:
    """Half the summed absolute AM-XM gaps of LSE-C and LSE-D.

    Zero iff matched and mismatched scores coincide; higher means the model's
    sync quality depends on whether the audio matches the video, the leakage
    signature.
    """
    return 0.5 * (abs(inputs.c_am - inputs.c_xm) + abs(inputs.d_am - inputs.d_xm))
