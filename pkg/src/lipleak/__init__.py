"""lipleak: an evaluation harness for identity-reference lip leakage.

Quantifies how much an inpainting-based talking face generator's lip motion
is driven by its identity reference image rather than by the audio, by
crossing three generation setups (audio-matched, audio-mismatched,
silent-input) with two reference strategies (current frame vs alternative)
and scoring the results with sync, quality and identity metrics.  Generators
and neural feature extractors stay outside the process boundary: they are
driven as adapter subprocesses and communicate through documented file
formats, so the numeric core runs with no ML dependencies.
"""

from .errors import (
    AdapterError,
    LandmarkFormatError,
    LipleakError,
    ManifestError,
    MetricError,
    PairingError,
    ReportError,
    TrackError,
    TrackFormatError,
    WavFormatError,
)
from .model import (
    AR_FIRST_FRAME,
    CORPUS_CLIP_ID,
    CR,
    ClipEntry,
    ClipManifest,
    EmbeddingTrack,
    GenerationJob,
    LandmarkTrack,
    MetricRecord,
    ReferenceStrategy,
    SetupKind,
    SyncScores,
    ValidationReport,
    list_frames,
    load_manifest,
    parse_manifest,
    validate_clip,
    validate_job,
)
from .embt import read_embedding_track, write_embedding_track
from .landmarks_io import read_landmark_track, write_landmark_track
from .setups import (
    PairingMap,
    SetupGrid,
    align_lengths,
    build_setup_grid,
    derange_pairing,
    make_silent_audio,
    read_grid,
    write_grid,
)
from .syncmetrics import (
    DEFAULT_MAX_OFFSET,
    LsdInputs,
    OffsetProfile,
    lsd,
    lse_from_profile,
    lse_scores,
    lse_silent,
    offset_distance_profile,
)
from .visualmetrics import (
    GaussianFit,
    SsimParams,
    csim,
    csim_track_mean,
    fit_gaussian,
    frechet_distance,
    lmd,
    psnr,
    ssim,
)
from .adapter import AdapterSpec, ArtifactSet, run_adapter, validate_artifacts
from .report import (
    EvaluationReport,
    LeakageReport,
    MethodSetupTable,
    aggregate,
    leakage_report,
    render,
)

__version__ = "0.1.0"
