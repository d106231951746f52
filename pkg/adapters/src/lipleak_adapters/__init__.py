"""Reference extractor adapters for the lipleak evaluation harness.

Thin scripts that turn frames and audio into the harness's interchange
artifacts (EMBT embedding tracks, landmark text files).  All scored math
lives in the harness; this package only extracts and serializes.
"""

from .interchange import ExtractorJob, write_embt, write_landmarks
from .extractors import (
    extract_distribution_track,
    extract_identity_track,
    extract_landmarks,
    extract_sync_tracks,
)

__version__ = "0.1.0"
