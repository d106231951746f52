"""Exception hierarchy for the lipleak harness."""


class LipleakError(Exception):
    """Base class for all harness errors."""


class ManifestError(LipleakError):
    """Manifest file is missing, malformed, or violates a clip invariant."""


class WavFormatError(LipleakError):
    """Audio file is not the supported RIFF/WAVE PCM 16-bit mono layout."""


class PairingError(LipleakError):
    """Mismatched-audio pairing cannot be constructed from the given clips."""


class TrackError(LipleakError):
    """An embedding track violates its structural invariants."""


class TrackFormatError(LipleakError):
    """An embedding track file cannot be parsed (bad magic, truncation, ...)."""


class LandmarkFormatError(LipleakError):
    """A landmark track file cannot be parsed or is internally inconsistent."""


class MetricError(LipleakError):
    """Metric inputs violate a precondition (shape, kind, or value domain)."""


class AdapterError(LipleakError):
    """An external adapter process failed or produced invalid artifacts."""


class ReportError(LipleakError):
    """Record aggregation or report construction failed."""
