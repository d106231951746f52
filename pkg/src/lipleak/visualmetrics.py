"""Visual quality and identity metrics: SSIM, PSNR, Fréchet distance, CSIM, LMD.

Conventions (all recorded in report metadata):
  - SSIM uses an 11x11 Gaussian window with sigma 1.5, k1=0.01, k2=0.03 and
    a dynamic range of 255, computed in valid mode (no padding) per channel
    and averaged over channels.
  - PSNR uses MAX=255 and is capped at 100 dB so identical frames keep
    corpus means finite.
  - The Fréchet distance uses the symmetric matrix-square-root form
    Tr((S1 S2)^1/2) = Tr((S1^1/2 S2 S1^1/2)^1/2) via eigendecompositions
    with eigenvalues clamped at zero; near-singular covariances get an
    epsilon*I ridge first.
  - LMD is the unnormalized per-point L1 distance in pixels over the mouth
    subset (indices 48..67 of the 68-point scheme by default), with an
    optional inter-ocular normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MetricError
from .model import EmbeddingTrack, LandmarkTrack

PSNR_CAP_DB = 100.0
MOUTH_INDICES_68 = tuple(range(48, 68))
_EYE_OUTER_68 = (36, 45)

# ridge applied when a covariance is numerically singular
_NEAR_SINGULAR_RATIO = 1e-10
_RIDGE_EPS = 1e-6


@dataclass(frozen=True)
class SsimParams:
    """Gaussian-window SSIM constants."""

    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise MetricError(f"window must be odd and >= 3, got {self.window}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise MetricError("k1 and k2 must be positive")
        if self.sigma <= 0 or self.dynamic_range <= 0:
            raise MetricError("sigma and dynamic_range must be positive")


@dataclass(frozen=True)
class GaussianFit:
    """Mean vector and symmetric PSD covariance of an embedding distribution."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        cov = np.ascontiguousarray(self.cov, dtype=np.float64)
        if mean.ndim != 1:
            raise MetricError(f"mean must be a vector, got shape {mean.shape}")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise MetricError(f"cov shape {cov.shape} does not match dim {d}")
        if not np.allclose(cov, cov.T, atol=1e-8):
            raise MetricError("covariance is not symmetric within 1e-8")
        eigs = np.linalg.eigvalsh((cov + cov.T) / 2.0)
        if eigs.size and eigs.min() < -1e-8:
            raise MetricError(f"covariance has eigenvalue {eigs.min():.3e} < -1e-8")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def is_near_singular(self) -> bool:
        eigs = np.linalg.eigvalsh(self.cov)
        largest = float(eigs.max()) if eigs.size else 0.0
        return bool(eigs.size and eigs.min() < _NEAR_SINGULAR_RATIO * largest)


def _as_image(frame: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(frame)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise MetricError(f"{name}: expected HxW or HxWxC image, got shape {arr.shape}")
    return arr


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = _as_image(a, "frame_a")
    b = _as_image(b, "frame_b")
    if a.shape != b.shape:
        raise MetricError(f"frame shapes differ: {a.shape} vs {b.shape}")
    return a, b


def gaussian_kernel_1d(window: int, sigma: float) -> np.ndarray:
    radius = window // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def _valid_gaussian_filter(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable Gaussian filtering cropped to the valid (unpadded) region."""
    from scipy import ndimage  # deferred: keeps subprocess tools import-light

    radius = kernel.size // 2
    y = ndimage.correlate1d(x, kernel, axis=0, mode="constant")
    y = ndimage.correlate1d(y, kernel, axis=1, mode="constant")
    return y[radius:-radius, radius:-radius]


def ssim(frame_a: np.ndarray, frame_b: np.ndarray, params: SsimParams | None = None) -> float:
    """Mean local SSIM over a Gaussian sliding window, averaged over channels."""
    params = params or SsimParams()
    a, b = _check_pair(frame_a, frame_b)
    h, w = a.shape[:2]
    if h < params.window or w < params.window:
        raise MetricError(
            f"image {h}x{w} smaller than the {params.window}x{params.window} window"
        )
    kernel = gaussian_kernel_1d(params.window, params.sigma)
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2

    channel_means = []
    for ch in range(a.shape[2]):
        x = a[:, :, ch].astype(np.float64)
        y = b[:, :, ch].astype(np.float64)
        mu_x = _valid_gaussian_filter(x, kernel)
        mu_y = _valid_gaussian_filter(y, kernel)
        var_x = _valid_gaussian_filter(x * x, kernel) - mu_x * mu_x
        var_y = _valid_gaussian_filter(y * y, kernel) - mu_y * mu_y
        cov_xy = _valid_gaussian_filter(x * y, kernel) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        channel_means.append(float(np.mean(num / den)))
    return float(np.mean(channel_means))


def psnr(frame_a: np.ndarray, frame_b: np.ndarray, cap_db: float = PSNR_CAP_DB) -> float:
    """10 log10(255^2 / MSE), capped so identical frames stay finite."""
    a, b = _check_pair(frame_a, frame_b)
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse == 0.0:
        return cap_db
    return min(10.0 * np.log10(255.0**2 / mse), cap_db)


def fit_gaussian(track: EmbeddingTrack) -> GaussianFit:
    """Column means and unbiased sample covariance of a distribution track."""
    if track.kind != "distribution":
        raise MetricError(f"expected a distribution track, got {track.kind}")
    if track.count < 2:
        raise MetricError(f"need >= 2 samples to fit a covariance, got {track.count}")
    x = track.data.astype(np.float64)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (track.count - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianFit(mean=mean, cov=cov)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(mat)
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def _maybe_ridge(cov: np.ndarray) -> np.ndarray:
    eigs = np.linalg.eigvalsh(cov)
    largest = float(eigs.max()) if eigs.size else 0.0
    if eigs.size and eigs.min() < _NEAR_SINGULAR_RATIO * largest:
        return cov + _RIDGE_EPS * np.eye(cov.shape[0])
    return cov


def frechet_distance(g1: GaussianFit, g2: GaussianFit) -> float:
    """||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^1/2), via the symmetric form.

    Identical fits return exactly 0.  Near-singular covariances are ridged
    with epsilon*I (callers can test GaussianFit.is_near_singular to record
    that in report metadata).
    """
    if g1.dim != g2.dim:
        raise MetricError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    if np.array_equal(g1.mean, g2.mean) and np.array_equal(g1.cov, g2.cov):
        return 0.0
    c1 = _maybe_ridge(g1.cov)
    c2 = _maybe_ridge(g2.cov)
    s1 = _psd_sqrt(c1)
    inner = s1 @ c2 @ s1
    inner = (inner + inner.T) / 2.0
    eigvals = np.linalg.eigvalsh(inner)
    tr_sqrt = float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())
    diff = g1.mean - g2.mean
    fd = float(diff @ diff + np.trace(c1) + np.trace(c2) - 2.0 * tr_sqrt)
    return max(fd, 0.0)


def csim(emb_gen: np.ndarray, emb_ref: np.ndarray) -> float:
    """Cosine similarity between two identity embeddings."""
    a = np.asarray(emb_gen, dtype=np.float64).ravel()
    b = np.asarray(emb_ref, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise MetricError(f"embedding dims differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise MetricError("cosine similarity undefined for a zero-norm embedding")
    return float(a @ b / (na * nb))


def csim_track_mean(gen: EmbeddingTrack, ref: EmbeddingTrack) -> float:
    """Per-frame cosine similarity averaged over the overlapping frame range."""
    if gen.kind != "identity" or ref.kind != "identity":
        raise MetricError("csim needs identity tracks")
    if gen.dim != ref.dim:
        raise MetricError(f"embedding dims differ: {gen.dim} vs {ref.dim}")
    n = min(gen.count, ref.count)
    if n == 0:
        raise MetricError("empty identity track")
    return float(np.mean([csim(gen.data[i], ref.data[i]) for i in range(n)]))


def lmd(
    gen: LandmarkTrack,
    gt: LandmarkTrack,
    normalize_interocular: bool = False,
) -> float:
    """Mean per-point L1 landmark distance over the mouth subset, in pixels.

    Frames missing in either track are excluded pairwise.  With
    ``normalize_interocular`` each frame's distance is divided by the GT
    outer-eye-corner distance (68-point scheme only).
    """
    if gen.scheme != gt.scheme:
        raise MetricError(f"scheme mismatch: {gen.scheme!r} vs {gt.scheme!r}")
    if gen.frame_count != gt.frame_count:
        raise MetricError(
            f"frame count mismatch: {gen.frame_count} vs {gt.frame_count}"
        )
    if gen.mouth_indices != gt.mouth_indices:
        raise MetricError("mouth index sets differ between tracks")
    if not gen.mouth_indices:
        raise MetricError("empty mouth index set")
    if normalize_interocular and gen.points_per_frame != 68:
        raise MetricError("inter-ocular normalization needs the 68-point scheme")

    mouth = list(gen.mouth_indices)
    per_frame = []
    for pts_gen, pts_gt in zip(gen.frames, gt.frames):
        if pts_gen is None or pts_gt is None:
            continue
        l1 = float(np.abs(pts_gen[mouth] - pts_gt[mouth]).sum(axis=1).mean())
        if normalize_interocular:
            left, right = _EYE_OUTER_68
            eye_dist = float(np.linalg.norm(pts_gt[right] - pts_gt[left]))
            if eye_dist <= 0:
                raise MetricError("degenerate inter-ocular distance in GT frame")
            l1 /= eye_dist
        per_frame.append(l1)
    if not per_frame:
        raise MetricError("no frame has landmarks in both tracks")
    return float(np.mean(per_frame))
