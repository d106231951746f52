"""Feature backends.

Two families:

  - handcrafted: deterministic classical features (mel filterbank energies,
    block-pooled pixel statistics, intensity-moment landmark localization).
    They satisfy the interchange contract bit-for-bit across reruns and need
    nothing beyond numpy/PIL, which is what CI and the harness's stub-level
    tests use.  They carry no learned audio-visual alignment, so scores
    computed from them exercise the pipeline rather than rank models.
  - TorchScript checkpoints: any exported sync/identity/distribution model
    (e.g. a SyncNet export for the sync tracks, an ArcFace export for
    identity, an Inception pool3 export for distribution features, a FAN
    export for landmarks).  Checkpoints are not bundled; see the README for
    the upstream weight sources and export recipes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


class CheckpointError(RuntimeError):
    """A model backend was requested but cannot run (torch/checkpoint missing)."""


def load_torchscript(checkpoint: str | None, purpose: str):
    """Load a TorchScript module, with actionable errors when unavailable."""
    if not checkpoint:
        raise CheckpointError(
            f"{purpose}: no checkpoint given; pass --checkpoint with a "
            f"TorchScript export (see README for weight sources) or use the "
            f"handcrafted backend"
        )
    if not Path(checkpoint).is_file():
        raise CheckpointError(f"{purpose}: checkpoint missing: {checkpoint}")
    try:
        import torch
    except ImportError as exc:
        raise CheckpointError(
            f"{purpose}: torch is not installed; install the 'model' extra"
        ) from exc
    module = torch.jit.load(checkpoint, map_location="cpu")
    module.eval()
    return module


# ---------------------------------------------------------------------------
# handcrafted image features
# ---------------------------------------------------------------------------


def load_frame_gray(path: Path, size: int = 32) -> np.ndarray:
    with Image.open(path) as img:
        gray = img.convert("L").resize((size, size), Image.BILINEAR)
    return np.asarray(gray, dtype=np.float64) / 255.0


def load_frame_rgb(path: Path, size: int = 32) -> np.ndarray:
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    return np.asarray(rgb, dtype=np.float64) / 255.0


def block_pool(image: np.ndarray, blocks: int = 8) -> np.ndarray:
    """Mean-pool a square single-channel image into blocks x blocks cells."""
    h = image.shape[0]
    step = h // blocks
    pooled = image[: blocks * step, : blocks * step]
    pooled = pooled.reshape(blocks, step, blocks, step).mean(axis=(1, 3))
    return pooled.ravel()


def fixed_projection(in_dim: int, out_dim: int, seed: int) -> np.ndarray:
    """A constant random projection so feature dims are backend-stable."""
    rng = np.random.default_rng(seed)
    mat = rng.normal(size=(in_dim, out_dim)) / np.sqrt(in_dim)
    return mat


def l2_normalize(rows: np.ndarray, eps: float = 1e-9) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.maximum(norms, eps)


# ---------------------------------------------------------------------------
# handcrafted audio features
# ---------------------------------------------------------------------------


def mel_filterbank(n_filters: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank over the positive FFT bins."""

    def hz_to_mel(hz):
        return 2595.0 * np.log10(1.0 + hz / 700.0)

    def mel_to_hz(mel):
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)

    n_bins = n_fft // 2 + 1
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_filters + 2)
    hz_points = mel_to_hz(mel_points)
    bins = np.floor((n_fft + 1) * hz_points / sample_rate).astype(int)
    bank = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        left, center, right = bins[i], bins[i + 1], bins[i + 2]
        center = max(center, left + 1)
        right = max(right, center + 1)
        for b in range(left, min(center, n_bins)):
            bank[i, b] = (b - left) / (center - left)
        for b in range(center, min(right, n_bins)):
            bank[i, b] = (right - b) / (right - center)
    return bank


def log_mel_frames(
    samples: np.ndarray,
    sample_rate: int,
    n_frames: int,
    samples_per_frame: int,
    n_filters: int = 32,
    n_fft: int = 512,
) -> np.ndarray:
    """One log-mel energy vector per video-frame index."""
    bank = mel_filterbank(n_filters, n_fft, sample_rate)
    window = np.hanning(n_fft)
    out = np.zeros((n_frames, n_filters))
    x = samples.astype(np.float64) / 32768.0
    for t in range(n_frames):
        center = t * samples_per_frame + samples_per_frame // 2
        start = center - n_fft // 2
        seg = np.zeros(n_fft)
        lo = max(0, start)
        hi = min(x.size, start + n_fft)
        if hi > lo:
            seg[lo - start : hi - start] = x[lo:hi]
        spectrum = np.abs(np.fft.rfft(seg * window))
        out[t] = np.log1p(bank @ (spectrum**2))
    return out


# ---------------------------------------------------------------------------
# handcrafted landmark localization
# ---------------------------------------------------------------------------

_TEMPLATE_CACHE: np.ndarray | None = None


def canonical_68_template() -> np.ndarray:
    """A fixed 68-point face layout in normalized [0, 1] coordinates."""
    global _TEMPLATE_CACHE
    if _TEMPLATE_CACHE is not None:
        return _TEMPLATE_CACHE
    pts = np.zeros((68, 2))
    # jaw: 17 points along a lower half-ellipse arc
    theta = np.linspace(np.pi, 2 * np.pi, 17)
    pts[0:17, 0] = 0.5 + 0.45 * np.cos(theta)
    pts[0:17, 1] = 0.55 - 0.45 * np.sin(theta)
    # brows: two arcs of 5
    for side, xs in ((17, np.linspace(0.2, 0.42, 5)), (22, np.linspace(0.58, 0.8, 5))):
        pts[side : side + 5, 0] = xs
        pts[side : side + 5, 1] = 0.3 - 0.03 * np.sin(np.linspace(0, np.pi, 5))
    # nose: bridge of 4, base of 5
    pts[27:31, 0] = 0.5
    pts[27:31, 1] = np.linspace(0.35, 0.55, 4)
    pts[31:36, 0] = np.linspace(0.42, 0.58, 5)
    pts[31:36, 1] = 0.6
    # eyes: two hexagons
    for side, cx in ((36, 0.33), (42, 0.67)):
        ang = np.linspace(0, 2 * np.pi, 6, endpoint=False)
        pts[side : side + 6, 0] = cx + 0.07 * np.cos(ang)
        pts[side : side + 6, 1] = 0.4 + 0.035 * np.sin(ang)
    # mouth: outer ring of 12, inner ring of 8
    ang = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    pts[48:60, 0] = 0.5 + 0.14 * np.cos(ang)
    pts[48:60, 1] = 0.75 + 0.06 * np.sin(ang)
    ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    pts[60:68, 0] = 0.5 + 0.08 * np.cos(ang)
    pts[60:68, 1] = 0.75 + 0.03 * np.sin(ang)
    _TEMPLATE_CACHE = pts
    return pts


def locate_landmarks(gray: np.ndarray, min_contrast: float = 0.01) -> np.ndarray | None:
    """Fit the canonical template to the intensity mass of one frame.

    Returns None when the frame has no usable structure (near-constant
    intensity), which callers record as an explicit missing-frame marker.
    """
    if float(gray.std()) < min_contrast:
        return None
    h, w = gray.shape
    ys, xs = np.mgrid[0:h, 0:w]
    weights = gray / gray.sum() if gray.sum() > 0 else None
    if weights is None:
        return None
    cx = float((weights * xs).sum())
    cy = float((weights * ys).sum())
    sx = float(np.sqrt((weights * (xs - cx) ** 2).sum()))
    sy = float(np.sqrt((weights * (ys - cy) ** 2).sum()))
    box_w = max(4.0 * sx, 4.0)
    box_h = max(4.0 * sy, 4.0)
    template = canonical_68_template()
    out = np.empty_like(template)
    out[:, 0] = cx - box_w / 2 + template[:, 0] * box_w
    out[:, 1] = cy - box_h / 2 + template[:, 1] * box_h
    # mouth opening follows the lower-face intensity so speech-like content
    # moves the mouth points deterministically
    lower = gray[int(h * 0.6) :, :]
    opening = float(lower.mean()) * 0.1 * box_h
    out[48:68, 1] += opening
    return out
