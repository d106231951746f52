"""Landmark track text format.

UTF-8 lines, tokens separated by single spaces:

    landmarks v1
    scheme <label>
    points <P>
    mouth <i0> <i1> ...          (optional; defaults to 48..67 when P is 68)
    frame <idx> missing
    frame <idx> <x0> <y0> ... <x(P-1)> <y(P-1)>

Frame records must be contiguous from index 0.  ``missing`` marks a frame
where detection failed; metric code excludes such frames pairwise rather
than inventing coordinates.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import LandmarkFormatError
from .model import LandmarkTrack

_DEFAULT_MOUTH_68 = tuple(range(48, 68))


def write_landmark_track(track: LandmarkTrack, path: str | Path) -> None:
    lines = [
        "landmarks v1",
        f"scheme {track.scheme}",
        f"points {track.points_per_frame}",
        "mouth " + " ".join(str(i) for i in track.mouth_indices),
    ]
    for idx, pts in enumerate(track.frames):
        if pts is None:
            lines.append(f"frame {idx} missing")
        else:
            coords = " ".join(repr(float(v)) for v in pts.ravel())
            lines.append(f"frame {idx} {coords}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_landmark_track(path: str | Path) -> LandmarkTrack:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LandmarkFormatError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise LandmarkFormatError(f"{path}: empty landmark file")
    if lines[0].strip() != "landmarks v1":
        raise LandmarkFormatError(f"{path}: bad header line {lines[0]!r}")

    scheme = None
    points = None
    mouth: tuple[int, ...] | None = None
    frames: list[np.ndarray | None] = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        tag = tokens[0]
        if tag == "scheme":
            if len(tokens) != 2:
                raise LandmarkFormatError(f"{path}:{lineno}: scheme needs one label")
            scheme = tokens[1]
        elif tag == "points":
            points = int(tokens[1])
            if points < 1:
                raise LandmarkFormatError(f"{path}:{lineno}: points must be >= 1")
        elif tag == "mouth":
            mouth = tuple(int(t) for t in tokens[1:])
        elif tag == "frame":
            if scheme is None or points is None:
                raise LandmarkFormatError(
                    f"{path}:{lineno}: frame record before scheme/points header"
                )
            idx = int(tokens[1])
            if idx != len(frames):
                raise LandmarkFormatError(
                    f"{path}:{lineno}: frame index {idx} out of order "
                    f"(expected {len(frames)})"
                )
            if tokens[2:] == ["missing"]:
                frames.append(None)
                continue
            coords = tokens[2:]
            if len(coords) != 2 * points:
                raise LandmarkFormatError(
                    f"{path}:{lineno}: frame {idx} has {len(coords) // 2} points, "
                    f"expected {points}"
                )
            try:
                values = np.array([float(c) for c in coords], dtype=np.float64)
            except ValueError as exc:
                raise LandmarkFormatError(f"{path}:{lineno}: bad coordinate: {exc}") from exc
            if not np.isfinite(values).all():
                raise LandmarkFormatError(
                    f"{path}:{lineno}: non-finite coordinate in frame {idx}"
                )
            frames.append(values.reshape(points, 2))
        else:
            raise LandmarkFormatError(f"{path}:{lineno}: unknown record {tag!r}")

    if scheme is None or points is None:
        raise LandmarkFormatError(f"{path}: missing scheme or points header")
    if not frames:
        raise LandmarkFormatError(f"{path}: no frame records")
    if mouth is None:
        if points == 68:
            mouth = _DEFAULT_MOUTH_68
        else:
            raise LandmarkFormatError(
                f"{path}: no mouth indices and no default for a {points}-point scheme"
            )
    return LandmarkTrack(
        scheme=scheme,
        points_per_frame=points,
        frames=tuple(frames),
        mouth_indices=mouth,
    )
