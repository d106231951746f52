"""Manifest loading, clip validation, reference strategies, wav I/O."""

import json
import struct
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from lipleak import wavio
from lipleak.errors import LipleakError, ManifestError, WavFormatError
from lipleak.model import (
    CR,
    ClipEntry,
    ReferenceStrategy,
    load_manifest,
    parse_manifest,
    validate_clip,
)

from conftest import write_clip, write_manifest


def test_load_manifest_two_clips(tiny_corpus):
    manifest_path, records = tiny_corpus
    manifest = load_manifest(manifest_path)
    assert len(manifest) == 2
    assert manifest.clip_ids == ["clip_a", "clip_b"]


def test_load_manifest_is_deterministic(tiny_corpus):
    manifest_path, _ = tiny_corpus
    assert load_manifest(manifest_path) == load_manifest(manifest_path)


def test_duplicate_clip_id_error(tmp_path):
    record = write_clip(tmp_path, "c1", n_frames=25)
    manifest_path = write_manifest(tmp_path, [record, record])
    with pytest.raises(ManifestError, match="c1"):
        load_manifest(manifest_path)


def test_exact_duration_clip_accepted(tmp_path):
    # 25 frames at 25 fps and exactly 1.00 s of 16 kHz audio
    record = write_clip(tmp_path, "exact", n_frames=25)
    manifest = load_manifest(write_manifest(tmp_path, [record]))
    entry = manifest["exact"]
    assert entry.frame_count == 25
    assert wavio.read_info(entry.audio_path).n_samples == 16000


def test_missing_manifest_file(tmp_path):
    with pytest.raises(ManifestError, match="not found"):
        load_manifest(tmp_path / "nope.jsonl")


def test_malformed_manifest(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json}\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="malformed"):
        load_manifest(path)


def test_missing_fields(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"clip_id": "x"}) + "\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="missing fields"):
        load_manifest(path)


def test_duration_mismatch_reports_both_durations(tmp_path):
    record = write_clip(tmp_path, "short_audio", n_frames=40)
    # replace the audio with one that is 10 frames short
    samples, rate = wavio.read_samples(record["audio_path"])
    wavio.write_pcm16(record["audio_path"], samples[: 30 * 640], rate)
    manifest_path = write_manifest(tmp_path, [record])
    with pytest.raises(ManifestError) as err:
        load_manifest(manifest_path)
    message = str(err.value)
    assert "short_audio" in message
    assert "1.600000" in message and "1.200000" in message


def test_fractional_fps_string(tmp_path):
    record = write_clip(tmp_path, "ntsc", n_frames=30)
    record["fps"] = "30000/1200"  # 25.0 as a rational
    manifest = load_manifest(write_manifest(tmp_path, [record]), check_clips=False)
    assert manifest["ntsc"].fps == pytest.approx(25.0)


class TestValidateClip:
    def test_consistent_entry_empty_report(self, tiny_corpus):
        manifest_path, _ = tiny_corpus
        manifest = load_manifest(manifest_path)
        report = validate_clip(manifest["clip_a"])
        assert report.ok
        assert report.issues == []

    def test_frame_count_mismatch(self, tmp_path):
        record = write_clip(tmp_path, "c", n_frames=25)
        record["frame_count"] = 26
        entry = parse_manifest(write_manifest(tmp_path, [record]))["c"]
        report = validate_clip(entry)
        assert "frame-count-mismatch" in report.codes()

    def test_nonpositive_fps(self, tmp_path):
        record = write_clip(tmp_path, "c", n_frames=25)
        entry = ClipEntry(
            clip_id="c",
            frame_dir=Path(record["frame_dir"]),
            audio_path=Path(record["audio_path"]),
            fps=0.0,
            sample_rate=16000,
            frame_count=25,
        )
        assert "nonpositive-fps" in validate_clip(entry).codes()

    def test_mismatched_frame_dims(self, tmp_path):
        record = write_clip(tmp_path, "c", n_frames=25)
        Image.new("RGB", (12, 12)).save(Path(record["frame_dir"]) / "frame_00003.png")
        entry = parse_manifest(write_manifest(tmp_path, [record]))["c"]
        assert "frame-dims-mismatch" in validate_clip(entry).codes()

    def test_non_rgb_frame(self, tmp_path):
        record = write_clip(tmp_path, "c", n_frames=25)
        Image.new("L", (48, 48)).save(Path(record["frame_dir"]) / "frame_00004.png")
        entry = parse_manifest(write_manifest(tmp_path, [record]))["c"]
        assert "frame-not-rgb" in validate_clip(entry).codes()


class TestReferenceStrategy:
    @pytest.mark.parametrize(
        "text",
        ["CR", "AR:first_frame", "AR:random_frame", "AR:multi_frame:3", "AR:custom:xyz"],
    )
    def test_parse_serialize_round_trip(self, text):
        assert ReferenceStrategy.parse(text).serialize() == text

    def test_cr_carries_no_detail(self):
        with pytest.raises(LipleakError):
            ReferenceStrategy("CR", detail="first_frame")

    def test_multi_frame_k_must_be_at_least_two(self):
        with pytest.raises(LipleakError):
            ReferenceStrategy("AR", "multi_frame", k=1)

    def test_unknown_detail(self):
        with pytest.raises(LipleakError):
            ReferenceStrategy.parse("AR:fancy")

    def test_path_tag_is_filesystem_safe(self):
        tag = ReferenceStrategy.parse("AR:multi_frame:3").path_tag()
        assert ":" not in tag
        assert tag == "AR-multi_frame-3"

    def test_cr_constant(self):
        assert CR.serialize() == "CR"


class TestWavIO:
    def test_round_trip(self, tmp_path):
        samples = np.arange(-500, 500, dtype=np.int16)
        path = tmp_path / "t.wav"
        wavio.write_pcm16(path, samples, 16000)
        back, rate = wavio.read_samples(path)
        assert rate == 16000
        assert np.array_equal(back, samples)

    def test_rejects_stereo(self, tmp_path):
        # hand-build a 2-channel PCM header
        payload = np.zeros(8, dtype="<i2").tobytes()
        header = struct.pack(
            "<4sI4s4sIHHIIHH4sI",
            b"RIFF", 36 + len(payload), b"WAVE", b"fmt ", 16,
            1, 2, 16000, 64000, 4, 16, b"data", len(payload),
        )
        path = tmp_path / "stereo.wav"
        path.write_bytes(header + payload)
        with pytest.raises(WavFormatError, match="mono"):
            wavio.read_info(path)

    def test_rejects_non_pcm(self, tmp_path):
        payload = b"\x00" * 8
        header = struct.pack(
            "<4sI4s4sIHHIIHH4sI",
            b"RIFF", 36 + len(payload), b"WAVE", b"fmt ", 16,
            3, 1, 16000, 32000, 2, 16, b"data", len(payload),
        )
        path = tmp_path / "float.wav"
        path.write_bytes(header + payload)
        with pytest.raises(WavFormatError, match="PCM"):
            wavio.read_info(path)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.wav"
        path.write_bytes(b"JUNKJUNKJUNKJUNK")
        with pytest.raises(WavFormatError):
            wavio.read_info(path)
