"""Append-only metric record store: one JSON object per line.

Record lines carry the full (method, clip, setup, reference, metric) key plus
the value; ``{"record": "meta", ...}`` lines carry run provenance and are
merged in file order (later keys win).  Appending an identical record twice
is harmless; the same key with a different value is a conflict surfaced at
aggregation time.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

from .errors import ReportError
from .model import MetricRecord, ReferenceStrategy, SetupKind


def record_to_dict(record: MetricRecord) -> dict:
    return {
        "method": record.method_name,
        "clip_id": record.clip_id,
        "setup": record.setup.value,
        "reference": record.reference.serialize(),
        "metric": record.metric_name,
        "value": record.value,
    }


def record_from_dict(d: dict) -> MetricRecord:
    return MetricRecord(
        method_name=d["method"],
        clip_id=d["clip_id"],
        setup=SetupKind(d["setup"]),
        reference=ReferenceStrategy.parse(d["reference"]),
        metric_name=d["metric"],
        value=float(d["value"]),
    )


def append_records(
    path: str | Path,
    records: Iterable[MetricRecord],
    meta: Optional[dict] = None,
) -> int:
    """Append records (and an optional meta line) to the store; returns count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if meta:
        lines.append(json.dumps({"record": "meta", **meta}, sort_keys=True))
    n = 0
    for record in records:
        lines.append(json.dumps(record_to_dict(record), sort_keys=True))
        n += 1
    if lines:
        with path.open("a", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return n


def read_records(path: str | Path) -> tuple[list[MetricRecord], dict]:
    """Read all records plus the merged meta dict."""
    path = Path(path)
    if not path.is_file():
        raise ReportError(f"record store not found: {path}")
    records: list[MetricRecord] = []
    meta: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ReportError(f"{path}:{lineno}: malformed record: {exc}") from exc
        if d.get("record") == "meta":
            merged = {k: v for k, v in d.items() if k != "record"}
            meta.update(merged)
        else:
            records.append(record_from_dict(d))
    return records, meta
