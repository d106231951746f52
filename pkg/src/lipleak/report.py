"""Aggregation and rendering of per-clip records into leakage and quality tables.

Aggregation is the unweighted arithmetic mean across clips per
(method, setup, reference family, metric); missing combinations stay marked
absent, never zero-filled.  The leakage summary applies the LSD formula to
the corpus-level LSE means (the primary reported number, matching how the
per-method discrepancy columns are consistent with the per-setup score
tables), and separately reports the clip-level variant (LSD per clip, then
averaged), which generally differs.

Rendering is deterministic: fixed key ordering, locale-independent decimal
formatting, two decimals in the human table and full precision in the
machine formats.  A metadata block is always included.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import ReportError
from .model import MetricRecord, SetupKind
from .syncmetrics import LsdInputs, lsd

RENDER_FORMATS = ("csv", "json", "table")

# canonical column order in rendered tables
_METRIC_ORDER = ["ssim", "psnr", "fid", "lmd", "lse_c", "lse_d", "csim", "csim_ref"]
_SETUP_ORDER = [SetupKind.AM, SetupKind.XM, SetupKind.SI]
_FAMILIES = ("AR", "CR")


@dataclass(frozen=True)
class Cell:
    """One aggregated table cell: the clip mean plus its provenance."""

    mean: float
    count: int
    per_clip: dict[str, float]


@dataclass
class MethodSetupTable:
    """Aggregated means keyed by (method, setup, reference family, metric)."""

    methods: list[str]
    cells: dict[tuple[str, str, str, str], Cell]
    metadata: dict = field(default_factory=dict)

    def cell(self, method: str, setup: SetupKind, family: str, metric: str) -> Optional[Cell]:
        return self.cells.get((method, setup.value, family, metric))

    def setups_present(self) -> list[SetupKind]:
        present = {key[1] for key in self.cells}
        return [s for s in _SETUP_ORDER if s.value in present]

    def metrics_present(self) -> list[str]:
        present = {key[3] for key in self.cells}
        ordered = [m for m in _METRIC_ORDER if m in present]
        ordered += sorted(present - set(ordered))
        return ordered


@dataclass(frozen=True)
class MethodLeakage:
    """Leakage metrics for one method."""

    method: str
    lse_c_s: dict[str, float]  # per reference family
    lse_d_s: dict[str, float]
    lsd_cr: float
    lsd_ar: float
    lsd_cr_clip: float
    lsd_ar_clip: float


@dataclass
class LeakageReport:
    rows: list[MethodLeakage]

    def __post_init__(self):
        for row in self.rows:
            if row.lsd_cr < 0 or row.lsd_ar < 0:
                raise ReportError(f"negative LSD for method {row.method}")

    def by_method(self) -> dict[str, MethodLeakage]:
        return {row.method: row for row in self.rows}


@dataclass
class EvaluationReport:
    """Everything the renderers need: the table, the leakage summary, metadata."""

    table: MethodSetupTable
    leakage: Optional[LeakageReport]
    metadata: dict


def _family(reference) -> str:
    return reference.family


def aggregate(
    records: Iterable[MetricRecord],
    metadata: Optional[dict] = None,
    method_order: Optional[list[str]] = None,
) -> MethodSetupTable:
    """Unweighted per-key means; duplicate keys with differing values conflict."""
    records = list(records)
    if not records:
        raise ReportError("no records to aggregate")

    seen: dict[tuple, float] = {}
    grouped: dict[tuple[str, str, str, str], dict[str, float]] = {}
    for record in records:
        full_key = record.key()
        if full_key in seen:
            if seen[full_key] != record.value:
                raise ReportError(
                    f"conflicting duplicate record {full_key}: "
                    f"{seen[full_key]} vs {record.value}"
                )
            continue
        seen[full_key] = record.value
        cell_key = (
            record.method_name,
            record.setup.value,
            _family(record.reference),
            record.metric_name,
        )
        grouped.setdefault(cell_key, {})[record.clip_id] = record.value

    cells = {}
    for key, per_clip in grouped.items():
        values = [per_clip[c] for c in sorted(per_clip)]
        cells[key] = Cell(
            mean=sum(values) / len(values), count=len(values), per_clip=dict(per_clip)
        )

    methods_seen = []
    for record in records:
        if record.method_name not in methods_seen:
            methods_seen.append(record.method_name)
    if method_order:
        methods = [m for m in method_order if m in methods_seen]
        methods += [m for m in methods_seen if m not in methods]
    else:
        methods = sorted(methods_seen)
    return MethodSetupTable(methods=methods, cells=cells, metadata=dict(metadata or {}))


_REQUIRED_LEAKAGE_CELLS = [
    (SetupKind.AM, "lse_c"),
    (SetupKind.XM, "lse_c"),
    (SetupKind.AM, "lse_d"),
    (SetupKind.XM, "lse_d"),
    (SetupKind.SI, "lse_c"),
    (SetupKind.SI, "lse_d"),
]


def leakage_report(table: MethodSetupTable) -> LeakageReport:
    """Build the per-method leakage summary from an aggregated table.

    Needs LSE-C and LSE-D cells for AM, XM and SI under both CR and AR;
    raises ReportError listing exactly the missing cells otherwise.
    """
    missing = []
    for method in table.methods:
        for family in _FAMILIES:
            for setup, metric in _REQUIRED_LEAKAGE_CELLS:
                if table.cell(method, setup, family, metric) is None:
                    missing.append(f"{method}/{setup.value}/{family}/{metric}")
    if missing:
        raise ReportError(
            "leakage report is missing required cells: " + ", ".join(missing)
        )

    rows = []
    for method in table.methods:
        per_family_lsd = {}
        per_family_lsd_clip = {}
        for family in _FAMILIES:
            c_am = table.cell(method, SetupKind.AM, family, "lse_c")
            c_xm = table.cell(method, SetupKind.XM, family, "lse_c")
            d_am = table.cell(method, SetupKind.AM, family, "lse_d")
            d_xm = table.cell(method, SetupKind.XM, family, "lse_d")
            per_family_lsd[family] = lsd(
                LsdInputs(c_am=c_am.mean, c_xm=c_xm.mean, d_am=d_am.mean, d_xm=d_xm.mean)
            )
            shared_clips = (
                set(c_am.per_clip)
                & set(c_xm.per_clip)
                & set(d_am.per_clip)
                & set(d_xm.per_clip)
            )
            if not shared_clips:
                raise ReportError(
                    f"no clip has all four LSE cells for {method}/{family}"
                )
            per_clip_values = [
                lsd(
                    LsdInputs(
                        c_am=c_am.per_clip[c],
                        c_xm=c_xm.per_clip[c],
                        d_am=d_am.per_clip[c],
                        d_xm=d_xm.per_clip[c],
                    )
                )
                for c in sorted(shared_clips)
            ]
            per_family_lsd_clip[family] = sum(per_clip_values) / len(per_clip_values)

        rows.append(
            MethodLeakage(
                method=method,
                lse_c_s={
                    family: table.cell(method, SetupKind.SI, family, "lse_c").mean
                    for family in _FAMILIES
                },
                lse_d_s={
                    family: table.cell(method, SetupKind.SI, family, "lse_d").mean
                    for family in _FAMILIES
                },
                lsd_cr=per_family_lsd["CR"],
                lsd_ar=per_family_lsd["AR"],
                lsd_cr_clip=per_family_lsd_clip["CR"],
                lsd_ar_clip=per_family_lsd_clip["AR"],
            )
        )
    return LeakageReport(rows=rows)


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def render(report: EvaluationReport, fmt: str) -> str:
    """Render a report to one of: csv, json, table.  Deterministic bytes."""
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "json":
        return _render_json(report)
    if fmt == "table":
        return _render_table(report)
    raise ReportError(f"unknown report format {fmt!r} (expected one of {RENDER_FORMATS})")


def _sorted_cells(table: MethodSetupTable):
    metrics = table.metrics_present()
    setup_ranks = {s.value: i for i, s in enumerate(_SETUP_ORDER)}

    def sort_key(item):
        (method, setup, family, metric), _ = item
        return (table.methods.index(method), setup_ranks[setup],
                metrics.index(metric), family)

    return sorted(table.cells.items(), key=sort_key)


def _render_csv(report: EvaluationReport) -> str:
    out = io.StringIO()
    for key in sorted(report.metadata):
        out.write(f"# {key} = {report.metadata[key]}\n")
    out.write("method,setup,reference,metric,mean,clips\n")
    for (method, setup, family, metric), cell in _sorted_cells(report.table):
        out.write(f"{method},{setup},{family},{metric},{cell.mean!r},{cell.count}\n")
    if report.leakage is not None:
        for row in report.leakage.rows:
            for family in _FAMILIES:
                out.write(
                    f"{row.method},SUMMARY,{family},lse_c_s,{row.lse_c_s[family]!r},\n"
                )
                out.write(
                    f"{row.method},SUMMARY,{family},lse_d_s,{row.lse_d_s[family]!r},\n"
                )
            out.write(f"{row.method},SUMMARY,CR,lsd,{row.lsd_cr!r},\n")
            out.write(f"{row.method},SUMMARY,AR,lsd,{row.lsd_ar!r},\n")
            out.write(f"{row.method},SUMMARY,CR,lsd_clip,{row.lsd_cr_clip!r},\n")
            out.write(f"{row.method},SUMMARY,AR,lsd_clip,{row.lsd_ar_clip!r},\n")
    return out.getvalue()


def _render_json(report: EvaluationReport) -> str:
    cells = [
        {
            "method": method,
            "setup": setup,
            "reference": family,
            "metric": metric,
            "mean": cell.mean,
            "clips": cell.count,
        }
        for (method, setup, family, metric), cell in _sorted_cells(report.table)
    ]
    leakage = None
    if report.leakage is not None:
        leakage = {
            row.method: {
                "lse_c_s": row.lse_c_s,
                "lse_d_s": row.lse_d_s,
                "lsd_cr": row.lsd_cr,
                "lsd_ar": row.lsd_ar,
                "lsd_cr_clip": row.lsd_cr_clip,
                "lsd_ar_clip": row.lsd_ar_clip,
            }
            for row in report.leakage.rows
        }
    doc = {"metadata": report.metadata, "cells": cells, "leakage": leakage}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _render_table(report: EvaluationReport) -> str:
    table = report.table
    out = io.StringIO()
    metrics = table.metrics_present()

    if report.leakage is not None:
        out.write("LIP LEAKAGE SUMMARY\n")
        name_w = max([len("method")] + [len(m) for m in table.methods]) + 2
        header = (
            f"{'method':<{name_w}}"
            f"{'LSE-C_S (AR|CR)':>18}{'LSE-D_S (AR|CR)':>18}"
            f"{'LSD-CR':>9}{'LSD-AR':>9}{'LSD-CR/clip':>13}{'LSD-AR/clip':>13}"
        )
        out.write(header + "\n")
        out.write("-" * len(header) + "\n")
        for row in report.leakage.rows:
            cs = f"{row.lse_c_s['AR']:.2f} | {row.lse_c_s['CR']:.2f}"
            ds = f"{row.lse_d_s['AR']:.2f} | {row.lse_d_s['CR']:.2f}"
            out.write(
                f"{row.method:<{name_w}}{cs:>18}{ds:>18}"
                f"{row.lsd_cr:>9.2f}{row.lsd_ar:>9.2f}"
                f"{row.lsd_cr_clip:>13.2f}{row.lsd_ar_clip:>13.2f}\n"
            )
        out.write("\n")

    for setup in table.setups_present():
        active = [
            m
            for m in metrics
            if any(
                table.cell(method, setup, family, m) is not None
                for method in table.methods
                for family in _FAMILIES
            )
        ]
        if not active:
            continue
        out.write(f"[{setup.value}] per-metric means, AR | CR columns\n")
        name_w = max([len("method")] + [len(m) for m in table.methods]) + 2
        col_w = 16
        header = f"{'method':<{name_w}}" + "".join(f"{m:>{col_w}}" for m in active)
        out.write(header + "\n")
        out.write("-" * len(header) + "\n")
        for method in table.methods:
            parts = []
            for metric in active:
                ar = table.cell(method, setup, "AR", metric)
                cr = table.cell(method, setup, "CR", metric)
                parts.append(
                    f"{_fmt(ar.mean if ar else None)}|{_fmt(cr.mean if cr else None)}"
                )
            out.write(
                f"{method:<{name_w}}" + "".join(f"{p:>{col_w}}" for p in parts) + "\n"
            )
        out.write("\n")

    out.write("metadata\n")
    for key in sorted(report.metadata):
        out.write(f"  {key} = {report.metadata[key]}\n")
    return out.getvalue()
