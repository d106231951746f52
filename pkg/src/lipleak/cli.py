"""Command-line pipeline: validate -> grid -> generate -> metrics -> report.

Each stage hands off through files (job manifest, artifact tree, record
store) so the expensive generation step can be resumed or re-scored without
being re-run.  Exit codes: 0 success, 1 domain failure (invalid clip, failed
job, metric problem, missing report cell), 2 environment failure (unreadable
input, bad configuration).

Set LIPLEAK_TMPDIR to redirect the temporary directory handed to adapter
subprocesses; everything else is flag-driven.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path

import click

from . import records as record_store
from . import setups as setups_mod
from .adapter import ARTIFACT_KINDS, AdapterSpec, run_adapter, validate_artifacts
from .errors import AdapterError, LipleakError, ManifestError, ReportError
from .figures import render_figures
from .model import (
    GenerationJob,
    ReferenceStrategy,
    SetupKind,
    load_manifest,
    validate_clip,
)
from .pipeline import ALL_METRICS, MetricsConfig, compute_metrics
from .report import EvaluationReport, aggregate, leakage_report, render
from .visualmetrics import PSNR_CAP_DB, SsimParams

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_ENV = 2


def _adapter_env() -> dict:
    env = dict(os.environ)
    override = env.get("LIPLEAK_TMPDIR")
    if override:
        env["TMPDIR"] = override
    return env


def _corpus_resolution(manifest) -> str:
    """Face-crop resolution(s) of the corpus, recorded in report metadata."""
    from PIL import Image

    from .model import list_frames

    sizes = set()
    for entry in manifest.entries:
        frames = list_frames(entry.frame_dir)
        if frames:
            with Image.open(frames[0]) as img:
                sizes.add(f"{img.size[0]}x{img.size[1]}")
    return ",".join(sorted(sizes)) if sizes else "unknown"


def _parse_kv(values: tuple[str, ...], flag: str) -> dict[str, str]:
    out = {}
    for item in values:
        if "=" not in item:
            raise click.UsageError(f"{flag} expects NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        out[name] = value
    return out


@click.group()
def main():
    """Evaluation harness for identity-reference lip leakage."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
def validate(manifest_path: str):
    """Validate a clip manifest; prints a per-clip report."""
    try:
        manifest = load_manifest(manifest_path, check_clips=False)
    except ManifestError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ENV)
    any_bad = False
    for entry in manifest.entries:
        report = validate_clip(entry)
        if report.ok:
            click.echo(f"{entry.clip_id}: OK")
        else:
            any_bad = True
            for code, message in report.issues:
                click.echo(f"{entry.clip_id}: {code}: {message}")
    sys.exit(EXIT_DOMAIN if any_bad else EXIT_OK)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output-dir", required=True, type=click.Path())
@click.option("--method", "methods", multiple=True, required=True,
              help="Method name; repeat for several methods.")
@click.option("--ar-detail", "ar_details", multiple=True,
              help="METHOD=STRATEGY, e.g. iplap=AR:multi_frame:3 "
                   "(default AR:first_frame).")
@click.option("--silence-noise-floor", type=float, default=0.0, show_default=True,
              help="Peak amplitude (fraction of full scale) of the silent "
                   "wavs; 0 writes digital zero.")
def grid(manifest_path, seed, output_dir, methods, ar_details, silence_noise_floor):
    """Build the job grid: {AM, XM, SI} x {CR, AR} x clips x methods."""
    try:
        manifest = load_manifest(manifest_path)
    except ManifestError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ENV)
    details = _parse_kv(ar_details, "--ar-detail")
    method_specs = []
    for name in methods:
        detail = None
        if name in details:
            detail = ReferenceStrategy.parse(details[name])
        method_specs.append((name, detail))
    out_dir = Path(output_dir)
    try:
        built = setups_mod.build_setup_grid(
            manifest, method_specs, seed, out_dir,
            silence_noise_floor=silence_noise_floor,
        )
    except LipleakError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    grid_path = out_dir / "grid.jsonl"
    setups_mod.write_grid(built, grid_path)
    counts = {s.value: len(built.jobs_for(setup=s)) for s in setups_mod.SETUP_ORDER}
    click.echo(f"wrote {grid_path} ({len(built.jobs)} jobs; "
               + ", ".join(f"{k}={v}" for k, v in counts.items()) + ")")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--grid", "grid_path", required=True, type=click.Path())
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--adapter", "adapters", multiple=True, required=True,
              help="METHOD=COMMAND-TEMPLATE; use '*' to cover all methods.")
@click.option("--produces", default=",".join(ARTIFACT_KINDS), show_default=True,
              help="Comma-separated artifact kinds the adapters write.")
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--timeout", "timeout_s", type=int, default=600, show_default=True)
def generate(grid_path, manifest_path, adapters, produces, parallelism, timeout_s):
    """Run the model adapters over every job (resumable)."""
    try:
        built = setups_mod.read_grid(grid_path)
        manifest = load_manifest(manifest_path)
    except (LipleakError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ENV)
    if parallelism < 1:
        click.echo("error: --parallelism must be >= 1", err=True)
        sys.exit(EXIT_ENV)
    templates = _parse_kv(adapters, "--adapter")
    kinds = tuple(k.strip() for k in produces.split(",") if k.strip())
    specs = {}
    for method, _ in built.methods:
        template = templates.get(method, templates.get("*"))
        if template is None:
            click.echo(f"error: no adapter for method {method!r}", err=True)
            sys.exit(EXIT_ENV)
        specs[method] = AdapterSpec(
            name=method, command_template=template, produces=kinds,
            timeout_s=timeout_s,
        )

    runlog_path = Path(grid_path).parent / "runlog.jsonl"
    child_env = _adapter_env()
    results = []

    def _one(job: GenerationJob):
        clip = manifest[job.clip_id]
        try:
            validate_artifacts(job.output_dir, kinds, job.effective_frame_count)
            return job, "skipped", None
        except AdapterError:
            pass
        try:
            run_adapter(specs[job.method_name], job, clip.frame_dir, env=child_env)
            return job, "ok", None
        except AdapterError as exc:
            return job, "failed", str(exc)

    with runlog_path.open("a", encoding="utf-8") as log:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(_one, job) for job in built.jobs]
            for future in as_completed(futures):
                job, status, error = future.result()
                results.append(status)
                entry = {"job": list(job.key()), "status": status}
                if error:
                    entry["error"] = error
                log.write(json.dumps(entry, sort_keys=True) + "\n")
                if status == "failed":
                    click.echo(f"FAILED {'/'.join(job.key())}: {error}", err=True)
        log.write(json.dumps({"record": "meta", "adapters": sorted(templates)},
                             sort_keys=True) + "\n")

    done = results.count("ok")
    skipped = results.count("skipped")
    failed = results.count("failed")
    click.echo(f"generate: {done} run, {skipped} skipped, {failed} failed "
               f"(log: {runlog_path})")
    sys.exit(EXIT_DOMAIN if failed else EXIT_OK)


@main.command("extract-gt")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--adapter", "template", required=True,
              help="Extractor command template run once per GT clip.")
@click.option("--output-dir", required=True, type=click.Path())
@click.option("--produces", default="identity,distribution,landmarks",
              show_default=True)
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--timeout", "timeout_s", type=int, default=600, show_default=True)
def extract_gt(manifest_path, template, output_dir, produces, parallelism, timeout_s):
    """Extract GT features (identity/distribution/landmarks) per clip."""
    try:
        manifest = load_manifest(manifest_path)
    except ManifestError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ENV)
    kinds = tuple(k.strip() for k in produces.split(",") if k.strip())
    out_dir = Path(output_dir)
    spec = AdapterSpec(name="gt-extractor", command_template=template,
                       produces=kinds, timeout_s=timeout_s)

    def _one(entry):
        # GT extraction is modeled as an AM pseudo-job over the clip itself
        job = GenerationJob(
            method_name="GT",
            clip_id=entry.clip_id,
            setup=SetupKind.AM,
            reference=ReferenceStrategy.parse("CR"),
            driving_audio_path=entry.audio_path,
            output_dir=out_dir / entry.clip_id,
            effective_frame_count=entry.frame_count,
        )
        try:
            validate_artifacts(job.output_dir, kinds, entry.frame_count)
            return entry.clip_id, "skipped", None
        except AdapterError:
            pass
        try:
            run_adapter(spec, job, entry.frame_dir, env=_adapter_env())
            return entry.clip_id, "ok", None
        except AdapterError as exc:
            return entry.clip_id, "failed", str(exc)

    failed = 0
    with ThreadPoolExecutor(max_workers=max(parallelism, 1)) as pool:
        for clip_id, status, error in pool.map(_one, manifest.entries):
            if status == "failed":
                failed += 1
                click.echo(f"FAILED {clip_id}: {error}", err=True)
            else:
                click.echo(f"{clip_id}: {status}")
    sys.exit(EXIT_DOMAIN if failed else EXIT_OK)


@main.command()
@click.option("--grid", "grid_path", required=True, type=click.Path())
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--records", "records_path", required=True, type=click.Path())
@click.option("--metrics", "metric_list", default=",".join(ALL_METRICS),
              show_default=True)
@click.option("--max-offset", type=int, default=15, show_default=True)
@click.option("--gt-features", type=click.Path(), default=None,
              help="Directory of per-clip GT feature files (extract-gt output).")
@click.option("--region-mask", default=None,
              help="x0,y0,x1,y1 pixel box for SSIM/PSNR (default full frame).")
@click.option("--lmd-normalize", is_flag=True, default=False,
              help="Divide LMD by the GT inter-ocular distance per frame.")
@click.option("--csim-reference", is_flag=True, default=False,
              help="Also report CSIM against the reference image embedding.")
@click.option("--parallelism", type=int, default=1, show_default=True)
def metrics(grid_path, manifest_path, records_path, metric_list, max_offset,
            gt_features, region_mask, lmd_normalize, csim_reference, parallelism):
    """Compute enabled metrics over the artifact tree into the record store."""
    try:
        built = setups_mod.read_grid(grid_path)
        manifest = load_manifest(manifest_path)
    except (LipleakError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ENV)
    mask = None
    if region_mask:
        parts = [int(v) for v in region_mask.split(",")]
        if len(parts) != 4:
            click.echo("error: --region-mask expects x0,y0,x1,y1", err=True)
            sys.exit(EXIT_ENV)
        mask = tuple(parts)
    try:
        config = MetricsConfig(
            metrics=tuple(m.strip() for m in metric_list.split(",") if m.strip()),
            max_offset=max_offset,
            region_mask=mask,
            lmd_normalize=lmd_normalize,
            csim_reference=csim_reference,
        )
    except LipleakError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ENV)

    result = compute_metrics(
        built, manifest, config, Path(gt_features) if gt_features else None,
        parallelism=max(parallelism, 1),
    )
    meta = {
        "frame_resolution": _corpus_resolution(manifest),
        "seed": built.seed,
        "max_offset": max_offset,
        "aggregation": "unweighted per-clip mean",
        "psnr_cap_db": PSNR_CAP_DB,
        "ssim_params": repr(SsimParams()),
        "region_mask": region_mask or "full-frame",
        "lmd_normalize": lmd_normalize,
        "pairing_shared_across_methods": True,
        "methods": {name: det.serialize() for name, det in built.methods},
    }
    runlog = Path(grid_path).parent / "runlog.jsonl"
    if runlog.is_file():
        for line in runlog.read_text(encoding="utf-8").splitlines():
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                continue
            if entry.get("record") == "meta" and "adapters" in entry:
                meta["adapters"] = entry["adapters"]
    n = record_store.append_records(records_path, result.records, meta=meta)
    for notice in result.notices:
        click.echo(f"notice: {notice}")
    for problem in result.problems:
        click.echo(f"problem: {problem}", err=True)
    click.echo(f"metrics: wrote {n} records to {records_path}")
    sys.exit(EXIT_DOMAIN if result.problems else EXIT_OK)


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path())
@click.option("--output-dir", required=True, type=click.Path())
@click.option("--format", "fmt", default="all",
              type=click.Choice(["csv", "json", "table", "all"]),
              show_default=True)
@click.option("--leakage/--no-leakage", default=True, show_default=True,
              help="Include the leakage summary (requires LSE cells for "
                   "AM, XM and SI under CR and AR).")
@click.option("--figures/--no-figures", default=True, show_default=True)
def report(records_path, output_dir, fmt, leakage, figures):
    """Aggregate the record store and write tables (and figures)."""
    try:
        recs, meta = record_store.read_records(records_path)
    except ReportError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ENV)
    method_order = sorted(meta.get("methods", {})) or None
    try:
        table = aggregate(recs, metadata=meta, method_order=method_order)
        leak = leakage_report(table) if leakage else None
    except ReportError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    evaluation = EvaluationReport(table=table, leakage=leak, metadata=meta)

    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = ["csv", "json", "table"] if fmt == "all" else [fmt]
    names = {"csv": "report.csv", "json": "report.json", "table": "report.txt"}
    for f in formats:
        path = out_dir / names[f]
        path.write_text(render(evaluation, f), encoding="utf-8")
        click.echo(f"wrote {path}")
    if figures:
        for path in render_figures(evaluation, out_dir):
            click.echo(f"wrote {path}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
