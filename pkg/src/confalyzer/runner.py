"""Orchestration of the full sample x criterion analysis matrix.

Cells are enumerated samples-outer, criteria-inner (manifest order), so all
calls for one recording are adjacent and the provider can reuse the upload.
Up to ``max_in_flight`` cells run concurrently; findings append to the store
as they complete, which is what makes a killed run resumable: on resume the
findings and failures logs are the source of truth for what is already done.

Backend errors fail the cell and the run continues; failed cells are retried
only on explicit resume. BaseExceptions (e.g. an interrupt) abort the run.
"""

from __future__ import annotations

import hashlib
import json
import statistics
import uuid
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

from .catalog import Catalog
from .errors import ConfalyzerError
from .findings import (
    Finding,
    ParseError,
    UnparseableResponse,
    merge_segment_findings,
    parse_finding,
    utcnow_iso,
)
from .gateway import (
    AnalyzeRequest,
    Backend,
    GatewayError,
    ModelParams,
    RetryPolicy,
    analyze,
    estimate_prompt_tokens,
    plan_segments,
)
from .prompts import PromptTemplatePair, render
from .store import ConfiguratorSample, FindingSet, ResultsStore

REPAIR_SUFFIX = "\n\nReturn only the structured record."

CellKey = tuple[int, str]


class RunnerError(ConfalyzerError):
    """Run setup or state failure."""


@dataclass
class RunManifest:
    run_id: str
    sample_ids: list[int]
    criterion_ids: list[str]
    params: ModelParams
    backend_id: str
    catalog_digest: str = ""
    started_at: str = ""
    finished_at: str = ""
    cell_status: dict[CellKey, str] = field(default_factory=dict)  # pending|done|failed

    def cells(self) -> list[CellKey]:
        return [(s, c) for s in self.sample_ids for c in self.criterion_ids]

    def counts(self) -> dict[str, int]:
        counts = {"pending": 0, "done": 0, "failed": 0}
        for status in self.cell_status.values():
            counts[status] += 1
        return counts

    def finished(self) -> bool:
        return self.counts()["pending"] == 0

    def to_document(self) -> dict:
        return {
            "schema": 1,
            "run_id": self.run_id,
            "sample_ids": self.sample_ids,
            "criterion_ids": self.criterion_ids,
            "params": vars(self.params),
            "backend_id": self.backend_id,
            "catalog_digest": self.catalog_digest,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "cells": [
                {"sample_id": s, "criterion_id": c, "status": status}
                for (s, c), status in self.cell_status.items()
            ],
        }

    @classmethod
    def from_document(cls, document: dict) -> "RunManifest":
        manifest = cls(
            run_id=document["run_id"],
            sample_ids=document["sample_ids"],
            criterion_ids=document["criterion_ids"],
            params=ModelParams(**document["params"]),
            backend_id=document.get("backend_id", ""),
            catalog_digest=document.get("catalog_digest", ""),
            started_at=document.get("started_at", ""),
            finished_at=document.get("finished_at", ""),
        )
        manifest.cell_status = {
            (cell["sample_id"], cell["criterion_id"]): cell["status"]
            for cell in document.get("cells", [])
        }
        return manifest


def new_run_manifest(
    samples: list[ConfiguratorSample],
    catalog: Catalog,
    params: ModelParams,
    backend_id: str,
    run_id: str | None = None,
) -> RunManifest:
    if not samples:
        raise RunnerError("no samples to analyze")
    if len(catalog) == 0:
        raise RunnerError("no criteria to analyze")
    manifest = RunManifest(
        run_id=run_id or uuid.uuid4().hex[:12],
        sample_ids=[s.id for s in samples],
        criterion_ids=catalog.ids(),
        params=params,
        backend_id=backend_id,
        catalog_digest=catalog_digest(catalog),
    )
    manifest.cell_status = {cell: "pending" for cell in manifest.cells()}
    return manifest


def catalog_digest(catalog: Catalog) -> str:
    """Stable fingerprint of the exact criteria a run was executed against."""
    payload = json.dumps(catalog.to_document(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def _analyze_cell(
    sample: ConfiguratorSample,
    criterion,
    templates: PromptTemplatePair,
    backend: Backend,
    params: ModelParams,
    retry: RetryPolicy,
) -> Finding:
    rendered = render(templates, criterion, sample)
    prompt_tokens = estimate_prompt_tokens(rendered.system_text, rendered.user_text)
    plan = plan_segments(float(sample.duration_s), params, prompt_tokens)

    parts: list[Finding] = []
    for window in plan.segments:
        request = AnalyzeRequest(
            video_path=sample.recording_path,
            duration_s=float(sample.duration_s),
            system_text=rendered.system_text,
            user_text=rendered.user_text,
            params=params,
            sample_id=sample.id,
            criterion_id=criterion.id.value,
            window=None if len(plan) == 1 else window,
        )
        response = analyze(request, backend, retry=retry)
        try:
            part = parse_finding(response, sample.id, criterion.id.value)
        except UnparseableResponse:
            if backend.deterministic:
                raise
            # One repair pass: re-prompt demanding only the record.
            repair = AnalyzeRequest(
                video_path=request.video_path,
                duration_s=request.duration_s,
                system_text=request.system_text,
                user_text=request.user_text + REPAIR_SUFFIX,
                params=params,
                sample_id=sample.id,
                criterion_id=criterion.id.value,
                window=request.window,
            )
            response = analyze(repair, backend, retry=retry)
            part = parse_finding(response, sample.id, criterion.id.value)
        parts.append(part)
    return merge_segment_findings(parts)


def run_matrix(
    store: ResultsStore,
    manifest: RunManifest,
    samples: list[ConfiguratorSample],
    catalog: Catalog,
    templates: PromptTemplatePair,
    backend: Backend,
    max_in_flight: int = 1,
    retry: RetryPolicy = RetryPolicy(),
) -> tuple[RunManifest, FindingSet]:
    """Execute (or resume) every pending cell of a run.

    Exactly one finding or one recorded failure per cell; cells already done
    in the findings log are never re-analyzed within the same run_id.
    """
    if max_in_flight < 1:
        raise RunnerError("max_in_flight must be >= 1")
    samples_by_id = {s.id: s for s in samples}

    run_dir_exists = store.run_exists(manifest.run_id)
    if not run_dir_exists:
        manifest.started_at = manifest.started_at or utcnow_iso()
        store.save_run_manifest(manifest.run_id, manifest.to_document())

    # Logs are the source of truth for completed work.
    done = {f.key() for f in store.load_findings(manifest.run_id)}
    for key in manifest.cells():
        manifest.cell_status[key] = "done" if key in done else "pending"

    todo = [key for key in manifest.cells() if manifest.cell_status[key] == "pending"]
    if todo:
        manifest.finished_at = ""  # reopened by resume

    def work(key: CellKey) -> tuple[CellKey, Finding | None, str | None]:
        sample_id, criterion_id = key
        try:
            finding = _analyze_cell(
                samples_by_id[sample_id],
                catalog.get(criterion_id),
                templates,
                backend,
                manifest.params,
                retry,
            )
            return key, finding, None
        except (GatewayError, ParseError) as exc:
            return key, None, f"{type(exc).__name__}: {exc}"

    # Cells are submitted in a sliding window of max_in_flight and their
    # results consumed (and appended) in the main thread only, which keeps
    # store writes serialized and stops an aborted run from racing ahead of
    # what actually persisted: a resume picks up exactly the unwritten cells.
    pool = ThreadPoolExecutor(max_workers=max_in_flight)
    queue = iter(todo)
    in_flight: dict = {}

    def refill() -> None:
        while len(in_flight) < max_in_flight:
            key = next(queue, None)
            if key is None:
                return
            in_flight[pool.submit(work, key)] = key

    try:
        refill()
        while in_flight:
            completed, _ = wait(set(in_flight), return_when=FIRST_COMPLETED)
            for future in completed:
                in_flight.pop(future)
                key, finding, error = future.result()  # re-raises aborts
                if finding is not None:
                    store.append_finding(manifest.run_id, finding)
                    manifest.cell_status[key] = "done"
                else:
                    store.append_failure(
                        manifest.run_id, key[0], key[1], error or "unknown error", utcnow_iso()
                    )
                    manifest.cell_status[key] = "failed"
            refill()
        pool.shutdown(wait=True)
    except BaseException:
        pool.shutdown(wait=False, cancel_futures=True)
        raise
    finally:
        if manifest.finished() and not manifest.finished_at:
            manifest.finished_at = utcnow_iso()
        store.save_run_manifest(manifest.run_id, manifest.to_document())

    return manifest, store.load_findings(manifest.run_id)


def resume_run(
    store: ResultsStore,
    run_id: str,
    samples: list[ConfiguratorSample],
    catalog: Catalog,
    templates: PromptTemplatePair,
    backend: Backend,
    max_in_flight: int = 1,
    retry: RetryPolicy = RetryPolicy(),
) -> tuple[RunManifest, FindingSet]:
    """Re-open an existing run and execute its pending and failed cells."""
    manifest = RunManifest.from_document(store.load_run_manifest(run_id))
    return run_matrix(
        store, manifest, samples, catalog, templates, backend,
        max_in_flight=max_in_flight, retry=retry,
    )


def timing_summary(manifest: RunManifest, findings: FindingSet) -> dict:
    """Latency aggregates over a finished run.

    Per-cell latencies feed overall min/mean/max, a per-criterion breakdown,
    and per-sample totals.
    """
    if not manifest.finished():
        raise RunnerError("run not finished")
    if len(findings) == 0:
        raise RunnerError("run not finished")

    latencies = [f.latency_s for f in findings]
    per_criterion: dict[str, list[float]] = {c: [] for c in manifest.criterion_ids}
    per_sample: dict[int, float] = {s: 0.0 for s in manifest.sample_ids}
    for finding in findings:
        per_criterion.setdefault(finding.criterion_id, []).append(finding.latency_s)
        per_sample[finding.sample_id] = per_sample.get(finding.sample_id, 0.0) + finding.latency_s

    def stats(values: list[float]) -> dict:
        if not values:
            return {"min": None, "mean": None, "max": None}
        return {"min": min(values), "mean": statistics.fmean(values), "max": max(values)}

    return {
        "overall": stats(latencies),
        "per_criterion": {c: stats(v) for c, v in per_criterion.items()},
        "per_sample_total": per_sample,
    }
