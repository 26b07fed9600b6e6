"""Durable, append-oriented persistence rooted at a store directory.

Layout:
    dataset.json                 ingested sample snapshot (atomic rewrite)
    catalog.json                 catalog snapshot used by analysis runs
    runs/<run_id>/manifest.json  run manifest (atomic rewrite)
    runs/<run_id>/findings.log   one JSON finding record per line, append-only
    runs/<run_id>/failures.log   failed-cell records, append-only
    review/assignments.log       reviewer assignments, append-only
    review/judgments.log         judgments, append-only (full history kept)

Every log record carries ``"schema": 1``. Appends go through a lock file so
there is a single writer per log; each line is flushed and fsynced, so a
crash loses at most the final partial line. Loads tolerate corrupt lines and
report their line numbers.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from filelock import FileLock, Timeout

from .errors import ConfalyzerError
from .findings import Finding, finding_from_record, finding_to_record

RECORD_SCHEMA_VERSION = 1

_DURATION = re.compile(r"^(\d{1,3}):(\d{2})$")


class StoreError(ConfalyzerError):
    """Dataset, log, or manifest level failure."""


class StoreLockTimeout(StoreError):
    """Could not acquire the single-writer lock in time."""


def parse_duration(text: str) -> int:
    """Parse an MM:SS duration into whole seconds."""
    match = _DURATION.match(text.strip())
    if not match:
        raise StoreError(f"malformed duration {text!r}: expected MM:SS")
    minutes, seconds = int(match.group(1)), int(match.group(2))
    if seconds >= 60:
        raise StoreError(f"malformed duration {text!r}: seconds must be < 60")
    return minutes * 60 + seconds


def format_duration(seconds: int) -> str:
    return f"{seconds // 60:02d}:{seconds % 60:02d}"


@dataclass(frozen=True)
class ConfiguratorSample:
    id: int
    industry: str
    name: str
    duration_s: int
    url: str
    recording_path: str
    recording_sha256: str = ""

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise StoreError(f"sample {self.id}: duration must be positive")


@dataclass
class LogLoad:
    """Records read from one log plus the line numbers that failed to parse."""

    records: list[dict]
    corrupt_lines: list[int] = field(default_factory=list)


@dataclass
class FindingSet:
    findings: list[Finding]
    corrupt_lines: list[int] = field(default_factory=list)

    def __iter__(self):
        return iter(self.findings)

    def __len__(self) -> int:
        return len(self.findings)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ResultsStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -- paths -------------------------------------------------------------

    @property
    def dataset_path(self) -> Path:
        return self.root / "dataset.json"

    @property
    def catalog_snapshot_path(self) -> Path:
        return self.root / "catalog.json"

    def run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def manifest_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "manifest.json"

    def findings_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "findings.log"

    def failures_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "failures.log"

    @property
    def assignments_path(self) -> Path:
        return self.root / "review" / "assignments.log"

    @property
    def judgments_path(self) -> Path:
        return self.root / "review" / "judgments.log"

    # -- generic log plumbing ----------------------------------------------

    def append_record(self, path: Path, record: dict, lock_timeout_s: float = 10.0) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        record = {"schema": RECORD_SCHEMA_VERSION, **record}
        line = json.dumps(record, ensure_ascii=False)
        lock = FileLock(str(path) + ".lock")
        try:
            with lock.acquire(timeout=lock_timeout_s):
                with open(path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
        except Timeout:
            raise StoreLockTimeout(f"could not acquire writer lock for {path.name}") from None

    def read_log(self, path: Path) -> LogLoad:
        load = LogLoad(records=[])
        if not path.exists():
            return load
        with open(path, "r", encoding="utf-8") as fh:
            for number, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    load.corrupt_lines.append(number)
                    continue
                if not isinstance(record, dict):
                    load.corrupt_lines.append(number)
                    continue
                load.records.append(record)
        return load

    @staticmethod
    def _atomic_write(path: Path, document: dict) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(document, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    # -- dataset -----------------------------------------------------------

    def ingest_dataset(self, manifest: list[dict] | str | Path, base_dir: Path | None = None) -> list[ConfiguratorSample]:
        """Validate and persist a dataset manifest.

        ``manifest`` is either a parsed array of rows or a path to a JSON
        file. Relative recording paths resolve against the manifest's
        directory (or ``base_dir``). Re-ingesting an identical manifest is a
        no-op; a conflicting one is rejected.
        """
        if isinstance(manifest, (str, Path)):
            manifest_path = Path(manifest)
            base_dir = base_dir or manifest_path.parent
            try:
                rows = json.loads(manifest_path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise StoreError(f"cannot read dataset manifest {manifest}: {exc}") from exc
        else:
            rows = manifest
            base_dir = base_dir or Path.cwd()

        if not isinstance(rows, list) or not rows:
            raise StoreError("no samples in dataset manifest")

        samples: list[ConfiguratorSample] = []
        seen_ids: set[int] = set()
        for row in rows:
            try:
                sample_id = int(row["id"])
                industry = row["industry"]
                name = row["name"]
                duration = row["duration"]
                url = row["url"]
                recording = row["recording_path"]
            except (KeyError, TypeError, ValueError) as exc:
                raise StoreError(f"malformed dataset row {row!r}: {exc}") from None
            if sample_id in seen_ids:
                raise StoreError(f"duplicate sample id {sample_id}")
            seen_ids.add(sample_id)
            recording_path = Path(recording)
            if not recording_path.is_absolute():
                recording_path = base_dir / recording_path
            if not recording_path.is_file():
                raise StoreError(f"sample {sample_id}: recording file not found: {recording_path}")
            samples.append(
                ConfiguratorSample(
                    id=sample_id,
                    industry=industry,
                    name=name,
                    duration_s=parse_duration(duration),
                    url=url,
                    recording_path=str(recording_path),
                    recording_sha256=_sha256(recording_path),
                )
            )

        snapshot = {
            "schema": RECORD_SCHEMA_VERSION,
            "samples": [vars(s) for s in samples],
        }
        if self.dataset_path.exists():
            existing = json.loads(self.dataset_path.read_text(encoding="utf-8"))
            if existing == snapshot:
                return samples
            raise StoreError(
                "a different dataset is already ingested in this store; "
                "use a fresh store directory to change datasets"
            )
        self._atomic_write(self.dataset_path, snapshot)
        return samples

    def load_samples(self) -> list[ConfiguratorSample]:
        if not self.dataset_path.exists():
            raise StoreError(f"no dataset ingested in store {self.root}")
        snapshot = json.loads(self.dataset_path.read_text(encoding="utf-8"))
        return [ConfiguratorSample(**row) for row in snapshot["samples"]]

    def get_sample(self, sample_id: int) -> ConfiguratorSample:
        for sample in self.load_samples():
            if sample.id == sample_id:
                return sample
        raise StoreError(f"unknown sample id {sample_id}")

    # -- catalog snapshot ----------------------------------------------------

    def save_catalog_snapshot(self, document: dict) -> None:
        self._atomic_write(self.catalog_snapshot_path, document)

    def load_catalog_snapshot(self) -> dict | None:
        if not self.catalog_snapshot_path.exists():
            return None
        return json.loads(self.catalog_snapshot_path.read_text(encoding="utf-8"))

    # -- runs ----------------------------------------------------------------

    def list_runs(self) -> list[str]:
        runs_dir = self.root / "runs"
        if not runs_dir.exists():
            return []
        return sorted(p.name for p in runs_dir.iterdir() if p.is_dir())

    def run_exists(self, run_id: str) -> bool:
        return self.manifest_path(run_id).exists()

    def require_run(self, run_id: str) -> None:
        if not self.run_exists(run_id):
            raise StoreError(f"unknown run {run_id!r}")

    def save_run_manifest(self, run_id: str, manifest: dict) -> None:
        self._atomic_write(self.manifest_path(run_id), manifest)

    def load_run_manifest(self, run_id: str) -> dict:
        self.require_run(run_id)
        return json.loads(self.manifest_path(run_id).read_text(encoding="utf-8"))

    def append_finding(self, run_id: str, finding: Finding) -> None:
        self.require_run(run_id)
        self.append_record(self.findings_path(run_id), finding_to_record(finding, run_id))

    def load_findings(self, run_id: str) -> FindingSet:
        """Findings in append order, upserted by (sample, criterion): latest wins."""
        self.require_run(run_id)
        load = self.read_log(self.findings_path(run_id))
        by_key: dict[tuple[int, str], Finding] = {}
        for record in load.records:
            finding = finding_from_record(record)
            by_key.pop(finding.key(), None)
            by_key[finding.key()] = finding
        return FindingSet(findings=list(by_key.values()), corrupt_lines=load.corrupt_lines)

    def append_failure(self, run_id: str, sample_id: int, criterion_id: str, error: str, created_at: str) -> None:
        self.require_run(run_id)
        record = {
            "run_id": run_id,
            "sample_id": sample_id,
            "criterion_id": criterion_id,
            "error": error,
            "created_at": created_at,
        }
        self.append_record(self.failures_path(run_id), record)

    def load_failures(self, run_id: str) -> list[dict]:
        self.require_run(run_id)
        return self.read_log(self.failures_path(run_id)).records

    # -- review logs ----------------------------------------------------------

    def append_assignment(self, record: dict) -> None:
        self.append_record(self.assignments_path, record)

    def load_assignments(self) -> list[dict]:
        return self.read_log(self.assignments_path).records

    def append_judgment(self, record: dict, lock_timeout_s: float = 10.0) -> None:
        self.append_record(self.judgments_path, record, lock_timeout_s=lock_timeout_s)

    def load_judgments(self) -> list[dict]:
        return self.read_log(self.judgments_path).records
