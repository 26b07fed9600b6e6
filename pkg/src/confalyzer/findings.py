"""Findings: validated per-cell analysis results parsed from raw model text.

A finding records the severity verdict for one (sample, criterion) cell plus
the issue/improvement texts the model produced. The severity contract is
strict: a flagged finding must carry both texts, a clean one must carry
neither. Raw text is always retained for audit.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import IntEnum
from functools import reduce

from .errors import ConfalyzerError


class ParseError(ConfalyzerError):
    """Raw response could not be converted into a valid finding.

    Carries the offending raw text so failed cells stay auditable.
    """

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class UnparseableResponse(ParseError):
    """No structured record could be extracted from the raw text."""


class ContractViolation(ParseError):
    """The record parsed but violates the severity/text contract."""


class Severity(IntEnum):
    """3-point severity scale with total order: no issue < minor < major."""

    NO_ISSUE = 0
    MINOR = 1
    MAJOR = 2

    @property
    def label(self) -> str:
        return _SEVERITY_LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "Severity":
        normalized = " ".join(text.strip().lower().split())
        try:
            return _LABEL_SEVERITY[normalized]
        except KeyError:
            raise ParseError(f"unknown severity label {text!r}", text) from None


_SEVERITY_LABELS = {
    Severity.NO_ISSUE: "no issue",
    Severity.MINOR: "minor issue",
    Severity.MAJOR: "major issue",
}

# Canonical labels plus the short synonyms models emit at temperature 0.
_LABEL_SEVERITY = {
    "no issue": Severity.NO_ISSUE,
    "none": Severity.NO_ISSUE,
    "minor issue": Severity.MINOR,
    "minor": Severity.MINOR,
    "major issue": Severity.MAJOR,
    "major": Severity.MAJOR,
}


def utcnow_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class Finding:
    sample_id: int
    criterion_id: str
    severity: Severity
    issue_description: str | None = None
    improvement_suggestion: str | None = None
    raw_text: str = ""
    latency_s: float = 0.0
    input_tokens: int = 0
    output_tokens: int = 0
    created_at: str = field(default_factory=utcnow_iso)

    def __post_init__(self) -> None:
        if self.severity is Severity.NO_ISSUE:
            if self.issue_description or self.improvement_suggestion:
                raise ContractViolation(
                    f"{self.key_str()}: severity 'no issue' must not carry texts", self.raw_text
                )
        else:
            if not (self.issue_description or "").strip():
                raise ContractViolation(
                    f"{self.key_str()}: severity {self.severity.label!r} requires an issue description",
                    self.raw_text,
                )
            if not (self.improvement_suggestion or "").strip():
                raise ContractViolation(
                    f"{self.key_str()}: severity {self.severity.label!r} requires an improvement suggestion",
                    self.raw_text,
                )
        if self.latency_s < 0:
            raise ContractViolation(f"{self.key_str()}: negative latency", self.raw_text)

    def key(self) -> tuple[int, str]:
        return (self.sample_id, self.criterion_id)

    def key_str(self) -> str:
        return f"sample {self.sample_id} / criterion {self.criterion_id}"

    def flagged(self) -> bool:
        return self.severity is not Severity.NO_ISSUE


def record_text(severity: Severity, issue: str = "", improvement: str = "") -> str:
    """Serialize a result record in the format the prompt requests."""
    return json.dumps(
        {"severity": severity.label, "issue": issue, "improvement": improvement},
        ensure_ascii=False,
    )


_FENCE = re.compile(r"^```[a-zA-Z]*\s*$|^```\s*$", re.MULTILINE)


def _extract_record(text: str) -> dict:
    """Pull the first JSON object containing a severity field out of raw text.

    Tolerates markdown fences and surrounding prose.
    """
    candidates = [text.strip(), _FENCE.sub("", text).strip()]
    for candidate in candidates:
        try:
            record = json.loads(candidate)
            if isinstance(record, dict) and "severity" in record:
                return record
        except json.JSONDecodeError:
            pass
    # Scan for balanced {...} spans and try each.
    decoder = json.JSONDecoder()
    for start in (m.start() for m in re.finditer(r"\{", text)):
        try:
            record, _ = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            continue
        if isinstance(record, dict) and "severity" in record:
            return record
    raise UnparseableResponse("no structured severity record found in response", text)


def parse_finding(raw, sample_id: int, criterion_id: str) -> Finding:
    """Convert a raw backend response into a validated Finding.

    Empty-string and null issue/improvement values are treated as absent;
    anything else must satisfy the severity contract.
    """
    record = _extract_record(raw.text)
    severity_value = record.get("severity")
    if not isinstance(severity_value, str):
        raise UnparseableResponse(f"severity field is not a string: {severity_value!r}", raw.text)
    severity = Severity.from_label(severity_value)

    def text_or_none(key: str) -> str | None:
        value = record.get(key)
        if value is None:
            return None
        if not isinstance(value, str):
            raise UnparseableResponse(f"{key} field is not a string: {value!r}", raw.text)
        return value.strip() or None

    return Finding(
        sample_id=sample_id,
        criterion_id=criterion_id,
        severity=severity,
        issue_description=text_or_none("issue"),
        improvement_suggestion=text_or_none("improvement"),
        raw_text=raw.text,
        latency_s=raw.latency_s,
        input_tokens=raw.input_tokens,
        output_tokens=raw.output_tokens,
    )


def merge_segment_findings(parts: list[Finding]) -> Finding:
    """Combine per-segment findings for one cell into a single finding.

    Severity is the maximum over segments (never under-reports); texts are
    the flagged segments' texts concatenated with segment labels; telemetry
    is summed. NoIssue segments contribute severity identity and no text.
    """
    if not parts:
        raise ConfalyzerError("cannot merge an empty list of findings")
    keys = {part.key() for part in parts}
    if len(keys) > 1:
        raise ConfalyzerError(f"cannot merge findings with mixed keys: {sorted(keys)}")
    if len(parts) == 1:
        return parts[0]

    severity = reduce(lambda a, b: max(a, b), (p.severity for p in parts))

    def joined(getter) -> str | None:
        pieces = [
            f"[segment {i}] {getter(part)}"
            for i, part in enumerate(parts, start=1)
            if part.flagged() and getter(part)
        ]
        return "\n".join(pieces) or None

    merged = Finding(
        sample_id=parts[0].sample_id,
        criterion_id=parts[0].criterion_id,
        severity=severity,
        issue_description=joined(lambda p: p.issue_description),
        improvement_suggestion=joined(lambda p: p.improvement_suggestion),
        raw_text="\n".join(f"[segment {i}] {p.raw_text}" for i, p in enumerate(parts, start=1)),
        latency_s=sum(p.latency_s for p in parts),
        input_tokens=sum(p.input_tokens for p in parts),
        output_tokens=sum(p.output_tokens for p in parts),
        created_at=max(p.created_at for p in parts),
    )
    return merged


def finding_to_record(finding: Finding, run_id: str) -> dict:
    """Findings-log record (schema 1)."""
    return {
        "schema": 1,
        "run_id": run_id,
        "sample_id": finding.sample_id,
        "criterion_id": finding.criterion_id,
        "severity": finding.severity.label,
        "issue": finding.issue_description,
        "improvement": finding.improvement_suggestion,
        "raw": finding.raw_text,
        "latency_s": finding.latency_s,
        "input_tokens": finding.input_tokens,
        "output_tokens": finding.output_tokens,
        "created_at": finding.created_at,
    }


def finding_from_record(record: dict) -> Finding:
    return Finding(
        sample_id=record["sample_id"],
        criterion_id=record["criterion_id"],
        severity=Severity.from_label(record["severity"]),
        issue_description=record.get("issue"),
        improvement_suggestion=record.get("improvement"),
        raw_text=record.get("raw", ""),
        latency_s=record.get("latency_s", 0.0),
        input_tokens=record.get("input_tokens", 0),
        output_tokens=record.get("output_tokens", 0),
        created_at=record.get("created_at", ""),
    )
