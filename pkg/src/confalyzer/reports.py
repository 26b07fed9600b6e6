"""Aggregate reports: severity distributions, plausibility, timing, tokens.

Reports are recomputed from the store on every request (nothing is cached)
and rendered as simple tables exportable to CSV or markdown. Ratios stay
exact fractions until render time, where they round half-up to 3 decimals.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path

from .errors import ConfalyzerError
from .findings import Finding, Severity
from .review import Verdict, agreement_summary


class ReportError(ConfalyzerError):
    """Report construction or export failure."""


@dataclass
class ReportTable:
    title: str
    headers: list[str]
    rows: list[list[str]]
    footnotes: list[str] = field(default_factory=list)


def round3(value: Fraction | float) -> str:
    """Half-up rounding to 3 decimals, applied only at render time."""
    if isinstance(value, Fraction):
        decimal = Decimal(value.numerator) / Decimal(value.denominator)
    else:
        decimal = Decimal(repr(value))
    return str(decimal.quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def round1(value: Fraction | float) -> str:
    if isinstance(value, Fraction):
        decimal = Decimal(value.numerator) / Decimal(value.denominator)
    else:
        decimal = Decimal(repr(value))
    return str(decimal.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def severity_by_sample(findings: list[Finding]) -> dict:
    """Per-sample severity counts plus the issue-count range and mean."""
    per_sample: dict[int, dict[str, int]] = {}
    for finding in findings:
        counts = per_sample.setdefault(
            finding.sample_id, {s.label: 0 for s in Severity}
        )
        counts[finding.severity.label] += 1
    issue_counts = [
        counts[Severity.MINOR.label] + counts[Severity.MAJOR.label]
        for counts in per_sample.values()
    ]
    summary = {
        "per_sample": per_sample,
        "issues_min": min(issue_counts) if issue_counts else 0,
        "issues_max": max(issue_counts) if issue_counts else 0,
        "issues_mean": (
            Fraction(sum(issue_counts), len(issue_counts)) if issue_counts else Fraction(0)
        ),
        "totals": _severity_totals(findings),
    }
    return summary


def severity_by_criterion(findings: list[Finding], criterion_ids: list[str]) -> dict:
    """Per-criterion severity counts in catalog order; absent criteria get zero rows."""
    per_criterion: dict[str, dict[str, int]] = {
        cid: {s.label: 0 for s in Severity} for cid in criterion_ids
    }
    for finding in findings:
        counts = per_criterion.setdefault(
            finding.criterion_id, {s.label: 0 for s in Severity}
        )
        counts[finding.severity.label] += 1
    return {"per_criterion": per_criterion, "totals": _severity_totals(findings)}


def _severity_totals(findings: list[Finding]) -> dict[str, int]:
    totals = {s.label: 0 for s in Severity}
    for finding in findings:
        totals[finding.severity.label] += 1
    return totals


def severity_table(summary: dict, by: str) -> ReportTable:
    headers = [by.capitalize(), "No issue", "Minor issue", "Major issue", "Issues"]
    rows = []
    group = summary["per_sample"] if by == "sample" else summary["per_criterion"]
    for key, counts in group.items():
        issues = counts[Severity.MINOR.label] + counts[Severity.MAJOR.label]
        rows.append(
            [
                str(key),
                str(counts[Severity.NO_ISSUE.label]),
                str(counts[Severity.MINOR.label]),
                str(counts[Severity.MAJOR.label]),
                str(issues),
            ]
        )
    totals = summary["totals"]
    rows.append(
        [
            "total",
            str(totals[Severity.NO_ISSUE.label]),
            str(totals[Severity.MINOR.label]),
            str(totals[Severity.MAJOR.label]),
            str(totals[Severity.MINOR.label] + totals[Severity.MAJOR.label]),
        ]
    )
    footnotes = []
    if by == "sample":
        footnotes.append(
            f"Issues per sample: min {summary['issues_min']}, "
            f"max {summary['issues_max']}, "
            f"mean {round3(summary['issues_mean'])} "
            f"(= flagged findings / samples analyzed)."
        )
    return ReportTable(
        title=f"Severity by {by}",
        headers=headers,
        rows=rows,
        footnotes=footnotes,
    )


def plausibility_table(verdict_list: list[Verdict], findings: list[Finding]) -> ReportTable:
    """Majority-plausibility rates split into minor / major / all rows."""
    summary = agreement_summary(verdict_list, findings)
    rows = []
    for label, key in (("Minor issues", "minor"), ("Major issues", "major"), ("All issues", "all")):
        cell = summary["plausibility"][key]
        if cell["n"] == 0:
            rows.append([label, "0", "-", "-"])
        else:
            rows.append(
                [
                    label,
                    str(cell["n"]),
                    round3(cell["issue_rate"]),
                    round3(cell["improvement_rate"]),
                ]
            )
    footnotes = [
        "Full agreement (all reviewers identical): issue "
        f"{round1(summary['issue_full_agreement_rate'] * 100)}%, improvement "
        f"{round1(summary['improvement_full_agreement_rate'] * 100)}% "
        "(exact integer ratios rendered to one decimal).",
    ]
    return ReportTable(
        title="Plausibility by majority vote",
        headers=["Severity class", "n", "Issue Description", "Improvement Recommendation"],
        rows=rows,
        footnotes=footnotes,
    )


def timing_table(timing: dict) -> ReportTable:
    overall = timing["overall"]
    rows = [
        [
            "all cells",
            round3(overall["min"]),
            round3(overall["mean"]),
            round3(overall["max"]),
        ]
    ]
    for criterion_id, stats in timing["per_criterion"].items():
        if stats["min"] is None:
            rows.append([criterion_id, "-", "-", "-"])
        else:
            rows.append(
                [criterion_id, round3(stats["min"]), round3(stats["mean"]), round3(stats["max"])]
            )
    footnotes = [
        "Per-sample totals (s): "
        + ", ".join(f"{sid}={round1(total)}" for sid, total in timing["per_sample_total"].items())
    ]
    return ReportTable(
        title="Analysis latency (seconds per criterion)",
        headers=["Criterion", "Min", "Mean", "Max"],
        rows=rows,
        footnotes=footnotes,
    )


def token_table(findings: list[Finding]) -> ReportTable:
    per_sample: dict[int, list[int]] = {}
    for finding in findings:
        entry = per_sample.setdefault(finding.sample_id, [0, 0])
        entry[0] += finding.input_tokens
        entry[1] += finding.output_tokens
    rows = [
        [str(sid), str(tokens[0]), str(tokens[1])] for sid, tokens in sorted(per_sample.items())
    ]
    rows.append(
        [
            "total",
            str(sum(t[0] for t in per_sample.values())),
            str(sum(t[1] for t in per_sample.values())),
        ]
    )
    return ReportTable(
        title="Token usage by sample",
        headers=["Sample", "Input tokens", "Output tokens"],
        rows=rows,
    )


def to_markdown(table: ReportTable) -> str:
    lines = [f"## {table.title}", ""]
    lines.append("| " + " | ".join(table.headers) + " |")
    lines.append("| " + " | ".join("---" for _ in table.headers) + " |")
    for row in table.rows:
        lines.append("| " + " | ".join(row) + " |")
    for note in table.footnotes:
        lines.append("")
        lines.append(f"_{note}_")
    return "\n".join(lines) + "\n"


def to_csv(table: ReportTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.headers)
    writer.writerows(table.rows)
    return buffer.getvalue()


def render_table(table: ReportTable, fmt: str) -> str:
    if fmt == "markdown":
        return to_markdown(table)
    if fmt == "csv":
        return to_csv(table)
    raise ReportError(f"unknown report format {fmt!r}: expected csv or markdown")


def export(table: ReportTable, fmt: str, path: str | Path) -> Path:
    """Write a rendered report; identical inputs produce identical bytes."""
    rendered = render_table(table, fmt)
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(rendered, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc}") from exc
    return out
