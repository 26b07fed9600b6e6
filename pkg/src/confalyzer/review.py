"""Human plausibility review: assignment, judgments, majority verdicts.

Every flagged finding is independently judged by exactly k reviewers
(k odd, default 3). A judgment answers two binary questions: is the issue
description plausible, and is the improvement recommendation appropriate.
Verdicts aggregate the k latest judgments per finding by majority vote;
findings missing judgments are reported incomplete and excluded.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfalyzerError
from .findings import Finding, Severity, utcnow_iso

DEFAULT_REVIEWERS_PER_FINDING = 3

FindingKey = tuple[str, int, str]  # (run_id, sample_id, criterion_id)


class ReviewError(ConfalyzerError):
    """Assignment or judgment rule violation."""


@dataclass(frozen=True)
class Reviewer:
    id: str
    display_name: str = ""


@dataclass(frozen=True)
class Assignment:
    finding_key: FindingKey
    reviewer_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.reviewer_ids)) != len(self.reviewer_ids):
            raise ReviewError(f"assignment for {self.finding_key} repeats a reviewer")


@dataclass(frozen=True)
class Judgment:
    finding_key: FindingKey
    reviewer_id: str
    issue_plausible: bool
    improvement_plausible: bool
    submitted_at: str = ""


@dataclass(frozen=True)
class Verdict:
    finding_key: FindingKey
    issue_plausible_majority: bool
    improvement_plausible_majority: bool
    full_agreement_issue: bool
    full_agreement_improvement: bool


def require_odd(k: int) -> int:
    if k < 1 or k % 2 == 0:
        raise ReviewError(f"reviewers per finding must be odd, got {k}")
    return k


def select_reviewable(findings: list[Finding]) -> list[Finding]:
    """Findings flagged minor or major, in stable input order."""
    return [f for f in findings if f.severity is not Severity.NO_ISSUE]


def assign(
    reviewable: list[Finding],
    reviewers: list[Reviewer],
    run_id: str,
    k: int = DEFAULT_REVIEWERS_PER_FINDING,
    seed: int = 0,
) -> list[Assignment]:
    """Assign each finding to k distinct reviewers with balanced load.

    Seeded round-robin over a shuffled copy of the finding list: loads differ
    by at most one, and the result is deterministic for a given seed.
    """
    require_odd(k)
    ids = [r.id for r in reviewers]
    if len(set(ids)) != len(ids):
        raise ReviewError("reviewer ids must be unique")
    if len(ids) < k:
        raise ReviewError(f"need at least {k} reviewers, got {len(ids)}")

    order = list(range(len(reviewable)))
    random.Random(seed).shuffle(order)

    assignments: dict[int, Assignment] = {}
    pointer = 0
    for index in order:
        finding = reviewable[index]
        chosen = tuple(ids[(pointer + offset) % len(ids)] for offset in range(k))
        pointer = (pointer + k) % len(ids)
        assignments[index] = Assignment(
            finding_key=(run_id, finding.sample_id, finding.criterion_id),
            reviewer_ids=chosen,
        )
    return [assignments[i] for i in range(len(reviewable))]


def latest_judgments(judgments: list[Judgment]) -> dict[tuple[FindingKey, str], Judgment]:
    """Collapse the append-ordered history: later submissions supersede."""
    latest: dict[tuple[FindingKey, str], Judgment] = {}
    for judgment in judgments:
        latest[(judgment.finding_key, judgment.reviewer_id)] = judgment
    return latest


def validate_judgment(judgment: Judgment, assignments: list[Assignment]) -> Assignment:
    """Check that the reviewer is assigned to the finding."""
    for assignment in assignments:
        if assignment.finding_key == judgment.finding_key:
            if judgment.reviewer_id not in assignment.reviewer_ids:
                raise ReviewError(
                    f"reviewer {judgment.reviewer_id!r} is not assigned to finding "
                    f"{judgment.finding_key}"
                )
            return assignment
    raise ReviewError(f"no assignment exists for finding {judgment.finding_key}")


def verdicts(
    judgments: list[Judgment], assignments: list[Assignment]
) -> tuple[list[Verdict], list[FindingKey]]:
    """Majority-vote verdicts for completely judged findings.

    Returns (verdicts, incomplete_finding_keys). With k odd there is always a
    strict majority; full agreement means all k votes are equal.
    """
    latest = latest_judgments(judgments)
    results: list[Verdict] = []
    incomplete: list[FindingKey] = []
    for assignment in assignments:
        votes = [
            latest.get((assignment.finding_key, reviewer_id))
            for reviewer_id in assignment.reviewer_ids
        ]
        if any(v is None for v in votes):
            incomplete.append(assignment.finding_key)
            continue
        k = len(votes)
        needed = (k + 1) // 2
        issue_votes = [v.issue_plausible for v in votes]
        improvement_votes = [v.improvement_plausible for v in votes]
        results.append(
            Verdict(
                finding_key=assignment.finding_key,
                issue_plausible_majority=sum(issue_votes) >= needed,
                improvement_plausible_majority=sum(improvement_votes) >= needed,
                full_agreement_issue=len(set(issue_votes)) == 1,
                full_agreement_improvement=len(set(improvement_votes)) == 1,
            )
        )
    return results, incomplete


def agreement_summary(verdict_list: list[Verdict], findings: list[Finding]) -> dict:
    """Full-agreement rates plus majority-plausibility rates per severity class.

    Rates are exact fractions; rendering rounds later.
    """
    if not verdict_list:
        raise ReviewError("no verdicts to summarize")
    severity_by_key = {(f.sample_id, f.criterion_id): f.severity for f in findings}

    def plausibility(selected: list[Verdict]) -> dict:
        n = len(selected)
        row = {"n": n, "issue_rate": None, "improvement_rate": None}
        if n:
            row["issue_rate"] = Fraction(sum(v.issue_plausible_majority for v in selected), n)
            row["improvement_rate"] = Fraction(
                sum(v.improvement_plausible_majority for v in selected), n
            )
        return row

    def severity_of(verdict: Verdict) -> Severity:
        _, sample_id, criterion_id = verdict.finding_key
        try:
            return severity_by_key[(sample_id, criterion_id)]
        except KeyError:
            raise ReviewError(
                f"no finding recorded for verdict key {verdict.finding_key}"
            ) from None

    minor = [v for v in verdict_list if severity_of(v) is Severity.MINOR]
    major = [v for v in verdict_list if severity_of(v) is Severity.MAJOR]
    total = len(verdict_list)
    return {
        "issue_full_agreement_rate": Fraction(
            sum(v.full_agreement_issue for v in verdict_list), total
        ),
        "improvement_full_agreement_rate": Fraction(
            sum(v.full_agreement_improvement for v in verdict_list), total
        ),
        "plausibility": {
            "minor": plausibility(minor),
            "major": plausibility(major),
            "all": plausibility(verdict_list),
        },
    }


# -- log record conversion ----------------------------------------------------


def assignment_to_record(assignment: Assignment, k: int, seed: int) -> dict:
    run_id, sample_id, criterion_id = assignment.finding_key
    return {
        "run_id": run_id,
        "sample_id": sample_id,
        "criterion_id": criterion_id,
        "reviewer_ids": list(assignment.reviewer_ids),
        "k": k,
        "seed": seed,
        "created_at": utcnow_iso(),
    }


def assignment_from_record(record: dict) -> Assignment:
    return Assignment(
        finding_key=(record["run_id"], record["sample_id"], record["criterion_id"]),
        reviewer_ids=tuple(record["reviewer_ids"]),
    )


def judgment_to_record(judgment: Judgment) -> dict:
    run_id, sample_id, criterion_id = judgment.finding_key
    return {
        "run_id": run_id,
        "sample_id": sample_id,
        "criterion_id": criterion_id,
        "reviewer_id": judgment.reviewer_id,
        "issue_plausible": judgment.issue_plausible,
        "improvement_plausible": judgment.improvement_plausible,
        "submitted_at": judgment.submitted_at or utcnow_iso(),
    }


def judgment_from_record(record: dict) -> Judgment:
    return Judgment(
        finding_key=(record["run_id"], record["sample_id"], record["criterion_id"]),
        reviewer_id=record["reviewer_id"],
        issue_plausible=bool(record["issue_plausible"]),
        improvement_plausible=bool(record["improvement_plausible"]),
        submitted_at=record.get("submitted_at", ""),
    )


def load_reviewers(rows: list[dict]) -> list[Reviewer]:
    reviewers = [Reviewer(id=row["id"], display_name=row.get("display_name", "")) for row in rows]
    if len({r.id for r in reviewers}) != len(reviewers):
        raise ReviewError("reviewer ids must be unique")
    return reviewers
