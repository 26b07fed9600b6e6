"""Test-side oracles and fixture builders, independent of the code under test."""

from fractions import Fraction
from itertools import combinations

from confalyzer.findings import Finding, Severity
from confalyzer.review import Assignment, Judgment


def pairwise_po_oracle(rows) -> Fraction:
    """Observed agreement by literally enumerating every rater pair per item."""
    total = Fraction(0)
    for row in rows:
        raters = [category for category, count in enumerate(row) for _ in range(count)]
        pairs = list(combinations(range(len(raters)), 2))
        agreeing = sum(1 for i, j in pairs if raters[i] == raters[j])
        total += Fraction(agreeing, len(pairs))
    return total / len(rows)


def kappa_oracle(rows) -> Fraction | None:
    """Chance-corrected kappa from first principles (pooled quadratic chance)."""
    n = len(rows)
    r = sum(rows[0])
    p = [Fraction(sum(row[c] for row in rows), n * r) for c in range(len(rows[0]))]
    p_e = sum((x * x for x in p), Fraction(0))
    if p_e == 1:
        return None
    p_o = pairwise_po_oracle(rows)
    return (p_o - p_e) / (1 - p_e)


def ac1_oracle(rows) -> Fraction:
    n = len(rows)
    r = sum(rows[0])
    k = len(rows[0])
    p = [Fraction(sum(row[c] for row in rows), n * r) for c in range(k)]
    p_e = sum((x * (1 - x) for x in p), Fraction(0)) / (k - 1)
    p_o = pairwise_po_oracle(rows)
    return (p_o - p_e) / (1 - p_e)


def random_matrix_rows(rng, max_items=6, max_raters=4, max_categories=3):
    n = rng.randint(1, max_items)
    r = rng.randint(2, max_raters)
    k = rng.randint(2, max_categories)
    rows = []
    for _ in range(n):
        row = [0] * k
        for _ in range(r):
            row[rng.randrange(k)] += 1
        rows.append(row)
    return rows


def make_finding(sample_id: int, criterion_id: str, severity: Severity, latency=1.0) -> Finding:
    if severity is Severity.NO_ISSUE:
        return Finding(sample_id=sample_id, criterion_id=criterion_id, severity=severity,
                       latency_s=latency)
    return Finding(
        sample_id=sample_id,
        criterion_id=criterion_id,
        severity=severity,
        issue_description=f"issue for {criterion_id} on sample {sample_id}",
        improvement_suggestion=f"improvement for {criterion_id} on sample {sample_id}",
        latency_s=latency,
    )


def synth_judgments(
    assignments: list[Assignment],
    issue_majority: set,
    improvement_majority: set,
    issue_full: set,
    improvement_full: set,
) -> list[Judgment]:
    """Judgments realizing exact majority and full-agreement memberships.

    Majority-true with full agreement votes (T,T,T), without (T,T,F);
    majority-false votes (F,F,F) or (F,F,T).
    """

    def votes(majority: bool, full: bool) -> list[bool]:
        if majority:
            return [True, True, True] if full else [True, True, False]
        return [False, False, False] if full else [False, False, True]

    judgments = []
    for assignment in assignments:
        key = assignment.finding_key
        issue_votes = votes(key in issue_majority, key in issue_full)
        improvement_votes = votes(key in improvement_majority, key in improvement_full)
        for reviewer_id, issue_vote, improvement_vote in zip(
            assignment.reviewer_ids, issue_votes, improvement_votes
        ):
            judgments.append(
                Judgment(
                    finding_key=key,
                    reviewer_id=reviewer_id,
                    issue_plausible=issue_vote,
                    improvement_plausible=improvement_vote,
                )
            )
    return judgments


def study_scale_judgment_set(assignments, findings):
    """Assignments + judgments with the study-scale verdict pattern.

    Issue majorities: 64 of 73 minor, 67 of 75 major. Improvement majorities:
    71 of 73 minor, 74 of 75 major. Full agreement on 80 (issue) and 113
    (improvement) of the 148 findings.
    """
    by_key = {(f.sample_id, f.criterion_id): f for f in findings}

    def finding_of(assignment):
        _, sample_id, criterion_id = assignment.finding_key
        return by_key[(sample_id, criterion_id)]

    minor = [a for a in assignments if finding_of(a).severity is Severity.MINOR]
    major = [a for a in assignments if finding_of(a).severity is Severity.MAJOR]
    assert len(minor) == 73 and len(major) == 75

    issue_majority = {a.finding_key for a in minor[:64]} | {a.finding_key for a in major[:67]}
    improvement_majority = {a.finding_key for a in minor[:71]} | {a.finding_key for a in major[:74]}
    ordered_keys = [a.finding_key for a in assignments]
    issue_full = set(ordered_keys[:80])
    improvement_full = set(ordered_keys[:113])
    return synth_judgments(
        assignments, issue_majority, improvement_majority, issue_full, improvement_full
    )
