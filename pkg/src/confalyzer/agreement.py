"""Inter-rater agreement statistics over item-by-category rating counts.

All coefficients are computed in exact rational arithmetic (row sums are
small integers), so equalities like kappa == 0 hold without tolerances;
conversion to float happens only at reporting time.

Definitions, for an n x K count matrix with r raters per item and pooled
category proportions p_c = sum_i counts[i][c] / (n*r):

    observed agreement   P_o  = mean over items of the fraction of agreeing
                                rater pairs:
                                sum_c counts[i][c]*(counts[i][c]-1) / (r*(r-1))
    multi-rater kappa    k    = (P_o - P_e) / (1 - P_e),  P_e = sum_c p_c^2
                                (None when P_e = 1: every rating in one
                                category, chance correction degenerate)
    AC1                  AC1  = (P_o - P_e') / (1 - P_e'),
                                P_e' = (1/(K-1)) * sum_c p_c*(1 - p_c)

AC1's chance term stays small when one category dominates, which keeps the
coefficient meaningful for heavily skewed binary ratings where kappa
collapses toward zero despite high observed agreement.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfalyzerError
from .review import Assignment, Judgment, latest_judgments


class AgreementError(ConfalyzerError):
    """Invalid rating matrix or infeasible fixture targets."""


@dataclass(frozen=True)
class RatingMatrix:
    """Item x category table; counts[i][c] = raters putting item i in category c."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.counts:
            raise AgreementError("rating matrix must contain at least one item")
        widths = {len(row) for row in self.counts}
        if len(widths) != 1:
            raise AgreementError("all rows must have the same number of categories")
        if self.k_categories < 2:
            raise AgreementError("need at least two categories")
        row_sums = {sum(row) for row in self.counts}
        if len(row_sums) != 1:
            raise AgreementError("every item must have the same number of ratings")
        if any(entry < 0 for row in self.counts for entry in row):
            raise AgreementError("counts must be non-negative")
        if self.r_raters < 2:
            raise AgreementError("need at least two raters per item")

    @classmethod
    def from_rows(cls, rows: list[list[int]]) -> "RatingMatrix":
        return cls(counts=tuple(tuple(row) for row in rows))

    @property
    def n_items(self) -> int:
        return len(self.counts)

    @property
    def r_raters(self) -> int:
        return sum(self.counts[0])

    @property
    def k_categories(self) -> int:
        return len(self.counts[0])

    def category_proportions(self) -> list[Fraction]:
        total = self.n_items * self.r_raters
        return [
            Fraction(sum(row[c] for row in self.counts), total)
            for c in range(self.k_categories)
        ]


def from_judgments(
    judgments: list[Judgment], assignments: list[Assignment], question: str
) -> RatingMatrix:
    """Tally one binary question into an n x 2 matrix (plausible, implausible).

    Every assigned finding must carry a full set of judgments; an incomplete
    finding is an error naming its key.
    """
    if question not in ("issue", "improvement"):
        raise AgreementError(f"unknown question {question!r}: expected issue or improvement")
    if not assignments:
        raise AgreementError("no assignments to tally")
    latest = latest_judgments(judgments)
    rows: list[tuple[int, int]] = []
    for assignment in assignments:
        votes = []
        for reviewer_id in assignment.reviewer_ids:
            judgment = latest.get((assignment.finding_key, reviewer_id))
            if judgment is None:
                raise AgreementError(
                    f"finding {assignment.finding_key} is missing a judgment from "
                    f"{reviewer_id!r}"
                )
            votes.append(
                judgment.issue_plausible if question == "issue" else judgment.improvement_plausible
            )
        rows.append((sum(votes), len(votes) - sum(votes)))
    return RatingMatrix(counts=tuple(rows))


def observed_agreement(matrix: RatingMatrix) -> Fraction:
    """Mean fraction of agreeing rater pairs per item."""
    r = matrix.r_raters
    pair_total = r * (r - 1)
    per_item = [
        Fraction(sum(c * (c - 1) for c in row), pair_total) for row in matrix.counts
    ]
    return sum(per_item, Fraction(0)) / matrix.n_items


def chance_agreement_kappa(matrix: RatingMatrix) -> Fraction:
    return sum((p * p for p in matrix.category_proportions()), Fraction(0))


def fleiss_kappa(matrix: RatingMatrix) -> Fraction | None:
    """Chance-corrected agreement; None when every rating falls in one category."""
    p_e = chance_agreement_kappa(matrix)
    if p_e == 1:
        return None
    return (observed_agreement(matrix) - p_e) / (1 - p_e)


def chance_agreement_ac1(matrix: RatingMatrix) -> Fraction:
    proportions = matrix.category_proportions()
    return sum((p * (1 - p) for p in proportions), Fraction(0)) / (matrix.k_categories - 1)


def gwet_ac1(matrix: RatingMatrix) -> Fraction:
    """Skew-robust chance-corrected agreement (denominator never degenerates)."""
    p_e = chance_agreement_ac1(matrix)
    return (observed_agreement(matrix) - p_e) / (1 - p_e)


def paradox_fixture(
    n: int,
    prevalence: float,
    target_po: float,
    seed: int = 0,
    atol: float = 0.015,
) -> RatingMatrix:
    """Construct a binary three-rater matrix with prescribed skew and agreement.

    Searches row-type mixes (unanimous-true, 2-1, 1-2, unanimous-false) whose
    majority-true rate is within ``atol`` of ``prevalence`` and whose observed
    agreement is within ``atol`` of ``target_po``; among candidates the one
    with kappa closest to zero is returned, which is the regime where high
    observed agreement coexists with a near-zero chance-corrected kappa while
    AC1 stays moderate. Row order is shuffled by ``seed``.
    """
    if n < 1:
        raise AgreementError("need at least one item")
    if not 0 <= prevalence <= 1:
        raise AgreementError("prevalence must be within [0, 1]")
    if not 0 <= target_po <= 1:
        raise AgreementError("target observed agreement must be within [0, 1]")

    po_target = Fraction(target_po).limit_denominator(10**6)
    prev_target = Fraction(prevalence).limit_denominator(10**6)

    # With r=3 and u unanimous rows, P_o = (u + (n-u)/3) / n. Rank candidates
    # by distance to the targets first, then by |kappa| so the returned mix
    # sits as deep in the paradox regime as the targets allow.
    best: tuple[Fraction, Fraction, tuple[int, int, int, int]] | None = None
    for u in range(n + 1):
        po = Fraction(u, n) + Fraction(n - u, 3 * n)
        po_distance = abs(po - po_target)
        if po_distance > atol:
            continue
        for m in range(n + 1):
            prev_distance = abs(Fraction(m, n) - prev_target)
            if prev_distance > atol:
                continue
            a_low = max(0, u + m - n)
            a_high = min(m, u)
            for a in range(a_low, a_high + 1):
                b = m - a
                d = u - a
                c = n - u - b
                if min(b, c, d) < 0:
                    continue
                kappa = fleiss_kappa(_matrix_from_mix(a, b, c, d))
                badness = abs(kappa) if kappa is not None else Fraction(2)
                score = (po_distance + prev_distance, badness, (a, b, c, d))
                if best is None or score[:2] < best[:2]:
                    best = score
    if best is None:
        raise AgreementError(
            f"no binary 3-rater matrix of {n} items reaches prevalence~{prevalence} "
            f"with observed agreement~{target_po} (tolerance {atol})"
        )

    a, b, c, d = best[2]
    rows = [(3, 0)] * a + [(2, 1)] * b + [(1, 2)] * c + [(0, 3)] * d
    random.Random(seed).shuffle(rows)
    return RatingMatrix(counts=tuple(rows))


def _matrix_from_mix(a: int, b: int, c: int, d: int) -> RatingMatrix:
    rows = [(3, 0)] * a + [(2, 1)] * b + [(1, 2)] * c + [(0, 3)] * d
    return RatingMatrix(counts=tuple(rows))
