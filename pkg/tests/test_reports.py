from fractions import Fraction

import pytest

from confalyzer.catalog import builtin_catalog
from confalyzer.findings import Severity
from confalyzer.fixtures import DEMO_SEVERITY_TOTALS, demo_severity_grid
from confalyzer.reports import (
    ReportError,
    export,
    plausibility_table,
    render_table,
    round3,
    severity_by_criterion,
    severity_by_sample,
    severity_table,
    to_csv,
    to_markdown,
    token_table,
)
from confalyzer.review import Reviewer, assign, verdicts

from helpers import make_finding, study_scale_judgment_set


def grid_findings():
    return [make_finding(sample_id, criterion_id, severity)
            for (sample_id, criterion_id), severity in sorted(demo_severity_grid().items())]


def test_round3_half_up():
    assert round3(Fraction(131, 148)) == "0.885"
    assert round3(Fraction(64, 73)) == "0.877"
    assert round3(Fraction(67, 75)) == "0.893"
    assert round3(Fraction(71, 73)) == "0.973"
    assert round3(Fraction(74, 75)) == "0.987"
    assert round3(Fraction(145, 148)) == "0.980"
    assert round3(Fraction(1, 2)) == "0.500"
    assert round3(Fraction(5, 4000)) == "0.001"
    assert round3(Fraction(1, 800)) == "0.001"  # 0.00125 rounds half-up at 3 decimals


def test_severity_by_sample_totals():
    summary = severity_by_sample(grid_findings())
    assert summary["totals"] == DEMO_SEVERITY_TOTALS
    assert summary["issues_min"] == 5
    assert summary["issues_max"] == 13
    assert summary["issues_mean"] == Fraction(148, 16)
    assert len(summary["per_sample"]) == 16
    for counts in summary["per_sample"].values():
        assert sum(counts.values()) == 18


def test_severity_by_sample_single_clean_sample():
    findings = [make_finding(1, cid, Severity.NO_ISSUE) for cid in builtin_catalog().ids()]
    summary = severity_by_sample(findings)
    assert summary["issues_min"] == summary["issues_max"] == 0
    assert summary["per_sample"][1]["no issue"] == 18


def test_severity_by_criterion_conservation():
    findings = grid_findings()
    ids = builtin_catalog().ids()
    by_criterion = severity_by_criterion(findings, ids)
    by_sample = severity_by_sample(findings)
    assert by_criterion["totals"] == by_sample["totals"]
    column_sums = {label: 0 for label in DEMO_SEVERITY_TOTALS}
    for counts in by_criterion["per_criterion"].values():
        for label, value in counts.items():
            column_sums[label] += value
    assert column_sums == by_sample["totals"]
    # C5 and N5 are flagged for every sample in the demo grid.
    c5 = by_criterion["per_criterion"]["C5"]
    assert c5["no issue"] == 0
    assert c5["minor issue"] + c5["major issue"] == 16


def test_severity_by_criterion_empty_findings():
    ids = builtin_catalog().ids()
    summary = severity_by_criterion([], ids)
    assert len(summary["per_criterion"]) == 18
    assert all(sum(counts.values()) == 0 for counts in summary["per_criterion"].values())


def test_criterion_flagged_for_14_of_16():
    findings = []
    for sample_id in range(1, 17):
        severity = Severity.MAJOR if sample_id <= 14 else Severity.NO_ISSUE
        findings.append(make_finding(sample_id, "C5", severity))
    summary = severity_by_criterion(findings, ["C5"])
    assert summary["per_criterion"]["C5"]["major issue"] == 14


def study_scale_verdicts():
    findings = (
        [make_finding(i + 1, "C2", Severity.MINOR) for i in range(73)]
        + [make_finding(i + 100, "C5", Severity.MAJOR) for i in range(75)]
    )
    reviewers = [Reviewer(id=f"r{i}") for i in range(1, 7)]
    assignments = assign(findings, reviewers, "run1", k=3, seed=2)
    judgments = study_scale_judgment_set(assignments, findings)
    verdict_list, incomplete = verdicts(judgments, assignments)
    assert not incomplete
    return verdict_list, findings


def test_plausibility_table_matches_study_values():
    verdict_list, findings = study_scale_verdicts()
    table = plausibility_table(verdict_list, findings)
    assert table.headers[2:] == ["Issue Description", "Improvement Recommendation"]
    rows = {row[0]: row for row in table.rows}
    assert rows["Minor issues"] == ["Minor issues", "73", "0.877", "0.973"]
    assert rows["Major issues"] == ["Major issues", "75", "0.893", "0.987"]
    assert rows["All issues"] == ["All issues", "148", "0.885", "0.980"]
    note = table.footnotes[0]
    assert "54.1%" in note
    assert "76.4%" in note


def test_plausibility_table_all_true():
    verdict_list, findings = study_scale_verdicts()
    from confalyzer.review import Verdict

    unanimous = [
        Verdict(finding_key=v.finding_key, issue_plausible_majority=True,
                improvement_plausible_majority=True, full_agreement_issue=True,
                full_agreement_improvement=True)
        for v in verdict_list
    ]
    table = plausibility_table(unanimous, findings)
    for row in table.rows:
        assert row[2] == "1.000" and row[3] == "1.000"


def test_plausibility_table_empty_class_omits_rate():
    findings = [make_finding(i + 1, "C5", Severity.MAJOR) for i in range(4)]
    reviewers = [Reviewer(id=f"r{i}") for i in range(1, 4)]
    assignments = assign(findings, reviewers, "run1", k=3, seed=0)
    keys = {a.finding_key for a in assignments}
    from helpers import synth_judgments

    judgments = synth_judgments(assignments, keys, keys, keys, keys)
    verdict_list, _ = verdicts(judgments, assignments)
    table = plausibility_table(verdict_list, findings)
    minor_row = [row for row in table.rows if row[0] == "Minor issues"][0]
    assert minor_row == ["Minor issues", "0", "-", "-"]


def test_markdown_layout():
    verdict_list, findings = study_scale_verdicts()
    rendered = to_markdown(plausibility_table(verdict_list, findings))
    assert "Issue Description | Improvement Recommendation" in rendered
    assert rendered.count("|") > 10


def test_csv_line_count_for_criterion_histogram():
    findings = grid_findings()
    table = severity_table(severity_by_criterion(findings, builtin_catalog().ids()), "criterion")
    rendered = to_csv(table)
    lines = rendered.strip().split("\n")
    assert len(lines) == 1 + 18 + 1  # header + 18 criteria + totals row


def test_export_deterministic(tmp_path):
    verdict_list, findings = study_scale_verdicts()
    table = plausibility_table(verdict_list, findings)
    first = export(table, "markdown", tmp_path / "a.md").read_bytes()
    second = export(table, "markdown", tmp_path / "b.md").read_bytes()
    assert first == second


def test_csv_quoting(tmp_path):
    from confalyzer.reports import ReportTable

    table = ReportTable(title="t", headers=["a", "b"], rows=[['x,y', 'z"q']])
    rendered = to_csv(table)
    assert '"x,y"' in rendered
    assert '"z""q"' in rendered


def test_unknown_format_rejected():
    from confalyzer.reports import ReportTable

    with pytest.raises(ReportError):
        render_table(ReportTable(title="t", headers=["a"], rows=[]), "pdf")


def test_token_table_totals():
    findings = [make_finding(1, "C1", Severity.NO_ISSUE), make_finding(2, "C1", Severity.NO_ISSUE)]
    findings = [
        type(f)(**{**vars(f), "input_tokens": 100 * (i + 1), "output_tokens": 10})
        for i, f in enumerate(findings)
    ]
    table = token_table(findings)
    assert table.rows[-1] == ["total", "300", "20"]
