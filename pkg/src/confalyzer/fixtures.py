"""Deterministic demo dataset and mock-backend fixtures.

Everything here is synthetic but shaped like a real audit at study scale:
16 configurator samples spanning distinct industries, 18 criteria, and a
fixed severity grid totalling 140 clean / 73 minor / 75 major cells with
per-sample issue counts spanning 5 to 13. The grid flags comparison- and
persistence-related criteria most often and navigation/preview basics least
often, so criterion-level reports have realistic contrast.

``write_demo_tree`` materializes the whole thing on disk (manifest, dummy
recordings, mock responses, reviewer roster) for offline end-to-end runs.
"""

from __future__ import annotations

import json
from pathlib import Path

from .catalog import builtin_catalog
from .findings import Severity, record_text

# (industry, name, duration MM:SS, url) for the 16 demo samples, ids 1..16.
DEMO_SAMPLE_ROWS = [
    ("Accessories", "Tie Creators", "05:22", "tiecreators.com"),
    ("Apparel", "Clothoo", "05:47", "clothoo.com"),
    ("Beauty & Health", "eSalon", "04:19", "esalon.com"),
    ("Electronics", "AimControllers", "08:44", "aimcontrollers.com"),
    ("Food & Packaging", "Oreo", "04:44", "oreo.com"),
    ("Footwear", "DIS", "05:49", "designitalianshoes.com/en"),
    ("Games & Music", "Fender", "04:17", "fender.com"),
    ("House & Garden", "Ergohide", "03:41", "ergohide.com"),
    ("Industrial Goods", "Altrex", "01:23", "altrex.com/en"),
    ("Kids & Babies", "Nuk", "04:02", "nuk.de"),
    ("Motor Vehicles", "Aixam", "02:49", "aixam.com"),
    ("Office & Merchandise", "Austrian Post", "03:20", "onlineshop.post.at/en-AT"),
    ("Paper & Books", "Packhelp", "07:39", "packhelp.com"),
    ("Pet Supplies", "4Pets", "01:13", "4pets-products.com/en"),
    ("Printing Platforms", "Namemaker", "01:32", "namemaker.com"),
    ("Sportswear & Equipment", "Aurum Bikes", "02:15", "aurumbikes.com"),
]

# Issues flagged per sample (ids 1..16): spans 5..13, sums to 148.
DEMO_ISSUE_COUNTS = [5, 6, 7, 8, 9, 9, 9, 9, 10, 10, 10, 10, 11, 11, 11, 13]

# Criteria ordered from most to least commonly violated; a sample with c
# issues flags the first c entries.
DEMO_FLAG_PRIORITY = [
    "C5", "N5", "C4", "N4", "E2", "C1", "V2", "E1", "C2",
    "N1", "E4", "N3", "C6", "E3", "V1", "N2", "N6", "C3",
]

DEMO_SEVERITY_TOTALS = {"no issue": 140, "minor issue": 73, "major issue": 75}


def demo_manifest_rows(recordings_dir: str = "recordings") -> list[dict]:
    return [
        {
            "id": index,
            "industry": industry,
            "name": name,
            "duration": duration,
            "url": url,
            "recording_path": f"{recordings_dir}/sample_{index:02d}.mp4",
        }
        for index, (industry, name, duration, url) in enumerate(DEMO_SAMPLE_ROWS, start=1)
    ]


def demo_severity_grid() -> dict[tuple[int, str], Severity]:
    """Fixed severity per (sample_id, criterion_id) cell, totalling 140/73/75."""
    assert sum(DEMO_ISSUE_COUNTS) == 148 and len(DEMO_ISSUE_COUNTS) == 16
    flagged: list[tuple[int, str]] = []
    for sample_id, issue_count in enumerate(DEMO_ISSUE_COUNTS, start=1):
        for criterion_id in DEMO_FLAG_PRIORITY[:issue_count]:
            flagged.append((sample_id, criterion_id))

    grid: dict[tuple[int, str], Severity] = {}
    for sample_id in range(1, 17):
        for criterion in builtin_catalog():
            grid[(sample_id, criterion.id.value)] = Severity.NO_ISSUE
    # Alternate severities over the flagged cells, then promote the last
    # minor cell so the split is exactly 73 minor / 75 major.
    for position, key in enumerate(flagged):
        grid[key] = Severity.MAJOR if position % 2 == 0 else Severity.MINOR
    grid[flagged[-1]] = Severity.MAJOR
    return grid


def _issue_text(sample_name: str, criterion) -> str:
    question = criterion.description.rstrip("?").lower()
    return (
        f"In the {sample_name} recording there is no evidence that the interface "
        f"addresses the question whether {question}. The relevant controls either "
        f"never appear or are not usable at the moment a user would need them."
    )


def _improvement_text(criterion) -> str:
    return (
        f"Add explicit support for '{criterion.name}': surface the capability "
        f"where the related decision is made, label it clearly, and keep it "
        f"consistent across configuration steps."
    )


def demo_mock_fixtures() -> dict[str, dict]:
    """Mock backend fixture table matching the demo severity grid.

    Latencies are deterministic per cell and span 3.4 to 52.8 seconds.
    """
    catalog = builtin_catalog()
    grid = demo_severity_grid()
    rows = demo_manifest_rows()
    durations = {row["id"]: row["duration"] for row in rows}
    names = {row["id"]: row["name"] for row in rows}
    max_minutes = 9.0

    fixtures: dict[str, dict] = {}
    for (sample_id, criterion_id), severity in sorted(grid.items()):
        criterion = catalog.get(criterion_id)
        if severity is Severity.NO_ISSUE:
            text = record_text(severity)
        else:
            text = record_text(
                severity,
                issue=_issue_text(names[sample_id], criterion),
                improvement=_improvement_text(criterion),
            )
        minutes, seconds = durations[sample_id].split(":")
        fraction = (int(minutes) * 60 + int(seconds)) / (max_minutes * 60)
        criterion_index = catalog.ids().index(criterion_id)
        latency = round(3.4 + fraction * (52.8 - 3.4 - 1.7) + 0.1 * criterion_index, 3)
        fixtures[f"{sample_id}/{criterion_id}"] = {"text": text, "latency_s": latency}
    return fixtures


def demo_reviewers() -> list[dict]:
    return [
        {"id": f"r{i}", "display_name": f"Reviewer {i}"} for i in range(1, 7)
    ]


def demo_tokens() -> dict[str, str]:
    """Static bearer tokens for the demo service, one per reviewer."""
    return {f"token-r{i}": f"r{i}" for i in range(1, 7)}


def write_demo_tree(out_dir: str | Path) -> dict[str, Path]:
    """Write manifest, dummy recordings, mock fixtures, reviewers, and tokens."""
    out = Path(out_dir)
    recordings = out / "recordings"
    recordings.mkdir(parents=True, exist_ok=True)

    rows = demo_manifest_rows()
    for row in rows:
        # Placeholder bytes; only existence and a stable hash matter offline.
        (out / row["recording_path"]).write_bytes(
            f"demo recording for sample {row['id']}\n".encode()
        )

    paths = {
        "manifest": out / "table5.json",
        "mock_responses": out / "mock_responses.json",
        "reviewers": out / "reviewers.json",
        "tokens": out / "tokens.json",
    }
    paths["manifest"].write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    paths["mock_responses"].write_text(
        json.dumps(demo_mock_fixtures(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    paths["reviewers"].write_text(json.dumps(demo_reviewers(), indent=2) + "\n", encoding="utf-8")
    paths["tokens"].write_text(json.dumps(demo_tokens(), indent=2) + "\n", encoding="utf-8")
    return paths
