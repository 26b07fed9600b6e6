"""Build a small review-ready store for frontend integration tests.

Usage: python3 fixture_store.py <base_dir>

Creates <base_dir>/store with one sample analyzed against three criteria
(all flagged), assigned to a single reviewer with k=1, plus tokens.json.
"""

import json
import sys
from pathlib import Path

from confalyzer.catalog import builtin_catalog, criteria_subset
from confalyzer.fixtures import write_demo_tree
from confalyzer.gateway import MockBackend, ModelParams, RetryPolicy
from confalyzer.prompts import default_templates
from confalyzer.review import Reviewer, assign, assignment_to_record, select_reviewable
from confalyzer.runner import new_run_manifest, run_matrix
from confalyzer.store import ResultsStore


def main(base_dir: str) -> None:
    base = Path(base_dir)
    tree = write_demo_tree(base / "fixtures")
    store = ResultsStore(base / "store")

    rows = json.loads(tree["manifest"].read_text(encoding="utf-8"))[:1]
    manifest_path = base / "fixtures" / "one_sample.json"
    manifest_path.write_text(json.dumps(rows), encoding="utf-8")
    store.ingest_dataset(manifest_path)

    samples = store.load_samples()
    catalog = criteria_subset(builtin_catalog(), ["C5", "N5", "C4"])
    store.save_catalog_snapshot(catalog.to_document())
    backend = MockBackend.from_file(tree["mock_responses"])
    manifest = new_run_manifest(samples, catalog, ModelParams(), "mock", run_id="uitest")
    run_matrix(store, manifest, samples, catalog, default_templates(), backend,
               retry=RetryPolicy(max_attempts=1))

    findings = select_reviewable(list(store.load_findings("uitest")))
    assert len(findings) == 3, f"expected 3 flagged findings, got {len(findings)}"
    assignments = assign(findings, [Reviewer(id="r1", display_name="Reviewer 1")],
                         "uitest", k=1, seed=0)
    for assignment in assignments:
        store.append_assignment(assignment_to_record(assignment, k=1, seed=0))

    (base / "tokens.json").write_text(json.dumps({"token-r1": "r1"}), encoding="utf-8")
    print(store.root)


if __name__ == "__main__":
    main(sys.argv[1])
