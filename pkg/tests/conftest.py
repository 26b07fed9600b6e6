import pytest

from confalyzer.fixtures import write_demo_tree
from confalyzer.gateway import MockBackend
from confalyzer.store import ResultsStore


@pytest.fixture()
def demo_tree(tmp_path):
    """Demo manifest, recordings, mock responses, reviewers, and tokens on disk."""
    return write_demo_tree(tmp_path / "fixtures")


@pytest.fixture()
def demo_store(tmp_path, demo_tree):
    """Store with the demo dataset ingested."""
    store = ResultsStore(tmp_path / "store")
    store.ingest_dataset(demo_tree["manifest"])
    return store


@pytest.fixture()
def mock_backend(demo_tree):
    return MockBackend.from_file(demo_tree["mock_responses"])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and getattr(report, "when", "call") == "call":
                name = nodeid.split("::")[-1]
                lines.append((name, outcome))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(lines):
        status = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"[{status}] {name}")
