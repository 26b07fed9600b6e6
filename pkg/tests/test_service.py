import pytest
from fastapi.testclient import TestClient

from confalyzer.catalog import builtin_catalog, criteria_subset
from confalyzer.fixtures import demo_tokens
from confalyzer.gateway import MockBackend, ModelParams, RetryPolicy
from confalyzer.prompts import default_templates
from confalyzer.review import (
    assign,
    assignment_to_record,
    load_reviewers,
    select_reviewable,
)
from confalyzer.runner import new_run_manifest, run_matrix
from confalyzer.service import create_app, load_token_table
from confalyzer.store import ResultsStore

import json

CRITERIA = ["C5", "N5", "C4"]


@pytest.fixture()
def reviewed_store(tmp_path, demo_tree):
    store = ResultsStore(tmp_path / "store")
    store.ingest_dataset(demo_tree["manifest"])
    samples = store.load_samples()
    catalog = criteria_subset(builtin_catalog(), CRITERIA)
    store.save_catalog_snapshot(catalog.to_document())
    backend = MockBackend.from_file(demo_tree["mock_responses"])
    manifest = new_run_manifest(samples, catalog, ModelParams(), "mock", run_id="svc")
    run_matrix(store, manifest, samples, catalog, default_templates(), backend,
               retry=RetryPolicy(max_attempts=1))
    findings = list(store.load_findings("svc"))
    reviewers = load_reviewers(json.loads(demo_tree["reviewers"].read_text()))
    assignments = assign(select_reviewable(findings), reviewers, "svc", k=3, seed=5)
    for assignment in assignments:
        store.append_assignment(assignment_to_record(assignment, k=3, seed=5))
    return store


@pytest.fixture()
def client(reviewed_store):
    app = create_app(reviewed_store.root, demo_tokens())
    return TestClient(app)


def auth(reviewer="r1"):
    return {"Authorization": f"Bearer token-{reviewer}"}


def find_queue(client, reviewer="r1"):
    response = client.get("/api/queue", headers=auth(reviewer))
    assert response.status_code == 200
    return response.json()


def test_queue_requires_token(client):
    assert client.get("/api/queue").status_code == 401
    assert client.get("/api/queue", headers={"Authorization": "Bearer nope"}).status_code == 401


def test_queue_unknown_reviewer_404(client):
    response = client.get("/api/queue", params={"reviewer": "ghost"}, headers=auth())
    assert response.status_code == 404


def test_queue_reviewer_mismatch_403(client):
    response = client.get("/api/queue", params={"reviewer": "r2"}, headers=auth("r1"))
    assert response.status_code == 403


def test_queue_items_bundle_criterion_and_finding(client):
    queue = find_queue(client)
    assert queue["assigned"] == 24  # 48 findings x 3 of 6 reviewers
    assert queue["judged"] == 0
    assert len(queue["items"]) == 24
    item = queue["items"][0]
    assert item["criterion_id"] in CRITERIA
    assert item["criterion_description"].endswith("?")
    catalog = builtin_catalog()
    assert item["criterion_description"] == catalog.get(item["criterion_id"]).description
    assert item["severity"] in ("minor issue", "major issue")
    assert item["issue"]
    assert item["improvement"]
    assert item["recording_url"].startswith("/api/recordings/")
    assert item["position"] == 1
    assert item["total"] == 24


def test_submit_judgment_shrinks_queue(client):
    queue = find_queue(client)
    first = queue["items"][0]
    response = client.post(
        "/api/judgments",
        headers=auth(),
        json={"finding_key": first["finding_key"], "issue_plausible": True,
              "improvement_plausible": False},
    )
    assert response.status_code == 201
    stored = response.json()["stored"]
    assert stored["reviewer_id"] == "r1"
    assert stored["improvement_plausible"] is False
    after = find_queue(client)
    assert after["judged"] == 1
    assert len(after["items"]) == 23
    keys = [item["finding_key"] for item in after["items"]]
    assert first["finding_key"] not in keys


def test_submit_missing_field_422(client):
    queue = find_queue(client)
    response = client.post(
        "/api/judgments",
        headers=auth(),
        json={"finding_key": queue["items"][0]["finding_key"], "issue_plausible": True},
    )
    assert response.status_code == 422
    assert "improvement_plausible" in response.text


def test_submit_unassigned_403(client):
    queue = find_queue(client, "r1")
    # Find an item r1 is NOT assigned to by looking at another reviewer's queue.
    other = find_queue(client, "r4")
    r1_keys = {tuple(sorted(i["finding_key"].items())) for i in queue["items"]}
    foreign = [i for i in other["items"]
               if tuple(sorted(i["finding_key"].items())) not in r1_keys]
    response = client.post(
        "/api/judgments",
        headers=auth("r1"),
        json={"finding_key": foreign[0]["finding_key"], "issue_plausible": True,
              "improvement_plausible": True},
    )
    assert response.status_code == 403


def test_submit_unknown_finding_403(client):
    response = client.post(
        "/api/judgments",
        headers=auth(),
        json={"finding_key": {"run_id": "svc", "sample_id": 99, "criterion_id": "C5"},
              "issue_plausible": True, "improvement_plausible": True},
    )
    assert response.status_code == 403


def test_recording_full_get(client, reviewed_store):
    sample = reviewed_store.get_sample(1)
    expected = open(sample.recording_path, "rb").read()
    response = client.get("/api/recordings/1")
    assert response.status_code == 200
    assert response.content == expected
    assert response.headers["content-length"] == str(len(expected))
    assert response.headers["content-type"] == "video/mp4"


def test_recording_range(client):
    response = client.get("/api/recordings/1", headers={"Range": "bytes=0-9"})
    assert response.status_code == 206
    assert len(response.content) == 10
    assert response.headers["content-range"].startswith("bytes 0-9/")


def test_recording_suffix_and_open_ranges(client, reviewed_store):
    size = len(open(reviewed_store.get_sample(1).recording_path, "rb").read())
    open_ended = client.get("/api/recordings/1", headers={"Range": "bytes=5-"})
    assert open_ended.status_code == 206
    assert len(open_ended.content) == size - 5
    suffix = client.get("/api/recordings/1", headers={"Range": "bytes=-4"})
    assert suffix.status_code == 206
    assert len(suffix.content) == 4


def test_recording_bad_range_416(client):
    assert client.get("/api/recordings/1",
                      headers={"Range": "bytes=99999-"}).status_code == 416
    assert client.get("/api/recordings/1",
                      headers={"Range": "bytes=abc"}).status_code == 416


def test_recording_unknown_sample_404(client):
    assert client.get("/api/recordings/999").status_code == 404


def test_plausibility_report_no_judgments(client):
    response = client.get("/api/reports/plausibility")
    assert response.status_code == 200
    body = response.json()
    assert body["completed"] == 0
    assert body["incomplete"] == 48
    assert all(row["n"] == 0 for row in body["rows"])


def test_plausibility_report_mid_review(client):
    queue = find_queue(client)
    # r1 judges everything; two other reviewers are still missing, so nothing
    # completes; then all three judge the first finding.
    first = queue["items"][0]["finding_key"]
    for reviewer in ("r1", "r2", "r3", "r4", "r5", "r6"):
        response = client.post(
            "/api/judgments",
            headers=auth(reviewer),
            json={"finding_key": first, "issue_plausible": True,
                  "improvement_plausible": True},
        )
        # Only the three assigned reviewers can submit.
        assert response.status_code in (201, 403)
    body = client.get("/api/reports/plausibility").json()
    assert body["completed"] == 1
    assert body["incomplete"] == 47
    all_row = [row for row in body["rows"] if row["label"] == "all"][0]
    assert all_row["n"] == 1
    assert all_row["issue_rate"] == 1.0


def test_verdicts_endpoint_reflects_judgments(client):
    queue = find_queue(client)
    first = queue["items"][0]["finding_key"]
    submitted = 0
    for reviewer in ("r1", "r2", "r3", "r4", "r5", "r6"):
        response = client.post(
            "/api/judgments",
            headers=auth(reviewer),
            json={"finding_key": first, "issue_plausible": reviewer != "r1",
                  "improvement_plausible": True},
        )
        if response.status_code == 201:
            submitted += 1
    assert submitted == 3
    body = client.get("/api/verdicts").json()
    assert len(body["verdicts"]) == 1
    verdict = body["verdicts"][0]
    assert verdict["finding_key"] == first
    assert verdict["improvement_plausible_majority"] is True
    assert verdict["full_agreement_improvement"] is True


def test_service_is_stateless_above_store(reviewed_store):
    tokens = demo_tokens()
    first = TestClient(create_app(reviewed_store.root, tokens))
    queue = first.get("/api/queue", headers=auth()).json()
    first.post("/api/judgments", headers=auth(),
               json={"finding_key": queue["items"][0]["finding_key"],
                     "issue_plausible": True, "improvement_plausible": True})
    # A brand-new app over the same store sees the judgment (read-your-writes).
    second = TestClient(create_app(reviewed_store.root, tokens))
    after = second.get("/api/queue", headers=auth()).json()
    assert after["judged"] == 1


def test_token_table_must_be_injective(tmp_path):
    path = tmp_path / "tokens.json"
    path.write_text(json.dumps({"t1": "r1", "t2": "r1"}))
    with pytest.raises(Exception, match="injective"):
        load_token_table(path)


def test_judgment_store_lock_conflict_409(client, reviewed_store):
    from filelock import FileLock

    queue = find_queue(client)
    first = queue["items"][0]["finding_key"]
    # Hold the single-writer lock from outside the service; the submit
    # times out and surfaces as a retryable conflict.
    lock = FileLock(str(reviewed_store.judgments_path) + ".lock")
    reviewed_store.judgments_path.parent.mkdir(parents=True, exist_ok=True)
    with lock:
        response = client.post(
            "/api/judgments",
            headers=auth(),
            json={"finding_key": first, "issue_plausible": True,
                  "improvement_plausible": True},
        )
    assert response.status_code == 409
    # Once the lock is free the same submission succeeds (client retried).
    retry = client.post(
        "/api/judgments",
        headers=auth(),
        json={"finding_key": first, "issue_plausible": True,
              "improvement_plausible": True},
    )
    assert retry.status_code == 201
