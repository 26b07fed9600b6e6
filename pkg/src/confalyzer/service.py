"""HTTP API backing the review UI.

Read endpoints expose each reviewer's pending queue (finding + criterion
text + recording reference), the recordings themselves (with range support
for seeking), and aggregate reports. The single mutation, judgment
submission, funnels through the store's single writer.

Auth is a static bearer-token table mapping token -> reviewer id. The
service holds no state of its own: every response is recomputed from the
store, so restarts change nothing.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .catalog import Catalog, builtin_catalog, load_catalog_document
from .errors import ConfalyzerError
from .findings import Finding
from .reports import round3
from .review import (
    Judgment,
    agreement_summary,
    assignment_from_record,
    judgment_from_record,
    judgment_to_record,
    latest_judgments,
    validate_judgment,
    verdicts,
)
from .store import ResultsStore, StoreLockTimeout

_RANGE = re.compile(r"^bytes=(\d*)-(\d*)$")


class FindingKeyModel(BaseModel):
    run_id: str
    sample_id: int
    criterion_id: str

    def as_tuple(self) -> tuple[str, int, str]:
        return (self.run_id, self.sample_id, self.criterion_id)


class JudgmentBody(BaseModel):
    finding_key: FindingKeyModel
    issue_plausible: bool
    improvement_plausible: bool


def load_token_table(path: str | Path) -> dict[str, str]:
    table = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(table, dict) or not table:
        raise ConfalyzerError(f"token file {path} must map tokens to reviewer ids")
    if len(set(table.values())) != len(table):
        raise ConfalyzerError("token table must be injective: one reviewer per token")
    return table


def create_app(store_root: str | Path, tokens: dict[str, str]) -> FastAPI:
    store = ResultsStore(store_root)
    app = FastAPI(title="confalyzer review service")

    def catalog() -> Catalog:
        snapshot = store.load_catalog_snapshot()
        return load_catalog_document(snapshot) if snapshot else builtin_catalog()

    def reviewer_from_token(authorization: str | None = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        reviewer = tokens.get(authorization.removeprefix("Bearer ").strip())
        if reviewer is None:
            raise HTTPException(status_code=401, detail="invalid token")
        return reviewer

    def findings_by_key() -> dict[tuple[str, int, str], Finding]:
        result: dict[tuple[str, int, str], Finding] = {}
        for run_id in store.list_runs():
            for finding in store.load_findings(run_id):
                result[(run_id, finding.sample_id, finding.criterion_id)] = finding
        return result

    def load_review_state():
        assignments = [assignment_from_record(r) for r in store.load_assignments()]
        judgments = [judgment_from_record(r) for r in store.load_judgments()]
        return assignments, judgments

    @app.get("/api/queue")
    def queue(reviewer: str | None = None, me: str = Depends(reviewer_from_token)):
        assignments, judgments = load_review_state()
        known = set(tokens.values()) | {r for a in assignments for r in a.reviewer_ids}
        if reviewer is None:
            reviewer = me
        if reviewer not in known:
            raise HTTPException(status_code=404, detail=f"unknown reviewer {reviewer!r}")
        if reviewer != me:
            raise HTTPException(status_code=403, detail="token does not match reviewer")

        latest = latest_judgments(judgments)
        mine = [a for a in assignments if reviewer in a.reviewer_ids]
        findings = findings_by_key()
        samples = {s.id: s for s in store.load_samples()} if mine else {}
        cat = catalog()

        pending = [
            a for a in mine if (a.finding_key, reviewer) not in latest
        ]
        items = []
        for position, assignment in enumerate(pending, start=1):
            run_id, sample_id, criterion_id = assignment.finding_key
            finding = findings.get(assignment.finding_key)
            if finding is None:
                continue
            criterion = cat.get(criterion_id)
            sample = samples[sample_id]
            items.append(
                {
                    "finding_key": {
                        "run_id": run_id,
                        "sample_id": sample_id,
                        "criterion_id": criterion_id,
                    },
                    "sample_name": sample.name,
                    "industry": sample.industry,
                    "criterion_id": criterion_id,
                    "criterion_name": criterion.name,
                    "criterion_description": criterion.description,
                    "severity": finding.severity.label,
                    "issue": finding.issue_description,
                    "improvement": finding.improvement_suggestion,
                    "recording_url": f"/api/recordings/{sample_id}",
                    "position": position,
                    "total": len(pending),
                }
            )
        return {
            "schema": 1,
            "reviewer": reviewer,
            "assigned": len(mine),
            "judged": len(mine) - len(pending),
            "items": items,
        }

    @app.get("/api/recordings/{sample_id}")
    def recording(sample_id: int, request: Request):
        try:
            sample = store.get_sample(sample_id)
        except ConfalyzerError:
            raise HTTPException(status_code=404, detail=f"unknown sample {sample_id}") from None
        path = Path(sample.recording_path)
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"recording missing for sample {sample_id}")
        size = path.stat().st_size
        range_header = request.headers.get("range")
        if range_header is None:
            return Response(
                content=path.read_bytes(),
                media_type="video/mp4",
                headers={"Accept-Ranges": "bytes", "Content-Length": str(size)},
            )
        match = _RANGE.match(range_header.strip())
        if not match or (not match.group(1) and not match.group(2)):
            raise HTTPException(status_code=416, detail=f"unsupported range {range_header!r}")
        if match.group(1):
            start = int(match.group(1))
            end = int(match.group(2)) if match.group(2) else size - 1
        else:
            # Suffix range: last N bytes.
            start = max(0, size - int(match.group(2)))
            end = size - 1
        if start >= size or end < start:
            raise HTTPException(status_code=416, detail=f"range {range_header!r} out of bounds")
        end = min(end, size - 1)
        with open(path, "rb") as fh:
            fh.seek(start)
            chunk = fh.read(end - start + 1)
        return Response(
            content=chunk,
            status_code=206,
            media_type="video/mp4",
            headers={
                "Accept-Ranges": "bytes",
                "Content-Range": f"bytes {start}-{end}/{size}",
                "Content-Length": str(len(chunk)),
            },
        )

    @app.post("/api/judgments", status_code=201)
    def submit_judgment(body: JudgmentBody, me: str = Depends(reviewer_from_token)):
        assignments, _ = load_review_state()
        judgment = Judgment(
            finding_key=body.finding_key.as_tuple(),
            reviewer_id=me,
            issue_plausible=body.issue_plausible,
            improvement_plausible=body.improvement_plausible,
        )
        try:
            validate_judgment(judgment, assignments)
        except ConfalyzerError as exc:
            raise HTTPException(status_code=403, detail=str(exc)) from None
        record = judgment_to_record(judgment)
        try:
            store.append_judgment(record, lock_timeout_s=2.0)
        except StoreLockTimeout as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return {"schema": 1, "stored": record}

    @app.get("/api/verdicts")
    def verdicts_endpoint():
        assignments, judgments = load_review_state()
        results, incomplete = verdicts(judgments, assignments)
        return {
            "schema": 1,
            "verdicts": [
                {
                    "finding_key": {
                        "run_id": v.finding_key[0],
                        "sample_id": v.finding_key[1],
                        "criterion_id": v.finding_key[2],
                    },
                    "issue_plausible_majority": v.issue_plausible_majority,
                    "improvement_plausible_majority": v.improvement_plausible_majority,
                    "full_agreement_issue": v.full_agreement_issue,
                    "full_agreement_improvement": v.full_agreement_improvement,
                }
                for v in results
            ],
            "incomplete": len(incomplete),
        }

    @app.get("/api/reports/plausibility")
    def plausibility_report():
        assignments, judgments = load_review_state()
        results, incomplete = verdicts(judgments, assignments)
        empty_rows = [
            {"label": label, "n": 0, "issue_rate": None, "improvement_rate": None}
            for label in ("minor", "major", "all")
        ]
        if not results:
            return {
                "schema": 1,
                "completed": 0,
                "incomplete": len(incomplete),
                "rows": empty_rows,
            }
        findings = list(findings_by_key().values())
        summary = agreement_summary(results, findings)
        rows = []
        for label in ("minor", "major", "all"):
            cell = summary["plausibility"][label]
            rows.append(
                {
                    "label": label,
                    "n": cell["n"],
                    "issue_rate": float(round3(cell["issue_rate"])) if cell["n"] else None,
                    "improvement_rate": (
                        float(round3(cell["improvement_rate"])) if cell["n"] else None
                    ),
                }
            )
        return {
            "schema": 1,
            "completed": len(results),
            "incomplete": len(incomplete),
            "rows": rows,
        }

    @app.exception_handler(ConfalyzerError)
    def domain_error_handler(_request, exc: ConfalyzerError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    return app
