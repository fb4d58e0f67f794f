"""HTTP review service for the annotation-audit workflow.

Verdicts persist to an append-only JSONL log; restarting the service
replays the log to rebuild state. All mutation goes through POST
/api/verdicts, serialized by a single writer lock.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .deteval import AuditCandidate, BoundingBox, GroundTruth, load_ground_truth
from .errors import SchemaError
from .layout import DatasetLayout

DECISIONS = ("accepted", "rejected")
_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}


def load_candidates_file(text: str) -> list[AuditCandidate]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"candidate file is not valid JSON: {exc}") from exc
    if isinstance(doc, dict):
        doc = doc.get("candidates", [])
    return [AuditCandidate.from_dict(rec) for rec in doc]


def candidates_to_json(candidates: list[AuditCandidate]) -> str:
    return json.dumps(
        {"candidates": [c.to_dict() for c in candidates]}, indent=2
    ) + "\n"


class VerdictStore:
    """In-memory verdict state backed by an append-only JSONL log."""

    def __init__(self, log_path: Path, candidates: list[AuditCandidate]):
        self.log_path = Path(log_path)
        self.candidates = {c.candidate_id: c for c in candidates}
        # (candidate, annotator) -> latest verdict dict
        self.by_key: dict[tuple[str, str], dict] = {}
        # candidate -> latest verdict dict overall (log order wins ties)
        self.latest: dict[str, dict] = {}
        self.lock = threading.Lock()
        self._replay()

    def _replay(self):
        if not self.log_path.exists():
            return
        with self.log_path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(
                        f"{self.log_path}:{lineno}: bad verdict line: {exc}"
                    ) from exc
                self._apply(rec)

    def _apply(self, rec: dict):
        self.by_key[(rec["candidate_id"], rec["annotator"])] = rec
        self.latest[rec["candidate_id"]] = rec

    def status_of(self, candidate_id: str) -> str:
        rec = self.latest.get(candidate_id)
        return rec["decision"] if rec else "pending"

    def append(self, rec: dict):
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self._apply(rec)

    def progress(self) -> dict:
        counts = {"pending": 0, "accepted": 0, "rejected": 0}
        by_model: dict[str, dict] = {}
        for cid, cand in self.candidates.items():
            status = self.status_of(cid)
            counts[status] += 1
            slot = by_model.setdefault(
                cand.model, {"pending": 0, "accepted": 0, "rejected": 0}
            )
            slot[status] += 1
        return {**counts, "total": len(self.candidates),
                "by_model": dict(sorted(by_model.items()))}

    def accepted_annotations(self) -> list[dict]:
        """One annotation per candidate whose latest verdict is an accept."""
        out = []
        for cid in sorted(self.candidates):
            rec = self.latest.get(cid)
            if rec and rec["decision"] == "accepted":
                out.append(
                    {
                        "image_id": self.candidates[cid].image_id,
                        "class_id": rec["annotation"]["class_id"],
                        "box": rec["annotation"]["box"],
                        "source_candidate": cid,
                    }
                )
        return out


def _validate_annotation(raw, cand: AuditCandidate) -> dict:
    if raw is None:
        return {
            "class_id": cand.detection.class_id,
            "box": cand.detection.box.as_list(),
        }
    if not isinstance(raw, dict) or "class_id" not in raw or "box" not in raw:
        raise ValueError("annotation must carry class_id and box")
    box = raw["box"]
    if not isinstance(box, list) or len(box) != 4:
        raise ValueError("annotation box must be four numbers")
    BoundingBox(*(float(v) for v in box))  # enforce positive area
    return {"class_id": str(raw["class_id"]), "box": [float(v) for v in box]}


def create_app(
    layout: DatasetLayout | None,
    candidates: list[AuditCandidate],
    verdict_log: Path,
    ground_truth: GroundTruth | None = None,
    ui_dir: Path | None = None,
) -> FastAPI:
    app = FastAPI(title="uwqa annotation review")
    store = VerdictStore(Path(verdict_log), candidates)
    app.state.store = store

    @app.get("/api/candidates")
    def list_candidates(status: str | None = None, page: int = 1, page_size: int = 20):
        if status is not None and status not in ("pending", *DECISIONS):
            raise HTTPException(400, f"unknown status filter {status!r}")
        if page < 1 or page_size < 1:
            raise HTTPException(400, "page and page_size must be >= 1")
        with store.lock:
            rows = [
                {**c.to_dict(), "status": store.status_of(cid)}
                for cid, c in store.candidates.items()
            ]
        rows.sort(key=lambda r: (-r["agreement"], -r["confidence"], r["candidate_id"]))
        if status is not None:
            rows = [r for r in rows if r["status"] == status]
        total = len(rows)
        start = (page - 1) * page_size
        return {
            "candidates": rows[start:start + page_size],
            "page": page,
            "page_size": page_size,
            "total": total,
            "total_pages": (total + page_size - 1) // page_size,
        }

    @app.get("/api/images/{model}/{image_id}")
    def get_image(model: str, image_id: str):
        if layout is None:
            raise HTTPException(404, "no image layout configured")
        path = layout.path(model, image_id)
        if path is None or not path.is_file():
            raise HTTPException(404, f"no image {image_id!r} for model {model!r}")
        media = _MEDIA_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return FileResponse(path, media_type=media)

    @app.post("/api/verdicts")
    async def post_verdict(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise HTTPException(400, "body must be JSON") from None
        if not isinstance(body, dict):
            raise HTTPException(400, "body must be a JSON object")

        candidate_id = body.get("candidate_id")
        decision = body.get("decision")
        annotator = body.get("annotator")
        supersede = bool(body.get("supersede", False))
        if not isinstance(candidate_id, str) or not candidate_id:
            raise HTTPException(400, "candidate_id is required")
        if decision not in DECISIONS:
            raise HTTPException(400, f"decision must be one of {DECISIONS}")
        if not isinstance(annotator, str) or not annotator:
            raise HTTPException(400, "annotator is required")

        with store.lock:
            cand = store.candidates.get(candidate_id)
            if cand is None:
                raise HTTPException(404, f"unknown candidate {candidate_id!r}")
            try:
                annotation = (
                    _validate_annotation(body.get("annotation"), cand)
                    if decision == "accepted"
                    else None
                )
            except (TypeError, ValueError) as exc:
                raise HTTPException(400, f"bad annotation: {exc}") from None

            existing = store.by_key.get((candidate_id, annotator))
            if existing is not None:
                if existing["decision"] == decision and not supersede:
                    return JSONResponse({"verdict": existing, "duplicate": True})
                if existing["decision"] != decision and not supersede:
                    raise HTTPException(
                        409,
                        f"candidate {candidate_id!r} already decided "
                        f"{existing['decision']!r} by {annotator!r}; "
                        "pass supersede to overrule",
                    )
            rec = {
                "candidate_id": candidate_id,
                "decision": decision,
                "annotator": annotator,
                "timestamp": int(time.time()),
                "annotation": annotation,
            }
            store.append(rec)
        return JSONResponse({"verdict": rec, "duplicate": False}, status_code=201)

    @app.get("/api/progress")
    def progress():
        with store.lock:
            return store.progress()

    @app.get("/api/export/corrected-gt")
    def corrected_gt():
        if ground_truth is None:
            raise HTTPException(404, "no ground truth configured")
        with store.lock:
            added = store.accepted_annotations()
        return {
            "classes": ground_truth.classes,
            "images": ground_truth.images,
            "annotations": [
                {"image_id": a.image_id, "class_id": a.class_id,
                 "box": a.box.as_list()}
                for a in ground_truth.annotations
            ] + added,
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def build_app_from_paths(
    layout_root=None,
    candidates_path=None,
    verdict_log="verdicts.jsonl",
    gt_path=None,
    ui_dir=None,
) -> FastAPI:
    from .layout import scan_layout

    layout = scan_layout(layout_root) if layout_root else None
    candidates = (
        load_candidates_file(Path(candidates_path).read_text(encoding="utf-8"))
        if candidates_path
        else []
    )
    gt = (
        load_ground_truth(Path(gt_path).read_text(encoding="utf-8"))
        if gt_path
        else None
    )
    return create_app(
        layout=layout,
        candidates=candidates,
        verdict_log=Path(verdict_log),
        ground_truth=gt,
        ui_dir=Path(ui_dir) if ui_dir else None,
    )
