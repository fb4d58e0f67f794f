"""COCO-style detection evaluation and annotation-audit mining.

Average precision uses 101-point recall interpolation over the IoU
threshold grid 0.50:0.05:0.95; matching is greedy in confidence order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import MixedImage, SchemaError, UnknownClass

IOU_THRESHOLDS = tuple(t / 100.0 for t in range(50, 100, 5))
RECALL_POINTS = tuple(i / 100.0 for i in range(101))


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must have positive area: {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def translate(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy,
                           self.x_max + dx, self.y_max + dy)


@dataclass(frozen=True)
class Annotation:
    image_id: str
    class_id: str
    box: BoundingBox


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_id: str
    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 for disjoint boxes."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def match_detections(
    dets: list[Detection], gts: list[Annotation], t: float
) -> tuple[list[bool], int]:
    """Greedy per-class matching on one image.

    Detections are taken in descending confidence (ties keep input order);
    each matches the unmatched same-class ground truth with the highest
    IoU >= t. Returns TP/FP labels in input order and the FN count.
    """
    ids = {d.image_id for d in dets} | {g.image_id for g in gts}
    if len(ids) > 1:
        raise MixedImage(f"records span several images: {sorted(ids)}")

    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    gt_taken = [False] * len(gts)
    labels = [False] * len(dets)
    for i in order:
        det = dets[i]
        best_j, best_iou = -1, 0.0
        for j, gt in enumerate(gts):
            if gt_taken[j] or gt.class_id != det.class_id:
                continue
            v = iou(det.box, gt.box)
            if v >= t and v > best_iou:
                best_j, best_iou = j, v
        if best_j >= 0:
            gt_taken[best_j] = True
            labels[i] = True
    return labels, gt_taken.count(False)


def average_precision(labels: list[bool], gt_count: int) -> float | None:
    """101-point interpolated AP from confidence-ordered TP/FP labels.

    Returns None (skip signal) when there is nothing to score: no ground
    truth and no detections.
    """
    if gt_count < 0:
        raise ValueError("gt_count must be >= 0")
    if gt_count == 0:
        return None if not labels else 0.0
    if not labels:
        return 0.0

    tp = 0
    precisions, recalls = [], []
    for i, is_tp in enumerate(labels):
        tp += int(is_tp)
        precisions.append(tp / (i + 1))
        recalls.append(tp / gt_count)

    # Monotone-decreasing envelope, right to left.
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])

    total, j = 0.0, 0
    for r in RECALL_POINTS:
        while j < len(recalls) and recalls[j] < r:
            j += 1
        total += precisions[j] if j < len(recalls) else 0.0
    return total / len(RECALL_POINTS)


@dataclass
class EvalResult:
    class_list: list[str]
    # class -> threshold -> AP (classes with nothing to score are omitted)
    ap: dict[str, dict[float, float]]
    per_class_map: dict[str, float]
    overall_map: float
    tp: int
    fp: int
    fn: int
    skipped_classes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "class_list": self.class_list,
                "ap": {
                    c: {f"{t:.2f}": v for t, v in sorted(threshs.items())}
                    for c, threshs in sorted(self.ap.items())
                },
                "per_class_map": dict(sorted(self.per_class_map.items())),
                "overall_map": self.overall_map,
                "counts_iou50": {"tp": self.tp, "fp": self.fp, "fn": self.fn},
                "skipped_classes": self.skipped_classes,
            },
            indent=2,
        ) + "\n"


def map_50_95(
    dets: list[Detection], gts: list[Annotation], class_list: list[str]
) -> EvalResult:
    """AP per class over the 10-threshold grid, then class-mean overall.

    The overall mean covers classes with at least one ground-truth
    instance; classes with detections but no ground truth are reported
    with AP 0 and classes with neither are skipped.
    """
    declared = set(class_list)
    for rec in (*dets, *gts):
        if rec.class_id not in declared:
            raise UnknownClass(f"undeclared class {rec.class_id!r}")

    image_ids = sorted({r.image_id for r in (*dets, *gts)})
    dets_by_image: dict[str, list[tuple[int, Detection]]] = {i: [] for i in image_ids}
    gts_by_image: dict[str, list[Annotation]] = {i: [] for i in image_ids}
    for order, d in enumerate(dets):
        dets_by_image[d.image_id].append((order, d))
    for g in gts:
        gts_by_image[g.image_id].append(g)

    gt_count = {c: sum(1 for g in gts if g.class_id == c) for c in class_list}
    det_count = {c: sum(1 for d in dets if d.class_id == c) for c in class_list}

    ap: dict[str, dict[float, float]] = {}
    tp50 = fp50 = fn50 = 0
    for t in IOU_THRESHOLDS:
        # class -> [(confidence, global order, tp)]
        pooled: dict[str, list[tuple[float, int, bool]]] = {c: [] for c in class_list}
        for img in image_ids:
            entries = dets_by_image[img]
            labels, fn = match_detections([d for _, d in entries], gts_by_image[img], t)
            if t == IOU_THRESHOLDS[0]:
                tp50 += sum(labels)
                fp50 += len(labels) - sum(labels)
                fn50 += fn
            for (order, d), is_tp in zip(entries, labels):
                pooled[d.class_id].append((d.confidence, order, is_tp))
        for c in class_list:
            ordered = sorted(pooled[c], key=lambda e: (-e[0], e[1]))
            value = average_precision([tp for _, _, tp in ordered], gt_count[c])
            if value is not None:
                ap.setdefault(c, {})[t] = value

    skipped = [c for c in class_list if gt_count[c] == 0 and det_count[c] == 0]
    per_class = {
        c: sum(threshs.values()) / len(threshs) for c, threshs in ap.items()
    }
    scored = [per_class[c] for c in class_list if gt_count[c] > 0]
    overall = sum(scored) / len(scored) if scored else 0.0
    return EvalResult(
        class_list=list(class_list),
        ap=ap,
        per_class_map=per_class,
        overall_map=overall,
        tp=tp50,
        fp=fp50,
        fn=fn50,
        skipped_classes=skipped,
    )


@dataclass
class AuditCandidate:
    """A confident detection cluster unmatched by any ground-truth box."""

    candidate_id: str
    image_id: str
    model: str
    detection: Detection
    best_iou: float
    agreement: int
    members: list[dict]
    status: str = "pending"

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "image_id": self.image_id,
            "model": self.model,
            "class_id": self.detection.class_id,
            "box": self.detection.box.as_list(),
            "confidence": self.detection.confidence,
            "best_iou": self.best_iou,
            "agreement": self.agreement,
            "members": self.members,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AuditCandidate":
        try:
            det = Detection(
                image_id=doc["image_id"],
                class_id=doc["class_id"],
                box=BoundingBox(*doc["box"]),
                confidence=float(doc["confidence"]),
            )
            return cls(
                candidate_id=doc["candidate_id"],
                image_id=doc["image_id"],
                model=doc["model"],
                detection=det,
                best_iou=float(doc["best_iou"]),
                agreement=int(doc["agreement"]),
                members=list(doc.get("members", [])),
                status=doc.get("status", "pending"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad audit candidate: {exc}") from exc


def mine_audit_candidates(
    dets_by_model: dict[str, list[Detection]],
    gts: list[Annotation],
    conf_min: float = 0.5,
    iou_max: float = 0.5,
    cluster_iou: float = 0.5,
) -> list[AuditCandidate]:
    """Confident detections whose IoU with every same-class GT stays below
    iou_max, clustered across models by single-link IoU grouping.

    Each cluster yields one candidate: its highest-confidence member, with
    the number of distinct agreeing models as the ranking signal.
    """
    gts_by_image: dict[str, list[Annotation]] = {}
    for g in gts:
        gts_by_image.setdefault(g.image_id, []).append(g)

    # (image, class) -> [(model, detection, best iou vs gt)]
    groups: dict[tuple[str, str], list[tuple[str, Detection, float]]] = {}
    for model in sorted(dets_by_model):
        for det in dets_by_model[model]:
            if det.confidence < conf_min:
                continue
            best = 0.0
            for g in gts_by_image.get(det.image_id, []):
                if g.class_id == det.class_id:
                    best = max(best, iou(det.box, g.box))
            if best < iou_max:
                groups.setdefault((det.image_id, det.class_id), []).append(
                    (model, det, best)
                )

    candidates = []
    for (image_id, class_id) in sorted(groups):
        members = groups[(image_id, class_id)]
        parent = list(range(len(members)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                if iou(members[i][1].box, members[j][1].box) >= cluster_iou:
                    parent[find(i)] = find(j)

        clusters: dict[int, list[tuple[str, Detection, float]]] = {}
        for i, m in enumerate(members):
            clusters.setdefault(find(i), []).append(m)

        for root in sorted(clusters):
            cluster = clusters[root]
            rep = max(cluster, key=lambda m: (m[1].confidence, m[0]))
            candidates.append(
                AuditCandidate(
                    candidate_id="",
                    image_id=image_id,
                    model=rep[0],
                    detection=rep[1],
                    best_iou=rep[2],
                    agreement=len({m[0] for m in cluster}),
                    members=[
                        {
                            "model": m[0],
                            "box": m[1].box.as_list(),
                            "confidence": m[1].confidence,
                            "best_iou": m[2],
                        }
                        for m in sorted(cluster, key=lambda m: (-m[1].confidence, m[0]))
                    ],
                )
            )

    candidates.sort(
        key=lambda c: (-c.agreement, -c.detection.confidence, c.image_id,
                       c.detection.class_id)
    )
    return [
        replace(c, candidate_id=f"cand-{i:04d}") for i, c in enumerate(candidates)
    ]


# ---------------------------------------------------------------------------
# JSON ingestion

def _parse_box(raw, box_format: str, where: str) -> BoundingBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise SchemaError(f"{where}: box must be a list of four numbers")
    try:
        a, b, c, d = (float(x) for x in raw)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: non-numeric box value") from exc
    if box_format == "xywh":
        c, d = a + c, b + d
    elif box_format != "xyxy":
        raise SchemaError(f"unknown box format {box_format!r}")
    try:
        return BoundingBox(a, b, c, d)
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


@dataclass
class GroundTruth:
    images: list[dict]
    annotations: list[Annotation]
    classes: list[str]

    def image_ids(self) -> set[str]:
        return {img["id"] for img in self.images}

    def to_json(self) -> str:
        return json.dumps(
            {
                "classes": self.classes,
                "images": self.images,
                "annotations": [
                    {"image_id": a.image_id, "class_id": a.class_id,
                     "box": a.box.as_list()}
                    for a in self.annotations
                ],
            },
            indent=2,
        ) + "\n"


def load_ground_truth(text: str, box_format: str = "xyxy") -> GroundTruth:
    """Parse the ground-truth JSON schema (images + annotations + classes)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"ground truth is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "images" not in doc or "annotations" not in doc:
        raise SchemaError("ground truth must contain 'images' and 'annotations'")

    images = []
    for i, img in enumerate(doc["images"]):
        for key in ("id", "width", "height", "file_name"):
            if key not in img:
                raise SchemaError(f"images[{i}]: missing {key!r}")
        images.append(
            {"id": str(img["id"]), "width": int(img["width"]),
             "height": int(img["height"]), "file_name": str(img["file_name"])}
        )
    known = {img["id"] for img in images}

    annotations = []
    for i, rec in enumerate(doc["annotations"]):
        where = f"annotations[{i}]"
        for key in ("image_id", "class_id", "box"):
            if key not in rec:
                raise SchemaError(f"{where}: missing {key!r}")
        image_id = str(rec["image_id"])
        if image_id not in known:
            raise SchemaError(f"{where}: unknown image id {image_id!r}")
        annotations.append(
            Annotation(
                image_id=image_id,
                class_id=str(rec["class_id"]),
                box=_parse_box(rec["box"], box_format, where),
            )
        )

    classes = [str(c) for c in doc.get("classes", [])]
    if not classes:
        classes = sorted({a.class_id for a in annotations})
    return GroundTruth(images=images, annotations=annotations, classes=classes)


def load_detections(
    text: str,
    box_format: str = "xyxy",
    known_images: set[str] | None = None,
) -> tuple[str | None, list[Detection]]:
    """Parse a detections JSON file; returns (model id or None, detections)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"detections file is not valid JSON: {exc}") from exc
    if isinstance(doc, list):
        doc = {"detections": doc}
    if not isinstance(doc, dict) or "detections" not in doc:
        raise SchemaError("detections file must contain 'detections'")

    model = doc.get("model")
    out = []
    for i, rec in enumerate(doc["detections"]):
        where = f"detections[{i}]"
        for key in ("image_id", "class_id", "box", "confidence"):
            if key not in rec:
                raise SchemaError(f"{where}: missing {key!r}")
        image_id = str(rec["image_id"])
        if known_images is not None and image_id not in known_images:
            raise SchemaError(f"{where}: unknown image id {image_id!r}")
        try:
            conf = float(rec["confidence"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: bad confidence") from exc
        try:
            det = Detection(
                image_id=image_id,
                class_id=str(rec["class_id"]),
                box=_parse_box(rec["box"], box_format, where),
                confidence=conf,
            )
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        out.append(det)
    return (str(model) if model is not None else None), out
