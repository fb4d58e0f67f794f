"""Quality-index fusion: outlier handling, global rescaling, averaging.

Per model and per metric, values more than three scaled median absolute
deviations from the median are replaced by the extrema of the clean values
of that same model; the replaced pool is then min-max rescaled with global
extrema across all models, and the four rescaled metrics are averaged into
one bounded score per image.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcinv

from .errors import (
    AllOutliers,
    DegenerateMetric,
    EmptyInput,
    OutOfRange,
    SchemaError,
    UnknownModel,
)
from .metrics import METRIC_NAMES, MetricVector

# Scale factor making the MAD consistent with the standard deviation of a
# normal distribution: -1 / (sqrt(2) * erfcinv(3/2)) = 1/PPF(3/4) ~= 1.4826.
MAD_SCALE = float(-1.0 / (math.sqrt(2.0) * erfcinv(1.5)))

OUTLIER_MADS = 3.0
N_BINS = 10


def mad(values) -> float:
    """Scaled median absolute deviation from the median."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("mad of an empty sequence")
    return MAD_SCALE * float(np.median(np.abs(arr - np.median(arr))))


def flag_outliers(values) -> np.ndarray:
    """Boolean mask of values strictly more than 3 MADs from the median.

    When the MAD is zero, any value different from the median is flagged.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("flag_outliers of an empty sequence")
    med = np.median(arr)
    m = mad(arr)
    if m == 0.0:
        return arr != med
    return np.abs(arr - med) > OUTLIER_MADS * m


def replace_outliers(values, mask) -> np.ndarray:
    """Replace flagged values by the extrema of the non-flagged ones.

    Values above the median become the clean maximum, values below it the
    clean minimum. Flagged values equal to the median are left unchanged.
    """
    arr = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.all():
        raise AllOutliers("every value is flagged")
    clean = arr[~mask]
    med = np.median(arr)
    out = arr.copy()
    out[mask & (arr > med)] = clean.max()
    out[mask & (arr < med)] = clean.min()
    return out


@dataclass
class MetricTable:
    """Per (model, image) metric vectors; image ids aligned across models."""

    models: list[str]
    image_ids: list[str]
    rows: dict[tuple[str, str], MetricVector]

    def __post_init__(self):
        expect = set(self.image_ids)
        for model in self.models:
            have = {img for (m, img) in self.rows if m == model}
            if have != expect:
                missing = sorted(expect - have) + sorted(have - expect)
                raise SchemaError(
                    f"model {model!r} image ids do not align: {missing[:5]}"
                )

    def metric_values(self, model: str, metric: str) -> np.ndarray:
        """Values of one metric for one model, in image-id order."""
        idx = METRIC_NAMES.index(metric)
        return np.array(
            [self.rows[(model, img)].as_tuple()[idx] for img in self.image_ids]
        )

    def to_csv(self, precision: int | None = 6) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["model", "image_id", *METRIC_NAMES])
        for model in self.models:
            for img in self.image_ids:
                vec = self.rows[(model, img)]
                w.writerow([model, img, *(_fmt(v, precision) for v in vec.as_tuple())])
        return out.getvalue()

    def to_json(self) -> str:
        rows = [
            {"model": model, "image_id": img,
             **dict(zip(METRIC_NAMES, self.rows[(model, img)].as_tuple()))}
            for model in self.models
            for img in self.image_ids
        ]
        return json.dumps(
            {"models": self.models, "image_ids": self.image_ids, "rows": rows},
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricTable":
        try:
            doc = json.loads(text)
            rows = {
                (r["model"], r["image_id"]): MetricVector(
                    *(float(r[m]) for m in METRIC_NAMES)
                )
                for r in doc["rows"]
            }
            return cls(models=list(doc["models"]),
                       image_ids=list(doc["image_ids"]), rows=rows)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad metric table JSON: {exc}") from exc

    @classmethod
    def from_csv(cls, text: str) -> "MetricTable":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty metric table CSV") from None
        if header != ["model", "image_id", *METRIC_NAMES]:
            raise SchemaError(f"bad metric table header: {header}")
        models: list[str] = []
        image_ids: list[str] = []
        rows: dict[tuple[str, str], MetricVector] = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 2 + len(METRIC_NAMES):
                raise SchemaError(f"line {lineno}: expected {2 + len(METRIC_NAMES)} fields")
            model, img = rec[0], rec[1]
            try:
                vec = MetricVector(*(float(x) for x in rec[2:]))
            except ValueError as exc:
                raise SchemaError(f"line {lineno}: {exc}") from exc
            if (model, img) in rows:
                raise SchemaError(f"line {lineno}: duplicate row ({model}, {img})")
            rows[(model, img)] = vec
            if model not in models:
                models.append(model)
            if img not in image_ids:
                image_ids.append(img)
        if not rows:
            raise EmptyInput("metric table CSV has no rows")
        return cls(models=models, image_ids=image_ids, rows=rows)


@dataclass
class QIndexTable:
    """Bounded quality index per (model, image), plus rescaling bookkeeping."""

    models: list[str]
    image_ids: list[str]
    q: dict[tuple[str, str], float]
    global_extrema: dict[str, tuple[float, float]]
    replaced: dict[tuple[str, str], int] = field(default_factory=dict)

    def to_csv(self, precision: int | None = 6) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["model", "image_id", "q"])
        for model in self.models:
            for img in self.image_ids:
                w.writerow([model, img, _fmt(self.q[(model, img)], precision)])
        return out.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "models": self.models,
                "image_ids": self.image_ids,
                "rows": [
                    {"model": m, "image_id": i, "q": self.q[(m, i)]}
                    for m in self.models
                    for i in self.image_ids
                ],
                "global_extrema": {
                    k: list(v) for k, v in sorted(self.global_extrema.items())
                },
                "replaced": [
                    {"model": m, "metric": metric, "count": c}
                    for (m, metric), c in sorted(self.replaced.items())
                ],
            },
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "QIndexTable":
        try:
            doc = json.loads(text)
            return cls(
                models=list(doc["models"]),
                image_ids=list(doc["image_ids"]),
                q={(r["model"], r["image_id"]): float(r["q"]) for r in doc["rows"]},
                global_extrema={
                    k: (float(v[0]), float(v[1]))
                    for k, v in doc["global_extrema"].items()
                },
                replaced={
                    (r["model"], r["metric"]): int(r["count"])
                    for r in doc.get("replaced", [])
                },
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad q-index JSON: {exc}") from exc


@dataclass(frozen=True)
class DeltaRecord:
    image_id: str
    model: str
    delta: float


def compute_qindex(table: MetricTable, extrema_stage: str = "post_replacement") -> QIndexTable:
    """Fuse the four metrics into one bounded index per (model, image).

    Outliers are replaced per model and metric; global extrema per metric
    are pooled across all models (after replacement by default), each value
    is min-max rescaled and clamped, and the four metrics are averaged.
    """
    if not table.rows:
        raise EmptyInput("empty metric table")
    if extrema_stage not in ("post_replacement", "pre_replacement"):
        raise ValueError(f"unknown extrema_stage: {extrema_stage}")

    replaced_counts: dict[tuple[str, str], int] = {}
    rescaled: dict[str, dict[str, np.ndarray]] = {}
    extrema: dict[str, tuple[float, float]] = {}

    for metric in METRIC_NAMES:
        per_model: dict[str, np.ndarray] = {}
        raw_pool, replaced_pool = [], []
        for model in table.models:
            values = table.metric_values(model, metric)
            mask = flag_outliers(values)
            replaced_counts[(model, metric)] = int(mask.sum())
            cleaned = replace_outliers(values, mask)
            per_model[model] = cleaned
            raw_pool.append(values)
            replaced_pool.append(cleaned)

        pool = np.concatenate(
            raw_pool if extrema_stage == "pre_replacement" else replaced_pool
        )
        lo, hi = float(pool.min()), float(pool.max())
        if lo == hi:
            raise DegenerateMetric(f"metric {metric!r} is constant across the pool")
        extrema[metric] = (lo, hi)
        rescaled[metric] = {
            model: np.clip((vals - lo) / (hi - lo), 0.0, 1.0)
            for model, vals in per_model.items()
        }

    q: dict[tuple[str, str], float] = {}
    for model in table.models:
        stacked = np.stack([rescaled[m][model] for m in METRIC_NAMES])
        means = stacked.mean(axis=0)
        for img, val in zip(table.image_ids, means):
            q[(model, img)] = float(val)

    return QIndexTable(
        models=list(table.models),
        image_ids=list(table.image_ids),
        q=q,
        global_extrema=extrema,
        replaced=replaced_counts,
    )


def delta_qindex(qt: QIndexTable, original_model: str) -> list[DeltaRecord]:
    """Per-image change in quality index relative to the original set."""
    if original_model not in qt.models:
        raise UnknownModel(f"model {original_model!r} not in table")
    out = []
    for model in qt.models:
        if model == original_model:
            continue
        for img in qt.image_ids:
            out.append(
                DeltaRecord(
                    image_id=img,
                    model=model,
                    delta=qt.q[(model, img)] - qt.q[(original_model, img)],
                )
            )
    return out


def assign_bins(q: float) -> int:
    """Decile bin of a quality index: [0.0, 0.1) .. [0.9, 1.0]."""
    if not (0.0 <= q <= 1.0) or not math.isfinite(q):
        raise OutOfRange(f"q must be in [0, 1], got {q}")
    return N_BINS - 1 if q == 1.0 else int(math.floor(q * N_BINS))


def sample_bins(qt: QIndexTable, model: str, seed: int) -> list[str | None]:
    """One deterministic representative image id per non-empty decile bin."""
    if model not in qt.models:
        raise UnknownModel(f"model {model!r} not in table")
    binned: list[list[str]] = [[] for _ in range(N_BINS)]
    for img in qt.image_ids:
        binned[assign_bins(qt.q[(model, img)])].append(img)
    picks: list[str | None] = []
    for b, ids in enumerate(binned):
        if not ids:
            picks.append(None)
            continue
        rng = random.Random(f"{seed}:{model}:{b}")
        picks.append(sorted(ids)[rng.randrange(len(ids))])
    return picks


@dataclass(frozen=True)
class DistributionSummary:
    counts: list[int]
    bin_edges: list[float]
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


def distribution_summary(values, bins: int) -> DistributionSummary:
    """Histogram over [min, max] plus the five-number summary."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("distribution of an empty sequence")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(arr.min()), float(arr.max())
    if lo == hi:
        counts, edges = [int(arr.size)], [lo, hi]
    else:
        c, e = np.histogram(arr, bins=bins, range=(lo, hi))
        counts, edges = [int(x) for x in c], [float(x) for x in e]
    q1, med, q3 = (float(np.percentile(arr, p)) for p in (25.0, 50.0, 75.0))
    return DistributionSummary(
        counts=counts, bin_edges=edges,
        minimum=lo, q1=q1, median=med, q3=q3, maximum=hi,
    )


def _fmt(v: float, precision: int | None) -> str:
    return repr(v) if precision is None else f"{v:.{precision}g}"
