"""Dataset-level statistics and deterministic report export."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .deteval import EvalResult
from .errors import ConstantInput, EmptyInput, IoError, NoOverlap
from .metrics import METRIC_NAMES
from .qindex import DeltaRecord, MetricTable, QIndexTable

CSV_SIG_DIGITS = 6


@dataclass(frozen=True)
class ModelSummary:
    model: str
    # metric -> (mean, population std)
    stats: dict[str, tuple[float, float]]
    count: int


def summarize_models(table: MetricTable) -> list[ModelSummary]:
    """Mean and population standard deviation per model and metric."""
    if not table.rows:
        raise EmptyInput("empty metric table")
    out = []
    for model in table.models:
        stats = {}
        for metric in METRIC_NAMES:
            vals = table.metric_values(model, metric)
            stats[metric] = (float(vals.mean()), float(vals.std()))
        out.append(ModelSummary(model=model, stats=stats, count=len(table.image_ids)))
    return out


def _rank_average_ties(values: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based); tied values share the average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx, dy = x - x.mean(), y - y.mean()
    denom = math.sqrt(float((dx * dx).sum()) * float((dy * dy).sum()))
    return float((dx * dy).sum()) / denom


def correlate(points: list[tuple[float, float]]) -> tuple[float, float]:
    """Pearson r and Spearman rho (average ranks for ties) over n >= 3 pairs."""
    if len(points) < 3:
        raise ValueError(f"need at least 3 points, got {len(points)}")
    x = np.array([p[0] for p in points], dtype=np.float64)
    y = np.array([p[1] for p in points], dtype=np.float64)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ConstantInput("zero variance in x or y")
    pearson = _pearson(x, y)
    spearman = _pearson(_rank_average_ties(x), _rank_average_ties(y))
    return pearson, spearman


@dataclass
class CorrelationResult:
    metric: str
    pearson_r: float | None
    spearman_rho: float | None
    n: int
    # (model, mean metric value, overall mAP)
    scatter: list[tuple[str, float, float]]
    excluded_models: list[str] = field(default_factory=list)
    error: str | None = None


def build_scatter(
    summaries: list[ModelSummary], evals: dict[str, EvalResult]
) -> list[CorrelationResult]:
    """Per metric: (mean metric, overall mAP) scatter with both coefficients.

    Models without an evaluation are listed as excluded. Degenerate inputs
    (too few points, zero variance) are surfaced per metric, not raised.
    """
    by_model = {s.model: s for s in summaries}
    shared = [s.model for s in summaries if s.model in evals]
    if not shared:
        raise NoOverlap("no model id shared between summaries and evaluations")
    excluded = [s.model for s in summaries if s.model not in evals]

    results = []
    for metric in METRIC_NAMES:
        scatter = [
            (m, by_model[m].stats[metric][0], evals[m].overall_map) for m in shared
        ]
        points = [(x, y) for _, x, y in scatter]
        pearson: float | None
        spearman: float | None
        error = None
        try:
            if len(points) < 3:
                raise ValueError(f"need at least 3 points, got {len(points)}")
            pearson, spearman = correlate(points)
        except (ConstantInput, ValueError) as exc:
            pearson = spearman = None
            error = f"{type(exc).__name__}: {exc}"
        results.append(
            CorrelationResult(
                metric=metric,
                pearson_r=pearson,
                spearman_rho=spearman,
                n=len(scatter),
                scatter=scatter,
                excluded_models=excluded,
                error=error,
            )
        )
    return results


# ---------------------------------------------------------------------------
# Export

def _sig(v: float) -> str:
    return f"{v:.{CSV_SIG_DIGITS}g}"


def summaries_to_csv(summaries: list[ModelSummary]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    header = ["model"]
    for m in METRIC_NAMES:
        header += [f"{m}_mean", f"{m}_std"]
    header.append("count")
    w.writerow(header)
    for s in summaries:
        row = [s.model]
        for m in METRIC_NAMES:
            mean, std = s.stats[m]
            row += [_sig(mean), _sig(std)]
        row.append(s.count)
        w.writerow(row)
    return out.getvalue()


def summaries_to_json(summaries: list[ModelSummary]) -> str:
    return json.dumps(
        [
            {"model": s.model, "count": s.count,
             "stats": {m: {"mean": s.stats[m][0], "std": s.stats[m][1]}
                       for m in METRIC_NAMES}}
            for s in summaries
        ],
        indent=2,
    ) + "\n"


def summaries_from_json(text: str) -> list[ModelSummary]:
    doc = json.loads(text)
    return [
        ModelSummary(
            model=rec["model"],
            stats={m: (float(rec["stats"][m]["mean"]), float(rec["stats"][m]["std"]))
                   for m in METRIC_NAMES},
            count=int(rec["count"]),
        )
        for rec in doc
    ]


def deltas_to_csv(deltas: list[DeltaRecord]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["model", "image_id", "delta"])
    for d in deltas:
        w.writerow([d.model, d.image_id, _sig(d.delta)])
    return out.getvalue()


def deltas_to_json(deltas: list[DeltaRecord]) -> str:
    return json.dumps(
        [{"model": d.model, "image_id": d.image_id, "delta": d.delta} for d in deltas],
        indent=2,
    ) + "\n"


def correlations_to_csv(results: list[CorrelationResult]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["metric", "pearson_r", "spearman_rho", "n", "error"])
    for r in results:
        w.writerow([
            r.metric,
            "" if r.pearson_r is None else _sig(r.pearson_r),
            "" if r.spearman_rho is None else _sig(r.spearman_rho),
            r.n,
            r.error or "",
        ])
    return out.getvalue()


def correlations_to_json(results: list[CorrelationResult]) -> str:
    return json.dumps(
        [
            {
                "metric": r.metric,
                "pearson_r": r.pearson_r,
                "spearman_rho": r.spearman_rho,
                "n": r.n,
                "scatter": [
                    {"model": m, "metric_mean": x, "overall_map": y}
                    for m, x, y in r.scatter
                ],
                "excluded_models": r.excluded_models,
                "error": r.error,
            }
            for r in results
        ],
        indent=2,
    ) + "\n"


@dataclass
class ReportArtifact:
    """One named export: a base file name plus its rendered contents."""

    name: str
    files: dict[str, str]  # file name -> text content
    rows: int


def artifact_metric_table(table: MetricTable) -> ReportArtifact:
    return ReportArtifact(
        name="metrics",
        files={"metrics.csv": table.to_csv(), "metrics.json": table.to_json()},
        rows=len(table.rows),
    )


def artifact_qindex(qt: QIndexTable) -> ReportArtifact:
    return ReportArtifact(
        name="qindex",
        files={"qindex.csv": qt.to_csv(), "qindex.json": qt.to_json()},
        rows=len(qt.q),
    )


def artifact_deltas(deltas: list[DeltaRecord]) -> ReportArtifact:
    return ReportArtifact(
        name="deltas",
        files={"deltas.csv": deltas_to_csv(deltas),
               "deltas.json": deltas_to_json(deltas)},
        rows=len(deltas),
    )


def artifact_summaries(summaries: list[ModelSummary]) -> ReportArtifact:
    return ReportArtifact(
        name="summaries",
        files={"summaries.csv": summaries_to_csv(summaries),
               "summaries.json": summaries_to_json(summaries)},
        rows=len(summaries),
    )


def artifact_correlations(results: list[CorrelationResult]) -> ReportArtifact:
    return ReportArtifact(
        name="correlations",
        files={"correlations.csv": correlations_to_csv(results),
               "correlations.json": correlations_to_json(results)},
        rows=len(results),
    )


def export_report(artifacts: list[ReportArtifact], dest) -> dict:
    """Write every artifact as CSV + JSON plus a manifest with content hashes.

    Deterministic: identical inputs produce byte-identical files.
    """
    dest = Path(dest)
    try:
        dest.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {dest}: {exc}") from exc

    entries = []
    for art in artifacts:
        for fname in sorted(art.files):
            content = art.files[fname]
            path = dest / fname
            try:
                path.write_text(content, encoding="utf-8")
            except OSError as exc:
                raise IoError(f"cannot write {path}: {exc}") from exc
            entries.append(
                {
                    "file": fname,
                    "artifact": art.name,
                    "rows": art.rows,
                    "sha256": hashlib.sha256(content.encode("utf-8")).hexdigest(),
                }
            )
    manifest = {"entries": sorted(entries, key=lambda e: e["file"])}
    text = json.dumps(manifest, indent=2) + "\n"
    try:
        (dest / "report.manifest.json").write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write manifest: {exc}") from exc
    return manifest
