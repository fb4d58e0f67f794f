"""Command-line entry point: uwqa metrics|qindex|map|correlate|audit|serve.

Exit codes: 0 success, 1 usage or contract error, 2 partial failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import deteval, report
from .config import load_config
from .errors import SchemaError, UnknownModel, UwqaError
from .image import decode_image
from .layout import ORIGINAL_MODEL, DatasetLayout, scan_layout
from .metrics import METRIC_NAMES, MetricVector, metric_vector
from .qindex import (
    MetricTable,
    QIndexTable,
    compute_qindex,
    delta_qindex,
    distribution_summary,
    sample_bins,
)

log = logging.getLogger("uwqa")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def _read(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"file not found: {p}")
    return p.read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# metrics

def _score_one(layout: DatasetLayout, model: str, image_id: str, cfg):
    data = layout.path(model, image_id).read_bytes()
    return metric_vector(decode_image(data), cfg)


def cmd_metrics(args) -> int:
    cfg = load_config(args.config)
    layout = scan_layout(args.layout)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store_path = out / "metrics.json"
    manifest_path = out / "metrics.manifest.json"

    rows: dict[tuple[str, str], MetricVector] = {}
    if store_path.is_file():
        doc = json.loads(store_path.read_text(encoding="utf-8"))
        for rec in doc.get("rows", []):
            rows[(rec["model"], rec["image_id"])] = MetricVector(
                *(float(rec[m]) for m in METRIC_NAMES)
            )

    todo = [
        (model, image_id)
        for model in layout.models
        for image_id in layout.image_ids
        if (model, image_id) not in rows
    ]
    log.info("scoring %d images (%d already done)", len(todo), len(rows))

    failures: dict[str, str] = {}

    def work(key):
        model, image_id = key
        try:
            return key, _score_one(layout, model, image_id, cfg), None
        except UwqaError as exc:
            return key, None, str(exc)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, todo))
    else:
        results = [work(key) for key in todo]

    for key, vec, err in results:
        if err is None:
            rows[key] = vec
        else:
            failures["/".join(key)] = err
            log.warning("failed %s/%s: %s", key[0], key[1], err)

    ordered = [
        {"model": m, "image_id": i, **dict(zip(METRIC_NAMES, rows[(m, i)].as_tuple()))}
        for m in layout.models
        for i in layout.image_ids
        if (m, i) in rows
    ]
    store_path.write_text(
        json.dumps(
            {"models": layout.models, "image_ids": layout.image_ids, "rows": ordered},
            indent=2,
        ) + "\n",
        encoding="utf-8",
    )
    manifest_path.write_text(
        json.dumps(
            {
                "scored": sorted("/".join(k) for k in rows),
                "failed": dict(sorted(failures.items())),
                "new_computations": len(todo),
            },
            indent=2,
        ) + "\n",
        encoding="utf-8",
    )

    if not failures:
        table = MetricTable(
            models=layout.models, image_ids=layout.image_ids, rows=rows
        )
        artifacts = [
            report.artifact_metric_table(table),
            report.artifact_summaries(report.summarize_models(table)),
        ]
        report.export_report(artifacts, out)
        print(f"scored {len(rows)} rows ({len(todo)} new), 0 failures")
        return EXIT_OK
    print(f"scored {len(rows)} rows, {len(failures)} failures (see manifest)")
    return EXIT_PARTIAL


# ---------------------------------------------------------------------------
# qindex

def load_metric_table(path) -> MetricTable:
    text = _read(path)
    if str(path).endswith(".csv"):
        return MetricTable.from_csv(text)
    return MetricTable.from_json(text)


def cmd_qindex(args) -> int:
    cfg = load_config(args.config)
    table = load_metric_table(args.table)
    if ORIGINAL_MODEL not in table.models:
        raise UnknownModel(
            f"metric table must contain the reserved model id {ORIGINAL_MODEL!r}"
        )
    qt = compute_qindex(table, extrema_stage=cfg.extrema_stage)
    deltas = delta_qindex(qt, ORIGINAL_MODEL)
    seed = args.seed if args.seed is not None else cfg.seed

    bins_rows = []
    dist_rows = []
    for model in qt.models:
        picks = sample_bins(qt, model, seed)
        for b, image_id in enumerate(picks):
            bins_rows.append({"model": model, "bin": b, "image_id": image_id})
        values = [qt.q[(model, i)] for i in qt.image_ids]
        d = distribution_summary(values, bins=10)
        dist_rows.append(
            {
                "model": model,
                "min": d.minimum, "q1": d.q1, "median": d.median,
                "q3": d.q3, "max": d.maximum,
                "counts": d.counts, "bin_edges": d.bin_edges,
            }
        )

    bins_csv = "model,bin,image_id\n" + "".join(
        f"{r['model']},{r['bin']},{r['image_id'] or ''}\n" for r in bins_rows
    )
    dist_csv = "model,min,q1,median,q3,max\n" + "".join(
        "{model},{min:.6g},{q1:.6g},{median:.6g},{q3:.6g},{max:.6g}\n".format(**r)
        for r in dist_rows
    )
    artifacts = [
        report.artifact_qindex(qt),
        report.artifact_deltas(deltas),
        report.ReportArtifact(
            name="bins",
            files={"bins.csv": bins_csv,
                   "bins.json": json.dumps(bins_rows, indent=2) + "\n"},
            rows=len(bins_rows),
        ),
        report.ReportArtifact(
            name="distribution",
            files={"distribution.csv": dist_csv,
                   "distribution.json": json.dumps(dist_rows, indent=2) + "\n"},
            rows=len(dist_rows),
        ),
    ]
    report.export_report(artifacts, args.out)
    print(f"q-index for {len(qt.models)} models x {len(qt.image_ids)} images")
    return EXIT_OK


# ---------------------------------------------------------------------------
# map

def _load_det_files(paths, box_format, known_images):
    """Returns {model: detections}; model falls back to the file stem."""
    out = {}
    for path in paths:
        model, dets = deteval.load_detections(
            _read(path), box_format=box_format, known_images=known_images
        )
        model = model or Path(path).stem
        if model in out:
            raise SchemaError(f"duplicate model id {model!r} in detection inputs")
        out[model] = dets
    return out


def eval_result_to_dict(res: deteval.EvalResult) -> dict:
    return json.loads(res.to_json())


def eval_results_to_csv(results: dict[str, deteval.EvalResult], classes) -> str:
    lines = ["model," + ",".join(classes) + ",overall"]
    for model in results:
        res = results[model]
        cells = [f"{res.per_class_map[c]:.6g}" if c in res.per_class_map else ""
                 for c in classes]
        lines.append(f"{model}," + ",".join(cells) + f",{res.overall_map:.6g}")
    return "\n".join(lines) + "\n"


def cmd_map(args) -> int:
    gt = deteval.load_ground_truth(_read(args.gt), box_format=args.box_format)
    classes = args.classes.split(",") if args.classes else gt.classes
    det_files = _load_det_files(args.det, args.box_format, gt.image_ids())
    results = {
        model: deteval.map_50_95(dets, gt.annotations, classes)
        for model, dets in det_files.items()
    }
    payload = {
        "classes": classes,
        "models": {m: eval_result_to_dict(r) for m, r in results.items()},
    }
    art = report.ReportArtifact(
        name="map",
        files={
            "map.json": json.dumps(payload, indent=2) + "\n",
            "map.csv": eval_results_to_csv(results, classes),
        },
        rows=len(results),
    )
    report.export_report([art], args.out)
    for model, res in results.items():
        print(f"{model}: overall mAP50:95 = {res.overall_map:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# correlate

def _load_summaries(path) -> list[report.ModelSummary]:
    text = _read(path)
    doc = json.loads(text)
    if isinstance(doc, list):
        seen = set()
        for rec in doc:
            if rec["model"] in seen:
                raise SchemaError(f"duplicate model id {rec['model']!r} in summaries")
            seen.add(rec["model"])
        return report.summaries_from_json(text)
    return report.summarize_models(MetricTable.from_json(text))


def _load_evals(path) -> dict[str, deteval.EvalResult]:
    doc = json.loads(_read(path))
    if "models" not in doc:
        raise SchemaError("evaluation file must carry a 'models' mapping")
    out = {}
    for model, rec in doc["models"].items():
        out[model] = deteval.EvalResult(
            class_list=rec["class_list"],
            ap={c: {float(t): v for t, v in threshs.items()}
                for c, threshs in rec["ap"].items()},
            per_class_map=rec["per_class_map"],
            overall_map=float(rec["overall_map"]),
            tp=rec["counts_iou50"]["tp"],
            fp=rec["counts_iou50"]["fp"],
            fn=rec["counts_iou50"]["fn"],
            skipped_classes=rec.get("skipped_classes", []),
        )
    return out


def cmd_correlate(args) -> int:
    summaries = _load_summaries(args.summaries)
    evals = _load_evals(args.evals)
    results = report.build_scatter(summaries, evals)
    report.export_report([report.artifact_correlations(results)], args.out)
    for r in results:
        if r.error:
            print(f"{r.metric}: n={r.n} ({r.error})")
        else:
            print(f"{r.metric}: n={r.n} pearson={r.pearson_r:.4f} "
                  f"spearman={r.spearman_rho:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# audit

def cmd_audit(args) -> int:
    from .service import candidates_to_json

    gt = deteval.load_ground_truth(_read(args.gt), box_format=args.box_format)
    det_files = _load_det_files(args.det, args.box_format, gt.image_ids())
    candidates = deteval.mine_audit_candidates(
        det_files, gt.annotations, conf_min=args.conf_min, iou_max=args.iou_max
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "candidates.json").write_text(candidates_to_json(candidates),
                                         encoding="utf-8")
    print(f"{len(candidates)} audit candidates")
    return EXIT_OK


# ---------------------------------------------------------------------------
# serve

def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app_from_paths

    app = build_app_from_paths(
        layout_root=args.layout,
        candidates_path=args.candidates,
        verdict_log=args.verdict_log,
        gt_path=args.gt,
        ui_dir=args.ui_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwqa",
        description="Underwater image-quality and detection-evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="metric config file")
        p.add_argument("--seed", type=int, default=None, help="sampling seed")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("metrics", help="score every (model, image) in a layout")
    common(p)
    p.add_argument("--layout", required=True, help="dataset root directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("qindex", help="fuse a metric table into quality indices")
    common(p)
    p.add_argument("--table", required=True, help="metric table (json or csv)")
    p.set_defaults(fn=cmd_qindex)

    p = sub.add_parser("map", help="COCO-style mAP50:95 evaluation")
    common(p)
    p.add_argument("--gt", required=True, help="ground-truth JSON")
    p.add_argument("--det", required=True, action="append",
                   help="detections JSON (repeatable, one per model)")
    p.add_argument("--classes", default=None, help="comma-separated class list")
    p.add_argument("--box-format", choices=("xyxy", "xywh"), default="xyxy")
    p.set_defaults(fn=cmd_map)

    p = sub.add_parser("correlate", help="metric-vs-mAP correlation")
    common(p)
    p.add_argument("--summaries", required=True,
                   help="summaries JSON or metric table JSON")
    p.add_argument("--evals", required=True, help="map.json from the map command")
    p.set_defaults(fn=cmd_correlate)

    p = sub.add_parser("audit", help="mine annotation-audit candidates")
    common(p)
    p.add_argument("--gt", required=True, help="ground-truth JSON")
    p.add_argument("--det", required=True, action="append",
                   help="detections JSON (repeatable, one per model)")
    p.add_argument("--conf-min", type=float, default=0.5)
    p.add_argument("--iou-max", type=float, default=0.5)
    p.add_argument("--box-format", choices=("xyxy", "xywh"), default="xyxy")
    p.set_defaults(fn=cmd_audit)

    p = sub.add_parser("serve", help="run the annotation review service")
    common(p)
    p.add_argument("--layout", default=None, help="dataset root directory")
    p.add_argument("--candidates", default=None, help="candidates JSON")
    p.add_argument("--verdict-log", default="verdicts.jsonl")
    p.add_argument("--gt", default=None, help="ground-truth JSON")
    p.add_argument("--ui-dir", default=None, help="static UI assets to serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UwqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
