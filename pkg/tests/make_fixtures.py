"""Generate the committed end-to-end fixture layout and golden outputs.

Run from the repository root:

    python3 -m tests.make_fixtures

Deterministic: a seeded generator builds a 3-model x 6-image layout with
ground truth and per-model detections, runs the full CLI pipeline into
tests/data/golden_run/, and cross-checks the produced numbers against the
independent oracles before anything is committed as golden.
"""

import json
import shutil
import sys
from pathlib import Path

import numpy as np
from PIL import Image

DATA = Path(__file__).parent / "data"
CLASSES = ["fish", "urchin"]
IMG_W, IMG_H = 40, 30
IMAGE_IDS = [f"img{i:02d}" for i in range(6)]
MODELS = ["original", "enh_a", "enh_b"]


def build_original(rng, k):
    """Murky low-contrast scene with a few bright blobs."""
    base = rng.integers(40, 90, (IMG_H, IMG_W, 3))
    base[:, :, 1] += 30  # green cast
    yy, xx = np.mgrid[0:IMG_H, 0:IMG_W]
    for _ in range(2 + k % 3):
        cx, cy = rng.integers(5, IMG_W - 5), rng.integers(5, IMG_H - 5)
        blob = np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / 30.0))
        base = base + (blob[..., None] * rng.integers(60, 120, 3)).astype(int)
    noise = rng.integers(-10, 11, (IMG_H, IMG_W, 3))
    return np.clip(base + noise, 0, 255).astype(np.uint8)


def enhance_a(arr):
    """Contrast stretch with a warm shift."""
    x = arr.astype(np.float64)
    x = (x - 110.0) * 1.45 + 135.0
    x[:, :, 0] += 12.0
    return np.clip(x, 0, 255).astype(np.uint8)


def enhance_b(arr):
    """Brighten and desaturate slightly."""
    x = arr.astype(np.float64)
    gray = x.mean(axis=2, keepdims=True)
    x = 0.7 * x + 0.3 * gray + 25.0
    return np.clip(x, 0, 255).astype(np.uint8)


def write_layout():
    rng = np.random.default_rng(2024)
    originals = {}
    for k, image_id in enumerate(IMAGE_IDS):
        originals[image_id] = build_original(rng, k)
    transforms = {"original": lambda a: a, "enh_a": enhance_a, "enh_b": enhance_b}
    for model, fn in transforms.items():
        d = DATA / "layout" / model
        d.mkdir(parents=True, exist_ok=True)
        for image_id, arr in originals.items():
            Image.fromarray(fn(arr)).save(d / f"{image_id}.png")


def jitter_box(rng, box, scale):
    x1, y1, x2, y2 = box
    dx, dy = rng.uniform(-scale, scale, 2)
    g = rng.uniform(-scale, scale)
    return [
        round(max(0.0, x1 + dx - g), 2),
        round(max(0.0, y1 + dy - g), 2),
        round(min(float(IMG_W), x2 + dx + g), 2),
        round(min(float(IMG_H), y2 + dy + g), 2),
    ]


def write_gt_and_detections():
    rng = np.random.default_rng(77)
    annotations = []
    boxes_by_image = {}
    for image_id in IMAGE_IDS:
        n = int(rng.integers(1, 4))
        boxes = []
        for _ in range(n):
            x1 = float(rng.uniform(0, IMG_W - 15))
            y1 = float(rng.uniform(0, IMG_H - 13))
            box = [round(x1, 2), round(y1, 2),
                   round(x1 + float(rng.uniform(9, 14)), 2),
                   round(y1 + float(rng.uniform(8, 12)), 2)]
            cls = CLASSES[int(rng.integers(0, 2))]
            annotations.append({"image_id": image_id, "class_id": cls, "box": box})
            boxes.append((cls, box))
        boxes_by_image[image_id] = boxes

    gt = {
        "classes": CLASSES,
        "images": [
            {"id": i, "width": IMG_W, "height": IMG_H, "file_name": f"{i}.png"}
            for i in IMAGE_IDS
        ],
        "annotations": annotations,
    }
    (DATA / "gt.json").write_text(json.dumps(gt, indent=2) + "\n")

    # Per-model detections: jittered copies of GT plus deliberate extras.
    jitter = {"original": 0.4, "enh_a": 0.9, "enh_b": 1.4}
    hidden_box = [2.0, 2.0, 9.0, 8.0]  # empty region on img01 for all GTs
    for model in MODELS:
        dets = []
        miss_budget = {"original": 1, "enh_a": 2, "enh_b": 2}[model]
        for image_id in IMAGE_IDS:
            for cls, box in boxes_by_image[image_id]:
                if miss_budget > 0 and rng.random() < 0.18:
                    miss_budget -= 1
                    continue
                dets.append({
                    "image_id": image_id,
                    "class_id": cls,
                    "box": jitter_box(rng, box, jitter[model]),
                    "confidence": round(float(rng.uniform(0.55, 0.98)), 3),
                })
            if rng.random() < 0.25:
                x1 = float(rng.uniform(0, IMG_W - 8))
                y1 = float(rng.uniform(0, IMG_H - 8))
                dets.append({
                    "image_id": image_id,
                    "class_id": CLASSES[int(rng.integers(0, 2))],
                    "box": [round(x1, 2), round(y1, 2),
                            round(x1 + 6.0, 2), round(y1 + 6.0, 2)],
                    "confidence": round(float(rng.uniform(0.1, 0.45)), 3),
                })
        if model in ("enh_a", "enh_b"):
            # the annotation miss the enhancers reveal: stable cluster on img01
            shift = 0.5 if model == "enh_b" else 0.0
            dets.append({
                "image_id": "img01",
                "class_id": "fish",
                "box": [hidden_box[0] + shift, hidden_box[1],
                        hidden_box[2] + shift, hidden_box[3]],
                "confidence": 0.91 if model == "enh_a" else 0.87,
            })
        (DATA / f"det_{model}.json").write_text(
            json.dumps({"model": model, "detections": dets}, indent=2) + "\n"
        )


def run_pipeline(out_root: Path):
    from uwqa.cli import main

    stages = {
        "metrics": ["metrics", "--layout", str(DATA / "layout"),
                    "--out", str(out_root / "metrics")],
        "qindex": ["qindex", "--table", str(out_root / "metrics" / "metrics.json"),
                   "--seed", "0", "--out", str(out_root / "qindex")],
        "map": ["map", "--gt", str(DATA / "gt.json"),
                *sum((["--det", str(DATA / f"det_{m}.json")] for m in MODELS), []),
                "--out", str(out_root / "map")],
        "correlate": ["correlate",
                      "--summaries", str(out_root / "metrics" / "summaries.json"),
                      "--evals", str(out_root / "map" / "map.json"),
                      "--out", str(out_root / "correlate")],
        "audit": ["audit", "--gt", str(DATA / "gt.json"),
                  *sum((["--det", str(DATA / f"det_{m}.json")]
                        for m in ("enh_a", "enh_b")), []),
                  "--out", str(out_root / "audit")],
    }
    for stage, argv in stages.items():
        code = main(argv)
        if code != 0:
            raise SystemExit(f"stage {stage} exited {code}")


def verify_against_oracles(out_root: Path):
    from uwqa import MetricConfig, decode_image

    from .oracles import alg_steps, loop_metrics, ref_map

    cfg = MetricConfig()
    metrics_doc = json.loads((out_root / "metrics" / "metrics.json").read_text())
    rows = {(r["model"], r["image_id"]): r for r in metrics_doc["rows"]}

    # spot-check four rows of the metric table against the loop oracles
    spot = [("original", "img00"), ("enh_a", "img02"),
            ("enh_b", "img04"), ("original", "img05")]
    for model, image_id in spot:
        data = (DATA / "layout" / model / f"{image_id}.png").read_bytes()
        px = loop_metrics.pixels_of(decode_image(data))
        rec = rows[(model, image_id)]
        for name, ref in (
            ("uiqm", loop_metrics.uiqm_loop(px, cfg)),
            ("uciqe", loop_metrics.uciqe_loop(px, cfg)),
            ("ccf", loop_metrics.ccf_loop(px, cfg)),
            ("entropy", loop_metrics.entropy_loop(px)),
        ):
            rel = abs(rec[name] - ref) / max(abs(ref), 1e-30)
            assert rel < 1e-9, f"{model}/{image_id} {name}: {rec[name]} vs {ref}"

    # full q-index cross-check, 12-digit
    qdoc = json.loads((out_root / "qindex" / "qindex.json").read_text())
    step_rows = {
        (r["model"], r["image_id"]): {
            m: rows[(r["model"], r["image_id"])][m]
            for m in ("uiqm", "uciqe", "ccf", "entropy")
        }
        for r in qdoc["rows"]
    }
    q_ref, _, _ = alg_steps.qindex_steps(
        metrics_doc["models"], metrics_doc["image_ids"], step_rows
    )
    for r in qdoc["rows"]:
        assert round(r["q"], 12) == round(q_ref[(r["model"], r["image_id"])], 12)

    # mAP cross-check
    map_doc = json.loads((out_root / "map" / "map.json").read_text())
    gt_doc = json.loads((DATA / "gt.json").read_text())
    gts = [(a["image_id"], a["class_id"], tuple(a["box"]))
           for a in gt_doc["annotations"]]
    for model in MODELS:
        det_doc = json.loads((DATA / f"det_{model}.json").read_text())
        dets = [(d["image_id"], d["class_id"], tuple(d["box"]), d["confidence"], i)
                for i, d in enumerate(det_doc["detections"])]
        _, overall_ref = ref_map.map_ref(dets, gts, CLASSES)
        got = map_doc["models"][model]["overall_map"]
        assert abs(got - overall_ref) < 1e-9, f"{model}: {got} vs {overall_ref}"

    print("oracle verification passed")


def write_outlier_fixture():
    """Random table with injected high/low outliers; expected quality
    indices come from the step-by-step oracle, frozen at 12 digits."""
    from .oracles import alg_steps

    rng = np.random.default_rng(4242)
    models = ["original", "m1", "m2"]
    image_ids = [f"img{i}" for i in range(4)]
    metrics = ("uiqm", "uciqe", "ccf", "entropy")
    rows = {}
    for model in models:
        for image_id in image_ids:
            rows[(model, image_id)] = {
                m: round(float(rng.uniform(1.0, 5.0)), 6) for m in metrics
            }
    rows[("m1", "img2")]["uiqm"] = 480.0        # high outlier
    rows[("m2", "img0")]["entropy"] = 0.000001  # low outlier

    q_ref, extrema, replaced = alg_steps.qindex_steps(models, image_ids, rows)
    doc = {
        "models": models,
        "image_ids": image_ids,
        "rows": [
            {"model": m, "image_id": i, **rows[(m, i)]}
            for m in models for i in image_ids
        ],
        "expected_q": [
            {"model": m, "image_id": i, "q12": f"{round(q_ref[(m, i)], 12):.12f}"}
            for m in models for i in image_ids
        ],
        "expected_replaced": [
            {"model": m, "metric": metric, "count": c}
            for (m, metric), c in sorted(replaced.items()) if c
        ],
    }
    (DATA / "outlier_fixture.json").write_text(json.dumps(doc, indent=2) + "\n")


def main():
    DATA.mkdir(exist_ok=True)
    for stale in ("layout", "golden_run"):
        shutil.rmtree(DATA / stale, ignore_errors=True)
    write_layout()
    write_gt_and_detections()
    write_outlier_fixture()
    golden = DATA / "golden_run"
    run_pipeline(golden)
    verify_against_oracles(golden)
    print(f"fixtures written under {DATA}")


if __name__ == "__main__":
    sys.exit(main())
