"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them live).

Every tolerance is pinned here; nothing is deferred to later calibration.
"""

import json
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from uwqa import MetricConfig
from uwqa.cli import main as cli_main
from uwqa.deteval import average_precision, map_50_95
from uwqa.errors import MetricError
from uwqa.metrics import METRIC_NAMES, MetricVector, entropy, metric_vector, uciqe, uiqm
from uwqa.qindex import MAD_SCALE, MetricTable, compute_qindex
from uwqa.report import (
    build_scatter,
    correlate,
    export_report,
    artifact_summaries,
    artifact_metric_table,
    summaries_from_json,
    summaries_to_json,
    summarize_models,
)
from uwqa.service import create_app

from . import benchmark_fixtures
from .conftest import buf, solid, synthetic_corpus
from .oracles import alg_steps, loop_metrics, ref_map
from .test_deteval import _random_scene, ann, det
from .test_qindex import make_table
from .test_service import GT_DOC, make_candidates, post_verdict

DATA = Path(__file__).parent / "data"


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL", file=sys.stderr)
        raise
    print(f"ACCEPTANCE {name}: PASS")


def test_entropy_exactness():
    with criterion("entropy-exactness"):
        start = time.monotonic()
        assert abs(entropy(solid(12, 12, (55, 55, 55))) - 0.0) <= 1e-9
        ramp = np.arange(256, dtype=np.uint8).reshape(16, 16)
        assert abs(entropy(buf(np.stack([ramp] * 3, axis=-1))) - 8.0) <= 1e-9
        half = np.zeros((16, 16, 3), dtype=np.uint8)
        half[:8] = 170
        assert abs(entropy(buf(half)) - 1.0) <= 1e-9
        assert time.monotonic() - start < 1.0


def test_degenerate_metric_suite():
    with criterion("degenerate-metrics"):
        cfg = MetricConfig()
        gray = solid(32, 32, (128, 128, 128))
        assert abs(uiqm(gray, cfg)) <= 1e-9
        assert abs(uciqe(gray, cfg)) <= 1e-9
        with pytest.raises(MetricError):
            uciqe(solid(16, 16, (0, 0, 0)), cfg)


def test_metric_oracle_equivalence():
    with criterion("metric-oracle-equivalence"):
        start = time.monotonic()
        cfg = MetricConfig()
        images = synthetic_corpus(20, seed=7)
        for k, img in enumerate(images):
            rows = loop_metrics.pixels_of(img)
            got = metric_vector(img, cfg)
            refs = {
                "uiqm": loop_metrics.uiqm_loop(rows, cfg),
                "uciqe": loop_metrics.uciqe_loop(rows, cfg),
                "ccf": loop_metrics.ccf_loop(rows, cfg),
                "entropy": loop_metrics.entropy_loop(rows),
            }
            for name, ref in refs.items():
                val = getattr(got, name)
                rel = abs(val - ref) / max(abs(val), abs(ref), 1e-30)
                assert rel <= 1e-9, f"image {k} {name}: {val} vs {ref} (rel {rel})"
        assert time.monotonic() - start < 30.0


def _random_table(rng, n_models=None, n_images=None):
    n_models = n_models or int(rng.integers(2, 5))
    n_images = n_images or int(rng.integers(2, 7))
    values = {
        f"m{j}": [
            (
                float(rng.uniform(-50, 50)),
                float(rng.uniform(0, 1)),
                float(rng.uniform(0, 40)),
                float(rng.uniform(0, 8)),
            )
            for _ in range(n_images)
        ]
        for j in range(n_models)
    }
    return make_table(values)


def test_qindex_bounds_fuzz():
    with criterion("qindex-bounds-fuzz"):
        start = time.monotonic()
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            qt = compute_qindex(_random_table(rng))
            for v in qt.q.values():
                assert 0.0 <= v <= 1.0
        assert time.monotonic() - start < 60.0


def test_qindex_affine_invariance():
    with criterion("qindex-affine-invariance"):
        rng = np.random.default_rng(777)
        for trial in range(100):
            table = _random_table(rng, n_images=int(rng.integers(2, 6)))
            col = trial % 4
            a = float(rng.uniform(0.1, 10.0))
            b = float(rng.uniform(-100.0, 100.0))
            if col == 3:
                # entropy values live in [0, 8]; keep the map inside the domain
                a = float(rng.uniform(0.1, 1.0))
                b = float(rng.uniform(0.0, 8.0 * (1.0 - a)))
            base = compute_qindex(table)
            mapped_rows = {}
            for key, vec in table.rows.items():
                vals = list(vec.as_tuple())
                vals[col] = a * vals[col] + b
                mapped_rows[key] = MetricVector(*vals)
            mapped = MetricTable(models=table.models, image_ids=table.image_ids,
                                 rows=mapped_rows)
            qt = compute_qindex(mapped)
            for key in base.q:
                assert abs(qt.q[key] - base.q[key]) <= 1e-9


def test_algorithm_oracle_goldens():
    with criterion("qindex-step-oracle-goldens"):
        doc = json.loads((DATA / "outlier_fixture.json").read_text())
        rows = {
            (r["model"], r["image_id"]): MetricVector(
                *(r[m] for m in METRIC_NAMES)
            )
            for r in doc["rows"]
        }
        table = MetricTable(models=doc["models"], image_ids=doc["image_ids"],
                            rows=rows)
        qt = compute_qindex(table)
        for rec in doc["expected_q"]:
            got = f"{round(qt.q[(rec['model'], rec['image_id'])], 12):.12f}"
            assert got == rec["q12"], f"{rec}: got {got}"
        for rec in doc["expected_replaced"]:
            assert qt.replaced[(rec["model"], rec["metric"])] == rec["count"]


def test_mad_constant():
    with criterion("mad-constant"):
        import mpmath
        from scipy import stats

        assert abs(MAD_SCALE - 1.0 / stats.norm.ppf(0.75)) < 1e-6
        independent = float(-1 / (mpmath.sqrt(2) * mpmath.erfinv(mpmath.mpf(-0.5))))
        assert abs(MAD_SCALE - independent) < 1e-6
        assert abs(MAD_SCALE - alg_steps.MAD_SCALE_REF) < 1e-6


def test_map_micro_oracle():
    with criterion("map-micro-oracle"):
        gts = [ann("i", "fish", (0, 0, 10, 10))]
        perfect = [det("i", "fish", (0, 0, 10, 10), 1.0)]
        assert map_50_95(perfect, gts, ["fish"]).overall_map == 1.0
        assert map_50_95([], gts, ["fish"]).overall_map == 0.0
        iou60 = [det("i", "fish", (0, 0, 10, 6), 0.9)]
        assert map_50_95(iou60, gts, ["fish"]).overall_map == 0.300
        assert average_precision([True], 1) == 1.0

        rng = np.random.default_rng(2718)
        classes = ["c0", "c1", "c2"]
        for _ in range(200):
            dets, gts = [], []
            for img in ("a", "b"):
                d, g = _random_scene(rng, img)
                dets += d
                gts += g
            res = map_50_95(dets, gts, classes)
            ref_dets = [
                (d.image_id, d.class_id, tuple(d.box.as_list()), d.confidence, i)
                for i, d in enumerate(dets)
            ]
            ref_gts = [(g.image_id, g.class_id, tuple(g.box.as_list())) for g in gts]
            per_class_ref, overall_ref = ref_map.map_ref(ref_dets, ref_gts, classes)
            assert abs(res.overall_map - overall_ref) <= 1e-9
            for c, v in per_class_ref.items():
                assert abs(res.per_class_map[c] - v) <= 1e-9


def test_correlation_sanity():
    with criterion("correlation-sanity"):
        r, rho = correlate([(x, 2.0 * x + 1.0) for x in range(7)])
        assert abs(r - 1.0) <= 1e-12
        assert abs(rho - 1.0) <= 1e-12
        rng = np.random.default_rng(5)
        xs = np.sort(rng.uniform(-10, 10, 15))
        ys = np.exp(xs / 4.0)  # strictly monotone, nonlinear
        _, rho = correlate(list(zip(xs, ys)))
        assert abs(rho - 1.0) <= 1e-12


def test_benchmark_fixture_round_trip(tmp_path):
    with criterion("benchmark-fixture-round-trip"):
        for dataset in ("CUPDD", "RUOD"):
            summaries = benchmark_fixtures.summaries_for(dataset)
            evals = benchmark_fixtures.evals_for(dataset)

            # spot values from the published tables
            by_model = {s.model: s for s in summaries}
            if dataset == "CUPDD":
                assert by_model["Original"].stats["uiqm"][0] == 1.11
                assert by_model["Original"].stats["entropy"][0] == 7.21
            else:
                assert evals["Original"].overall_map == 0.62
                assert evals["ICSP"].overall_map == 0.55

            # export -> import -> export must be byte-identical
            out1 = tmp_path / dataset / "first"
            out2 = tmp_path / dataset / "second"
            export_report([artifact_summaries(summaries)], out1)
            reloaded = summaries_from_json((out1 / "summaries.json").read_text())
            export_report([artifact_summaries(reloaded)], out2)
            for name in ("summaries.json", "summaries.csv", "report.manifest.json"):
                assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

            # one scatter point per model, coefficients reported unsigned
            results = build_scatter(summaries, evals)
            assert len(results) == 4
            for res in results:
                assert res.n == 10
                assert len(res.scatter) == 10
                assert res.error is None
                assert -1.0 <= res.pearson_r <= 1.0
                assert -1.0 <= res.spearman_rho <= 1.0
                print(f"  {dataset} {res.metric}: pearson={res.pearson_r:+.3f} "
                      f"spearman={res.spearman_rho:+.3f}")

        # per-metric-row round trip built from the published Original row
        row = MetricVector(1.11, 0.46, 14.52, 7.21)
        table = MetricTable(
            models=["Original"], image_ids=["a", "b"],
            rows={("Original", "a"): row, ("Original", "b"): row},
        )
        (s,) = summarize_models(table)
        assert s.stats["uiqm"] == (1.11, 0.0)
        assert s.stats["entropy"] == (7.21, 0.0)
        d1, d2 = tmp_path / "row1", tmp_path / "row2"
        export_report([artifact_metric_table(table)], d1)
        again = MetricTable.from_json((d1 / "metrics.json").read_text())
        export_report([artifact_metric_table(again)], d2)
        assert (d1 / "metrics.json").read_bytes() == (d2 / "metrics.json").read_bytes()
        assert (d1 / "metrics.csv").read_bytes() == (d2 / "metrics.csv").read_bytes()


def test_end_to_end_cli_golden_run(tmp_path):
    with criterion("cli-golden-run"):
        start = time.monotonic()
        out = tmp_path / "run"
        stages = {
            "metrics": ["metrics", "--layout", str(DATA / "layout"),
                        "--out", str(out / "metrics")],
            "qindex": ["qindex", "--table", str(out / "metrics" / "metrics.json"),
                       "--seed", "0", "--out", str(out / "qindex")],
            "map": ["map", "--gt", str(DATA / "gt.json"),
                    "--det", str(DATA / "det_original.json"),
                    "--det", str(DATA / "det_enh_a.json"),
                    "--det", str(DATA / "det_enh_b.json"),
                    "--out", str(out / "map")],
            "correlate": ["correlate",
                          "--summaries", str(out / "metrics" / "summaries.json"),
                          "--evals", str(out / "map" / "map.json"),
                          "--out", str(out / "correlate")],
            "audit": ["audit", "--gt", str(DATA / "gt.json"),
                      "--det", str(DATA / "det_enh_a.json"),
                      "--det", str(DATA / "det_enh_b.json"),
                      "--out", str(out / "audit")],
        }
        for stage, argv in stages.items():
            assert cli_main(argv) == 0, f"stage {stage} failed"

        golden_root = DATA / "golden_run"
        compared = 0
        for golden_file in sorted(golden_root.rglob("*")):
            if golden_file.is_dir():
                continue
            rel = golden_file.relative_to(golden_root)
            fresh = out / rel
            assert fresh.is_file(), f"missing output {rel}"
            assert fresh.read_bytes() == golden_file.read_bytes(), \
                f"{rel} deviates from golden"
            compared += 1
        assert compared >= 20

        # live oracle cross-check of the fused indices, 12-digit
        metrics_doc = json.loads((out / "metrics" / "metrics.json").read_text())
        qdoc = json.loads((out / "qindex" / "qindex.json").read_text())
        rows = {
            (r["model"], r["image_id"]): {m: r[m] for m in METRIC_NAMES}
            for r in metrics_doc["rows"]
        }
        q_ref, _, _ = alg_steps.qindex_steps(
            metrics_doc["models"], metrics_doc["image_ids"], rows
        )
        for r in qdoc["rows"]:
            assert round(r["q"], 12) == round(q_ref[(r["model"], r["image_id"])], 12)
        assert time.monotonic() - start < 120.0


def test_review_service_persistence(tmp_path):
    with criterion("review-service-persistence"):
        from uwqa.deteval import load_ground_truth

        gt = load_ground_truth(json.dumps(GT_DOC))
        log = tmp_path / "verdicts.jsonl"
        candidates = make_candidates(10)

        def build():
            return create_app(layout=None, candidates=candidates,
                              verdict_log=log, ground_truth=gt)

        client = TestClient(build())
        rng = np.random.default_rng(99)
        for i in range(10):
            decision = "accepted" if rng.random() < 0.6 else "rejected"
            r = post_verdict(client, f"cand-{i:04d}", decision,
                             annotator=f"ann{i % 3}")
            assert r.status_code == 201
        progress_before = client.get("/api/progress").json()
        gt_before = client.get("/api/export/corrected-gt").json()
        assert progress_before["pending"] == 0
        assert len(log.read_text().strip().splitlines()) == 10

        restarted = TestClient(build())
        assert restarted.get("/api/progress").json() == progress_before
        assert restarted.get("/api/export/corrected-gt").json() == gt_before
