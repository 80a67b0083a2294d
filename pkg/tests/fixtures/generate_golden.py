"""Regenerate golden_report.json from the fixture pair.

Every value is computed through the reference implementations in
tests/oracles.py (explicit loops, scipy densities), not through the
package's estimators, so the golden file is an independent cross-check
of the whole evaluate pipeline. Only the data containers, the box
geometry, and the link functions are shared with the package.

Run from the repository root:

    python3 tests/fixtures/generate_golden.py
"""

import json
import os
import sys
from types import SimpleNamespace

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir))

import oracles  # noqa: E402
from detcal.geometry import Box  # noqa: E402
from detcal.links import threshold  # noqa: E402
from detcal.matching import Detection, GroundTruthBox  # noqa: E402

HERE = os.path.dirname(os.path.abspath(__file__))

TAU_GRID = tuple(i / 100.0 for i in range(50, 100, 5))
BANDWIDTH_GRID = np.logspace(np.log10(1e-3), np.log10(0.5), 32)
CLAMP_EPS = 1e-4
DECE_BINS = 20
LAECE_BINS = 25
SIZE_CLASSES = ("small", "medium", "large")


def _load_fixture():
    with open(os.path.join(HERE, "dets.json"), encoding="utf-8") as handle:
        det_records = json.load(handle)
    with open(os.path.join(HERE, "gt.json"), encoding="utf-8") as handle:
        gt_payload = json.load(handle)

    def to_box(bbox):
        x, y, w, h = bbox
        return Box(x, y, x + w, y + h)

    detections = [Detection(image_id=r["image_id"], category_id=r["category_id"],
                            box=to_box(r["bbox"]), score=r["score"])
                  for r in det_records]
    ground_truth = [GroundTruthBox(image_id=r["image_id"], category_id=r["category_id"],
                                   box=to_box(r["bbox"]),
                                   ignore=bool(r.get("iscrowd", 0)))
                    for r in gt_payload["annotations"]]
    cat_ids = sorted(c["id"] for c in gt_payload["categories"])
    return detections, ground_truth, cat_ids


def _match(detections, ground_truth, tau):
    config = SimpleNamespace(score_threshold=0.5, similarity="iou",
                             match_iou=tau, link=threshold(tau))
    samples, _ = oracles.greedy_match(detections, ground_truth, config)
    return samples  # tuples (image, cat, score, sim, z, matched, size)


def _class_mean_ce(samples, cat_ids):
    """Reference class-averaged kernel estimate; None when no class usable."""
    per_class = []
    for cat in cat_ids:
        group = [s for s in samples if s[1] == cat]
        if len(group) < 2:
            continue
        scores = np.clip(np.array([s[2] for s in group]), CLAMP_EPS, 1 - CLAMP_EPS)
        z = np.array([s[4] for s in group])
        likelihoods = [oracles.loo_loglik(scores, b) for b in BANDWIDTH_GRID]
        bandwidth = BANDWIDTH_GRID[int(np.argmax(likelihoods))]
        per_class.append(oracles.loo_ce(scores, z, bandwidth))
    if not per_class:
        return None
    return float(np.mean(per_class))


def main():
    detections, ground_truth, cat_ids = _load_fixture()
    by_tau = {tau: _match(detections, ground_truth, tau) for tau in TAU_GRID}

    metrics = {}
    absent = {}

    def put(name, value, reason):
        if value is None:
            absent[name] = reason
        else:
            metrics[name] = value

    ce_by_tau = {tau: _class_mean_ce(by_tau[tau], cat_ids) for tau in TAU_GRID}
    put("ce_50", ce_by_tau[0.5], "no class has at least 2 samples at tau=0.5")
    put("ce_75", ce_by_tau[0.75], "no class has at least 2 samples at tau=0.75")
    if any(v is None for v in ce_by_tau.values()):
        put("ce", None, "missing at some tau")
    else:
        put("ce", float(np.mean([ce_by_tau[t] for t in TAU_GRID])), "")

    for size in SIZE_CLASSES:
        per_tau = []
        for tau in TAU_GRID:
            bucket = [s for s in by_tau[tau] if s[6] == size]
            value = _class_mean_ce(bucket, cat_ids)
            if value is None:
                per_tau = None
                break
            per_tau.append(value)
        put(f"ce_{size}",
            None if per_tau is None else float(np.mean(per_tau)),
            f"missing for size={size} at some tau")

    dece_by_tau = {}
    for tau in TAU_GRID:
        samples = by_tau[tau]
        if len(samples) < 2:
            dece_by_tau[tau] = None
        else:
            dece_by_tau[tau] = oracles.d_ece([s[2] for s in samples],
                                             [s[4] for s in samples], DECE_BINS)
    put("dece_50", dece_by_tau[0.5], "fewer than 2 samples at tau=0.5")
    if any(v is None for v in dece_by_tau.values()):
        put("dece", None, "missing at some tau")
    else:
        put("dece", float(np.mean([dece_by_tau[t] for t in TAU_GRID])), "")

    samples_50 = by_tau[0.5]
    if len(samples_50) < 2:
        put("laece", None, "fewer than 2 samples at tau=0.5")
    else:
        put("laece", oracles.la_ece([s[2] for s in samples_50],
                                    [s[3] for s in samples_50],
                                    [s[5] for s in samples_50],
                                    [s[1] for s in samples_50],
                                    cat_ids, LAECE_BINS), "")

    # the default report link is threshold(0.5), so ce_link repeats ce_50
    put("ce_link", ce_by_tau[0.5], "no class has at least 2 samples")

    golden = {
        "categories": cat_ids,
        "n_samples": len(samples_50),
        "n_samples_by_tau": {f"{tau:g}": len(by_tau[tau]) for tau in TAU_GRID},
        "metrics": {k: metrics[k] for k in sorted(metrics)},
        "absent": {k: absent[k] for k in sorted(absent)},
    }
    out_path = os.path.join(HERE, "golden_report.json")
    with open(out_path, "w", encoding="utf-8") as handle:
        json.dump(golden, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"wrote {out_path}")
    for name in sorted(metrics):
        print(f"  {name} = {metrics[name]!r}")
    for name in sorted(absent):
        print(f"  {name} absent: {absent[name]}")


if __name__ == "__main__":
    main()
