"""Dataset evaluation: the full metric battery and a serializable report.

evaluate_report runs matching at the ten overlap thresholds 0.50 to 0.95,
computes the kernel calibration error per class at each threshold (plus the
size-partitioned variants), the pooled binned error, and the
localization-aware binned error, then assembles everything into a
CalibrationReport. Metrics whose sample sets are too small are reported as
absent with a reason rather than as zero.

Reports serialize to canonical JSON (sorted keys) and to CSV with one
metric per row; parsing the JSON back reproduces every value bit-exactly.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
import os
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from . import binned, kde
from .links import THRESHOLD, LinkSpec, threshold
from .matching import (SIZE_CLASSES, Detection, GroundTruthBox, MatchConfig,
                       MatchedSample, match_detections, partition_by_size)

REPORT_SCHEMA = "detcal-report-v1"

TAU_GRID = tuple(i / 100.0 for i in range(50, 100, 5))

# Matching floor used when the configured link is not a threshold link:
# any positive overlap is allowed to match, the link decides the credit.
SOFT_LINK_MATCH_FLOOR = 1e-6


@dataclass(frozen=True)
class ReportConfig:
    """Evaluation settings; defaults mirror the common benchmark choices."""

    link: LinkSpec = field(default_factory=lambda: threshold(0.5))
    score_threshold: float = 0.5
    similarity: str = "iou"
    bandwidth: float | None = None
    shared_bandwidth: bool = False
    bandwidth_grid: tuple[float, ...] | None = None
    dece_bins: int = binned.DEFAULT_DECE_BINS
    laece_bins: int = binned.DEFAULT_LAECE_BINS
    clamp_eps: float = 1e-4
    max_samples: int | None = None
    seed: int = 0
    mode: str = "parallel"
    num_threads: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.score_threshold < 1.0:
            raise ValueError(f"score_threshold must lie in [0, 1), got {self.score_threshold!r}")
        if self.bandwidth is not None and not self.bandwidth > 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth!r}")
        if self.dece_bins < 1 or self.laece_bins < 1:
            raise ValueError("bin counts must be at least 1")
        if self.mode not in ("sequential", "parallel"):
            raise ValueError(f"mode must be 'sequential' or 'parallel', got {self.mode!r}")

    @property
    def bandwidth_policy(self) -> str | float:
        if self.bandwidth is not None:
            return self.bandwidth
        return "auto-shared" if self.shared_bandwidth else "auto"


@dataclass(frozen=True)
class MetricEntry:
    name: str
    value: float
    fingerprint: dict


@dataclass(frozen=True)
class AbsentMetric:
    name: str
    reason: str


@dataclass(frozen=True)
class CalibrationReport:
    metrics: tuple[MetricEntry, ...]
    absent: tuple[AbsentMetric, ...]
    categories: tuple[int, ...]
    n_samples: int
    generated_at: str
    config: dict
    schema: str = REPORT_SCHEMA

    def value(self, name: str) -> float | None:
        for entry in self.metrics:
            if entry.name == name:
                return entry.value
        return None

    def absent_reason(self, name: str) -> str | None:
        for entry in self.absent:
            if entry.name == name:
                return entry.reason
        return None


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    n_samples: int
    ce: float | None
    reason: str


def _category_ids(categories) -> list[int]:
    if isinstance(categories, Mapping):
        ids = categories.keys()
    else:
        ids = categories
    out = sorted(set(int(c) for c in ids))
    if not out:
        raise ValueError("category set must be non-empty")
    return out


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.datetime.fromtimestamp(int(epoch), datetime.timezone.utc)
    else:
        moment = datetime.datetime.now(datetime.timezone.utc)
    return moment.isoformat(timespec="seconds")


def _sample_arrays(samples: Sequence[MatchedSample]):
    scores = np.array([s.score for s in samples], dtype=np.float64)
    correctness = np.array([s.correctness for s in samples], dtype=np.float64)
    similarity = np.array([s.similarity for s in samples], dtype=np.float64)
    matched = np.array([s.matched for s in samples], dtype=bool)
    cats = np.array([s.category_id for s in samples], dtype=np.int64)
    return scores, correctness, similarity, matched, cats


class _ClassAveragedCe:
    """Unweighted class mean of the kernel estimate for one sample set."""

    def __init__(self, samples: Sequence[MatchedSample], cat_ids: Sequence[int],
                 config: ReportConfig):
        self.n_samples = len(samples)
        by_class: dict[int, list[MatchedSample]] = {c: [] for c in cat_ids}
        for sample in samples:
            by_class[sample.category_id].append(sample)
        self.skipped = [c for c in cat_ids if len(by_class[c]) < 2]
        usable = {c: group for c, group in by_class.items() if len(group) >= 2}
        self.value: float | None = None
        self.subsampled = False
        if not usable:
            self.reason = "no class has at least 2 samples"
            return
        self.reason = ""

        shared_bw: float | None = config.bandwidth
        if shared_bw is None and config.shared_bandwidth:
            pooled = np.array([s.score for s in samples], dtype=np.float64)
            shared_bw = self._select_bandwidth(pooled, config)

        per_class = []
        for cat in sorted(usable):
            group = usable[cat]
            scores = np.array([s.score for s in group], dtype=np.float64)
            correctness = np.array([s.correctness for s in group], dtype=np.float64)
            idx = kde.subsample_indices(scores.size, config.max_samples, config.seed)
            if idx is not None:
                scores = scores[idx]
                correctness = correctness[idx]
                self.subsampled = True
            bw = shared_bw if shared_bw is not None else self._select_bandwidth(scores, config)
            estimate = kde.estimate_ce(
                (scores, correctness),
                kde.KdeConfig(bandwidth=bw, clamp_eps=config.clamp_eps),
                mode=config.mode, num_threads=config.num_threads,
            )
            per_class.append(estimate)
        self.value = float(np.mean(per_class))

    @staticmethod
    def _select_bandwidth(scores: np.ndarray, config: ReportConfig) -> float:
        idx = kde.subsample_indices(scores.size, config.max_samples, config.seed)
        if idx is not None:
            scores = scores[idx]
        clamped = kde.clamp_scores(scores, config.clamp_eps)
        return kde.loo_mle_bandwidth(clamped, config.bandwidth_grid,
                                     mode=config.mode, num_threads=config.num_threads)


def _fingerprint(config: ReportConfig, *, estimator: str, link: str, tau,
                 bins: int | None, n_samples: int, subsampled: bool = False,
                 skipped_classes: Sequence[int] = ()) -> dict:
    if estimator == "kde":
        bandwidth = config.bandwidth_policy
    else:
        bandwidth = None
    return {
        "estimator": estimator,
        "link": link,
        "gamma": config.score_threshold,
        "tau": tau,
        "bins": bins,
        "bandwidth": bandwidth,
        "n_samples": n_samples,
        "subsampled": subsampled,
        "skipped_classes": list(skipped_classes),
    }


def evaluate_report(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthBox],
    categories,
    config: ReportConfig = ReportConfig(),
) -> CalibrationReport:
    """Compute the full metric battery over the matched samples.

    The battery is fixed: kernel calibration error under a threshold link at
    each overlap level in TAU_GRID (headline value is their mean), the same
    restricted to each size partition, the pooled binned error at 0.5 and
    averaged over the grid, and the localization-aware binned error at 0.5.
    The configured link contributes one extra entry, "ce_link", computed
    from samples matched under that link's natural floor.
    """
    cat_ids = _category_ids(categories)
    entries: list[MetricEntry] = []
    missing: list[AbsentMetric] = []

    def add(name: str, value: float | None, reason: str, fingerprint: dict) -> None:
        if value is None:
            missing.append(AbsentMetric(name=name, reason=reason))
        else:
            entries.append(MetricEntry(name=name, value=value, fingerprint=fingerprint))

    tau_samples: dict[float, list[MatchedSample]] = {}
    for tau in TAU_GRID:
        match_cfg = MatchConfig(match_iou=tau, score_threshold=config.score_threshold,
                                link=threshold(tau), similarity=config.similarity)
        tau_samples[tau] = match_detections(detections, ground_truth, match_cfg, cat_ids)

    # Kernel CE per tau, pooled over classes by unweighted mean.
    ce_results = {tau: _ClassAveragedCe(tau_samples[tau], cat_ids, config)
                  for tau in TAU_GRID}

    for name, tau in (("ce_50", 0.5), ("ce_75", 0.75)):
        result = ce_results[tau]
        add(name, result.value,
            f"{result.reason} at tau={tau}" if result.value is None else "",
            _fingerprint(config, estimator="kde", link=str(threshold(tau)), tau=tau,
                         bins=None, n_samples=result.n_samples,
                         subsampled=result.subsampled, skipped_classes=result.skipped))

    headline_missing = [tau for tau in TAU_GRID if ce_results[tau].value is None]
    if headline_missing:
        add("ce", None, "no estimate at tau=" + ",".join(f"{t:g}" for t in headline_missing),
            {})
    else:
        headline = float(np.mean([ce_results[tau].value for tau in TAU_GRID]))
        add("ce", headline, "",
            _fingerprint(config, estimator="kde", link="threshold:tau", tau=list(TAU_GRID),
                         bins=None,
                         n_samples=ce_results[0.5].n_samples,
                         subsampled=any(ce_results[t].subsampled for t in TAU_GRID),
                         skipped_classes=ce_results[0.5].skipped))

    # Size partitions, same averaging over the tau grid within each bucket.
    for size in SIZE_CLASSES:
        per_tau: list[float] = []
        reason = ""
        subsampled = False
        n_at_50 = 0
        for tau in TAU_GRID:
            bucket = partition_by_size(tau_samples[tau])[size]
            if tau == 0.5:
                n_at_50 = len(bucket)
            result = _ClassAveragedCe(bucket, cat_ids, config)
            if result.value is None:
                reason = f"{result.reason} for size={size} at tau={tau:g}"
                break
            subsampled = subsampled or result.subsampled
            per_tau.append(result.value)
        add(f"ce_{size}", float(np.mean(per_tau)) if not reason else None, reason,
            _fingerprint(config, estimator="kde", link="threshold:tau", tau=list(TAU_GRID),
                         bins=None, n_samples=n_at_50, subsampled=subsampled))

    # Pooled binned error at 0.5 and averaged over the grid.
    dece_by_tau: dict[float, float | None] = {}
    for tau in TAU_GRID:
        scores, correctness, _, _, _ = _sample_arrays(tau_samples[tau])
        if scores.size < 2:
            dece_by_tau[tau] = None
        else:
            dece_by_tau[tau] = binned.d_ece(scores, correctness,
                                            binned.BinningConfig(config.dece_bins))
    add("dece_50", dece_by_tau[0.5],
        "fewer than 2 samples at tau=0.5" if dece_by_tau[0.5] is None else "",
        _fingerprint(config, estimator="dece", link=str(threshold(0.5)), tau=0.5,
                     bins=config.dece_bins, n_samples=len(tau_samples[0.5])))
    dece_missing = [tau for tau in TAU_GRID if dece_by_tau[tau] is None]
    if dece_missing:
        add("dece", None,
            "fewer than 2 samples at tau=" + ",".join(f"{t:g}" for t in dece_missing), {})
    else:
        add("dece", float(np.mean([dece_by_tau[tau] for tau in TAU_GRID])), "",
            _fingerprint(config, estimator="dece", link="threshold:tau", tau=list(TAU_GRID),
                         bins=config.dece_bins, n_samples=len(tau_samples[0.5])))

    # Localization-aware binned error from the 0.5-matched samples.
    samples_50 = tau_samples[0.5]
    if len(samples_50) < 2:
        add("laece", None, "fewer than 2 samples at tau=0.5", {})
    else:
        scores, _, similarity, matched, cats = _sample_arrays(samples_50)
        value = binned.la_ece(scores, similarity, matched, cats, cat_ids,
                              binned.BinningConfig(config.laece_bins))
        add("laece", value, "",
            _fingerprint(config, estimator="laece", link="identity", tau=0.5,
                         bins=config.laece_bins, n_samples=len(samples_50)))

    # The configured link's own calibration error.
    link_tau = config.link.beta if config.link.kind == THRESHOLD else SOFT_LINK_MATCH_FLOOR
    link_cfg = MatchConfig(match_iou=link_tau, score_threshold=config.score_threshold,
                           link=config.link, similarity=config.similarity)
    link_samples = match_detections(detections, ground_truth, link_cfg, cat_ids)
    link_result = _ClassAveragedCe(link_samples, cat_ids, config)
    add("ce_link", link_result.value,
        f"{link_result.reason} under link {config.link}" if link_result.value is None else "",
        _fingerprint(config, estimator="kde", link=str(config.link), tau=link_tau,
                     bins=None, n_samples=link_result.n_samples,
                     subsampled=link_result.subsampled,
                     skipped_classes=link_result.skipped))

    return CalibrationReport(
        metrics=tuple(entries),
        absent=tuple(missing),
        categories=tuple(cat_ids),
        n_samples=len(samples_50),
        generated_at=_timestamp(),
        config={
            "link": str(config.link),
            "score_threshold": config.score_threshold,
            "similarity": config.similarity,
            "bandwidth": config.bandwidth_policy,
            "dece_bins": config.dece_bins,
            "laece_bins": config.laece_bins,
            "clamp_eps": config.clamp_eps,
            "max_samples": config.max_samples,
            "seed": config.seed,
            "mode": config.mode,
        },
    )


def sweep_gamma(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthBox],
    categories,
    gammas: Sequence[float],
    config: ReportConfig = ReportConfig(),
) -> list[SweepRow]:
    """Headline CE and surviving sample count for each score threshold."""
    if not list(gammas):
        raise ValueError("gammas must be non-empty")
    rows = []
    for gamma in gammas:
        report = evaluate_report(detections, ground_truth, categories,
                                 replace(config, score_threshold=float(gamma)))
        ce = report.value("ce")
        reason = "" if ce is not None else (report.absent_reason("ce") or "absent")
        rows.append(SweepRow(gamma=float(gamma), n_samples=report.n_samples,
                             ce=ce, reason=reason))
    return rows


def report_to_json(report: CalibrationReport) -> str:
    payload = {
        "schema": report.schema,
        "generated_at": report.generated_at,
        "categories": list(report.categories),
        "n_samples": report.n_samples,
        "config": report.config,
        "metrics": [
            {"name": e.name, "value": e.value, "fingerprint": e.fingerprint}
            for e in report.metrics
        ],
        "absent": [{"name": a.name, "reason": a.reason} for a in report.absent],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> CalibrationReport:
    payload = json.loads(text)
    if payload.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unsupported report schema {payload.get('schema')!r}")
    return CalibrationReport(
        metrics=tuple(MetricEntry(name=m["name"], value=m["value"],
                                  fingerprint=m["fingerprint"])
                      for m in payload["metrics"]),
        absent=tuple(AbsentMetric(name=a["name"], reason=a["reason"])
                     for a in payload["absent"]),
        categories=tuple(payload["categories"]),
        n_samples=payload["n_samples"],
        generated_at=payload["generated_at"],
        config=payload["config"],
        schema=payload["schema"],
    )


_CSV_COLUMNS = ("name", "value", "estimator", "link", "gamma", "tau", "bins",
                "bandwidth", "n_samples", "subsampled", "skipped_classes", "reason")


def report_to_csv(report: CalibrationReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)

    def flat(value) -> str:
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        if isinstance(value, (list, tuple)):
            return ";".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
        return str(value)

    for entry in report.metrics:
        fp = entry.fingerprint
        writer.writerow([entry.name, repr(entry.value)]
                        + [flat(fp.get(col)) for col in _CSV_COLUMNS[2:-1]]
                        + [""])
    for absent in report.absent:
        writer.writerow([absent.name, ""] + [""] * (len(_CSV_COLUMNS) - 3)
                        + [absent.reason])
    return out.getvalue()


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["gamma", "n_samples", "ce", "reason"])
    for row in rows:
        writer.writerow([repr(row.gamma), row.n_samples,
                         "" if row.ce is None else repr(row.ce), row.reason])
    return out.getvalue()


def sweep_to_json(rows: Sequence[SweepRow]) -> str:
    payload = [{"gamma": r.gamma, "n_samples": r.n_samples, "ce": r.ce,
                "reason": r.reason} for r in rows]
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
