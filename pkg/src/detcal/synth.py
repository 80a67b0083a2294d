"""Synthetic score benchmark with a known, exactly computable miscalibration.

Construction: draw u ~ Uniform(0, 1), sharpen it once in logit space to get
the true correctness probability p = logistic(logit(u) / t1), draw the
binary outcome z ~ Bernoulli(p), then distort the probability a second time
to get the reported score s = logistic(logit(p) / t2). Because the second
stage is invertible, E[Z | s] = logistic(t2 * logit(s)) is available in
closed form, and the exact calibration error is the one-dimensional
integral of |p(u) - s(u)| du, evaluated here by adaptive quadrature.

Randomness comes from the counter-based Philox generator with an explicit
stream split: key (seed, 0) drives the uniform draws and key (seed, 1) the
Bernoulli draws, so the same seed yields the same dataset no matter how
work is scheduled.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import expit, logit

from . import binned, kde

STREAM_UNIFORM = 0
STREAM_LABELS = 1

# the sharpening stages can saturate to exactly 0 or 1 in floating point
# (logistic(x) rounds to 1.0 for x above ~36.7); nudge those draws to the
# nearest representable interior double so every score stays rescalable
_INTERIOR_LO = float(np.nextafter(0.0, 1.0))
_INTERIOR_HI = float(np.nextafter(1.0, 0.0))

KNOWN_ESTIMATORS = ("kde_threshold", "kde_identity", "dece", "laece")

GROUND_TRUTH_LABEL = "ground_truth"


@dataclass(frozen=True)
class SynthConfig:
    """One dataset draw: n samples, two temperatures, one seed."""

    n: int
    t1: float = 0.6
    t2: float = 0.6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n!r}")
        for name in ("t1", "t2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed!r}")


@dataclass(frozen=True)
class SynthData:
    scores: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    estimator: str
    mean: float
    ci95: float


def temperature_scale(scores, t: float):
    """Rescale probabilities by 1/t in logit space; t < 1 sharpens toward 0/1.

    Inputs must lie strictly inside (0, 1). Returns a float for scalar input.
    """
    if not math.isfinite(t) or t <= 0.0:
        raise ValueError(f"temperature must be positive and finite, got {t!r}")
    arr = np.asarray(scores, dtype=np.float64)
    if np.any((arr <= 0.0) | (arr >= 1.0)) or not np.all(np.isfinite(arr)):
        raise ValueError("scores must lie strictly inside (0, 1)")
    out = expit(logit(arr) / t)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _stream(seed: int, stream: int) -> np.random.Generator:
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def generate(config: SynthConfig) -> SynthData:
    """Draw one synthetic dataset of (score, label) pairs.

    Scores are guaranteed strictly inside (0, 1), so they can be fed back
    through temperature_scale or true_conditional without clamping.
    """
    u = _stream(config.seed, STREAM_UNIFORM).random(config.n)
    # random() covers [0, 1); nudge exact zeros off the logit singularity
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    p_true = np.clip(temperature_scale(u, config.t1), _INTERIOR_LO, _INTERIOR_HI)
    draws = _stream(config.seed, STREAM_LABELS).random(config.n)
    labels = (draws < p_true).astype(np.float64)
    scores = np.clip(temperature_scale(p_true, config.t2), _INTERIOR_LO, _INTERIOR_HI)
    return SynthData(scores=scores, labels=labels)


def true_conditional(scores, t2: float):
    """E[Z | score] for data produced with second-stage temperature t2."""
    if not math.isfinite(t2) or t2 <= 0.0:
        raise ValueError(f"temperature must be positive and finite, got {t2!r}")
    return temperature_scale(scores, 1.0 / t2)


def ground_truth_ce(t1: float, t2: float) -> float:
    """Exact calibration error of the construction, by adaptive quadrature.

    The integrand |p(u) - s(u)| has a kink at u = 0.5 (both stages fix the
    midpoint), which is passed to the integrator as a known break point.
    """
    for name, value in (("t1", t1), ("t2", t2)):
        if not math.isfinite(value) or value <= 0.0:
            raise ValueError(f"{name} must be positive and finite, got {value!r}")

    def gap(u: float) -> float:
        if u <= 0.0 or u >= 1.0:
            return 0.0
        logit_u = math.log(u) - math.log1p(-u)
        return abs(expit(logit_u / t1) - expit(logit_u / (t1 * t2)))

    value, _ = integrate.quad(gap, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10,
                              limit=200, points=[0.5])
    return float(value)


def _ci95(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(1.96 * np.std(values, ddof=1) / math.sqrt(len(values)))


def convergence_experiment(
    ns: Sequence[int],
    seeds: Sequence[int],
    estimators: Sequence[str] = ("kde_threshold", "dece"),
    t1: float = 0.6,
    t2: float = 0.6,
    *,
    mode: str = "parallel",
    num_threads: int | None = None,
    bandwidth_grid=None,
    clamp_eps: float = 1e-4,
    dece_bins: int = binned.DEFAULT_DECE_BINS,
    laece_bins: int = binned.DEFAULT_LAECE_BINS,
) -> list[ConvergenceRow]:
    """Estimator means and 95% CIs per sample size, plus the exact value.

    The first row carries the quadrature ground truth (estimator
    "ground_truth", n = 0, ci95 = 0). The KDE rows select their bandwidth
    per draw by leave-one-out likelihood. On this benchmark the labels are
    already binary, so "kde_threshold" and "kde_identity" coincide; both
    names are accepted for sweep-config compatibility.
    """
    if not ns:
        raise ValueError("ns must be non-empty")
    if not seeds:
        raise ValueError("seeds must be non-empty")
    if not estimators:
        raise ValueError("estimators must be non-empty")
    unknown = [name for name in estimators if name not in KNOWN_ESTIMATORS]
    if unknown:
        raise ValueError(f"unknown estimators {unknown}; expected a subset of {KNOWN_ESTIMATORS}")
    if any(n < 2 for n in ns):
        raise ValueError("every n must be at least 2")

    needs_kde = any(name.startswith("kde_") for name in estimators)
    rows = [ConvergenceRow(n=0, estimator=GROUND_TRUTH_LABEL,
                           mean=ground_truth_ce(t1, t2), ci95=0.0)]
    for n in ns:
        values: dict[str, list[float]] = {name: [] for name in estimators}
        for seed in seeds:
            data = generate(SynthConfig(n=n, t1=t1, t2=t2, seed=seed))
            kde_value = None
            if needs_kde:
                clamped = kde.clamp_scores(data.scores, clamp_eps)
                bandwidth = kde.loo_mle_bandwidth(clamped, bandwidth_grid,
                                                  mode=mode, num_threads=num_threads)
                config = kde.KdeConfig(bandwidth=bandwidth, clamp_eps=clamp_eps)
                kde_value = kde.estimate_ce((data.scores, data.labels), config,
                                            mode=mode, num_threads=num_threads)
            for name in estimators:
                if name.startswith("kde_"):
                    values[name].append(kde_value)
                elif name == "dece":
                    values[name].append(binned.d_ece(data.scores, data.labels,
                                                     binned.BinningConfig(dece_bins)))
                else:
                    values[name].append(la_ece_binary(data.scores, data.labels, laece_bins))
        for name in estimators:
            rows.append(ConvergenceRow(n=n, estimator=name,
                                       mean=float(np.mean(values[name])),
                                       ci95=_ci95(values[name])))
    return rows


def la_ece_binary(scores, labels, num_bins: int = binned.DEFAULT_LAECE_BINS) -> float:
    """Localization-aware error on label-only data.

    Treats every positive as a matched detection with full overlap, which
    collapses the per-class formula to a single-class binned estimator.
    """
    labels_arr = np.asarray(labels, dtype=np.float64)
    return binned.la_ece(scores, labels_arr, labels_arr == 1.0,
                         np.zeros(labels_arr.shape[0], dtype=np.int64), [0],
                         binned.BinningConfig(num_bins))


def rows_to_csv(rows: Sequence[ConvergenceRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["n", "estimator", "mean", "ci95"])
    for row in rows:
        writer.writerow([row.n, row.estimator, repr(row.mean), repr(row.ci95)])
    return out.getvalue()


def rows_to_json(rows: Sequence[ConvergenceRow]) -> str:
    return json.dumps([asdict(row) for row in rows], sort_keys=True, indent=2) + "\n"
