"""Histogram-binned calibration metrics, plus temperature fitting.

Scores fall into M equal-width bins over [0, 1]; a score of exactly 1 lands
in the last bin. Two binned estimators live here: the pooled detection
expected calibration error (weighted mean over bins of |accuracy - mean
confidence|) and a localization-aware variant that compares confidence
against precision times mean overlap per class. The module also carries the
two plain distances d_cls and d_det and an NLL-minimizing temperature fit,
since they share the same sample inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, logit

DEFAULT_DECE_BINS = 20
DEFAULT_LAECE_BINS = 25

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BinningConfig:
    num_bins: int = DEFAULT_DECE_BINS

    def __post_init__(self) -> None:
        if self.num_bins < 1:
            raise ValueError(f"num_bins must be at least 1, got {self.num_bins!r}")


def bin_indices(scores: np.ndarray, num_bins: int) -> np.ndarray:
    """Equal-width bin index per score; the closed top edge joins the last bin."""
    idx = np.floor(scores * num_bins).astype(np.int64)
    return np.minimum(idx, num_bins - 1)


def _check_scores(scores) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("scores must be a non-empty 1-d array")
    if not np.all(np.isfinite(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("scores must lie in [0, 1]")
    return arr


def _check_binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isin(arr, (0.0, 1.0))):
        raise ValueError(f"{name} must be binary (0 or 1)")
    return arr


def d_ece(scores, correctness, config: BinningConfig = BinningConfig()) -> float:
    """Pooled binned calibration error for binary correctness.

    Sum over occupied bins of (bin mass) * |bin accuracy - bin confidence|.
    """
    s = _check_scores(scores)
    z = _check_binary(correctness, "correctness")
    if z.shape != s.shape:
        raise ValueError("scores and correctness must have the same length")
    m = config.num_bins
    idx = bin_indices(s, m)
    counts = np.bincount(idx, minlength=m)
    sum_s = np.bincount(idx, weights=s, minlength=m)
    sum_z = np.bincount(idx, weights=z, minlength=m)
    occupied = counts > 0
    # (count/n) * |sum_z/count - sum_s/count| telescopes to |sum_z - sum_s|/n
    return float(np.sum(np.abs(sum_z[occupied] - sum_s[occupied])) / s.size)


def la_ece(scores, similarity, matched, category_ids, categories,
           config: BinningConfig = BinningConfig(DEFAULT_LAECE_BINS)) -> float:
    """Localization-aware binned calibration error, averaged over classes.

    Per class, each occupied bin contributes (bin mass) * |bin confidence -
    precision * mean overlap of matched detections|; a bin without matched
    detections contributes its confidence in full. Classes without samples
    drop out of the unweighted class mean.
    """
    s = _check_scores(scores)
    sim = np.asarray(similarity, dtype=np.float64)
    if sim.shape != s.shape:
        raise ValueError("scores and similarity must have the same length")
    if not np.all(np.isfinite(sim)) or np.any((sim < 0.0) | (sim > 1.0)):
        raise ValueError("similarity must lie in [0, 1]")
    is_tp = np.asarray(matched, dtype=bool)
    if is_tp.shape != s.shape:
        raise ValueError("scores and matched must have the same length")
    cat = np.asarray(category_ids)
    if cat.shape != s.shape:
        raise ValueError("scores and category_ids must have the same length")
    cat_list = sorted(set(int(c) for c in categories))
    if not cat_list:
        raise ValueError("categories must be non-empty")

    m = config.num_bins
    per_class = []
    for cat_id in cat_list:
        mask = cat == cat_id
        n_k = int(mask.sum())
        if n_k == 0:
            continue
        idx = bin_indices(s[mask], m)
        sum_s = np.bincount(idx, weights=s[mask], minlength=m)
        # precision * mean-overlap telescopes to (sum of matched overlaps)/count
        sum_tp_sim = np.bincount(idx, weights=sim[mask] * is_tp[mask], minlength=m)
        per_class.append(np.sum(np.abs(sum_s - sum_tp_sim)) / n_k)
    if not per_class:
        raise ValueError("no category has any samples")
    return float(np.mean(per_class))


def d_cls(scores, labels) -> float:
    """Mean |score - label| for binary labels."""
    s = _check_scores(scores)
    y = _check_binary(labels, "labels")
    if y.shape != s.shape:
        raise ValueError("scores and labels must have the same length")
    return float(np.mean(np.abs(s - y)))


def d_det(scores, similarity) -> float:
    """Mean |overlap - score|."""
    s = _check_scores(scores)
    sim = np.asarray(similarity, dtype=np.float64)
    if sim.shape != s.shape:
        raise ValueError("scores and similarity must have the same length")
    if not np.all(np.isfinite(sim)) or np.any((sim < 0.0) | (sim > 1.0)):
        raise ValueError("similarity must lie in [0, 1]")
    return float(np.mean(np.abs(sim - s)))


def scaled_nll(scores, labels, t: float, clamp_eps: float = 1e-4) -> float:
    """Mean negative log-likelihood of labels under logit-space rescaling by 1/t."""
    s = np.clip(_check_scores(scores), clamp_eps, 1.0 - clamp_eps)
    y = _check_binary(labels, "labels")
    if y.shape != s.shape:
        raise ValueError("scores and labels must have the same length")
    if not t > 0.0:
        raise ValueError(f"temperature must be positive, got {t!r}")
    x = logit(s) / t
    return float(-np.mean(y * log_expit(x) + (1.0 - y) * log_expit(-x)))


def fit_temperature(scores, labels, t_bounds: tuple[float, float] = (0.05, 20.0),
                    tol: float = 1e-4, clamp_eps: float = 1e-4) -> float:
    """Temperature minimizing the rescaling NLL, by golden-section search.

    The NLL is convex in 1/t, hence unimodal in t, so golden-section over
    the bracket converges. Requires at least one sample of each label.
    """
    s = _check_scores(scores)
    y = _check_binary(labels, "labels")
    if y.shape != s.shape:
        raise ValueError("scores and labels must have the same length")
    if not (np.any(y == 0.0) and np.any(y == 1.0)):
        raise ValueError("temperature fitting needs both label values present")
    lo, hi = t_bounds
    if not (0.0 < lo < hi):
        raise ValueError(f"invalid temperature bounds {t_bounds!r}")

    def objective(t: float) -> float:
        return scaled_nll(s, y, t, clamp_eps)

    a, b = lo, hi
    c = b - (b - a) * _INV_GOLDEN
    d = a + (b - a) * _INV_GOLDEN
    fc = objective(c)
    fd = objective(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * _INV_GOLDEN
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * _INV_GOLDEN
            fd = objective(d)
    return float(0.5 * (a + b))


def apply_temperature(scores, t: float, clamp_eps: float = 1e-4) -> np.ndarray:
    """Rescale scores by 1/t in logit space (scores clamped off the endpoints)."""
    if not t > 0.0:
        raise ValueError(f"temperature must be positive, got {t!r}")
    s = np.clip(np.asarray(scores, dtype=np.float64), clamp_eps, 1.0 - clamp_eps)
    return expit(logit(s) / t)
