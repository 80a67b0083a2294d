"""Leave-one-out Beta-kernel estimation of calibration error.

Given w samples (score s_v, correctness z_v) the estimator smooths the
correctness values with a Beta kernel in score space and averages the
absolute gap between each score and the leave-one-out smoothed correctness
at that score:

    ce = (1/w) * sum_v | sum_{u != v} k(s_v; s_u) z_u
                       / sum_{u != v} k(s_v; s_u)  -  s_v |

The kernel centered at c with bandwidth b is the Beta(c/b + 1, (1 - c)/b + 1)
density evaluated at the score, so no mass leaks outside [0, 1]. Scores are
clamped away from the interval endpoints before kernel work because the
kernel family degenerates there.

The heavy O(w^2) loops live in a compiled extension when available and in a
blocked NumPy twin otherwise. "sequential" mode runs one thread; "parallel"
mode distributes rows over threads and may differ from sequential only by
floating-point reassociation (with these backends the per-row outputs are
reduced in a fixed order, so the two agree exactly).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import digamma, gammaln

from ._backend import BACKEND_NAME, kernels

DEFAULT_CLAMP_EPS = 1e-4
DEFAULT_BANDWIDTH_GRID = np.logspace(np.log10(1e-3), np.log10(0.5), 32)

# Philox stream index reserved for subsampling draws.
_SUBSAMPLE_STREAM = 2


def backend_name() -> str:
    """\"compiled\" when the extension is active, \"python\" otherwise."""
    return BACKEND_NAME


@dataclass(frozen=True)
class KdeConfig:
    """Estimator settings.

    bandwidth: Beta-kernel bandwidth, must be positive.
    clamp_eps: scores are clipped into [clamp_eps, 1 - clamp_eps].
    max_samples: optional cap; larger inputs are subsampled without
        replacement using ``seed`` before estimation.
    """

    bandwidth: float
    clamp_eps: float = DEFAULT_CLAMP_EPS
    max_samples: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0.0:
            raise ValueError(f"bandwidth must be positive and finite, got {self.bandwidth!r}")
        if not 0.0 < self.clamp_eps < 0.5:
            raise ValueError(f"clamp_eps must lie in (0, 0.5), got {self.clamp_eps!r}")
        if self.max_samples is not None and self.max_samples < 2:
            raise ValueError(f"max_samples must be at least 2, got {self.max_samples!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed!r}")


@dataclass(frozen=True)
class CeEstimate:
    """estimate_ce result with provenance of the sample set actually used."""

    value: float
    n_used: int
    subsampled: bool
    bandwidth: float


def clamp_scores(scores, eps: float = DEFAULT_CLAMP_EPS) -> np.ndarray:
    """Clip scores into [eps, 1 - eps] as float64."""
    return np.clip(np.asarray(scores, dtype=np.float64), eps, 1.0 - eps)


def beta_kernel(s_eval, s_center, bandwidth: float):
    """Beta kernel density: Beta(c/b + 1, (1 - c)/b + 1) evaluated at s_eval.

    Accepts scalars or arrays (broadcast); returns a float for scalar input.
    """
    if not np.isfinite(bandwidth) or bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be positive and finite, got {bandwidth!r}")
    se = np.asarray(s_eval, dtype=np.float64)
    ct = np.asarray(s_center, dtype=np.float64)
    if np.any((se < 0.0) | (se > 1.0)) or np.any((ct < 0.0) | (ct > 1.0)):
        raise ValueError("evaluation points and centers must lie in [0, 1]")
    shape_a = ct / bandwidth + 1.0
    shape_b = (1.0 - ct) / bandwidth + 1.0
    log_norm = gammaln(shape_a) + gammaln(shape_b) - gammaln(shape_a + shape_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        term_a = np.where(shape_a == 1.0, 0.0, (shape_a - 1.0) * np.log(se))
        term_b = np.where(shape_b == 1.0, 0.0, (shape_b - 1.0) * np.log1p(-se))
    out = np.exp(term_a + term_b - log_norm)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    """Accept (scores, correctness) arrays or an iterable of sample records."""
    if isinstance(samples, tuple) and len(samples) == 2:
        scores = np.ascontiguousarray(samples[0], dtype=np.float64)
        correctness = np.ascontiguousarray(samples[1], dtype=np.float64)
    else:
        items = list(samples)
        scores = np.array([item.score for item in items], dtype=np.float64)
        correctness = np.array([item.correctness for item in items], dtype=np.float64)
    if scores.ndim != 1 or correctness.ndim != 1 or scores.shape != correctness.shape:
        raise ValueError("scores and correctness must be 1-d arrays of equal length")
    if scores.size and (np.any((scores < 0.0) | (scores > 1.0)) or not np.all(np.isfinite(scores))):
        raise ValueError("scores must lie in [0, 1]")
    if correctness.size and (
        np.any((correctness < 0.0) | (correctness > 1.0)) or not np.all(np.isfinite(correctness))
    ):
        raise ValueError("correctness must lie in [0, 1]")
    return scores, correctness


def _resolve_threads(mode: str, num_threads: int | None) -> int:
    if mode == "sequential":
        return 1
    if mode != "parallel":
        raise ValueError(f"mode must be 'sequential' or 'parallel', got {mode!r}")
    if num_threads is not None:
        if num_threads < 1:
            raise ValueError(f"num_threads must be positive, got {num_threads!r}")
        return int(num_threads)
    return os.cpu_count() or 1


def subsample_indices(n: int, max_samples: int | None, seed: int) -> np.ndarray | None:
    """Sorted indices of the size cap's draw, or None when no cap applies.

    The draw uses its own counter stream, so results never shift when the
    uniform or label streams are consumed elsewhere under the same seed.
    """
    if max_samples is None or n <= max_samples:
        return None
    key = np.array([seed, _SUBSAMPLE_STREAM], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    idx = rng.choice(n, size=max_samples, replace=False)
    idx.sort()
    return idx


def estimate_ce(samples, config: KdeConfig, *, mode: str = "parallel",
                num_threads: int | None = None) -> float:
    """Leave-one-out calibration error estimate, in [0, 1]."""
    return estimate_ce_detailed(samples, config, mode=mode, num_threads=num_threads).value


def estimate_ce_detailed(samples, config: KdeConfig, *, mode: str = "parallel",
                         num_threads: int | None = None) -> CeEstimate:
    """Like :func:`estimate_ce` but reports the sample count and subsampling."""
    scores, correctness = _as_arrays(samples)
    if scores.size < 2:
        raise ValueError(f"estimator needs at least 2 samples, got {scores.size}")
    idx = subsample_indices(scores.size, config.max_samples, config.seed)
    if idx is not None:
        scores = scores[idx]
        correctness = np.ascontiguousarray(correctness[idx])
    clamped = clamp_scores(scores, config.clamp_eps)
    threads = _resolve_threads(mode, num_threads)
    resid = kernels.loo_residuals(clamped, correctness, config.bandwidth, threads)
    return CeEstimate(
        value=float(np.mean(resid)),
        n_used=int(clamped.size),
        subsampled=idx is not None,
        bandwidth=config.bandwidth,
    )


def estimate_ce_gradient(samples, config: KdeConfig, *, mode: str = "parallel",
                         num_threads: int | None = None) -> tuple[float, np.ndarray]:
    """Estimate plus its gradient with respect to every input score.

    The gradient is taken through both the evaluation point and the kernel
    centered on each sample. When subsampling is active, entries for samples
    left out of the subsample are zero (they do not influence the value).
    Scores clipped by the clamp are treated as sitting at the clamp value.

    The value is bit-stable across thread counts; the gradient is
    deterministic for a fixed thread count but its cross-sample reduction
    order follows the thread partition, so different thread counts can
    disagree in the last couple of bits.
    """
    scores, correctness = _as_arrays(samples)
    if scores.size < 2:
        raise ValueError(f"estimator needs at least 2 samples, got {scores.size}")
    n_full = scores.size
    idx = subsample_indices(n_full, config.max_samples, config.seed)
    if idx is not None:
        scores = scores[idx]
        correctness = np.ascontiguousarray(correctness[idx])
    clamped = clamp_scores(scores, config.clamp_eps)
    threads = _resolve_threads(mode, num_threads)
    kappa = (digamma(clamped / config.bandwidth + 1.0)
             - digamma((1.0 - clamped) / config.bandwidth + 1.0)) / config.bandwidth
    resid, grad = kernels.loo_grad(clamped, correctness, config.bandwidth,
                                   np.ascontiguousarray(kappa), threads)
    value = float(np.mean(resid))
    if idx is not None:
        full = np.zeros(n_full)
        full[idx] = grad
        grad = full
    return value, grad


def conditional_expectation(samples, s_query, config: KdeConfig, *, mode: str = "sequential",
                            num_threads: int | None = None):
    """Kernel-smoothed E[correctness | score] at one or more query scores.

    Returns a float for a scalar query, an array otherwise. All samples act
    as kernel centers (no leave-one-out here).
    """
    scores, correctness = _as_arrays(samples)
    if scores.size < 1:
        raise ValueError("conditional expectation needs at least 1 sample")
    query = np.asarray(s_query, dtype=np.float64)
    scalar = query.ndim == 0
    query = np.atleast_1d(query)
    if np.any((query < 0.0) | (query > 1.0)) or not np.all(np.isfinite(query)):
        raise ValueError("query scores must lie in [0, 1]")
    clamped = clamp_scores(scores, config.clamp_eps)
    clamped_q = clamp_scores(query, config.clamp_eps)
    threads = _resolve_threads(mode, num_threads)
    out = kernels.cond_expect(clamped, correctness, np.ascontiguousarray(clamped_q),
                              config.bandwidth, threads)
    if scalar:
        return float(out[0])
    return out


def loo_mle_bandwidth(scores, grid: Sequence[float] | np.ndarray | None = None, *,
                      mode: str = "parallel", num_threads: int | None = None) -> float:
    """Bandwidth maximizing the leave-one-out log-likelihood over a grid.

    ``scores`` must already be clamped into (0, 1). Ties resolve toward the
    smaller bandwidth. The default grid has 32 log-spaced points in
    [1e-3, 0.5].
    """
    arr = np.ascontiguousarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("bandwidth selection needs at least 2 scores")
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise ValueError("scores must lie strictly inside (0, 1); clamp them first")
    grid_arr = DEFAULT_BANDWIDTH_GRID if grid is None else np.asarray(grid, dtype=np.float64)
    if grid_arr.ndim != 1 or grid_arr.size == 0:
        raise ValueError("bandwidth grid must be a non-empty 1-d sequence")
    if np.any(~np.isfinite(grid_arr)) or np.any(grid_arr <= 0.0):
        raise ValueError("bandwidth grid values must be positive and finite")
    threads = _resolve_threads(mode, num_threads)
    best_bw = None
    best_ll = -np.inf
    for bw in np.sort(grid_arr):
        ll = kernels.loo_loglik(arr, float(bw), threads)
        if ll > best_ll:
            best_ll = ll
            best_bw = float(bw)
    return best_bw
