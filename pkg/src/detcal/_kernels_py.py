"""Pure-NumPy implementation of the leave-one-out Beta-kernel primitives.

This is the fallback used when the compiled extension is unavailable. Both
backends expose the same four functions and the same numerics policy:

* The Beta kernel centered at c with bandwidth b, evaluated at s, is the
  Beta(c/b + 1, (1 - c)/b + 1) density at s. In log form each kernel row is
  an affine function of (log s, log(1 - s)), which is what makes the blocked
  matrix formulation below work.
* A row of leave-one-out log densities is summed directly unless its
  smallest off-diagonal entry falls below LSE_CUTOFF, in which case the row
  is shifted by its off-diagonal maximum before exponentiation. The shift
  cancels out of every ratio, so both branches agree to rounding.
* Log-likelihoods always use the shifted (log-sum-exp) form since they need
  the logarithm anyway.

Work is blocked over evaluation rows so peak memory stays near
_TARGET_BLOCK_ELEMENTS floats. Blocks write disjoint output slices, which
keeps results identical whether blocks run on one thread or many.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import gammaln

IS_COMPILED = False

LSE_CUTOFF = -30.0
# Arguments to exp are clamped up to this before exponentiation. exp(-708)
# is a normal double near 3.3e-308, invisible next to the row maximum of
# exp(0) = 1, and the clamp keeps every lane inside the vector math
# library's fast input range. The compiled backend clamps identically.
EXP_FLOOR = -708.0
_TARGET_BLOCK_ELEMENTS = 4_000_000


def _shape_terms(centers: np.ndarray, bandwidth: float):
    """Per-center kernel coefficients: log k(s; c) = a*log(s) + g*log1p(-s) - norm."""
    a = centers / bandwidth
    g = (1.0 - centers) / bandwidth
    norm = gammaln(a + 1.0) + gammaln(g + 1.0) - gammaln(1.0 / bandwidth + 2.0)
    return a, g, norm


def _blocks(n_rows: int, n_cols: int) -> list[tuple[int, int]]:
    rows = max(1, _TARGET_BLOCK_ELEMENTS // max(n_cols, 1))
    return [(start, min(start + rows, n_rows)) for start in range(0, n_rows, rows)]


def _run_blocks(fn, blocks, num_threads: int) -> None:
    if num_threads <= 1 or len(blocks) <= 1:
        for block in blocks:
            fn(block)
        return
    with ThreadPoolExecutor(max_workers=num_threads) as pool:
        list(pool.map(fn, blocks))


def _log_kernel_rows(eval_scores: np.ndarray, a, g, norm) -> np.ndarray:
    log_s = np.log(eval_scores)[:, None]
    log_1ms = np.log1p(-eval_scores)[:, None]
    return log_s * a[None, :] + log_1ms * g[None, :] - norm[None, :]


def _exp_flush(shifted: np.ndarray) -> np.ndarray:
    """exp(max(shifted, EXP_FLOOR)) in place; see EXP_FLOOR above.

    The clamp (rather than a mask to exact zero) keeps every lane on the
    vector exp fast path. Excluded diagonal entries arrive here as -inf and
    leak exp(-708) ~ 3.3e-308 into their row sums, which is more than 290
    orders of magnitude below the row maximum and cannot move any double.
    """
    np.maximum(shifted, EXP_FLOOR, out=shifted)
    return np.exp(shifted, out=shifted)


def loo_residuals(scores, correctness, bandwidth, num_threads=1):
    """Per-sample |loo_ratio_v - s_v| for the leave-one-out estimator."""
    w = scores.shape[0]
    a, g, norm = _shape_terms(scores, bandwidth)
    resid = np.empty(w)

    def run(block):
        lo, hi = block
        log_k = _log_kernel_rows(scores[lo:hi], a, g, norm)
        rows = np.arange(hi - lo)
        diag = np.arange(lo, hi)
        log_k[rows, diag] = np.inf
        row_min = log_k.min(axis=1)
        log_k[rows, diag] = -np.inf
        row_max = log_k.max(axis=1)
        shift = np.where(row_min < LSE_CUTOFF, row_max, 0.0)
        kern = _exp_flush(log_k - shift[:, None])
        den = kern.sum(axis=1)
        num = kern @ correctness
        resid[lo:hi] = np.abs(num / den - scores[lo:hi])

    _run_blocks(run, _blocks(w, w), num_threads)
    return resid


def loo_loglik(scores, bandwidth, num_threads=1):
    """Leave-one-out log-likelihood objective for bandwidth selection."""
    w = scores.shape[0]
    a, g, norm = _shape_terms(scores, bandwidth)
    blocks = _blocks(w, w)
    parts = np.empty(len(blocks))

    def run(item):
        index, (lo, hi) = item
        log_k = _log_kernel_rows(scores[lo:hi], a, g, norm)
        rows = np.arange(hi - lo)
        log_k[rows, np.arange(lo, hi)] = -np.inf
        row_max = log_k.max(axis=1)
        kern = _exp_flush(log_k - row_max[:, None])
        parts[index] = np.sum(row_max + np.log(kern.sum(axis=1)))

    _run_blocks(run, list(enumerate(blocks)), num_threads)
    return float(parts.sum() - w * np.log(w - 1.0))


def cond_expect(scores, correctness, queries, bandwidth, num_threads=1):
    """Kernel-smoothed E[correctness | score = q] at each query point."""
    n_q = queries.shape[0]
    a, g, norm = _shape_terms(scores, bandwidth)
    out = np.empty(n_q)

    def run(block):
        lo, hi = block
        log_k = _log_kernel_rows(queries[lo:hi], a, g, norm)
        row_min = log_k.min(axis=1)
        row_max = log_k.max(axis=1)
        shift = np.where(row_min < LSE_CUTOFF, row_max, 0.0)
        kern = _exp_flush(log_k - shift[:, None])
        den = kern.sum(axis=1)
        out[lo:hi] = (kern @ correctness) / den

    _run_blocks(run, _blocks(n_q, scores.shape[0]), num_threads)
    return out


def loo_grad(scores, correctness, bandwidth, kappa, num_threads=1):
    """Residuals plus the gradient of the mean residual w.r.t. every score.

    ``kappa`` carries the derivative of each kernel's log-normalizer with
    respect to its center (precomputed by the caller, it needs digamma).
    Blocks run sequentially here: the cross-term accumulators are shared, and
    a fixed reduction order keeps the output deterministic. ``num_threads``
    is accepted for interface parity.
    """
    del num_threads
    w = scores.shape[0]
    a, g, norm = _shape_terms(scores, bandwidth)
    rho = (np.log(scores) - np.log1p(-scores)) / bandwidth
    phi = 1.0 / (bandwidth * scores * (1.0 - scores))

    resid = np.empty(w)
    direct = np.empty(w)
    acc_a = np.zeros(w)
    acc_b = np.zeros(w)
    acc_c = np.zeros(w)
    acc_d = np.zeros(w)

    s_z = scores * correctness
    for lo, hi in _blocks(w, w):
        log_k = _log_kernel_rows(scores[lo:hi], a, g, norm)
        rows = np.arange(hi - lo)
        diag = np.arange(lo, hi)
        log_k[rows, diag] = np.inf
        row_min = log_k.min(axis=1)
        log_k[rows, diag] = -np.inf
        row_max = log_k.max(axis=1)
        shift = np.where(row_min < LSE_CUTOFF, row_max, 0.0)
        kern = _exp_flush(log_k - shift[:, None])

        den = kern.sum(axis=1)
        num = kern @ correctness
        ratio = num / den
        s_blk = scores[lo:hi]
        delta = ratio - s_blk
        resid[lo:hi] = np.abs(delta)
        sigma = np.sign(delta)

        # dR_v/ds_v = phi_v * (sum_u k (s_u - s_v) z_u - R_v sum_u k (s_u - s_v)) / den_v
        t1 = kern @ s_z - s_blk * num
        t2 = kern @ scores - s_blk * den
        direct[lo:hi] = sigma * (phi[lo:hi] * (t1 - ratio * t2) / den - 1.0)

        w1 = sigma * rho[lo:hi] / den
        w2 = sigma / den
        acc_a += kern.T @ w1
        acc_b += kern.T @ w2
        acc_c += kern.T @ (w1 * ratio)
        acc_d += kern.T @ (w2 * ratio)

    cross = correctness * acc_a - acc_c - kappa * (correctness * acc_b - acc_d)
    grad = (direct + cross) / w
    return resid, grad
