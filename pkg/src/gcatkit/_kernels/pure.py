"""Pure-numpy implementations of the hot kernels.

This module mirrors the compiled backend in ``_fast.pyx`` function for
function; ``gcatkit._kernels`` picks one of the two at import time. All
arrays are float64, C-contiguous, and the accumulation order within each
kernel is fixed, so repeated calls on identical inputs are bit-identical.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure"


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0.0, x, slope * x)


def leaky_relu_grad(x: np.ndarray, grad_out: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0.0, grad_out, slope * grad_out)


def segment_softmax(logits: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Softmax within each contiguous segment ``logits[offsets[s]:offsets[s+1]]``.

    Uses max-subtraction per segment for numerical stability.
    """
    starts = offsets[:-1]
    lengths = np.diff(offsets)
    seg_max = np.maximum.reduceat(logits, starts)
    shifted = np.exp(logits - np.repeat(seg_max, lengths))
    seg_sum = np.add.reduceat(shifted, starts)
    return shifted / np.repeat(seg_sum, lengths)


def segment_softmax_grad(
    probs: np.ndarray, grad_out: np.ndarray, offsets: np.ndarray
) -> np.ndarray:
    starts = offsets[:-1]
    lengths = np.diff(offsets)
    weighted = probs * grad_out
    seg_dot = np.add.reduceat(weighted, starts)
    return probs * (grad_out - np.repeat(seg_dot, lengths))


def abs_sum(x: np.ndarray) -> float:
    return float(np.abs(x).sum())


def sign_zero(x: np.ndarray) -> np.ndarray:
    """Sign of each entry with the subgradient convention sign(0) = 0."""
    return np.sign(x)


def conv3(stack: np.ndarray, filters: np.ndarray) -> np.ndarray:
    """Slide each width-3 filter down an (n, 3) stack: out[i, m] = stack[i] . filters[m]."""
    return stack @ filters.T


def l1_scores(cands: np.ndarray, target: np.ndarray) -> np.ndarray:
    return np.abs(cands - target[None, :]).sum(axis=1)


def convkb_scores(
    h: np.ndarray,
    r: np.ndarray,
    t: np.ndarray,
    filters: np.ndarray,
    w_out: np.ndarray,
) -> np.ndarray:
    """Convolutional triple scores for a batch of (h, r, t) embedding rows.

    ``filters`` is (m, 3); ``w_out`` has length m*d laid out filter-major,
    matching the concatenation order of the m feature maps.
    """
    n, d = h.shape
    m = filters.shape[0]
    pre = (
        h[:, None, :] * filters[None, :, 0, None]
        + r[:, None, :] * filters[None, :, 1, None]
        + t[:, None, :] * filters[None, :, 2, None]
    )
    maps = np.maximum(pre, 0.0)
    return maps.reshape(n, m * d) @ w_out


def rank_counts(
    scores: np.ndarray, true_idx: int, filter_mask: np.ndarray
) -> tuple[int, int, int, int]:
    """Pessimistic-tie rank ingredients for one query.

    Returns (less_raw, equal_raw, less_filtered, equal_filtered), counting
    candidates e != true with score strictly below / equal to the true
    entity's score; the filtered pair skips entries where ``filter_mask``
    is True.
    """
    s_true = scores[true_idx]
    below = scores < s_true
    equal = scores == s_true
    keep = ~filter_mask
    less_raw = int(np.count_nonzero(below))
    eq_raw = int(np.count_nonzero(equal)) - 1
    less_f = int(np.count_nonzero(below & keep))
    eq_f = int(np.count_nonzero(equal & keep)) - 1
    return less_raw, eq_raw, less_f, eq_f
