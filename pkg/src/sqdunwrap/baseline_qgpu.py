"""Quality-guided path-following 2-D phase unwrapper.

The quality score of a pixel is the negated local variance of the wrapped
phase differences in a 3x3 window (low derivative variance means a reliable,
smooth neighborhood). Unwrapping seeds at the most reliable pixel and grows
the solved region through a max-priority frontier ordered by quality; each
newly solved pixel takes its neighbor's value plus the wrapped difference, so
the output is congruent to the input by construction. When some unwrapping
with all adjacent steps below pi exists, it is recovered exactly up to one
global multiple of 2*pi.
"""

from __future__ import annotations

import heapq

import numpy as np

from .errors import InvalidInputError
from .phase_core import wrap_scalar


def _window_mean_var(a: np.ndarray) -> np.ndarray:
    """Per-position variance of a 3x3 neighborhood, count-aware at borders."""
    ones = np.ones_like(a)
    s = np.zeros_like(a)
    s2 = np.zeros_like(a)
    cnt = np.zeros_like(a)
    h, w = a.shape
    ap = np.pad(a, 1)
    op = np.pad(ones, 1)
    for di in range(3):
        for dj in range(3):
            blk = ap[di:di + h, dj:dj + w]
            s += blk
            s2 += blk * blk
            cnt += op[di:di + h, dj:dj + w]
    mean = s / cnt
    return s2 / cnt - mean * mean


def quality_map(wrapped) -> np.ndarray:
    """Per-pixel reliability: negated variance of local wrapped phase differences.

    Invariant under a global offset of the underlying phase, since wrapped
    differences do not change.
    """
    w = np.asarray(wrapped, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 2 or w.shape[1] < 2:
        raise InvalidInputError(f"need a 2-D wrapped image of at least 2x2, got {w.shape}")
    dx = wrap_scalar(np.diff(w, axis=1))
    dy = wrap_scalar(np.diff(w, axis=0))
    # pad the edge differences back to the pixel grid by edge replication
    dx_full = np.concatenate([dx, dx[:, -1:]], axis=1)
    dy_full = np.concatenate([dy, dy[-1:, :]], axis=0)
    return -(_window_mean_var(dx_full) + _window_mean_var(dy_full))


def qgpu_unwrap(wrapped) -> np.ndarray:
    """Unwrap a 2-D wrapped phase image by quality-guided region growing.

    The seed keeps its observed value, so the output is anchored there; any
    admissible solution differs only by a global 2*pi multiple. Ties in the
    frontier are broken by pixel index, making the result deterministic.
    """
    w = np.asarray(wrapped, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 2 or w.shape[1] < 2:
        raise InvalidInputError(f"need a 2-D wrapped image of at least 2x2, got {w.shape}")
    h, ww = w.shape
    q = quality_map(w)

    # wrapped steps between horizontal / vertical neighbors, precomputed
    dx = wrap_scalar(np.diff(w, axis=1))
    dy = wrap_scalar(np.diff(w, axis=0))

    out = np.zeros_like(w)
    solved = np.zeros((h, ww), dtype=bool)
    neg_q = (-q).ravel()
    out_flat = out.ravel()
    solved_flat = solved.ravel()

    seed = int(np.argmax(q))
    out_flat[seed] = w.flat[seed]
    solved_flat[seed] = True

    def neighbors(idx):
        i, j = divmod(idx, ww)
        if j + 1 < ww:
            yield idx + 1, dx[i, j]
        if j > 0:
            yield idx - 1, -dx[i, j - 1]
        if i + 1 < h:
            yield idx + ww, dy[i, j]
        if i > 0:
            yield idx - ww, -dy[i - 1, j]

    # entries: (negated quality, pixel index, push serial, candidate value);
    # equal-quality ties resolve by pixel index, then by discovery order
    heap = []
    serial = 0
    for nb, step in neighbors(seed):
        heapq.heappush(heap, (neg_q[nb], nb, serial, out_flat[seed] + step))
        serial += 1
    while heap:
        _, idx, _, value = heapq.heappop(heap)
        if solved_flat[idx]:
            continue
        out_flat[idx] = value
        solved_flat[idx] = True
        for nb, step in neighbors(idx):
            if not solved_flat[nb]:
                heapq.heappush(heap, (neg_q[nb], nb, serial, value + step))
                serial += 1
    return out


def remove_mean_offset(pred, truth) -> np.ndarray:
    """Shift ``pred`` by the constant minimizing the mean squared error to ``truth``.

    Used when scoring path-following output, whose global 2*pi anchor is
    arbitrary and should not be penalized by range-normalized metrics.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise InvalidInputError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return pred - float(np.mean(pred - truth))
