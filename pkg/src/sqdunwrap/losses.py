"""Training losses: error-variance, error-total-variation, their weighted sum, MSE.

The composite loss is invariant to a global constant offset between
prediction and target, which is exactly the freedom a wrapped observation
leaves unresolved (any solution plus a constant wraps identically). All
expectations pool over the batch and all pixels jointly. Values and gradients
are computed in float64 regardless of the input dtype; the gradient of |.| at
zero is taken to be 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 0.1

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidInputError("loss weights must be non-negative")


def _check_pair(pred, truth, need_spatial=False):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidInputError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    if need_spatial:
        if pred.ndim < 2:
            raise InvalidInputError("need at least 2 spatial dims for gradients")
        h_axis, w_axis = _spatial_axes(pred)
        if pred.shape[h_axis] < 2 or pred.shape[w_axis] < 2:
            raise InvalidInputError("spatial dims must be >= 2 for finite differences")
    return pred, truth


def _spatial_axes(a):
    # 2-D (h, w); 4-D NHWC (n, h, w, c)
    if a.ndim == 2:
        return 0, 1
    if a.ndim == 4:
        return 1, 2
    raise InvalidInputError(f"expected a 2-D image or 4-D NHWC tensor, got shape {a.shape}")


def mse(pred, truth) -> float:
    """Mean squared error over all elements."""
    pred, truth = _check_pair(pred, truth)
    e = pred.astype(np.float64) - truth.astype(np.float64)
    return float(np.mean(e * e))


def mse_grad(pred, truth):
    pred, truth = _check_pair(pred, truth)
    e = pred.astype(np.float64) - truth.astype(np.float64)
    value = float(np.mean(e * e))
    return value, (2.0 / e.size) * e


def l_var(pred, truth) -> float:
    """Variance of the error field: E[e^2] - (E[e])^2, pooled over everything."""
    pred, truth = _check_pair(pred, truth)
    e = pred.astype(np.float64) - truth.astype(np.float64)
    return float(np.mean(e * e) - np.mean(e) ** 2)


def l_var_grad(pred, truth):
    pred, truth = _check_pair(pred, truth)
    e = pred.astype(np.float64) - truth.astype(np.float64)
    mean_e = np.mean(e)
    value = float(np.mean(e * e) - mean_e ** 2)
    return value, (2.0 / e.size) * (e - mean_e)


def l_tv(pred, truth) -> float:
    """Total variation of the error: E|d_x e| + E|d_y e| with forward differences.

    The x term averages over the h*(w-1) valid horizontal differences and the
    y term over the (h-1)*w vertical ones.
    """
    return l_tv_grad(pred, truth)[0]


def l_tv_grad(pred, truth):
    pred, truth = _check_pair(pred, truth, need_spatial=True)
    e = pred.astype(np.float64) - truth.astype(np.float64)
    h_axis, w_axis = _spatial_axes(e)
    dx = np.diff(e, axis=w_axis)
    dy = np.diff(e, axis=h_axis)
    value = float(np.mean(np.abs(dx)) + np.mean(np.abs(dy)))

    grad = np.zeros_like(e)
    sx = np.sign(dx) / dx.size
    sy = np.sign(dy) / dy.size
    # adjoint of the forward difference: +s at the right/bottom cell, -s at the left/top
    head = [slice(None)] * e.ndim
    tail = [slice(None)] * e.ndim
    head[w_axis] = slice(0, -1)
    tail[w_axis] = slice(1, None)
    grad[tuple(tail)] += sx
    grad[tuple(head)] -= sx
    head[w_axis] = tail[w_axis] = slice(None)
    head[h_axis] = slice(0, -1)
    tail[h_axis] = slice(1, None)
    grad[tuple(tail)] += sy
    grad[tuple(head)] -= sy
    return value, grad


def l_c(pred, truth, weights: LossWeights = LossWeights()) -> float:
    """Composite loss lambda1 * l_var + lambda2 * l_tv."""
    return (weights.lambda1 * l_var(pred, truth)
            + weights.lambda2 * l_tv(pred, truth))


def l_c_grad(pred, truth, weights: LossWeights = LossWeights()):
    v, gv = l_var_grad(pred, truth)
    t, gt = l_tv_grad(pred, truth)
    value = weights.lambda1 * v + weights.lambda2 * t
    return value, weights.lambda1 * gv + weights.lambda2 * gt


def loss_and_grad(name: str, pred, truth, weights: LossWeights = LossWeights()):
    """Dispatch by loss name ('lc' or 'mse'); returns (value, d value / d pred)."""
    if name == "lc":
        return l_c_grad(pred, truth, weights)
    if name == "mse":
        return mse_grad(pred, truth)
    raise InvalidInputError(f"unknown loss {name!r}, expected 'lc' or 'mse'")
