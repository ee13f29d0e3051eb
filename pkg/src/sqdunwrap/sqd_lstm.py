"""Spatial quad-directional LSTM over a feature map.

A feature map (h, w, c) is flattened into four scan sequences of length h*w:

* right: rows top to bottom, each left to right (row-major order)
* left:  the exact reverse of ``right``
* down:  columns left to right, each top to bottom (column-major order)
* up:    the exact reverse of ``down``

Each sequence is processed by its own LSTM (hidden state carried across row
and column boundaries, so every direction is one long sequence), the outputs
are scattered back to their spatial positions, the horizontal pair (right,
left) and the vertical pair (down, up) are concatenated channel-wise and each
pair passes through its own 3x3 fusion convolution followed by a ReLU. The
module output concatenates the two fused maps: channels = 2 * fusion filters,
independent of the input channel count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .nn_blocks import Conv2d, Layer, LSTMLayer, ReLU

DIRECTIONS = ("right", "left", "down", "up")


@dataclass
class DirectionalSequences:
    """The four scan sequences of one feature map, each of length h*w."""

    right: np.ndarray
    left: np.ndarray
    down: np.ndarray
    up: np.ndarray
    dims: tuple[int, int, int]  # (h, w, c)

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"right": self.right, "left": self.left, "down": self.down, "up": self.up}


def extract_sequences(x) -> DirectionalSequences:
    """Flatten one (h, w, c) feature map into its four directional sequences."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise InvalidInputError(f"expected one (h, w, c) map, got shape {x.shape}")
    h, w, c = x.shape
    right = x.reshape(h * w, c)
    down = x.transpose(1, 0, 2).reshape(w * h, c)
    return DirectionalSequences(
        right=right.copy(),
        left=right[::-1].copy(),
        down=down.copy(),
        up=down[::-1].copy(),
        dims=(h, w, c),
    )


def reassemble(seq, direction: str, dims: tuple[int, int]) -> np.ndarray:
    """Scatter a sequence back to the positions its traversal visited."""
    h, w = dims
    seq = np.asarray(seq)
    if seq.ndim != 2 or seq.shape[0] != h * w:
        raise InvalidInputError(
            f"sequence of shape {seq.shape} does not match a {h}x{w} map")
    if direction == "right":
        return seq.reshape(h, w, -1).copy()
    if direction == "left":
        return seq[::-1].reshape(h, w, -1).copy()
    if direction == "down":
        return seq.reshape(w, h, -1).transpose(1, 0, 2).copy()
    if direction == "up":
        return seq[::-1].reshape(w, h, -1).transpose(1, 0, 2).copy()
    raise InvalidInputError(f"unknown direction {direction!r}")


# batched (n, h, w, c) <-> (steps, n, c) variants used by the module


def _extract_batched(x, direction):
    n, h, w, c = x.shape
    if direction in ("right", "left"):
        seq = x.reshape(n, h * w, c).transpose(1, 0, 2)
    else:
        seq = x.transpose(0, 2, 1, 3).reshape(n, w * h, c).transpose(1, 0, 2)
    if direction in ("left", "up"):
        seq = seq[::-1]
    return np.ascontiguousarray(seq)

def _reassemble_batched(seq, direction, h, w):
    if direction in ("left", "up"):
        seq = seq[::-1]
    s, n, c = seq.shape
    if direction in ("right", "left"):
        return seq.transpose(1, 0, 2).reshape(n, h, w, c)
    return seq.transpose(1, 0, 2).reshape(n, w, h, c).transpose(0, 2, 1, 3)


class SQDModule(Layer):
    """Four directional LSTMs plus two 3x3 fusion convolutions.

    Output channel layout is pinned for checkpoint stability: the first
    ``fusion_filters`` channels come from the horizontal branch (right, left)
    and the rest from the vertical branch (down, up).
    """

    def __init__(self, name, c_in, units=32, fusion_filters=64, rng=None,
                 dtype=np.float32):
        if rng is None:
            rng = np.random.default_rng(0)
        self.name = name
        self.c_in = c_in
        self.units = units
        self.fusion_filters = fusion_filters
        self.dtype = dtype
        self.lstms = {d: LSTMLayer(f"{name}/lstm_{d}", c_in, units, rng, dtype)
                      for d in DIRECTIONS}
        self.conv_h = Conv2d(f"{name}/fuse_h", 2 * units, fusion_filters, 3, rng, dtype)
        self.conv_v = Conv2d(f"{name}/fuse_v", 2 * units, fusion_filters, 3, rng, dtype)
        self.relu_h = ReLU()
        self.relu_v = ReLU()
        self._dims = None

    def params(self):
        out = []
        for d in DIRECTIONS:
            out.extend(self.lstms[d].params())
        out.extend(self.conv_h.params())
        out.extend(self.conv_v.params())
        return out

    @property
    def c_out(self):
        return 2 * self.fusion_filters

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[3] != self.c_in:
            raise InvalidInputError(
                f"expected (n, h, w, {self.c_in}) input, got shape {x.shape}")
        n, h, w, _ = x.shape
        self._dims = (n, h, w)
        maps = {}
        for d in DIRECTIONS:
            seq = _extract_batched(x, d)
            out = self.lstms[d].forward(seq, train=train)
            maps[d] = _reassemble_batched(out, d, h, w)
        horiz = np.concatenate([maps["right"], maps["left"]], axis=3)
        vert = np.concatenate([maps["down"], maps["up"]], axis=3)
        fused_h = self.relu_h.forward(self.conv_h.forward(horiz, train=train), train=train)
        fused_v = self.relu_v.forward(self.conv_v.forward(vert, train=train), train=train)
        return np.concatenate([fused_h, fused_v], axis=3)

    def backward(self, dy):
        n, h, w = self._dims
        d_fh = self.relu_h.backward(dy[:, :, :, :self.fusion_filters])
        d_fv = self.relu_v.backward(dy[:, :, :, self.fusion_filters:])
        d_horiz = self.conv_h.backward(d_fh)
        d_vert = self.conv_v.backward(d_fv)
        u = self.units
        upstream = {
            "right": d_horiz[:, :, :, :u],
            "left": d_horiz[:, :, :, u:],
            "down": d_vert[:, :, :, :u],
            "up": d_vert[:, :, :, u:],
        }
        dx = np.zeros((n, h, w, self.c_in), dtype=self.dtype)
        for d in DIRECTIONS:
            d_seq = _extract_batched(upstream[d], d)
            d_in = self.lstms[d].backward(d_seq)
            dx += _reassemble_batched(d_in, d, h, w)
        return dx
