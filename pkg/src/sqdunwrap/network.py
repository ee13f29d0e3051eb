"""Encoder / quad-directional-LSTM / decoder regression network.

Encoder stages are conv blocks (3x3 conv, batch norm, ReLU) each followed by
2x2 max pooling; the bottleneck features pass through the SQD-LSTM module
(or straight through, for the plain U-NET-style ablation); decoder stages are
3x3 stride-2 transposed convolutions whose outputs are concatenated with the
matching pre-pool encoder activation and refined by another conv block. A
final 1x1 linear convolution produces the unwrapped phase estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, InvalidInputError
from .nn_blocks import (BatchNorm2d, Conv2d, ConvTranspose2d, Layer, MaxPool2x2,
                        ReLU, assign_params, load_checkpoint, save_checkpoint)
from .sqd_lstm import SQDModule


@dataclass(frozen=True)
class ArchConfig:
    encoder_filters: tuple[int, ...] = (32, 64, 128, 256)
    decoder_filters: tuple[int, ...] = (256, 128, 64, 32)
    sqd_units: int = 32
    sqd_fusion_filters: int = 64
    use_sqd: bool = True
    in_channels: int = 1
    out_channels: int = 1

    def __post_init__(self):
        if len(self.encoder_filters) == 0:
            raise InvalidInputError("need at least one encoder stage")
        if len(self.encoder_filters) != len(self.decoder_filters):
            raise InvalidInputError("encoder and decoder stage counts must match")
        if min(self.encoder_filters) < 1 or min(self.decoder_filters) < 1:
            raise InvalidInputError("filter counts must be positive")
        if self.sqd_units < 1 or self.sqd_fusion_filters < 1:
            raise InvalidInputError("sqd_units and sqd_fusion_filters must be positive")

    @property
    def stages(self) -> int:
        return len(self.encoder_filters)

    def to_json_dict(self) -> dict:
        return {
            "encoder_filters": list(self.encoder_filters),
            "decoder_filters": list(self.decoder_filters),
            "sqd_units": self.sqd_units,
            "sqd_fusion_filters": self.sqd_fusion_filters,
            "use_sqd": self.use_sqd,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ArchConfig":
        kw = dict(d)
        kw["encoder_filters"] = tuple(int(v) for v in kw["encoder_filters"])
        kw["decoder_filters"] = tuple(int(v) for v in kw["decoder_filters"])
        return cls(**kw)


class ConvBlock(Layer):
    """3x3 conv + batch norm + ReLU."""

    def __init__(self, name, c_in, c_out, rng, dtype):
        self.conv = Conv2d(f"{name}/conv", c_in, c_out, 3, rng, dtype)
        self.bn = BatchNorm2d(f"{name}/bn", c_out, dtype)
        self.act = ReLU()

    def params(self):
        return self.conv.params() + self.bn.params()

    def forward(self, x, train=False):
        return self.act.forward(self.bn.forward(self.conv.forward(x, train), train), train)

    def backward(self, dy):
        return self.conv.backward(self.bn.backward(self.act.backward(dy)))


class UnwrapNet:
    """The full regression network; owns every layer and the parameter list."""

    def __init__(self, config: ArchConfig, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        if rng is None:
            rng = np.random.default_rng(0)
        self.config = config
        self.dtype = dtype
        S = config.stages
        enc_in = (config.in_channels,) + config.encoder_filters[:-1]
        self.enc_blocks = [ConvBlock(f"enc{s}", enc_in[s], config.encoder_filters[s], rng, dtype)
                           for s in range(S)]
        self.pools = [MaxPool2x2() for _ in range(S)]
        bott_c = config.encoder_filters[-1]
        if config.use_sqd:
            self.sqd = SQDModule("sqd", bott_c, config.sqd_units,
                                 config.sqd_fusion_filters, rng, dtype)
            dec_in = self.sqd.c_out
        else:
            self.sqd = None
            dec_in = bott_c
        self.tconvs = []
        self.dec_blocks = []
        for j in range(S):
            f = config.decoder_filters[j]
            skip_c = config.encoder_filters[S - 1 - j]
            self.tconvs.append(ConvTranspose2d(f"dec{j}/up", dec_in, f, rng, dtype))
            self.dec_blocks.append(ConvBlock(f"dec{j}", f + skip_c, f, rng, dtype))
            dec_in = f
        self.head = Conv2d("head", config.decoder_filters[-1], config.out_channels,
                           1, rng, dtype)

    def params(self):
        out = []
        for b in self.enc_blocks:
            out.extend(b.params())
        if self.sqd is not None:
            out.extend(self.sqd.params())
        for j in range(self.config.stages):
            out.extend(self.tconvs[j].params())
            out.extend(self.dec_blocks[j].params())
        out.extend(self.head.params())
        return out

    def param_counts(self) -> dict:
        trainable = sum(int(np.prod(p.shape)) for p in self.params() if p.trainable)
        total = sum(int(np.prod(p.shape)) for p in self.params())
        return {"trainable": trainable, "total": total}

    def _check_input(self, x):
        if x.ndim != 4 or x.shape[3] != self.config.in_channels:
            raise InvalidInputError(
                f"expected (n, h, w, {self.config.in_channels}) input, got {x.shape}")
        div = 2 ** self.config.stages
        if x.shape[1] % div or x.shape[2] % div:
            raise InvalidInputError(
                f"spatial dims {x.shape[1]}x{x.shape[2]} must be divisible by {div}")

    def forward(self, x, train: bool = False) -> np.ndarray:
        self._check_input(x)
        x = np.ascontiguousarray(x, dtype=self.dtype)
        S = self.config.stages
        skips = []
        a = x
        for s in range(S):
            a = self.enc_blocks[s].forward(a, train)
            skips.append(a)
            a = self.pools[s].forward(a, train)
        if self.sqd is not None:
            a = self.sqd.forward(a, train)
        for j in range(S):
            t = self.tconvs[j].forward(a, train)
            cat = np.concatenate([t, skips[S - 1 - j]], axis=3)
            a = self.dec_blocks[j].forward(cat, train)
        return self.head.forward(a, train)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        S = self.config.stages
        da = self.head.backward(dout)
        dskips = [None] * S
        for j in range(S - 1, -1, -1):
            dcat = self.dec_blocks[j].backward(da)
            t_ch = self.config.decoder_filters[j]
            dskips[S - 1 - j] = dcat[:, :, :, t_ch:]
            da = self.tconvs[j].backward(np.ascontiguousarray(dcat[:, :, :, :t_ch]))
        if self.sqd is not None:
            da = self.sqd.backward(da)
        for s in range(S - 1, -1, -1):
            da = self.pools[s].backward(da)
            da = da + dskips[s]
            da = self.enc_blocks[s].backward(da)
        return da

    def predict(self, wrapped: np.ndarray) -> np.ndarray:
        """Inference on a (n, h, w) or (n, h, w, 1) batch of wrapped images."""
        arr = np.asarray(wrapped, dtype=self.dtype)
        squeeze = arr.ndim == 3
        if squeeze:
            arr = arr[..., None]
        out = self.forward(arr, train=False)
        return out[..., 0] if squeeze else out

    # checkpoint round trip

    def save(self, path, extra_meta: dict | None = None) -> None:
        meta = {"arch": self.config.to_json_dict()}
        if extra_meta:
            meta.update(extra_meta)
        save_checkpoint(path, self.params(), meta)

    @classmethod
    def load(cls, path, dtype=np.float32) -> "UnwrapNet":
        arrays, meta = load_checkpoint(path)
        if "arch" not in meta:
            raise CheckpointError("checkpoint header lacks the architecture config")
        net = cls(ArchConfig.from_json_dict(meta["arch"]), np.random.default_rng(0), dtype)
        assign_params(net.params(), arrays)
        net.loaded_meta = meta
        return net


def build(config: ArchConfig, rng: np.random.Generator | None = None,
          dtype=np.float32) -> UnwrapNet:
    """Construct a randomly initialized network for the given architecture."""
    return UnwrapNet(config, rng, dtype)
