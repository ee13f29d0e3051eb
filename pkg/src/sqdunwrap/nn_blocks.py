"""Differentiable primitives: conv, transposed conv, batch norm, pooling, LSTM, Adam.

Tensors are dense NHWC arrays (batch, height, width, channels), float32 for
training. Every layer records the activations it needs during ``forward`` and
returns the input gradient from ``backward`` while accumulating parameter
gradients into its ``Param`` objects, so a network is differentiated by
calling ``backward`` in reverse composition order. Gradients of every
primitive are validated against central finite differences in the test suite;
the layers accept an explicit dtype so those checks can run in float64.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, InvalidInputError

CHECKPOINT_VERSION = 1

# Conv cols buffers are chunked over the batch above this size (bytes).
_COLS_BYTES_LIMIT = 128 * 1024 * 1024


@dataclass
class Param:
    """One learnable (or tracked) array with its gradient accumulator."""

    name: str
    value: np.ndarray
    trainable: bool = True
    grad: np.ndarray = field(init=False)

    def __post_init__(self):
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape


def zero_grads(params) -> None:
    for p in params:
        p.grad[...] = 0.0


# ---------------------------------------------------------------------------
# weight initializers


def he_normal(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def orthogonal(rng: np.random.Generator, n: int, dtype) -> np.ndarray:
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q.astype(dtype)


# ---------------------------------------------------------------------------
# layers


class Layer:
    def params(self) -> list[Param]:
        return []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _check_4d(x, c_expected=None):
    if x.ndim != 4:
        raise InvalidInputError(f"expected a 4-D NHWC tensor, got shape {x.shape}")
    if c_expected is not None and x.shape[3] != c_expected:
        raise InvalidInputError(f"expected {c_expected} input channels, got {x.shape[3]}")


class Conv2d(Layer):
    """Stride-1 convolution with zero same-padding; kernel 3x3 or 1x1.

    Weight layout (kh, kw, c_in, c_out); implemented as im2col plus a GEMM.
    """

    def __init__(self, name, c_in, c_out, ksize, rng, dtype=np.float32):
        if ksize not in (1, 3):
            raise InvalidInputError(f"kernel size {ksize} not supported, use 1 or 3")
        self.name = name
        self.ksize = ksize
        self.c_in = c_in
        self.c_out = c_out
        self.dtype = dtype
        self.w = Param(f"{name}/w", he_normal(rng, (ksize, ksize, c_in, c_out),
                                              fan_in=ksize * ksize * c_in, dtype=dtype))
        self.b = Param(f"{name}/b", np.zeros(c_out, dtype=dtype))
        self._xp = None

    def params(self):
        return [self.w, self.b]

    def _chunks(self, n, h, w):
        per_sample = h * w * 9 * self.c_in * np.dtype(self.dtype).itemsize
        step = max(1, _COLS_BYTES_LIMIT // max(1, per_sample))
        return range(0, n, step), step

    @staticmethod
    def _im2col3(xp, h, w):
        n, _, _, c = xp.shape
        cols = np.empty((n, h, w, 9 * c), dtype=xp.dtype)
        s = 0
        for di in range(3):
            for dj in range(3):
                cols[:, :, :, s:s + c] = xp[:, di:di + h, dj:dj + w, :]
                s += c
        return cols

    def forward(self, x, train=False):
        _check_4d(x, self.c_in)
        n, h, w, _ = x.shape
        if self.ksize == 1:
            self._xp = x
            y = x.reshape(-1, self.c_in) @ self.w.value.reshape(self.c_in, self.c_out)
            y += self.b.value
            return y.reshape(n, h, w, self.c_out)
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        self._xp = xp
        wmat = self.w.value.reshape(9 * self.c_in, self.c_out)
        y = np.empty((n, h, w, self.c_out), dtype=self.dtype)
        starts, step = self._chunks(n, h, w)
        for s0 in starts:
            cols = self._im2col3(xp[s0:s0 + step], h, w)
            y[s0:s0 + step] = (cols.reshape(-1, 9 * self.c_in) @ wmat).reshape(
                cols.shape[0], h, w, self.c_out)
        y += self.b.value
        return y

    def backward(self, dy):
        xp = self._xp
        if self.ksize == 1:
            n, h, w, _ = xp.shape
            dyf = dy.reshape(-1, self.c_out)
            self.w.grad += (xp.reshape(-1, self.c_in).T @ dyf).reshape(self.w.shape)
            self.b.grad += dyf.sum(axis=0)
            return (dyf @ self.w.value.reshape(self.c_in, self.c_out).T).reshape(xp.shape)
        n, hp, wp, _ = xp.shape
        h, w = hp - 2, wp - 2
        wmat = self.w.value.reshape(9 * self.c_in, self.c_out)
        dwmat = np.zeros_like(wmat)
        dxp = np.zeros_like(xp)
        starts, step = self._chunks(n, h, w)
        for s0 in starts:
            cols = self._im2col3(xp[s0:s0 + step], h, w)
            m = cols.shape[0]
            dyf = dy[s0:s0 + step].reshape(-1, self.c_out)
            dwmat += cols.reshape(-1, 9 * self.c_in).T @ dyf
            dcols = (dyf @ wmat.T).reshape(m, h, w, 9 * self.c_in)
            s = 0
            for di in range(3):
                for dj in range(3):
                    dxp[s0:s0 + step, di:di + h, dj:dj + w, :] += dcols[:, :, :, s:s + self.c_in]
                    s += self.c_in
        self.w.grad += dwmat.reshape(self.w.shape)
        self.b.grad += dy.sum(axis=(0, 1, 2))
        return dxp[:, 1:-1, 1:-1, :]


class ConvTranspose2d(Layer):
    """3x3 transposed convolution with stride 2; output is exactly (2h, 2w).

    Parameterized by the kernel of the adjoint stride-2 convolution, laid out
    (kh, kw, c_out, c_in): the forward pass is the exact adjoint (scatter) of
    a 3x3 stride-2 zero-padding-1 convolution mapping (2h, 2w, c_out) down to
    (h, w, c_in).
    """

    def __init__(self, name, c_in, c_out, rng, dtype=np.float32):
        self.name = name
        self.c_in = c_in
        self.c_out = c_out
        self.dtype = dtype
        self.k = Param(f"{name}/k", he_normal(rng, (3, 3, c_out, c_in),
                                              fan_in=9 * c_in, dtype=dtype))
        self.b = Param(f"{name}/b", np.zeros(c_out, dtype=dtype))
        self._x = None

    def params(self):
        return [self.k, self.b]

    @staticmethod
    def _spans(d, size):
        # source start index and destination start for kernel offset d
        src0 = 1 if d == 0 else 0
        dst0 = 2 * src0 + d - 1
        count = size - src0
        return src0, dst0, count

    def forward(self, x, train=False):
        _check_4d(x, self.c_in)
        n, h, w, _ = x.shape
        self._x = x
        y = np.zeros((n, 2 * h, 2 * w, self.c_out), dtype=self.dtype)
        for di in range(3):
            i0, r0, hc = self._spans(di, h)
            for dj in range(3):
                j0, c0, wc = self._spans(dj, w)
                contrib = x[:, i0:, j0:, :] @ self.k.value[di, dj].T
                y[:, r0:r0 + 2 * hc:2, c0:c0 + 2 * wc:2, :] += contrib
        y += self.b.value
        return y

    def backward(self, dy):
        x = self._x
        n, h, w, _ = x.shape
        dx = np.zeros_like(x)
        for di in range(3):
            i0, r0, hc = self._spans(di, h)
            for dj in range(3):
                j0, c0, wc = self._spans(dj, w)
                dy_slice = dy[:, r0:r0 + 2 * hc:2, c0:c0 + 2 * wc:2, :]
                x_slice = x[:, i0:, j0:, :]
                dx[:, i0:, j0:, :] += dy_slice @ self.k.value[di, dj]
                self.k.grad[di, dj] += np.einsum("nhwo,nhwc->oc", dy_slice, x_slice,
                                                 optimize=True)
        self.b.grad += dy.sum(axis=(0, 1, 2))
        return dx


class BatchNorm2d(Layer):
    """Per-channel batch normalization over (n, h, w); eps 1e-5, momentum 0.9."""

    EPS = 1e-5
    MOMENTUM = 0.9

    def __init__(self, name, channels, dtype=np.float32):
        self.name = name
        self.channels = channels
        self.dtype = dtype
        self.gamma = Param(f"{name}/gamma", np.ones(channels, dtype=dtype))
        self.beta = Param(f"{name}/beta", np.zeros(channels, dtype=dtype))
        self.running_mean = Param(f"{name}/running_mean", np.zeros(channels, dtype=dtype),
                                  trainable=False)
        self.running_var = Param(f"{name}/running_var", np.ones(channels, dtype=dtype),
                                 trainable=False)
        self._cache = None

    def params(self):
        return [self.gamma, self.beta, self.running_mean, self.running_var]

    def forward(self, x, train=False):
        _check_4d(x, self.channels)
        if train:
            mu = x.mean(axis=(0, 1, 2))
            var = x.var(axis=(0, 1, 2))
            self.running_mean.value[...] = (self.MOMENTUM * self.running_mean.value
                                            + (1.0 - self.MOMENTUM) * mu)
            self.running_var.value[...] = (self.MOMENTUM * self.running_var.value
                                           + (1.0 - self.MOMENTUM) * var)
        else:
            mu = self.running_mean.value
            var = self.running_var.value
        ivar = 1.0 / np.sqrt(var + self.EPS)
        xhat = (x - mu) * ivar
        self._cache = (xhat, ivar, train, x.shape)
        return self.gamma.value * xhat + self.beta.value

    def backward(self, dy):
        xhat, ivar, train, shape = self._cache
        self.gamma.grad += np.sum(dy * xhat, axis=(0, 1, 2))
        self.beta.grad += np.sum(dy, axis=(0, 1, 2))
        g_ivar = self.gamma.value * ivar
        if not train:
            return dy * g_ivar
        m = shape[0] * shape[1] * shape[2]
        sum_dy = dy.sum(axis=(0, 1, 2))
        sum_dy_xhat = (dy * xhat).sum(axis=(0, 1, 2))
        return (g_ivar / m) * (m * dy - sum_dy - xhat * sum_dy_xhat)


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, dy):
        return np.where(self._mask, dy, 0).astype(dy.dtype, copy=False)


class MaxPool2x2(Layer):
    """2x2 max pooling with stride 2; ties resolve to the first window entry."""

    def __init__(self):
        self._cache = None

    def forward(self, x, train=False):
        _check_4d(x)
        n, h, w, c = x.shape
        if h % 2 or w % 2:
            raise InvalidInputError(f"max pool needs even spatial dims, got {h}x{w}")
        windows = (x.reshape(n, h // 2, 2, w // 2, 2, c)
                    .transpose(0, 1, 3, 5, 2, 4)
                    .reshape(n, h // 2, w // 2, c, 4))
        idx = windows.argmax(axis=-1)
        self._cache = (idx, x.shape)
        return np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def backward(self, dy):
        idx, (n, h, w, c) = self._cache
        z = np.zeros((n, h // 2, w // 2, c, 4), dtype=dy.dtype)
        np.put_along_axis(z, idx[..., None], dy[..., None], axis=-1)
        return (z.reshape(n, h // 2, w // 2, c, 2, 2)
                 .transpose(0, 1, 4, 2, 5, 3)
                 .reshape(n, h, w, c))


def relu(x) -> np.ndarray:
    return np.maximum(x, 0)


def max_pool_2x2(x) -> np.ndarray:
    return MaxPool2x2().forward(x)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


class LSTMLayer(Layer):
    """Single-direction LSTM over a (steps, batch, features) sequence.

    Standard cell with input/forget/output gates and tanh candidate:
    c_t = f * c_{t-1} + i * g, h_t = o * tanh(c_t); initial states are zero.
    Combined weights (c_in + units, 4 * units) with gate order (i, f, g, o);
    input block Glorot-uniform, recurrent block orthogonal per gate, forget
    gate bias initialized to 1.
    """

    def __init__(self, name, c_in, units, rng, dtype=np.float32):
        self.name = name
        self.c_in = c_in
        self.units = units
        self.dtype = dtype
        wx = glorot_uniform(rng, (c_in, 4 * units), fan_in=c_in, fan_out=units, dtype=dtype)
        wh = np.concatenate([orthogonal(rng, units, dtype) for _ in range(4)], axis=1)
        self.w = Param(f"{name}/w", np.concatenate([wx, wh], axis=0))
        b = np.zeros(4 * units, dtype=dtype)
        b[units:2 * units] = 1.0
        self.b = Param(f"{name}/b", b)
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self.c_in:
            raise InvalidInputError(
                f"expected (steps, batch, {self.c_in}) sequence, got shape {x.shape}")
        s, n, _ = x.shape
        u = self.units
        if s == 0:
            self._cache = None
            return np.zeros((0, n, u), dtype=self.dtype)
        wx = self.w.value[:self.c_in]
        wh = self.w.value[self.c_in:]
        pre_x = (x.reshape(s * n, self.c_in) @ wx).reshape(s, n, 4 * u) + self.b.value

        gates = np.empty((s, n, 4 * u), dtype=self.dtype)
        c_states = np.empty((s, n, u), dtype=self.dtype)
        tanh_c = np.empty((s, n, u), dtype=self.dtype)
        h_prev = np.empty((s, n, u), dtype=self.dtype)
        h = np.zeros((n, u), dtype=self.dtype)
        c = np.zeros((n, u), dtype=self.dtype)
        out = np.empty((s, n, u), dtype=self.dtype)
        for t in range(s):
            h_prev[t] = h
            z = pre_x[t] + h @ wh
            zi, zf, zg, zo = z[:, :u], z[:, u:2 * u], z[:, 2 * u:3 * u], z[:, 3 * u:]
            i = _sigmoid(zi)
            f = _sigmoid(zf)
            g = np.tanh(zg)
            o = _sigmoid(zo)
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h = o * tc
            gates[t, :, :u] = i
            gates[t, :, u:2 * u] = f
            gates[t, :, 2 * u:3 * u] = g
            gates[t, :, 3 * u:] = o
            c_states[t] = c_new
            tanh_c[t] = tc
            out[t] = h
            c = c_new
        self._cache = (x, gates, c_states, tanh_c, h_prev)
        return out

    def backward(self, dy):
        if self._cache is None:
            return np.zeros((0,) + dy.shape[1:-1] + (self.c_in,), dtype=self.dtype)
        x, gates, c_states, tanh_c, h_prev = self._cache
        s, n, _ = x.shape
        u = self.units
        wh = self.w.value[self.c_in:]
        wx = self.w.value[:self.c_in]

        dz = np.empty((s, n, 4 * u), dtype=self.dtype)
        dh = np.zeros((n, u), dtype=self.dtype)
        dc = np.zeros((n, u), dtype=self.dtype)
        for t in range(s - 1, -1, -1):
            i = gates[t, :, :u]
            f = gates[t, :, u:2 * u]
            g = gates[t, :, 2 * u:3 * u]
            o = gates[t, :, 3 * u:]
            tc = tanh_c[t]
            dh_t = dh + dy[t]
            do = dh_t * tc
            dc_t = dc + dh_t * o * (1.0 - tc * tc)
            di = dc_t * g
            dg = dc_t * i
            df = dc_t * (c_states[t - 1] if t > 0 else 0.0)
            dc = dc_t * f
            dz[t, :, :u] = di * i * (1.0 - i)
            dz[t, :, u:2 * u] = df * f * (1.0 - f)
            dz[t, :, 2 * u:3 * u] = dg * (1.0 - g * g)
            dz[t, :, 3 * u:] = do * o * (1.0 - o)
            dh = dz[t] @ wh.T

        dzf = dz.reshape(s * n, 4 * u)
        self.w.grad[:self.c_in] += x.reshape(s * n, self.c_in).T @ dzf
        self.w.grad[self.c_in:] += h_prev.reshape(s * n, u).T @ dzf
        self.b.grad += dzf.sum(axis=0)
        return (dzf @ wx.T).reshape(s, n, self.c_in)


def lstm_forward(seq, params: LSTMLayer) -> np.ndarray:
    """Run an LSTM over a (steps, features) or (steps, batch, features) sequence."""
    arr = np.asarray(seq, dtype=params.dtype)
    if arr.ndim == 2:
        return params.forward(arr[:, None, :])[:, 0, :]
    return params.forward(arr)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class Adam:
    """Bias-corrected Adam over a list of Params, reading their .grad fields."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for p in params if p.trainable]
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for p in self.params:
            self.state.m[p.name] = np.zeros_like(p.value)
            self.state.v[p.name] = np.zeros_like(p.value)

    def step(self):
        st = self.state
        st.t += 1
        bc1 = 1.0 - st.beta1 ** st.t
        bc2 = 1.0 - st.beta2 ** st.t
        for p in self.params:
            g = p.grad
            m = st.m[p.name]
            v = st.v[p.name]
            m[...] = st.beta1 * m + (1.0 - st.beta1) * g
            v[...] = st.beta2 * v + (1.0 - st.beta2) * g * g
            p.value -= st.lr * (m / bc1) / (np.sqrt(v / bc2) + st.eps)


def adam_step(params, state: AdamState) -> AdamState:
    """Functional single Adam update; params' grads must already be filled."""
    opt = Adam.__new__(Adam)
    opt.params = [p for p in params if p.trainable]
    opt.state = state
    for p in opt.params:
        state.m.setdefault(p.name, np.zeros_like(p.value))
        state.v.setdefault(p.name, np.zeros_like(p.value))
    opt.step()
    return state


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params, meta: dict | None = None) -> None:
    """Single-file checkpoint: one JSON header line, then raw <f4 blobs in order."""
    header = {
        "format_version": CHECKPOINT_VERSION,
        "dtype": "f32",
        "params": [{"name": p.name, "shape": list(p.shape)} for p in params],
        "meta": meta or {},
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        for p in params:
            f.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[dict, dict]:
    """Returns ({param name: float32 array}, meta dict)."""
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"unreadable checkpoint header: {e}") from e
        if header.get("format_version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"checkpoint format version {header.get('format_version')!r}, "
                f"expected {CHECKPOINT_VERSION}")
        blob = f.read()
    arrays = {}
    offset = 0
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        nbytes = n * 4
        if offset + nbytes > len(blob):
            raise CheckpointError("checkpoint truncated: blob shorter than header declares")
        arrays[entry["name"]] = np.frombuffer(
            blob, dtype="<f4", count=n, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError("checkpoint has trailing bytes beyond declared parameters")
    return arrays, header.get("meta", {})


def assign_params(params, arrays: dict) -> None:
    """Load checkpoint arrays into params by name; shapes must match exactly."""
    names = {p.name for p in params}
    missing = names - set(arrays)
    extra = set(arrays) - names
    if missing or extra:
        raise CheckpointError(
            f"checkpoint does not match model (missing {sorted(missing)[:3]}, "
            f"unexpected {sorted(extra)[:3]})")
    for p in params:
        a = arrays[p.name]
        if a.shape != p.shape:
            raise CheckpointError(
                f"shape mismatch for {p.name}: checkpoint {a.shape}, model {p.shape}")
        p.value[...] = a.astype(p.value.dtype)
