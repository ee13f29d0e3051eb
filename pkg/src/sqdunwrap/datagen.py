"""Synthetic phase image generation and dataset persistence.

Ground-truth images are sums of randomly placed anisotropic Gaussians plus a
planar ramp, rescaled into a target value range. Inputs are the wrapped
versions, optionally with Gaussian noise added to the true phase before
wrapping; stored targets are always the clean phase.

On-disk layout of a dataset directory:

* ``manifest.json``   UTF-8 JSON: format version, config echo, count,
  dtype "f32", layout "row-major", per-image SNR list (null = noise free)
* ``wrapped.bin``     little-endian float32, image-major then row-major
* ``truth.bin``       same layout as wrapped.bin

Generation is a pure function of (config, seed): every image derives its own
RNG streams from (seed, image index), so serial and parallel generation
produce identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, DatasetVersionError, InvalidInputError
from .phase_core import gaussian_noise_for_snr, wrap

FORMAT_VERSION = 1


@dataclass(frozen=True)
class GenConfig:
    image_size: int = 256
    count: int = 1
    n_gaussians_range: tuple[int, int] = (3, 12)
    amplitude_range: tuple[float, float] = (5.0, 25.0)
    sigma_range: tuple[float, float] = (12.0, 90.0)
    slope_range: tuple[float, float] = (-0.06, 0.06)
    value_range_target: tuple[float, float] = (-44.0, 44.0)
    noise_menu: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.image_size < 16:
            raise InvalidInputError("image_size must be >= 16")
        if self.count < 1:
            raise InvalidInputError("count must be >= 1")
        for name in ("n_gaussians_range", "amplitude_range", "sigma_range",
                     "slope_range", "value_range_target"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise InvalidInputError(f"{name} must be a non-empty interval, got ({lo}, {hi})")
        if self.n_gaussians_range[0] < 0:
            raise InvalidInputError("n_gaussians_range must be non-negative")

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["noise_menu"] = list(self.noise_menu)
        for name in ("n_gaussians_range", "amplitude_range", "sigma_range",
                     "slope_range", "value_range_target"):
            d[name] = list(d[name])
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "GenConfig":
        kw = dict(d)
        kw["noise_menu"] = tuple(kw.get("noise_menu", ()))
        for name in ("n_gaussians_range", "amplitude_range", "sigma_range",
                     "slope_range", "value_range_target"):
            kw[name] = tuple(kw[name])
        kw["n_gaussians_range"] = tuple(int(v) for v in kw["n_gaussians_range"])
        return cls(**kw)


def synth_phase(rng: np.random.Generator, config: GenConfig) -> np.ndarray:
    """One ground-truth phase surface: Gaussian mixture + ramp, range-limited.

    Each of k Gaussians (k uniform over n_gaussians_range) has a random sign,
    amplitude, center anywhere in the image, per-axis sigmas and rotation.
    A planar ramp a*x + b*y with slopes from slope_range is added, then the
    image is affinely rescaled onto value_range_target, but only when its raw
    values fall outside that interval. A zero-range surface is returned as is
    (the empty mixture with zero slopes is all zeros).
    """
    size = config.image_size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    phi = np.zeros((size, size), dtype=np.float64)

    k = int(rng.integers(config.n_gaussians_range[0], config.n_gaussians_range[1] + 1))
    for _ in range(k):
        amp = rng.uniform(*config.amplitude_range) * (1.0 if rng.random() < 0.5 else -1.0)
        cx = rng.uniform(0.0, size)
        cy = rng.uniform(0.0, size)
        sx = rng.uniform(*config.sigma_range)
        sy = rng.uniform(*config.sigma_range)
        theta = rng.uniform(0.0, np.pi)
        ct, st = np.cos(theta), np.sin(theta)
        u = (xx - cx) * ct + (yy - cy) * st
        v = -(xx - cx) * st + (yy - cy) * ct
        phi += amp * np.exp(-(u * u / (2.0 * sx * sx) + v * v / (2.0 * sy * sy)))

    a = rng.uniform(*config.slope_range)
    b = rng.uniform(*config.slope_range)
    phi += a * xx + b * yy

    lo_t, hi_t = config.value_range_target
    mn, mx = float(phi.min()), float(phi.max())
    if mx == mn:
        return phi
    if mn < lo_t or mx > hi_t:
        phi = lo_t + (phi - mn) * ((hi_t - lo_t) / (mx - mn))
    return phi


def _synth_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index, 0])


def _noise_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index, 1])


def _draw_snr(seed: int, index: int, menu: tuple[float, ...]):
    """SNR assignment for one image; uniform over the menu, or None if empty."""
    if not menu:
        return None, None
    rng = _noise_rng(seed, index)
    snr = float(menu[int(rng.integers(len(menu)))])
    return snr, rng


def render_pair(config: GenConfig, index: int) -> tuple[np.ndarray, np.ndarray, float | None]:
    """(wrapped float32, truth float32, snr_db or None) for one image index."""
    truth = synth_phase(_synth_rng(config.seed, index), config).astype(np.float32)
    snr, rng = _draw_snr(config.seed, index, config.noise_menu)
    pre_wrap = truth.astype(np.float64)
    if snr is not None:
        pre_wrap = pre_wrap + gaussian_noise_for_snr(pre_wrap, snr, rng)
    wrapped = wrap(pre_wrap).astype(np.float32)
    return wrapped, truth, snr


@dataclass(frozen=True)
class DatasetManifest:
    format_version: int
    count: int
    image_size: int
    snr_db: tuple[float | None, ...]
    config: GenConfig

    def to_json_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "dtype": "f32",
            "layout": "row-major",
            "count": self.count,
            "image_size": self.image_size,
            "snr_db": list(self.snr_db),
            "config": self.config.to_json_dict(),
        }


def generate_dataset(config: GenConfig, out_path: str | os.PathLike) -> DatasetManifest:
    """Write (wrapped, truth) pairs plus a manifest under ``out_path``.

    Fully deterministic from the config seed; rerunning with the same config
    yields byte-identical files.
    """
    out_path = os.fspath(out_path)
    os.makedirs(out_path, exist_ok=True)
    snrs = []
    with open(os.path.join(out_path, "wrapped.bin"), "wb") as fw, \
         open(os.path.join(out_path, "truth.bin"), "wb") as ft:
        for i in range(config.count):
            wrapped, truth, snr = render_pair(config, i)
            fw.write(wrapped.astype("<f4").tobytes())
            ft.write(truth.astype("<f4").tobytes())
            snrs.append(snr)
    manifest = DatasetManifest(
        format_version=FORMAT_VERSION,
        count=config.count,
        image_size=config.image_size,
        snr_db=tuple(snrs),
        config=config,
    )
    with open(os.path.join(out_path, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


class Dataset:
    """Read-only view of a stored dataset; images are memory-mapped."""

    def __init__(self, path: str | os.PathLike):
        path = os.fspath(path)
        manifest_path = os.path.join(path, "manifest.json")
        if not os.path.exists(manifest_path):
            raise DatasetError(f"no manifest.json under {path}")
        try:
            with open(manifest_path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DatasetError(f"unreadable manifest: {e}") from e
        if raw.get("format_version") != FORMAT_VERSION:
            raise DatasetVersionError(
                f"dataset format version {raw.get('format_version')!r}, expected {FORMAT_VERSION}")
        if raw.get("dtype") != "f32" or raw.get("layout") != "row-major":
            raise DatasetError("unsupported dtype or layout in manifest")
        self.path = path
        self.count = int(raw["count"])
        self.image_size = int(raw["image_size"])
        self.snr_db = tuple(None if s is None else float(s) for s in raw["snr_db"])
        self.config = GenConfig.from_json_dict(raw["config"])
        if len(self.snr_db) != self.count:
            raise DatasetError("manifest snr list length does not match count")
        n_values = self.count * self.image_size * self.image_size
        self._wrapped = self._map_file(os.path.join(path, "wrapped.bin"), n_values)
        self._truth = self._map_file(os.path.join(path, "truth.bin"), n_values)

    def _map_file(self, fname: str, n_values: int) -> np.memmap:
        if not os.path.exists(fname):
            raise DatasetError(f"missing data file {fname}")
        actual = os.path.getsize(fname)
        expected = n_values * 4
        if actual != expected:
            raise DatasetError(
                f"corrupt dataset: {fname} holds {actual} bytes, expected {expected}")
        mm = np.memmap(fname, dtype="<f4", mode="r")
        return mm.reshape(self.count, self.image_size, self.image_size)

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, i: int) -> tuple[np.ndarray, np.ndarray, float | None]:
        wrapped = np.array(self._wrapped[i], dtype=np.float32)
        truth = np.array(self._truth[i], dtype=np.float32)
        return wrapped, truth, self.snr_db[i]

    def __iter__(self):
        for i in range(self.count):
            yield self[i]

    def wrapped_batch(self, indices) -> np.ndarray:
        return np.array(self._wrapped[np.asarray(indices, dtype=np.int64)], dtype=np.float32)

    def truth_batch(self, indices) -> np.ndarray:
        return np.array(self._truth[np.asarray(indices, dtype=np.int64)], dtype=np.float32)


def load_dataset(path: str | os.PathLike) -> Dataset:
    """Open a dataset directory written by :func:`generate_dataset`."""
    return Dataset(path)


def split_indices(count: int, seed: int, train_count: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic train/test split: seeded shuffle, train prefix, test suffix.

    The default train share is 5/6 of the dataset, matching the 5000/1000
    protocol on a 6000-image set.
    """
    if train_count is None:
        train_count = (count * 5) // 6
    if not (0 < train_count < count):
        raise InvalidInputError(f"train_count {train_count} must split {count} images into two non-empty parts")
    perm = np.random.default_rng([seed, 424242]).permutation(count)
    return np.sort(perm[:train_count]), np.sort(perm[train_count:])
