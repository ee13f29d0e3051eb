"""Training loop, checkpoint selection, and the evaluation harness.

Training is deterministic given the config seed: the train/test split, the
per-epoch shuffles, and the weight initialization all derive from it. The
checkpoint of the best test-NRMSE epoch is retained. Evaluation produces a
per-method report with per-image NRMSE, summary stats, per-SNR buckets, the
congruence fraction, and wall time per image; wall times are informational
and never take part in determinism checks.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baseline_qgpu import qgpu_unwrap, remove_mean_offset
from .datagen import Dataset, load_dataset, split_indices
from .errors import InvalidInputError, TrainingDivergedError
from .losses import LossWeights, l_tv, l_var, loss_and_grad
from .network import ArchConfig, UnwrapNet
from .nn_blocks import Adam, zero_grads
from .phase_core import congruence_fraction, nrmse

EVAL_BATCH = 8


@dataclass(frozen=True)
class TrainConfig:
    dataset_path: str
    arch: ArchConfig = ArchConfig()
    loss: str = "lc"  # "lc" or "mse"
    loss_weights: LossWeights = field(default_factory=LossWeights)
    lr: float = 0.001
    batch_size: int = 8
    epochs: int = 10
    seed: int = 0
    train_count: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.lr < 0:
            raise InvalidInputError("lr must be non-negative")
        if self.loss not in ("lc", "mse"):
            raise InvalidInputError(f"unknown loss {self.loss!r}")

    def to_json_dict(self) -> dict:
        return {
            "dataset_path": self.dataset_path,
            "arch": self.arch.to_json_dict(),
            "loss": self.loss,
            "loss_weights": {"lambda1": self.loss_weights.lambda1,
                             "lambda2": self.loss_weights.lambda2},
            "lr": self.lr,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "train_count": self.train_count,
        }


def _snapshot(params):
    return {p.name: p.value.copy() for p in params}


def _restore(params, snap):
    for p in params:
        p.value[...] = snap[p.name]


def _mean_test_nrmse(net: UnwrapNet, ds: Dataset, test_idx) -> float:
    vals = []
    for s0 in range(0, len(test_idx), EVAL_BATCH):
        chunk = test_idx[s0:s0 + EVAL_BATCH]
        pred = net.predict(ds.wrapped_batch(chunk))
        truth = ds.truth_batch(chunk)
        vals.extend(nrmse(pred[i], truth[i]) for i in range(len(chunk)))
    return float(np.mean(vals))


def train(config: TrainConfig, checkpoint_path=None, history_path=None,
          verbose: bool = False):
    """Train per ``config``; returns (best network, history dict).

    The returned network carries the parameters of the epoch with the lowest
    test NRMSE. Optionally writes the checkpoint and the history JSON.
    """
    ds = load_dataset(config.dataset_path)
    train_idx, test_idx = split_indices(ds.count, config.seed, config.train_count)
    train_set = np.zeros(ds.count, dtype=bool)
    train_set[train_idx] = True

    net = UnwrapNet(config.arch, np.random.default_rng([config.seed, 1]))
    params = net.params()
    opt = Adam(params, lr=config.lr)

    history = {
        "config": config.to_json_dict(),
        "split": {"train": [int(i) for i in train_idx],
                  "test": [int(i) for i in test_idx]},
        "param_counts": net.param_counts(),
        "epochs": [],
        "wall_time_s": [],
        "best_epoch": None,
    }

    best = (np.inf, None, None)  # (test nrmse, epoch, snapshot)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = np.random.default_rng([config.seed, 2, epoch]).permutation(train_idx)
        if not train_set[order].all():
            raise AssertionError("internal split audit failed: non-train index scheduled")
        loss_sum = 0.0
        seen = 0
        for b0 in range(0, len(order), config.batch_size):
            batch = order[b0:b0 + config.batch_size]
            xb = ds.wrapped_batch(batch)[..., None]
            yb = ds.truth_batch(batch)[..., None]
            pred = net.forward(xb, train=True)
            value, grad = loss_and_grad(config.loss, pred, yb, config.loss_weights)
            if not np.isfinite(value):
                parts = ""
                if config.loss == "lc":
                    parts = (f" (l_var={l_var(pred, yb):.6g},"
                             f" l_tv={l_tv(pred, yb):.6g})")
                raise TrainingDivergedError(
                    f"non-finite loss {value} at epoch {epoch}, "
                    f"batch starting at index {b0}{parts}")
            zero_grads(params)
            net.backward(grad.astype(net.dtype))
            opt.step()
            loss_sum += value * len(batch)
            seen += len(batch)
        test_nrmse = _mean_test_nrmse(net, ds, test_idx)
        record = {"epoch": epoch,
                  "train_loss": loss_sum / seen,
                  "test_nrmse_pct": test_nrmse}
        history["epochs"].append(record)
        history["wall_time_s"].append(time.perf_counter() - t0)
        if verbose:
            print(f"epoch {epoch}: train {config.loss} {record['train_loss']:.5f}, "
                  f"test NRMSE {test_nrmse:.3f}%", flush=True)
        if test_nrmse < best[0]:
            best = (test_nrmse, epoch, _snapshot(params))
    history["best_epoch"] = best[1]
    _restore(params, best[2])

    if checkpoint_path is not None:
        net.save(checkpoint_path, extra_meta={
            "train_config": config.to_json_dict(),
            "best_epoch": best[1],
            "best_test_nrmse_pct": best[0],
        })
    if history_path is not None:
        save_history(history, history_path)
    return net, history


def save_history(history: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(history, f, indent=2, sort_keys=True)
        f.write("\n")


def deterministic_history(history: dict) -> dict:
    """History with the wall-clock fields stripped, for reproducibility checks."""
    out = {k: v for k, v in history.items() if k != "wall_time_s"}
    return out


# ---------------------------------------------------------------------------
# evaluation

METHODS = ("model", "qgpu", "identity", "oracle")


def _worker_count() -> int:
    try:
        n = int(os.environ.get("SQDUNWRAP_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def _ordered_map(fn, items):
    """Map across images, optionally threaded; results keep input order."""
    workers = _worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _predict_model(net, ds, indices):
    preds = np.empty((len(indices), ds.image_size, ds.image_size), dtype=np.float32)
    elapsed = 0.0
    for s0 in range(0, len(indices), EVAL_BATCH):
        chunk = indices[s0:s0 + EVAL_BATCH]
        xb = ds.wrapped_batch(chunk)
        t0 = time.perf_counter()
        preds[s0:s0 + len(chunk)] = net.predict(xb)
        elapsed += time.perf_counter() - t0
    return preds, elapsed


def evaluate_method(method: str, ds: Dataset, indices, net: UnwrapNet | None = None,
                    congruence_tol: float = 1e-3) -> dict:
    """Score one method on the given dataset indices.

    QGPU metrics are computed after removing the best constant offset (its
    global 2*pi anchor is arbitrary); the congruence fraction always uses the
    raw prediction. Returns a dict with a deterministic ``report`` part and a
    separate ``timing`` part.
    """
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}, expected one of {METHODS}")
    if method == "model" and net is None:
        raise InvalidInputError("method 'model' needs a network or checkpoint")
    indices = np.asarray(indices, dtype=np.int64)

    offset_corrected = method == "qgpu"
    per_nrmse = []
    per_congruence = []
    elapsed = 0.0
    preds = None
    if method == "model":
        preds, elapsed = _predict_model(net, ds, indices)
    elif method == "qgpu":
        t0 = time.perf_counter()
        preds = _ordered_map(lambda i: qgpu_unwrap(ds[int(i)][0]), list(indices))
        elapsed = time.perf_counter() - t0
    for row, i in enumerate(indices):
        wrapped, truth, _ = ds[int(i)]
        if preds is not None:
            pred = preds[row]
        elif method == "identity":
            pred = wrapped
        else:
            pred = truth
        per_congruence.append(congruence_fraction(pred, wrapped, congruence_tol))
        scored = remove_mean_offset(pred, truth) if offset_corrected else pred
        per_nrmse.append(nrmse(scored, truth))

    snr_keys = ["none" if ds.snr_db[int(i)] is None else f"{ds.snr_db[int(i)]:g}"
                for i in indices]
    buckets = {}
    for key, v in zip(snr_keys, per_nrmse):
        buckets.setdefault(key, []).append(v)
    per_snr = {k: {"mean_nrmse_pct": float(np.mean(v)), "n_images": len(v)}
               for k, v in sorted(buckets.items(), key=_snr_sort_key)}

    report = {
        "method": method,
        "n_images": len(indices),
        "offset_corrected": offset_corrected,
        "per_image_nrmse_pct": [float(v) for v in per_nrmse],
        "mean_nrmse_pct": float(np.mean(per_nrmse)),
        "median_nrmse_pct": float(np.median(per_nrmse)),
        "congruence_fraction_mean": float(np.mean(per_congruence)),
        "per_snr": per_snr,
    }
    timing = {"mean_s_per_image": elapsed / max(1, len(indices)),
              "total_s": elapsed}
    return {"report": report, "timing": timing}


def _snr_sort_key(item):
    key = item[0]
    return (1, 0.0) if key == "none" else (0, float(key))


def evaluate_checkpoint(checkpoint_path, dataset_path, split: str = "test",
                        seed: int | None = None, train_count: int | None = None,
                        congruence_tol: float = 1e-3) -> dict:
    """Evaluate a stored model checkpoint on a dataset split."""
    net = UnwrapNet.load(checkpoint_path)
    ds = load_dataset(dataset_path)
    meta = getattr(net, "loaded_meta", {})
    if seed is None:
        seed = int(meta.get("train_config", {}).get("seed", 0))
    indices = select_split(ds, split, seed, train_count)
    return evaluate_method("model", ds, indices, net=net, congruence_tol=congruence_tol)


def select_split(ds: Dataset, split: str, seed: int, train_count: int | None = None):
    if split == "all":
        return np.arange(ds.count, dtype=np.int64)
    train_idx, test_idx = split_indices(ds.count, seed, train_count)
    if split == "train":
        return train_idx
    if split == "test":
        return test_idx
    raise InvalidInputError(f"unknown split {split!r}, expected train/test/all")
