"""Command-line surface: dataset generation, training, unwrapping, comparison.

Exit codes: 0 success, 1 user error (bad flags, missing files, incompatible
inputs), 2 internal error. Every command is deterministic given its flags and
seeds; the only environment knob is SQDUNWRAP_THREADS, which caps the worker
count used when evaluating classical methods across images.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from .baseline_qgpu import qgpu_unwrap
from .datagen import GenConfig, generate_dataset, load_dataset
from .errors import SqdUnwrapError
from .losses import LossWeights
from .network import ArchConfig, UnwrapNet
from .phase_core import congruence_fraction, nrmse
from .reporting import (assemble_report, code_version_hash, sha256_file, sweep_csv,
                        text_table, write_pgm16, write_report)
from .training import (TrainConfig, evaluate_method, select_split, train)


class UserError(SqdUnwrapError):
    pass


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v != "")
    except ValueError as e:
        raise UserError(f"expected a comma-separated list of numbers, got {text!r}") from e


def _parse_pair(text: str) -> tuple[float, float]:
    vals = _parse_floats(text)
    if len(vals) != 2:
        raise UserError(f"expected 'lo,hi', got {text!r}")
    return vals[0], vals[1]


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v != "")
    except ValueError as e:
        raise UserError(f"expected a comma-separated list of integers, got {text!r}") from e


def _check_size_for_stages(size: int, stages: int) -> None:
    div = 2 ** stages
    if size % div:
        raise UserError(
            f"image size {size} is not divisible by 2^{stages} = {div}; "
            f"pick a multiple of {div} or change --stages")


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    _check_size_for_stages(args.size, args.stages)
    gaussians = _parse_ints(args.gaussians)
    if len(gaussians) != 2:
        raise UserError(f"--gaussians expects 'lo,hi', got {args.gaussians!r}")
    config = GenConfig(
        image_size=args.size,
        count=args.count,
        n_gaussians_range=(gaussians[0], gaussians[1]),
        amplitude_range=_parse_pair(args.amplitude),
        sigma_range=_parse_pair(args.sigma),
        slope_range=_parse_pair(args.slopes),
        value_range_target=_parse_pair(args.value_range),
        noise_menu=_parse_floats(args.noise) if args.noise else (),
        seed=args.seed,
    )
    manifest = generate_dataset(config, args.out)
    levels = sorted({s for s in manifest.snr_db if s is not None})
    print(f"wrote {manifest.count} image pairs ({args.size}x{args.size}) to {args.out}")
    print(f"noise levels: {levels if levels else 'none (noise free)'}")
    print(f"seed: {config.seed}")
    return 0


# ---------------------------------------------------------------------------
# train


def _arch_from_args(args) -> ArchConfig:
    filters = _parse_ints(args.filters)
    if not filters:
        raise UserError("--filters needs at least one stage")
    return ArchConfig(
        encoder_filters=filters,
        decoder_filters=tuple(reversed(filters)),
        sqd_units=args.units,
        sqd_fusion_filters=args.fusion,
        use_sqd=not args.no_sqd,
    )


def cmd_train(args) -> int:
    arch = _arch_from_args(args)
    ds = load_dataset(args.dataset)
    _check_size_for_stages(ds.image_size, arch.stages)
    config = TrainConfig(
        dataset_path=args.dataset,
        arch=arch,
        loss=args.loss,
        loss_weights=LossWeights(args.lambda1, args.lambda2),
        lr=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        train_count=args.train_count,
    )
    _, history = train(config, checkpoint_path=args.checkpoint,
                       history_path=args.history, verbose=not args.quiet)
    best = history["best_epoch"]
    best_rec = next(r for r in history["epochs"] if r["epoch"] == best)
    print(f"best epoch {best}: test NRMSE {best_rec['test_nrmse_pct']:.3f}%")
    print(f"checkpoint: {args.checkpoint}")
    print(f"history: {args.history}")
    return 0


# ---------------------------------------------------------------------------
# unwrap


def _load_input_image(args):
    if args.input is not None:
        if not os.path.exists(args.input):
            raise UserError(f"input file not found: {args.input}")
        arr = np.load(args.input)
        if arr.ndim != 2:
            raise UserError(f"expected a 2-D phase array in {args.input}, got shape {arr.shape}")
        return np.asarray(arr, dtype=np.float32), None
    if args.dataset is None:
        raise UserError("provide either --input FILE.npy or --dataset DIR --index I")
    ds = load_dataset(args.dataset)
    if not (0 <= args.index < ds.count):
        raise UserError(f"--index {args.index} out of range for {ds.count} images")
    wrapped, truth, _ = ds[args.index]
    return wrapped, truth


def cmd_unwrap(args) -> int:
    wrapped, truth = _load_input_image(args)
    if args.method == "qgpu":
        pred = qgpu_unwrap(wrapped)
    else:
        if args.checkpoint is None:
            raise UserError("method 'model' requires --checkpoint")
        net = UnwrapNet.load(args.checkpoint)
        div = 2 ** net.config.stages
        if wrapped.shape[0] % div or wrapped.shape[1] % div:
            raise UserError(
                f"image dims {wrapped.shape} not divisible by 2^{net.config.stages}")
        pred = net.predict(wrapped[None].astype(np.float32))[0]
    np.save(args.out, np.asarray(pred, dtype=np.float32))
    print(f"unwrapped phase written to {args.out}")
    print(f"congruence fraction: {congruence_fraction(pred, wrapped, args.tol):.4f}")
    if truth is not None:
        print(f"NRMSE vs stored truth: {nrmse(pred, truth):.4f}%")
    if args.export_pgm:
        write_pgm16(args.export_pgm, pred)
        print(f"16-bit PGM preview: {args.export_pgm} (+ sidecar .json)")
    return 0


# ---------------------------------------------------------------------------
# compare


def cmd_compare(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if "identity" not in methods:
        methods.append("identity")  # context row, always present
    ds = load_dataset(args.dataset)
    net = None
    seed = args.seed
    if "model" in methods:
        if args.checkpoint is None:
            raise UserError("method 'model' requires --checkpoint")
        net = UnwrapNet.load(args.checkpoint)
        if seed is None:
            seed = int(getattr(net, "loaded_meta", {}).get("train_config", {}).get("seed", 0))
    if seed is None:
        seed = 0
    indices = select_split(ds, args.split, seed, args.train_count)

    results = {}
    for m in methods:
        results[m] = evaluate_method(m, ds, indices, net=net, congruence_tol=args.tol)

    hashes = {
        "dataset_manifest": sha256_file(os.path.join(args.dataset, "manifest.json")),
        "checkpoint": sha256_file(args.checkpoint) if args.checkpoint else None,
        "code_version": code_version_hash(),
    }
    doc = assemble_report(results, dataset_path=args.dataset, split=args.split,
                          seed=seed, congruence_tol=args.tol,
                          config_echo=ds.config.to_json_dict(),
                          artifact_hashes=hashes)
    os.makedirs(args.out_dir, exist_ok=True)
    report_path = os.path.join(args.out_dir, "report.json")
    csv_path = os.path.join(args.out_dir, "sweep.csv")
    write_report(doc, report_path)
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write(sweep_csv(results))
    print(text_table(results))
    print(f"\nreport: {report_path}")
    print(f"noise sweep CSV: {csv_path}")
    print(f"report hash: {doc['report_hash']}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sqdunwrap",
        description="Phase unwrapping toolkit: synthetic data, LSTM-augmented "
                    "encoder-decoder regression, and classical baselines.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic wrapped/true phase dataset")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--size", type=int, default=256)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise", default="", help="comma list of SNR dB levels, e.g. 0,5,10,20,60")
    g.add_argument("--gaussians", default="3,12", help="lo,hi count of mixture components")
    g.add_argument("--amplitude", default="5,25", help="lo,hi absolute amplitude")
    g.add_argument("--sigma", default="12,90", help="lo,hi per-axis sigma in pixels")
    g.add_argument("--slopes", default="-0.06,0.06", help="lo,hi ramp slope (rad/px)")
    g.add_argument("--value-range", default="-44,44", help="lo,hi target value range")
    g.add_argument("--stages", type=int, default=4,
                   help="encoder stages the images must support (size divisibility check)")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train the unwrapping network on a dataset")
    t.add_argument("--dataset", required=True)
    t.add_argument("--checkpoint", required=True, help="output checkpoint file")
    t.add_argument("--history", required=True, help="output history JSON file")
    t.add_argument("--loss", choices=("lc", "mse"), default="lc")
    t.add_argument("--lambda1", type=float, default=1.0)
    t.add_argument("--lambda2", type=float, default=0.1)
    t.add_argument("--no-sqd", action="store_true",
                   help="ablation: plain encoder-decoder without the SQD-LSTM")
    t.add_argument("--filters", default="32,64,128,256", help="encoder filters per stage")
    t.add_argument("--units", type=int, default=32, help="LSTM units per direction")
    t.add_argument("--fusion", type=int, default=64, help="fusion conv filters")
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--batch", type=int, default=8)
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--train-count", type=int, default=None,
                   help="train images (default: 5/6 of the dataset)")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    u = sub.add_parser("unwrap", help="unwrap one image with the model or QGPU")
    u.add_argument("--input", help="2-D .npy wrapped phase file")
    u.add_argument("--dataset", help="dataset directory (with --index)")
    u.add_argument("--index", type=int, default=0)
    u.add_argument("--method", choices=("model", "qgpu"), required=True)
    u.add_argument("--checkpoint")
    u.add_argument("--out", required=True, help="output .npy phase file")
    u.add_argument("--export-pgm", help="also write a 16-bit grayscale PGM preview")
    u.add_argument("--tol", type=float, default=1e-3)
    u.set_defaults(func=cmd_unwrap)

    c = sub.add_parser("compare", help="score methods on a dataset and write a report")
    c.add_argument("--dataset", required=True)
    c.add_argument("--methods", default="qgpu,identity",
                   help="comma list from: model,qgpu,identity,oracle")
    c.add_argument("--checkpoint")
    c.add_argument("--out-dir", required=True)
    c.add_argument("--split", choices=("train", "test", "all"), default="test")
    c.add_argument("--seed", type=int, default=None,
                   help="split seed (default: the model's training seed, else 0)")
    c.add_argument("--train-count", type=int, default=None)
    c.add_argument("--tol", type=float, default=1e-3)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UserError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SqdUnwrapError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
