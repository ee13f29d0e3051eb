"""Report assembly: JSON run reports, noise-sweep CSVs, text tables, PGM export.

Run reports keep every deterministic quantity under the ``report`` key and
hash exactly that subtree; wall-clock measurements live in the separate
``timing`` key so reruns with identical seeds produce identical report
sections and hashes.
"""

from __future__ import annotations

import hashlib
import io
import json
import os

import numpy as np

from .errors import InvalidInputError


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_of(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def code_version_hash() -> str:
    """Digest of this package's source files, for provenance stamping."""
    pkg_dir = os.path.dirname(os.path.abspath(__file__))
    h = hashlib.sha256()
    for root, dirs, files in sorted(os.walk(pkg_dir)):
        dirs.sort()
        for fname in sorted(files):
            if not fname.endswith(".py"):
                continue
            rel = os.path.relpath(os.path.join(root, fname), pkg_dir)
            h.update(rel.encode("utf-8"))
            with open(os.path.join(root, fname), "rb") as f:
                h.update(f.read())
    return h.hexdigest()


def assemble_report(method_results: dict[str, dict], *, dataset_path, split, seed,
                    congruence_tol, config_echo, artifact_hashes) -> dict:
    """Combine per-method evaluation results into one run report document."""
    report = {
        "dataset_path": os.fspath(dataset_path),
        "split": split,
        "seed": seed,
        "congruence_tol": congruence_tol,
        "methods": {name: r["report"] for name, r in method_results.items()},
        "config_echo": config_echo,
        "artifact_hashes": artifact_hashes,
    }
    return {
        "report": report,
        "report_hash": sha256_of(canonical_json(report).encode("utf-8")),
        "timing": {name: r["timing"] for name, r in method_results.items()},
    }


def write_report(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def sweep_csv(method_results: dict[str, dict]) -> str:
    """Per-SNR NRMSE series, one row per (snr level, method)."""
    buf = io.StringIO()
    buf.write("snr_db,method,mean_nrmse_pct,n_images\n")
    rows = []
    for name, r in method_results.items():
        for key, bucket in r["report"]["per_snr"].items():
            sort = (1, 0.0) if key == "none" else (0, float(key))
            rows.append((sort, key, name, bucket["mean_nrmse_pct"], bucket["n_images"]))
    for _, key, name, mean, n in sorted(rows):
        buf.write(f"{key},{name},{mean:.6f},{n}\n")
    return buf.getvalue()


def text_table(method_results: dict[str, dict]) -> str:
    header = f"{'method':<10} {'mean NRMSE %':>13} {'median %':>10} {'congruence':>11} {'s/image':>9}"
    lines = [header, "-" * len(header)]
    for name, r in method_results.items():
        rep, tim = r["report"], r["timing"]
        lines.append(f"{name:<10} {rep['mean_nrmse_pct']:>13.4f} "
                     f"{rep['median_nrmse_pct']:>10.4f} "
                     f"{rep['congruence_fraction_mean']:>11.4f} "
                     f"{tim['mean_s_per_image']:>9.4f}")
    return "\n".join(lines)


def write_pgm16(path, image) -> None:
    """Min-max normalized 16-bit grayscale PGM plus a JSON sidecar.

    Mapping: min -> 0, max -> 65535, linear in between (a constant image maps
    to all zeros). The sidecar records min/max so values can be recovered.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError(f"PGM export needs a 2-D image, got shape {img.shape}")
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        scaled = np.round((img - lo) * (65535.0 / (hi - lo)))
    else:
        scaled = np.zeros_like(img)
    data = scaled.astype(">u2")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(data.tobytes())
    with open(os.fspath(path) + ".json", "w", encoding="utf-8") as f:
        json.dump({"min": lo, "max": hi, "maxval": 65535,
                   "mapping": "linear: min -> 0, max -> 65535, big-endian rows"},
                  f, indent=2, sort_keys=True)
        f.write("\n")
