import json

import numpy as np
import pytest

from sqdunwrap import (DatasetError, DatasetVersionError, GenConfig, InvalidInputError,
                       generate_dataset, load_dataset, render_pair, split_indices,
                       synth_phase, wrap)
from sqdunwrap.datagen import _draw_snr


def _toy_config(**kw):
    base = dict(image_size=32, count=4, sigma_range=(6.0, 20.0), seed=1)
    base.update(kw)
    return GenConfig(**base)


class TestSynthPhase:
    def test_empty_mixture_is_zeros(self):
        cfg = GenConfig(image_size=32, count=1, n_gaussians_range=(0, 0),
                        slope_range=(0.0, 0.0))
        phi = synth_phase(np.random.default_rng(0), cfg)
        np.testing.assert_array_equal(phi, np.zeros((32, 32)))

    def test_single_positive_gaussian_peaks_at_center(self):
        cfg = GenConfig(image_size=64, count=1, n_gaussians_range=(1, 1),
                        amplitude_range=(10.0, 10.0), sigma_range=(8.0, 8.0),
                        slope_range=(0.0, 0.0))
        rng = np.random.default_rng(3)
        # force the positive sign by scanning seeds; sign is a fair coin
        for seed in range(20):
            rng = np.random.default_rng(seed)
            phi = synth_phase(rng, cfg)
            if phi.max() > 0.5:
                break
        assert phi.max() > 0
        # unimodal: a single maximum dominates its surroundings
        peak = np.unravel_index(np.argmax(phi), phi.shape)
        assert phi[peak] == phi.max()
        assert (phi >= -1e-9).all()  # positive amplitude only

    def test_values_within_target_range(self):
        cfg = GenConfig(image_size=64, count=1)
        lo, hi = cfg.value_range_target
        for seed in range(300):
            phi = synth_phase(np.random.default_rng(seed), cfg)
            assert phi.min() >= lo - 1e-9
            assert phi.max() <= hi + 1e-9

    def test_rescale_only_when_outside_target(self):
        cfg = GenConfig(image_size=32, count=1, n_gaussians_range=(1, 1),
                        amplitude_range=(5.0, 5.0), sigma_range=(6.0, 6.0),
                        slope_range=(0.0, 0.0))
        phi = synth_phase(np.random.default_rng(5), cfg)
        # raw range is at most ~5, well inside [-44, 44]: untouched by rescale
        assert phi.max() <= 5.0 + 1e-9
        assert phi.max() > 0.5 or phi.min() < -0.5

    def test_deterministic_given_stream(self):
        cfg = _toy_config()
        a = synth_phase(np.random.default_rng(42), cfg)
        b = synth_phase(np.random.default_rng(42), cfg)
        np.testing.assert_array_equal(a, b)

    def test_smoothness_of_clean_phase(self):
        # adjacent differences of the clean surface stay below pi (99th pct)
        cfg = GenConfig(image_size=256, count=1)
        deltas = []
        for seed in range(100):
            phi = synth_phase(np.random.default_rng(seed), cfg)
            deltas.append(np.abs(np.diff(phi, axis=0)).ravel())
            deltas.append(np.abs(np.diff(phi, axis=1)).ravel())
        all_d = np.concatenate(deltas)
        assert np.percentile(all_d, 99) < np.pi

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            GenConfig(image_size=8)
        with pytest.raises(InvalidInputError):
            GenConfig(count=0)
        with pytest.raises(InvalidInputError):
            GenConfig(sigma_range=(5.0, 2.0))


class TestGenerateLoad:
    def test_round_trip(self, tmp_path):
        cfg = _toy_config()
        manifest = generate_dataset(cfg, tmp_path / "ds")
        assert manifest.count == cfg.count
        ds = load_dataset(tmp_path / "ds")
        assert len(ds) == cfg.count
        for i, (wrapped, truth, snr) in enumerate(ds):
            ew, et, esnr = render_pair(cfg, i)
            np.testing.assert_array_equal(wrapped, ew)
            np.testing.assert_array_equal(truth, et)
            assert snr == esnr

    def test_byte_identical_reruns(self, tmp_path):
        cfg = _toy_config(count=10, seed=7)
        generate_dataset(cfg, tmp_path / "a")
        generate_dataset(cfg, tmp_path / "b")
        for fname in ("manifest.json", "wrapped.bin", "truth.bin"):
            assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()

    def test_noise_free_wrapped_equals_wrap_of_truth(self, tmp_path):
        cfg = _toy_config(count=3)
        generate_dataset(cfg, tmp_path / "ds")
        ds = load_dataset(tmp_path / "ds")
        for wrapped, truth, snr in ds:
            assert snr is None
            rewrapped = wrap(truth.astype(np.float64)).astype(np.float32)
            np.testing.assert_array_equal(wrapped, rewrapped)

    def test_wrapped_values_in_principal_interval(self, tmp_path):
        cfg = _toy_config(count=4, noise_menu=(0.0, 10.0))
        generate_dataset(cfg, tmp_path / "ds")
        ds = load_dataset(tmp_path / "ds")
        for wrapped, _, _ in ds:
            assert (wrapped > -np.pi).all() and (wrapped <= np.pi).all()

    def test_noisy_pairs_store_clean_truth(self, tmp_path):
        noisy = _toy_config(count=4, noise_menu=(0.0,))
        clean = _toy_config(count=4)
        generate_dataset(noisy, tmp_path / "noisy")
        generate_dataset(clean, tmp_path / "clean")
        ds_noisy = load_dataset(tmp_path / "noisy")
        ds_clean = load_dataset(tmp_path / "clean")
        for (w_n, t_n, s_n), (w_c, t_c, _) in zip(ds_noisy, ds_clean):
            np.testing.assert_array_equal(t_n, t_c)  # truth unaffected by noise
            assert s_n == 0.0
            assert np.abs(w_n - w_c).max() > 0.0  # inputs differ

    def test_menu_assignment_near_uniform(self):
        menu = (0.0, 5.0, 10.0, 20.0, 60.0)
        counts = {m: 0 for m in menu}
        n = 5000
        for i in range(n):
            snr, _ = _draw_snr(123, i, menu)
            counts[snr] += 1
        for m in menu:
            assert abs(counts[m] / n - 0.2) < 0.03

    def test_manifest_contents(self, tmp_path):
        cfg = _toy_config(count=5, noise_menu=(0.0, 5.0))
        generate_dataset(cfg, tmp_path / "ds")
        raw = json.loads((tmp_path / "ds" / "manifest.json").read_text())
        assert raw["format_version"] == 1
        assert raw["dtype"] == "f32"
        assert raw["layout"] == "row-major"
        assert raw["count"] == 5
        assert len(raw["snr_db"]) == 5
        assert set(raw["snr_db"]) <= {0.0, 5.0}
        assert raw["config"]["seed"] == cfg.seed

    def test_truncated_file_rejected(self, tmp_path):
        cfg = _toy_config(count=3)
        generate_dataset(cfg, tmp_path / "ds")
        path = tmp_path / "ds" / "truth.bin"
        path.write_bytes(path.read_bytes()[:-100])
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "ds")

    def test_version_mismatch_rejected(self, tmp_path):
        cfg = _toy_config(count=2)
        generate_dataset(cfg, tmp_path / "ds")
        mpath = tmp_path / "ds" / "manifest.json"
        raw = json.loads(mpath.read_text())
        raw["format_version"] = 999
        mpath.write_text(json.dumps(raw))
        with pytest.raises(DatasetVersionError):
            load_dataset(tmp_path / "ds")

    def test_missing_manifest_rejected(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "nothing_here")


class TestSplit:
    def test_default_five_sixths(self):
        train, test = split_indices(600, seed=0)
        assert len(train) == 500 and len(test) == 100
        assert set(train) | set(test) == set(range(600))
        assert set(train) & set(test) == set()

    def test_paper_scale_split(self):
        train, test = split_indices(6000, seed=1)
        assert len(train) == 5000 and len(test) == 1000

    def test_deterministic(self):
        a = split_indices(100, seed=5)
        b = split_indices(100, seed=5)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_different_seeds_differ(self):
        a, _ = split_indices(100, seed=1)
        b, _ = split_indices(100, seed=2)
        assert not np.array_equal(a, b)

    def test_explicit_train_count(self):
        train, test = split_indices(20, seed=0, train_count=15)
        assert len(train) == 15 and len(test) == 5

    def test_degenerate_split_rejected(self):
        with pytest.raises(InvalidInputError):
            split_indices(10, seed=0, train_count=10)
