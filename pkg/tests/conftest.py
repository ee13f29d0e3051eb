import pytest

from sqdunwrap import ArchConfig, GenConfig, generate_dataset

TINY_ARCH = ArchConfig(encoder_filters=(4, 8), decoder_filters=(8, 4),
                       sqd_units=2, sqd_fusion_filters=4)


@pytest.fixture(scope="session")
def tiny_ds_dir(tmp_path_factory):
    """24 noise-free 32x32 pairs; enough for fast training smoke tests."""
    path = tmp_path_factory.mktemp("data") / "tiny"
    cfg = GenConfig(image_size=32, count=24, sigma_range=(6.0, 16.0), seed=11)
    generate_dataset(cfg, path)
    return str(path)


@pytest.fixture(scope="session")
def tiny_noisy_ds_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "tiny_noisy"
    cfg = GenConfig(image_size=32, count=24, sigma_range=(6.0, 16.0), seed=12,
                    noise_menu=(0.0, 10.0, 60.0))
    generate_dataset(cfg, path)
    return str(path)
