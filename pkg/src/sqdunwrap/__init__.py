"""2-D phase unwrapping toolkit.

Synthetic wrapped-phase data generation, an encoder-decoder regression
network augmented with a spatial quad-directional LSTM, a composite
variance / total-variation training loss, a classical quality-guided
baseline, and an NRMSE evaluation harness.
"""

from .baseline_qgpu import qgpu_unwrap, quality_map, remove_mean_offset
from .datagen import (Dataset, DatasetManifest, GenConfig, generate_dataset,
                      load_dataset, render_pair, split_indices, synth_phase)
from .errors import (CheckpointError, DatasetError, DatasetVersionError,
                     DegenerateSignalError, InvalidInputError, SqdUnwrapError,
                     TrainingDivergedError)
from .losses import LossWeights, l_c, l_tv, l_var, mse
from .network import ArchConfig, UnwrapNet, build
from .phase_core import (NoiseSpec, add_noise, congruence_fraction, itoh_unwrap_1d,
                         nrmse, wrap, wrap_scalar)
from .sqd_lstm import DirectionalSequences, SQDModule, extract_sequences, reassemble
from .training import TrainConfig, evaluate_checkpoint, evaluate_method, train

__version__ = "0.1.0"

__all__ = [
    "ArchConfig", "CheckpointError", "Dataset", "DatasetError", "DatasetManifest",
    "DatasetVersionError", "DegenerateSignalError", "DirectionalSequences",
    "GenConfig", "InvalidInputError", "LossWeights", "NoiseSpec", "SQDModule",
    "SqdUnwrapError", "TrainConfig", "TrainingDivergedError", "UnwrapNet",
    "add_noise", "build", "congruence_fraction", "evaluate_checkpoint",
    "evaluate_method", "extract_sequences", "generate_dataset", "itoh_unwrap_1d",
    "l_c", "l_tv", "l_var", "load_dataset", "mse", "nrmse", "qgpu_unwrap",
    "quality_map", "reassemble", "remove_mean_offset", "render_pair",
    "split_indices", "synth_phase", "train", "wrap", "wrap_scalar",
]
