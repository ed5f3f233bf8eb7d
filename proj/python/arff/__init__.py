"""Adaptive random Fourier features: training, presets and oracles."""

from ._arff import (
    ArffError,
    ConfigError,
    FormatError,
    IoError,
    SolverError,
    __version__,
    cg_solve,
    dense_solve,
    evaluate_model,
    load_idx_images,
    load_idx_labels,
    oracle,
    preset_names,
    relative_l2_error,
    run_experiment,
    train,
)

__all__ = [
    "ArffError",
    "ConfigError",
    "FormatError",
    "IoError",
    "SolverError",
    "__version__",
    "cg_solve",
    "dense_solve",
    "evaluate_model",
    "load_idx_images",
    "load_idx_labels",
    "oracle",
    "preset_names",
    "relative_l2_error",
    "run_experiment",
    "train",
]
