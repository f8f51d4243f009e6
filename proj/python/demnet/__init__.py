"""DEMNET dementia MRI classification, Python bindings over the C++ core."""

from ._core import (  # noqa: F401
    CLASS_NAMES,
    ConfigError,
    DataError,
    Error,
    FormatError,
    IoError,
    Model,
    ShapeError,
    StaleCacheError,
    TrainingError,
    ValueError,
    conv2d,
    maxpool,
    metrics,
    prng_uniform,
    read_features,
    relu,
    run,
    sha256_hex,
    smote,
    softmax,
    split_indices,
    split_sizes,
    write_features,
)

__all__ = [name for name in dir() if not name.startswith("_")]
