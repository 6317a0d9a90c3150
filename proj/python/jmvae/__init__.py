"""Joint multimodal variational autoencoders (JMVAE) with VAE/CVAE baselines."""

from ._jmvae import (
    CheckpointError,
    Dataset,
    IdxError,
    Model,
    TrainingError,
    centroid_separation,
    load_idx,
    make_toy,
    split,
    warmup_beta,
)

__all__ = [
    "CheckpointError",
    "Dataset",
    "IdxError",
    "Model",
    "TrainingError",
    "centroid_separation",
    "load_idx",
    "make_toy",
    "split",
    "warmup_beta",
]
