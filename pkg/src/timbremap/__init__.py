"""timbremap: pitch-disentangled 2D timbre maps over a synthetic audio codec.

Two-stage pipeline: a curriculum-weighted VAE learns a 2D timbre latent whose
position encodes instrument identity but not pitch; a conditional
autoregressive transformer then generates embedding sequences from any
(timbre point, pitch) pair. Includes the evaluation and ablation protocol and
an HTTP service for interactive exploration.
"""

from . import autodiff, codec, dataset, evaluate, losses
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import (
    ConfigError,
    DatasetConfig,
    RunConfig,
    TrainingConfig,
    TransformerConfig,
    VaeConfig,
    desk_config,
    load_run_config,
    micro_config,
    paper_scale_config,
)
from .losses import LossBreakdown, LossWeights
from .transformer import ConditioningInput, TransformerModel, load_transformer, train_transformer
from .vae import VaeModel, load_vae, train_vae

__version__ = "0.1.0"

__all__ = [
    "autodiff", "codec", "dataset", "evaluate", "losses",
    "Checkpoint", "load_checkpoint", "save_checkpoint",
    "ConfigError", "DatasetConfig", "RunConfig", "TrainingConfig",
    "TransformerConfig", "VaeConfig",
    "desk_config", "load_run_config", "micro_config", "paper_scale_config",
    "LossBreakdown", "LossWeights",
    "ConditioningInput", "TransformerModel", "load_transformer", "train_transformer",
    "VaeModel", "load_vae", "train_vae",
    "__version__",
]
