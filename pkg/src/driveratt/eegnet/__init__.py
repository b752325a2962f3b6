from .model import EEGNetConfig, EEGNetModel, TrainHistory, bce_loss, shape_trace
from .training import (
    bands_config,
    bands_to_tensor,
    epochs_to_tensor,
    random_search,
    train,
)

__all__ = [
    "EEGNetConfig",
    "EEGNetModel",
    "TrainHistory",
    "bce_loss",
    "shape_trace",
    "bands_config",
    "bands_to_tensor",
    "epochs_to_tensor",
    "random_search",
    "train",
]
