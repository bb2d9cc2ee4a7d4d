"""Weakly supervised shape segmentation trained from image-level labels:
saliency-seeded soft targets first, then two rounds of label-restricted
pseudo-label self-training."""

from .network import NetworkConfig, forward, init_network, predict
from .params import ParamSet, load_params, save_params
from .pipeline import StageReport, TrainConfig, evaluate, run_stc, train_stage

__version__ = "0.1.0"

__all__ = [
    "NetworkConfig",
    "ParamSet",
    "StageReport",
    "TrainConfig",
    "evaluate",
    "forward",
    "init_network",
    "load_params",
    "predict",
    "run_stc",
    "save_params",
    "train_stage",
    "__version__",
]
