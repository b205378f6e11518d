from .arch import ArchError, ArchSpec, ModelParams, TrainConfig
from .io import (
    ArchMismatchError,
    CorruptWeightFileError,
    WeightFileError,
    WeightVersionError,
    load_params,
    save_params,
)
from .model import (
    LabelError,
    ShapeError,
    evaluate,
    forward,
    forward_logits,
    init_model,
    loss_and_gradients,
    predict,
    reinit_head,
)
from .train import TrainHistory, steps_per_run, train

__all__ = [
    "ArchError",
    "ArchMismatchError",
    "ArchSpec",
    "CorruptWeightFileError",
    "LabelError",
    "ModelParams",
    "ShapeError",
    "TrainConfig",
    "TrainHistory",
    "WeightFileError",
    "WeightVersionError",
    "evaluate",
    "forward",
    "forward_logits",
    "init_model",
    "load_params",
    "loss_and_gradients",
    "predict",
    "reinit_head",
    "save_params",
    "steps_per_run",
    "train",
]
