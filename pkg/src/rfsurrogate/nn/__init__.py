from .io import load_model, save_model
from .kernels import BACKEND
from .model import (
    Adam,
    ArchSpec,
    Classifier,
    LinearSoftmax,
    Model,
    TrainConfig,
    accuracy,
    classify,
    complex_gradient,
    forward,
    init_model,
    input_gradient,
    loss,
    train,
    train_arrays,
)

__all__ = [
    "Adam",
    "ArchSpec",
    "BACKEND",
    "Classifier",
    "LinearSoftmax",
    "Model",
    "TrainConfig",
    "accuracy",
    "classify",
    "complex_gradient",
    "forward",
    "init_model",
    "input_gradient",
    "load_model",
    "loss",
    "save_model",
    "train",
    "train_arrays",
]
