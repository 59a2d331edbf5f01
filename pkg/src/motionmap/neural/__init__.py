from .adam import AdamState, adam_update
from .gradcheck import gradient_check, numeric_gradient
from .model import (
    NetworkConfig,
    TrainedModel,
    TrainingError,
    forward,
    init_network,
    load_model,
    loss_and_grads,
    model_from_dict,
    model_to_dict,
    predict,
    save_model,
    train,
    training_arrays,
)
from .stream import StreamPredictor, predict_sequence, predict_stream

__all__ = [
    "AdamState",
    "NetworkConfig",
    "StreamPredictor",
    "TrainedModel",
    "TrainingError",
    "adam_update",
    "forward",
    "gradient_check",
    "init_network",
    "load_model",
    "loss_and_grads",
    "model_from_dict",
    "model_to_dict",
    "numeric_gradient",
    "predict",
    "predict_sequence",
    "predict_stream",
    "save_model",
    "train",
    "training_arrays",
]
