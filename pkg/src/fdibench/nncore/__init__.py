"""Numerical kernels with hand-written gradients."""

from .functional import (
    batchnorm,
    batchnorm_backward,
    conv2d,
    conv2d_backward,
    convlstm_cell_step,
    convlstm_cell_step_backward,
    dense,
    dense_backward,
    dropout,
    log_softmax,
    log_softmax_nll,
    maxpool2d,
    maxpool2d_backward,
    nll_loss,
    relu,
)
from .gradcheck import GradCheckResult, check_layer, check_model, grad_check
from .layers import (
    BatchNorm,
    Conv2d,
    ConvLSTM,
    Dense,
    Dropout,
    Embedding,
    Flatten,
    Layer,
    LogSoftmax,
    MaxPool2d,
    ReLU,
)
from .optim import AdamState, PlateauSchedulerState, adam_step, plateau_update

__all__ = [
    "AdamState", "BatchNorm", "Conv2d", "ConvLSTM", "Dense", "Dropout", "Embedding",
    "Flatten", "GradCheckResult", "Layer", "LogSoftmax", "MaxPool2d", "PlateauSchedulerState",
    "ReLU", "adam_step", "batchnorm", "batchnorm_backward", "check_layer", "check_model",
    "conv2d", "conv2d_backward", "convlstm_cell_step", "convlstm_cell_step_backward", "dense",
    "dense_backward", "dropout", "grad_check", "log_softmax", "log_softmax_nll", "maxpool2d",
    "maxpool2d_backward", "nll_loss", "plateau_update", "relu",
]
