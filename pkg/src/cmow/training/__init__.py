"""Losses, masking, manual gradients, optimizer, and the training loop."""

from .gradients import chain_grad, encode_backward, encode_batch, encode_pooled_nograd, pad_batch
from .loop import (
    EarlyStopping,
    MaskedLine,
    MlmData,
    PreparedExample,
    TaskData,
    TrainConfig,
    TrainResult,
    evaluate_classifier,
    evaluate_mlm,
    prepare_mlm_lines,
    train_classifier,
    train_loop,
    train_mlm,
)
from .losses import combined_loss, grad_hard, grad_soft, hard_loss, log_softmax, soft_loss, softmax
from .masking import MaskedBatch, line_rng, mask_batch, mask_sequence
from .model import GradientBundle, Model, build_model, classify_eval, classify_step, mlm_eval_loss, mlm_step
from .optim import Adam, learning_rate

__all__ = [
    "Adam",
    "EarlyStopping",
    "GradientBundle",
    "MaskedBatch",
    "MaskedLine",
    "MlmData",
    "Model",
    "PreparedExample",
    "TaskData",
    "TrainConfig",
    "TrainResult",
    "build_model",
    "chain_grad",
    "classify_eval",
    "classify_step",
    "combined_loss",
    "encode_backward",
    "encode_batch",
    "encode_pooled_nograd",
    "evaluate_classifier",
    "evaluate_mlm",
    "grad_hard",
    "grad_soft",
    "hard_loss",
    "learning_rate",
    "line_rng",
    "log_softmax",
    "mask_batch",
    "mask_sequence",
    "mlm_eval_loss",
    "mlm_step",
    "pad_batch",
    "prepare_mlm_lines",
    "soft_loss",
    "softmax",
    "train_classifier",
    "train_loop",
    "train_mlm",
]
