"""Minimal dense-tensor network engine: tape-based reverse-mode autodiff,
LSTM/BLSTM/dense/softmax layers, Adam, and checkpoint serialization."""

from .tensor import Tensor, Tape, backward, zero_grad
from .layers import (
    DenseLayer,
    LstmLayer,
    blstm_forward,
    concat_features,
    dense_forward,
    init_dense,
    init_lstm,
    lstm_forward,
    select_last_frame,
    softmax,
)
from .adam import AdamState, adam_step
from .model import ModelParams, ModelSize, decode, discriminate, encode, init_model
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Tensor", "Tape", "backward", "zero_grad",
    "DenseLayer", "LstmLayer", "init_dense", "init_lstm",
    "lstm_forward", "blstm_forward", "dense_forward", "softmax",
    "concat_features", "select_last_frame",
    "AdamState", "adam_step",
    "ModelParams", "ModelSize", "init_model", "encode", "decode", "discriminate",
    "save_checkpoint", "load_checkpoint",
]
