"""Minimal dense/conv/recurrent network engine on numpy (float64).

Exactly the layer set needed by the distance classifiers and the room
embedding extractor, with reverse-mode gradients, Adam, finite-difference
gradient checking, and a binary checkpoint format.
"""

from .core import Layer, Parameter, Sequential
from .layers import (
    BatchNorm, Conv1d, Conv2d, Dense, Dropout, FoldFreqIntoChannels, Gru,
    MaxPool2d, ReLU, Softmax, StatsPool,
)
from .loss import softmax, softmax_cross_entropy
from .optim import AdamState, adam_step, init_adam
from .gradcheck import gradient_check
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "AdamState", "BatchNorm", "Conv1d", "Conv2d", "Dense", "Dropout",
    "FoldFreqIntoChannels", "Gru", "Layer", "MaxPool2d", "Parameter", "ReLU",
    "Sequential", "Softmax", "StatsPool", "adam_step", "gradient_check",
    "init_adam", "load_checkpoint", "save_checkpoint", "softmax",
    "softmax_cross_entropy",
]
