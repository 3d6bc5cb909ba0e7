from .core import (Dense, copy_params, count, dense_backward, dense_forward, flatten, global_norm,
                   load_params, merge, save_params, sgd_step, soft_update, unflatten, uniform_init)
from .encoder import AdditiveAttention, Conv1D, StateEncoder, softmax
from .recurrent import BRNN, LSTM, lstm_step, lstm_step_backward

__all__ = [
    "Dense", "copy_params", "count", "dense_backward", "dense_forward", "flatten", "global_norm",
    "load_params", "merge", "save_params", "sgd_step", "soft_update", "unflatten", "uniform_init",
    "AdditiveAttention", "Conv1D", "StateEncoder", "softmax", "BRNN", "LSTM", "lstm_step",
    "lstm_step_backward",
]
