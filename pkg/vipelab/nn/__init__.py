# -*- coding: utf-8 -*-
"""
Dense-network stack: layer kernels, residual MLP, Adam and checkpoints.
"""

from .network import (
    MlpSpec, NetworkConfig, Mlp, Tape, Params,
    param_shapes, init_params, zero_params, trainable_names, is_buffer,
    forward, backward, update_running_stats, params_digest,
)
from .optim import AdamConfig, AdamState, adam_step
from .checkpoint import save_checkpoint, load_checkpoint, load_network

__all__ = [
    'MlpSpec', 'NetworkConfig', 'Mlp', 'Tape', 'Params',
    'param_shapes', 'init_params', 'zero_params', 'trainable_names', 'is_buffer',
    'forward', 'backward', 'update_running_stats', 'params_digest',
    'AdamConfig', 'AdamState', 'adam_step',
    'save_checkpoint', 'load_checkpoint', 'load_network',
]
