# -*- coding: utf-8 -*-
"""
Adam optimizer over flat parameter dicts.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, Optional

import numpy as np

from ..errors import ConfigError, DimensionError
from .network import Params, trainable_names


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"Adam lr must be > 0, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ConfigError("Adam eps must be > 0")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class AdamState:
    """Step count and first/second moment estimates per parameter."""

    config: AdamConfig = field(default_factory=AdamConfig)
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Params, config: Optional[AdamConfig] = None,
                   names: Optional[Iterable[str]] = None) -> 'AdamState':
        names = list(names) if names is not None else trainable_names(params)
        return cls(config or AdamConfig(), 0,
                   {n: np.zeros_like(params[n]) for n in names},
                   {n: np.zeros_like(params[n]) for n in names})


def adam_step(state: AdamState, params: Params, grads: Params) -> Params:
    """
    One bias-corrected Adam update.

    The state's moments and step count are advanced in place. Parameters
    the state does not track (batchnorm buffers, frozen tensors) are passed
    through untouched.

    Args:
        state: Optimizer state
        params: Current parameters
        grads: Gradients for every tracked parameter

    Returns:
        Params: New parameter dict

    Raises:
        DimensionError: If a gradient shape differs from its parameter
    """
    cfg = state.config
    state.step += 1
    bc1 = 1.0 - cfg.beta1 ** state.step
    bc2 = 1.0 - cfg.beta2 ** state.step
    updated = dict(params)
    for name in state.m:
        g = grads[name]
        if g.shape != params[name].shape:
            raise DimensionError(f"Gradient for {name} has shape {g.shape}, parameter has {params[name].shape}")
        state.m[name] = cfg.beta1 * state.m[name] + (1 - cfg.beta1) * g
        state.v[name] = cfg.beta2 * state.v[name] + (1 - cfg.beta2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        updated[name] = params[name] - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return updated
