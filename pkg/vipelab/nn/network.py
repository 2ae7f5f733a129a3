# -*- coding: utf-8 -*-
"""
Residual MLP backbone with explicit reverse-mode gradients.

Layout: input linear, then ``n_blocks`` residual blocks of
[linear, batchnorm, ReLU, dropout] twice plus an additive skip, then an
output linear. Parameters live in a flat ``{name: array}`` dict; batchnorm
running statistics sit in the same dict as non-trainable buffers.
"""

import hashlib
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..errors import ConfigError, DimensionError
from . import layers

Params = Dict[str, np.ndarray]
MODES = ('train', 'eval')
BUFFER_SUFFIXES = ('.running_mean', '.running_var')


@dataclass(frozen=True)
class MlpSpec:
    """Shape of a residual MLP."""

    input_dim: int
    output_dim: int
    hidden_dim: int = 1024
    n_blocks: int = 2
    dropout_p: float = 0.1
    use_batchnorm: bool = True

    def __post_init__(self):
        for name in ('input_dim', 'output_dim', 'hidden_dim'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"MlpSpec.{name} must be > 0, got {getattr(self, name)}")
        if self.n_blocks < 0:
            raise ConfigError(f"MlpSpec.n_blocks must be >= 0, got {self.n_blocks}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"MlpSpec.dropout_p must lie in [0, 1), got {self.dropout_p}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MlpSpec':
        return cls(**data)


@dataclass(frozen=True)
class NetworkConfig:
    """Backbone settings shared by every network; input/output sizes come from the model."""

    hidden_dim: int = 1024
    n_blocks: int = 2
    dropout_p: float = 0.1
    use_batchnorm: bool = True

    def __post_init__(self):
        self.spec(1, 1)

    def spec(self, input_dim: int, output_dim: int) -> MlpSpec:
        return MlpSpec(input_dim, output_dim, self.hidden_dim, self.n_blocks, self.dropout_p, self.use_batchnorm)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _linear_names(spec: MlpSpec) -> List[Tuple[str, int, int]]:
    out = [('input', spec.input_dim, spec.hidden_dim)]
    for b in range(spec.n_blocks):
        for l in range(2):
            out.append((f'block{b}.fc{l}', spec.hidden_dim, spec.hidden_dim))
    out.append(('output', spec.hidden_dim, spec.output_dim))
    return out


def param_shapes(spec: MlpSpec) -> Dict[str, Tuple[int, ...]]:
    """Every parameter and buffer name with its shape, in canonical order."""
    shapes: Dict[str, Tuple[int, ...]] = {}
    for name, fan_in, fan_out in _linear_names(spec):
        shapes[f'{name}.W'] = (fan_in, fan_out)
        shapes[f'{name}.b'] = (fan_out,)
        if spec.use_batchnorm and name.startswith('block'):
            bn = name.replace('.fc', '.bn')
            for suffix in ('gamma', 'beta', 'running_mean', 'running_var'):
                shapes[f'{bn}.{suffix}'] = (fan_out,)
    return shapes


def is_buffer(name: str) -> bool:
    return name.endswith(BUFFER_SUFFIXES)


def trainable_names(params: Params) -> List[str]:
    return [name for name in params if not is_buffer(name)]


def init_params(spec: MlpSpec, rng: np.random.Generator) -> Params:
    """
    Kaiming-uniform weights (bound sqrt(6/fan_in)), zero biases, unit
    batchnorm scale, zero shift, running mean 0 and running variance 1.
    """
    params: Params = {}
    for name, shape in param_shapes(spec).items():
        if name.endswith('.W'):
            bound = math.sqrt(6.0 / shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
        elif name.endswith(('.gamma', '.running_var')):
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return params


def zero_params(spec: MlpSpec) -> Params:
    """Parameters with every weight and bias zero (batchnorm left neutral)."""
    params = init_params(spec, np.random.default_rng(0))
    for name in params:
        if name.endswith(('.W', '.b')):
            params[name] = np.zeros_like(params[name])
    return params


@dataclass
class Tape:
    """Intermediates recorded by :func:`forward` for :func:`backward`."""

    spec: MlpSpec
    mode: str
    params: Params
    ops: List[Tuple[str, Optional[str], Any]] = field(default_factory=list)
    batch_stats: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


def forward(spec: MlpSpec, params: Params, x: np.ndarray, mode: str = 'eval',
            rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, Tape]:
    """
    Run the network on a (B, input_dim) batch.

    Args:
        spec: Network shape
        params: Parameters from :func:`init_params` or a checkpoint
        x: Input batch
        mode: 'train' (batch statistics, dropout active) or 'eval'
        rng: Random generator for dropout; required in train mode when dropout_p > 0

    Returns:
        Tuple of ((B, output_dim) output, tape for backward)

    Raises:
        DimensionError: If x does not have ``input_dim`` columns
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise DimensionError(f"Expected (B, {spec.input_dim}) input, got {x.shape}")
    train = mode == 'train'
    tape = Tape(spec, mode, params)

    def linear(name: str, h: np.ndarray) -> np.ndarray:
        tape.ops.append(('linear', name, h))
        return layers.linear_forward(h, params[f'{name}.W'], params[f'{name}.b'])

    h = linear('input', x)
    for b in range(spec.n_blocks):
        tape.ops.append(('skip_open', None, None))
        skip = h
        for l in range(2):
            h = linear(f'block{b}.fc{l}', h)
            if spec.use_batchnorm:
                bn = f'block{b}.bn{l}'
                if train:
                    h, cache, stats = layers.batchnorm_forward_train(h, params[f'{bn}.gamma'], params[f'{bn}.beta'])
                    tape.batch_stats[bn] = stats
                else:
                    h, cache = layers.batchnorm_forward_eval(
                        h, params[f'{bn}.gamma'], params[f'{bn}.beta'],
                        params[f'{bn}.running_mean'], params[f'{bn}.running_var'])
                tape.ops.append(('batchnorm', bn, cache))
            h, mask = layers.relu_forward(h)
            tape.ops.append(('relu', None, mask))
            h, drop = layers.dropout_forward(h, spec.dropout_p, rng, train)
            tape.ops.append(('dropout', None, drop))
        h = h + skip
        tape.ops.append(('skip_close', None, None))
    y = linear('output', h)
    return y, tape


def backward(tape: Tape, grad_y: np.ndarray) -> Tuple[Params, np.ndarray]:
    """
    Reverse pass over a recorded forward.

    Args:
        tape: Tape returned by :func:`forward`
        grad_y: dL/dy, same shape as the forward output

    Returns:
        Tuple of (gradients for every trainable parameter, dL/dx)

    Raises:
        DimensionError: If grad_y does not match the forward output
    """
    spec, params = tape.spec, tape.params
    grad = np.asarray(grad_y, dtype=np.float64)
    if grad.ndim != 2 or grad.shape[1] != spec.output_dim:
        raise DimensionError(f"Expected (B, {spec.output_dim}) gradient, got {grad.shape}")
    grads: Params = {}
    skips: List[np.ndarray] = []
    for kind, name, cache in reversed(tape.ops):
        if kind == 'linear':
            if cache.shape[0] != grad.shape[0]:
                raise DimensionError(f"Gradient batch {grad.shape[0]} does not match tape batch {cache.shape[0]}")
            grad, grads[f'{name}.W'], grads[f'{name}.b'] = layers.linear_backward(cache, params[f'{name}.W'], grad)
        elif kind == 'batchnorm':
            grad, grads[f'{name}.gamma'], grads[f'{name}.beta'] = layers.batchnorm_backward(
                grad, cache, params[f'{name}.gamma'])
        elif kind == 'relu':
            grad = layers.relu_backward(grad, cache)
        elif kind == 'dropout':
            grad = layers.dropout_backward(grad, cache)
        elif kind == 'skip_close':
            skips.append(grad)
        elif kind == 'skip_open':
            grad = grad + skips.pop()
    return grads, grad


def update_running_stats(params: Params, tape: Tape, momentum: float = 0.1) -> Params:
    """
    Fold a train-mode tape's batch statistics into the batchnorm running
    averages. Variance uses the unbiased batch estimate.

    Returns:
        Params: The same dict, buffers updated in place
    """
    for bn, (mean, var) in tape.batch_stats.items():
        n = tape.ops[0][2].shape[0]
        unbiased = var * n / (n - 1) if n > 1 else var
        params[f'{bn}.running_mean'] = (1 - momentum) * params[f'{bn}.running_mean'] + momentum * mean
        params[f'{bn}.running_var'] = (1 - momentum) * params[f'{bn}.running_var'] + momentum * unbiased
    return params


def params_digest(params: Params, dtype: str = '<f8') -> str:
    """
    SHA-256 over parameter names, shapes and bytes.

    Use ``dtype='<f4'`` to compare in-memory parameters with a checkpoint,
    which stores float32.
    """
    h = hashlib.sha256()
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype=dtype)
        h.update(name.encode('utf-8'))
        h.update(repr(arr.shape).encode('ascii'))
        h.update(arr.tobytes())
    return h.hexdigest()


class Mlp:
    """A spec with its parameters."""

    def __init__(self, spec: MlpSpec, params: Optional[Params] = None,
                 rng: Optional[np.random.Generator] = None):
        self.spec = spec
        self.params = params if params is not None else init_params(spec, rng or np.random.default_rng())

    def __call__(self, x: np.ndarray, mode: str = 'eval',
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return forward(self.spec, self.params, x, mode, rng)[0]

    def forward(self, x: np.ndarray, mode: str = 'eval',
                rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, Tape]:
        return forward(self.spec, self.params, x, mode, rng)

    def digest(self) -> str:
        return params_digest(self.params)

    def copy(self) -> 'Mlp':
        return Mlp(self.spec, {k: v.copy() for k, v in self.params.items()})
