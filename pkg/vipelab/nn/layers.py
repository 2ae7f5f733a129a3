# -*- coding: utf-8 -*-
"""
Forward and backward kernels for the layer types used by the pose networks.

All kernels work on (B, D) float64 arrays. Forward functions return the
output plus whatever the matching backward function needs.
"""

from typing import Optional, Tuple

import numpy as np

BN_EPS = 1e-5


def linear_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = x·W + b with W of shape (in, out)."""
    return x @ W + b


def linear_backward(x: np.ndarray, W: np.ndarray, dy: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of a linear layer.

    Returns:
        Tuple of (dx, dW, db)
    """
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)


def batchnorm_forward_train(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                            eps: float = BN_EPS):
    """
    Batch normalization over the batch axis using batch statistics.

    A batch of identical rows has zero variance; ``eps`` keeps the
    normalization finite and the output then equals ``beta``.

    Returns:
        Tuple of (y, cache, (batch mean, batch variance))
    """
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, True), (mean, var)


def batchnorm_forward_eval(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                           running_mean: np.ndarray, running_var: np.ndarray, eps: float = BN_EPS):
    inv_std = 1.0 / np.sqrt(running_var + eps)
    xhat = (x - running_mean) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, False)


def batchnorm_backward(dy: np.ndarray, cache, gamma: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of batch normalization.

    Returns:
        Tuple of (dx, dgamma, dbeta)
    """
    xhat, inv_std, batch_stats = cache
    dgamma = np.sum(dy * xhat, axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    if not batch_stats:
        return dxhat * inv_std, dgamma, dbeta
    n = dy.shape[0]
    dx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0))
    return dx, dgamma, dbeta


def relu_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mask = x > 0
    return x * mask, mask


def relu_backward(dy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dy * mask


def dropout_forward(x: np.ndarray, p: float, rng: Optional[np.random.Generator],
                    train: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Inverted dropout: kept units are scaled by 1/(1-p) in train mode, so the
    eval path is the identity.

    Returns:
        Tuple of (y, scaled mask or None when inactive)
    """
    if not train or p == 0.0:
        return x, None
    if rng is None:
        raise ValueError("Train-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(dy: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    return dy if mask is None else dy * mask
