# -*- coding: utf-8 -*-
"""
Training objectives: reconstruction MSE, Gaussian KL, in-batch triplet
mining on 3D pose distance and the embedding-space triplet margin loss.

Each loss has a ``*_with_grad`` twin returning the value together with the
analytic gradients used by the training loops.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

from .errors import ConfigError, DimensionError, MiningError
from .pose.metrics import pairwise_mpjpe

Triplet = Tuple[int, int, int]


@dataclass(frozen=True)
class TripletConfig:
    """Margin for the embedding loss and minimum 3D gap between positive and negative."""

    margin: float = 1.0
    min_separation: float = 0.1

    def __post_init__(self):
        if self.margin <= 0:
            raise ConfigError(f"Triplet margin must be > 0, got {self.margin}")
        if self.min_separation < 0:
            raise ConfigError(f"Triplet min_separation must be >= 0, got {self.min_separation}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class LossWeights:
    w_mse: float = 1.0
    w_kl: float = 1.0
    w_triplet: float = 1.0

    def __post_init__(self):
        for name in ('w_mse', 'w_kl', 'w_triplet'):
            if getattr(self, name) < 0:
                raise ConfigError(f"Loss weight {name} must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def loss_mse(s: np.ndarray, s_hat: np.ndarray) -> float:
    """Mean over every coordinate of the squared error."""
    return loss_mse_with_grad(s, s_hat)[0]


def loss_mse_with_grad(s: np.ndarray, s_hat: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Returns:
        Tuple of (loss, dL/ds_hat)
    """
    s = np.asarray(s, dtype=np.float64)
    s_hat = np.asarray(s_hat, dtype=np.float64)
    if s.shape != s_hat.shape:
        raise DimensionError(f"MSE needs matching shapes, got {s.shape} and {s_hat.shape}")
    diff = s_hat - s
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def loss_kl(mu: np.ndarray, logvar: np.ndarray) -> float:
    """
    KL divergence of N(mu, exp(logvar)) from N(0, I), summed over latent
    dimensions and averaged over the batch.
    """
    return loss_kl_with_grad(mu, logvar)[0]


def loss_kl_with_grad(mu: np.ndarray, logvar: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Returns:
        Tuple of (loss, dL/dmu, dL/dlogvar)
    """
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    logvar = np.atleast_2d(np.asarray(logvar, dtype=np.float64))
    if mu.shape != logvar.shape:
        raise DimensionError(f"mu and logvar shapes differ: {mu.shape} vs {logvar.shape}")
    batch = mu.shape[0]
    var = np.exp(logvar)
    value = 0.5 * np.sum(mu ** 2 + var - 1.0 - logvar) / batch
    return float(value), mu / batch, 0.5 * (var - 1.0) / batch


def mine_triplets_from_distances(distances: np.ndarray, min_separation: float = 0.1) -> List[Triplet]:
    """
    Pick (anchor, positive, negative) per anchor from a distance matrix.

    The positive is the closest other pose. The negative is the next pose in
    ascending distance order whose distance exceeds the positive's by at
    least ``min_separation``. Equal distances are ordered by index. Anchors
    without a valid negative are skipped.

    Raises:
        MiningError: If fewer than three poses are given
    """
    distances = np.asarray(distances, dtype=np.float64)
    batch = distances.shape[0]
    if batch < 3:
        raise MiningError(f"Triplet mining needs a batch of at least 3 poses, got {batch}", batch=batch)
    triplets: List[Triplet] = []
    idx = np.arange(batch)
    for i in range(batch):
        others = idx[idx != i]
        row = distances[i, others]
        order = others[np.lexsort((others, row))]
        j = int(order[0])
        gaps = distances[i, order[1:]] - distances[i, j]
        valid = np.nonzero(gaps >= min_separation)[0]
        if valid.size:
            triplets.append((i, j, int(order[1 + valid[0]])))
    return triplets


def mine_triplets(poses: np.ndarray, cfg: TripletConfig = TripletConfig()) -> List[Triplet]:
    """
    Mine triplets from a (B, N, 3) batch of canonical poses using pairwise MPJPE.

    Returns:
        List of (i, j, k) index triplets, ascending in anchor i
    """
    poses = np.asarray(poses, dtype=np.float64)
    if poses.ndim != 3 or poses.shape[0] < 3:
        raise MiningError(f"Triplet mining needs a (B >= 3, N, 3) batch, got {poses.shape}")
    return mine_triplets_from_distances(pairwise_mpjpe(poses), cfg.min_separation)


def loss_triplet(embeddings: np.ndarray, triplets: List[Triplet], cfg: TripletConfig = TripletConfig()) -> float:
    """Mean over triplets of max(0, |e_i - e_j| - |e_i - e_k| + margin); 0 with no triplets."""
    return loss_triplet_with_grad(embeddings, triplets, cfg)[0]


def loss_triplet_with_grad(embeddings: np.ndarray, triplets: List[Triplet],
                           cfg: TripletConfig = TripletConfig()) -> Tuple[float, np.ndarray]:
    """
    Returns:
        Tuple of (loss, dL/dembeddings)
    """
    e = np.asarray(embeddings, dtype=np.float64)
    grad = np.zeros_like(e)
    if not triplets:
        return 0.0, grad
    t = np.asarray(triplets, dtype=np.int64)
    i, j, k = t[:, 0], t[:, 1], t[:, 2]
    v_ij = e[i] - e[j]
    v_ik = e[i] - e[k]
    d_ij = np.linalg.norm(v_ij, axis=1)
    d_ik = np.linalg.norm(v_ik, axis=1)
    hinge = d_ij - d_ik + cfg.margin
    active = hinge > 0
    value = float(np.mean(np.maximum(hinge, 0.0)))

    scale = active / len(t)
    # unit vectors, zero where two embeddings coincide
    u_ij = np.divide(v_ij, d_ij[:, None], out=np.zeros_like(v_ij), where=d_ij[:, None] > 0)
    u_ik = np.divide(v_ik, d_ik[:, None], out=np.zeros_like(v_ik), where=d_ik[:, None] > 0)
    g_ij = u_ij * scale[:, None]
    g_ik = u_ik * scale[:, None]
    np.add.at(grad, i, g_ij - g_ik)
    np.add.at(grad, j, -g_ij)
    np.add.at(grad, k, g_ik)
    return value, grad
