# -*- coding: utf-8 -*-
"""
Generation in embedding space: noise perturbation, waypoint interpolation
and a PCA export of embeddings for plotting.
"""

import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import tablib

from .errors import ConfigError, DimensionError
from .nn import Mlp
from .pose.metrics import mpjpe_array
from .pose.types import CanonicalPose3D
from .vae import VaeModel, decode

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.2, 0.3, 0.4, 0.5)
PCA_EPS = 1e-12

Decoder = Union[VaeModel, Mlp]


@dataclass(frozen=True)
class GenerationConfig:
    alphas: Tuple[float, ...] = DEFAULT_ALPHAS
    steps: int = 5
    n_directions: int = 1

    def __post_init__(self):
        if self.steps < 2:
            raise ConfigError(f"Interpolation needs at least 2 steps, got {self.steps}")
        if self.n_directions < 1:
            raise ConfigError("n_directions must be >= 1")
        object.__setattr__(self, 'alphas', tuple(float(a) for a in self.alphas))


def _latent_dim(decoder: Decoder) -> int:
    mlp = decoder.decoder if isinstance(decoder, VaeModel) else decoder
    return mlp.spec.input_dim


def _vector(v: np.ndarray, dim: int, label: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape != (dim,):
        raise DimensionError(f"{label} must have {dim} entries, got {v.shape[0]}")
    return v


def unit_direction(z: np.ndarray) -> np.ndarray:
    """z / |z|, with the zero vector left as zero."""
    z = np.asarray(z, dtype=np.float64)
    norm = np.linalg.norm(z)
    return z / norm if norm > 0 else np.zeros_like(z)


def random_directions(rng: np.random.Generator, n: int, count: int = 1) -> np.ndarray:
    """(count, n) Gaussian draws scaled to unit length."""
    if count < 1:
        raise ConfigError(f"Need at least one direction, got {count}", count=count)
    z = rng.standard_normal((count, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def perturb_array(decoder: Decoder, e: np.ndarray, z: np.ndarray,
                  alphas: Sequence[float] = DEFAULT_ALPHAS) -> np.ndarray:
    """(len(alphas), N, 3) decodes of e + alpha·unit(z)."""
    dim = _latent_dim(decoder)
    e = _vector(e, dim, 'Embedding')
    z = unit_direction(_vector(z, dim, 'Direction'))
    alphas = np.asarray(list(alphas), dtype=np.float64)
    return decode(decoder, e[None, :] + alphas[:, None] * z[None, :])


def perturb(decoder: Decoder, e: np.ndarray, z: np.ndarray,
            alphas: Sequence[float] = DEFAULT_ALPHAS) -> List[CanonicalPose3D]:
    """
    Decode an embedding pushed along a direction by each step length.

    Args:
        decoder: Trained decoder (or the VAE holding it)
        e: n-vector
        z: Direction; normalized to unit length (zero stays zero)
        alphas: Step lengths, output keeps their order

    Returns:
        List of decoded canonical poses, one per alpha
    """
    return [CanonicalPose3D(p) for p in perturb_array(decoder, e, z, alphas)]


def interpolation_path(e_a: np.ndarray, e_b: np.ndarray, steps: int) -> np.ndarray:
    """
    (steps, n) embeddings moving linearly from e_a to e_b; both endpoints exact.
    """
    if steps < 2:
        raise ConfigError(f"Interpolation needs at least 2 steps, got {steps}")
    e_a = np.asarray(e_a, dtype=np.float64).reshape(-1)
    e_b = np.asarray(e_b, dtype=np.float64).reshape(-1)
    if e_a.shape != e_b.shape:
        raise DimensionError(f"Endpoints differ in size: {e_a.shape} vs {e_b.shape}")
    w = np.arange(steps, dtype=np.float64) / (steps - 1)
    return (1.0 - w)[:, None] * e_a[None, :] + w[:, None] * e_b[None, :]


def interpolate(decoder: Decoder, e_a: np.ndarray, e_b: np.ndarray, steps: int = 5) -> List[CanonicalPose3D]:
    """
    Decode ``steps`` evenly spaced waypoints between two mean embeddings.

    Raises:
        ConfigError: If steps < 2
    """
    dim = _latent_dim(decoder)
    path = interpolation_path(_vector(e_a, dim, 'Start embedding'), _vector(e_b, dim, 'End embedding'), steps)
    return [CanonicalPose3D(p) for p in decode(decoder, path)]


def perturbation_monotonicity(decoder: Decoder, embeddings: np.ndarray, rng: np.random.Generator,
                              alphas: Sequence[float] = DEFAULT_ALPHAS) -> Dict[str, Any]:
    """
    For each embedding and a random direction, check that the MPJPE between
    decode(e) and decode(e + alpha·z) does not decrease along ``alphas``.

    Returns:
        dict: ``fraction`` monotone, ``mean_mpjpe`` per alpha, ``n`` trials
    """
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    directions = random_directions(rng, embeddings.shape[1], len(embeddings))
    base = decode(decoder, embeddings)
    curves = np.empty((len(embeddings), len(alphas)))
    for i, (e, z) in enumerate(zip(embeddings, directions)):
        moved = perturb_array(decoder, e, z, alphas)
        curves[i] = mpjpe_array(np.broadcast_to(base[i], moved.shape), moved)
    monotone = np.all(np.diff(curves, axis=1) >= 0, axis=1)
    return {
        'fraction': float(monotone.mean()) if len(monotone) else 0.0,
        'mean_mpjpe': [float(v) for v in curves.mean(axis=0)],
        'n': int(len(embeddings)),
    }


@dataclass
class PcaProjection:
    coords: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    mean: np.ndarray
    degenerate: bool = False


def pca_2d(embeddings: np.ndarray) -> PcaProjection:
    """
    Project embeddings onto their two leading principal components.

    Components come from the eigendecomposition of the sample covariance,
    sorted by decreasing eigenvalue, each signed so its largest-magnitude
    entry is positive. A covariance with no variance is flagged and the
    projection is all zeros.
    """
    x = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    if len(x) < 2:
        raise DimensionError("PCA export needs at least 2 embeddings")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (len(x) - 1)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1][:2]
    values, vectors = values[order], vectors[:, order]
    if vectors.shape[1] < 2:
        vectors = np.hstack([vectors, np.zeros((vectors.shape[0], 2 - vectors.shape[1]))])
        values = np.concatenate([values, np.zeros(2 - len(values))])
    signs = np.sign(vectors[np.argmax(np.abs(vectors), axis=0), np.arange(2)])
    vectors = vectors * np.where(signs == 0, 1.0, signs)
    if values[0] <= PCA_EPS:
        logger.warning("Embedding covariance is degenerate; PCA projection set to zeros")
        return PcaProjection(np.zeros((len(x), 2)), vectors, np.maximum(values, 0.0), mean, degenerate=True)
    return PcaProjection(centered @ vectors, vectors, np.maximum(values, 0.0), mean)


def embedding_viz_export(embeddings: np.ndarray, labels: Sequence[Any], path: str) -> PcaProjection:
    """
    Write a ``x,y,label`` CSV of the 2-component PCA projection.

    Raises:
        DimensionError: If labels and embeddings differ in count or fewer than 2 embeddings are given
    """
    labels = list(labels)
    if len(labels) != len(np.atleast_2d(embeddings)):
        raise DimensionError(f"{len(labels)} labels for {len(np.atleast_2d(embeddings))} embeddings")
    projection = pca_2d(embeddings)
    data = tablib.Dataset(headers=['x', 'y', 'label'])
    for (x, y), label in zip(projection.coords, labels):
        data.append([repr(float(x)), repr(float(y)), label])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(data.export('csv'))
    logger.info(f"Wrote PCA projection of {len(labels)} embeddings to {path}"
                + (" (degenerate covariance)" if projection.degenerate else ''))
    return projection
