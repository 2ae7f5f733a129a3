# -*- coding: utf-8 -*-
"""
3D pose VAE.

The encoder maps a flattened canonical pose to a mean and a log-variance,
the decoder maps a latent sample back to a pose. Training minimizes the
weighted sum of reconstruction MSE, KL to the unit Gaussian and a triplet
loss whose triplets are mined on 3D pose distance.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import spearmanr
from tqdm import tqdm

from .camera import AugmentConfig, random_rotation_matrices, rotate_about_root
from .errors import ConfigError, DimensionError, NonCanonicalPoseError, TrainingDivergedError
from .log import RecordWriter
from .losses import (
    LossWeights, TripletConfig,
    loss_kl_with_grad, loss_mse_with_grad, loss_triplet_with_grad, mine_triplets,
)
from .nn import (
    AdamConfig, AdamState, Mlp, NetworkConfig,
    adam_step, backward, forward, load_network, save_checkpoint, update_running_stats,
)
from .pose.metrics import mpjpe_array, pairwise_mpjpe
from .pose.skeleton import Skeleton
from .pose.transforms import preprocess_poses, rms_radius
from .pose.types import CanonicalPose3D, Pose3D

logger = logging.getLogger(__name__)

LATENT_DIM = 32
LOGVAR_CLAMP = 10.0
CANONICAL_TOL = 1e-6
ENCODER_SUFFIX = '.encoder'
DECODER_SUFFIX = '.decoder'

PoseBatch = Union[np.ndarray, Sequence[Pose3D]]


@dataclass(frozen=True)
class VaeTrainConfig:
    """Optimization settings for :func:`train_vae`."""

    latent_dim: int = LATENT_DIM
    epochs: int = 100
    batch_size: int = 128
    network: NetworkConfig = field(default_factory=NetworkConfig)
    adam: AdamConfig = field(default_factory=AdamConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    triplet: TripletConfig = field(default_factory=TripletConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    canonical_rotation: bool = True
    universal_skeleton: bool = True
    bn_momentum: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim <= 0:
            raise ConfigError("latent_dim must be > 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass
class VaeModel:
    """Encoder (3N -> 2n) and decoder (n -> 3N) with the preprocessing they were trained on."""

    encoder: Mlp
    decoder: Mlp
    n_joints: int = 17
    skeleton: str = 'h36m17'
    canonical_rotation: bool = True
    universal_skeleton: bool = True

    def __post_init__(self):
        if self.encoder.spec.output_dim != 2 * self.decoder.spec.input_dim:
            raise DimensionError(
                f"Encoder emits {self.encoder.spec.output_dim} values, "
                f"decoder takes {self.decoder.spec.input_dim} latent dimensions")
        if self.encoder.spec.input_dim != 3 * self.n_joints or self.decoder.spec.output_dim != 3 * self.n_joints:
            raise DimensionError(f"Encoder/decoder pose size does not match {self.n_joints} joints")

    @property
    def latent_dim(self) -> int:
        return self.decoder.spec.input_dim

    def meta(self) -> Dict[str, Any]:
        return {
            'latent_dim': self.latent_dim,
            'n_joints': self.n_joints,
            'skeleton': self.skeleton,
            'canonical_rotation': self.canonical_rotation,
            'universal_skeleton': self.universal_skeleton,
        }


@dataclass
class TrainResult:
    model: Any
    log: List[Dict[str, Any]]


def build_vae(n_joints: int, network: NetworkConfig = NetworkConfig(), latent_dim: int = LATENT_DIM,
              rng: Optional[np.random.Generator] = None, **meta: Any) -> VaeModel:
    """Freshly initialized VAE for poses of ``n_joints`` joints."""
    rng = rng or np.random.default_rng()
    encoder = Mlp(network.spec(3 * n_joints, 2 * latent_dim), rng=rng)
    decoder = Mlp(network.spec(latent_dim, 3 * n_joints), rng=rng)
    return VaeModel(encoder, decoder, n_joints=n_joints, **meta)


def _as_joints(poses: PoseBatch) -> np.ndarray:
    if isinstance(poses, np.ndarray):
        return np.asarray(poses, dtype=np.float64)
    return np.stack([p.joints for p in poses])


def check_canonical(joints: np.ndarray, root_idx: int = 0, tol: float = CANONICAL_TOL) -> None:
    """
    Raises:
        NonCanonicalPoseError: If a pose is not root-centered with unit RMS radius
    """
    off_root = np.abs(joints[:, root_idx, :]).max(axis=-1) > tol
    off_scale = np.abs(rms_radius(joints) - 1.0) > tol
    bad = np.nonzero(off_root | off_scale)[0]
    if bad.size:
        raise NonCanonicalPoseError("Encoder input must be canonicalized", indices=bad[:10].tolist())


def _split_head(out: np.ndarray, latent_dim: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = out[:, :latent_dim]
    raw = out[:, latent_dim:]
    logvar = np.clip(raw, -LOGVAR_CLAMP, LOGVAR_CLAMP)
    inside = (raw > -LOGVAR_CLAMP) & (raw < LOGVAR_CLAMP)
    return mu, logvar, inside


def encode(model: VaeModel, poses: PoseBatch, mode: str = 'eval', rng: Optional[np.random.Generator] = None,
           check: bool = True, root_idx: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Encode canonical poses.

    Args:
        model: VAE
        poses: (B, N, 3) canonical joints or a list of canonical poses
        mode: 'eval' returns e = mu; 'train' samples e = mu + exp(logvar/2)·eps
        rng: Random generator, required in train mode
        check: Reject inputs that are not root-centered with unit RMS radius
        root_idx: Root joint index for the check

    Returns:
        Tuple of (mu, logvar clamped to [-10, 10], e), each (B, n)

    Raises:
        NonCanonicalPoseError: If ``check`` is set and an input is not canonical
    """
    joints = _as_joints(poses)
    if joints.ndim != 3 or joints.shape[1:] != (model.n_joints, 3):
        raise DimensionError(f"Expected (B, {model.n_joints}, 3) poses, got {joints.shape}")
    if check:
        check_canonical(joints, root_idx)
    out, _ = model.encoder.forward(joints.reshape(len(joints), -1), mode, rng)
    mu, logvar, _ = _split_head(out, model.latent_dim)
    if mode == 'train':
        if rng is None:
            raise ValueError("Train-mode encoding needs a random generator")
        e = mu + np.exp(0.5 * logvar) * rng.standard_normal(mu.shape)
    else:
        e = mu.copy()
    return mu, logvar, e


def decode(decoder: Union[VaeModel, Mlp], e: np.ndarray) -> np.ndarray:
    """
    Decode (B, n) embeddings, or a single n-vector, to (B, N, 3) poses in eval mode.
    """
    mlp = decoder.decoder if isinstance(decoder, VaeModel) else decoder
    e = np.atleast_2d(np.asarray(e, dtype=np.float64))
    return mlp(e, 'eval').reshape(len(e), -1, 3)


def decode_poses(decoder: Union[VaeModel, Mlp], e: np.ndarray, skeleton_id: str = 'h36m17') -> List[CanonicalPose3D]:
    return [CanonicalPose3D(p, skeleton_id) for p in decode(decoder, e)]


def _batches(n_items: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    order = rng.permutation(n_items)
    n_batches = max(1, math.ceil(n_items / batch_size))
    return [b for b in np.array_split(order, n_batches) if len(b)]


def train_vae(joints3d: np.ndarray, skel: Skeleton, config: VaeTrainConfig = VaeTrainConfig(),
              log_path: Optional[str] = None, progress: bool = False,
              model: Optional[VaeModel] = None) -> TrainResult:
    """
    Train the VAE on world-space poses.

    Poses are retargeted and canonicalized first. With augmentation enabled
    each batch holds ``batch_size // 2`` dataset poses plus as many randomly
    rotated copies of other dataset poses, canonicalized the same way.

    Args:
        joints3d: (P, N, 3) world poses
        skel: Skeleton
        config: Training settings
        log_path: Optional line-delimited JSON file for per-epoch losses
        progress: Show a progress bar
        model: Continue training this model instead of a fresh one

    Returns:
        TrainResult: Trained VaeModel and the per-epoch log records

    Raises:
        TrainingDivergedError: If a batch loss is not finite
        MiningError: If triplets are requested and a batch has fewer than 3 poses
    """
    world = np.asarray(joints3d, dtype=np.float64)
    init_seq, order_seq, noise_seq, aug_seq = np.random.SeedSequence(config.seed).spawn(4)
    init_rng = np.random.default_rng(init_seq)
    order_rng = np.random.default_rng(order_seq)
    noise_rng = np.random.default_rng(noise_seq)
    aug_rng = np.random.default_rng(aug_seq)

    rotate = config.canonical_rotation

    def prep(batch: np.ndarray) -> np.ndarray:
        return preprocess_poses(batch, skel, rotate=rotate, universal_skeleton=config.universal_skeleton)

    canonical = prep(world)
    if model is None:
        model = build_vae(skel.n_joints, config.network, config.latent_dim, init_rng,
                          skeleton=skel.name, canonical_rotation=rotate,
                          universal_skeleton=config.universal_skeleton)
    enc, dec = model.encoder, model.decoder
    enc_state = AdamState.for_params(enc.params, config.adam)
    dec_state = AdamState.for_params(dec.params, config.adam)
    weights = config.weights
    augmenting = config.augment.enabled and len(world) > 0
    per_batch = max(1, config.batch_size // 2) if augmenting else config.batch_size

    log: List[Dict[str, Any]] = []
    writer = RecordWriter(log_path)
    logger.info(f"Training VAE on {len(world)} poses for {config.epochs} epochs "
                f"(latent {model.latent_dim}, hidden {enc.spec.hidden_dim})")
    try:
        for epoch in tqdm(range(config.epochs), desc='train-vae', disable=not progress):
            sums = {'mse': 0.0, 'kl': 0.0, 'triplet': 0.0, 'total': 0.0}
            n_triplets = 0
            batches = _batches(len(world), per_batch, order_rng) if len(world) else []
            for b, idx in enumerate(batches):
                x3 = canonical[idx]
                if augmenting:
                    sources = aug_rng.integers(0, len(world), size=len(idx))
                    rotations = random_rotation_matrices(aug_rng, config.augment, len(idx))
                    rotated = rotate_about_root(world[sources], rotations, skel.root_idx)
                    x3 = np.concatenate([x3, prep(rotated)])
                batch = len(x3)
                x = x3.reshape(batch, -1)

                out, enc_tape = forward(enc.spec, enc.params, x, 'train', noise_rng)
                mu, logvar, inside = _split_head(out, model.latent_dim)
                eps = noise_rng.standard_normal(mu.shape)
                std = np.exp(0.5 * logvar)
                e = mu + std * eps
                s_hat, dec_tape = forward(dec.spec, dec.params, e, 'train', noise_rng)

                l_mse, d_shat = loss_mse_with_grad(x, s_hat)
                l_kl, dmu_kl, dlv_kl = loss_kl_with_grad(mu, logvar)
                if weights.w_triplet > 0:
                    triplets = mine_triplets(x3, config.triplet)
                    l_trip, de_trip = loss_triplet_with_grad(e, triplets, config.triplet)
                else:
                    triplets, l_trip, de_trip = [], 0.0, np.zeros_like(e)
                total = weights.w_mse * l_mse + weights.w_kl * l_kl + weights.w_triplet * l_trip
                if not math.isfinite(total):
                    raise TrainingDivergedError("Loss is not finite", epoch=epoch, batch=b,
                                                mse=l_mse, kl=l_kl, triplet=l_trip)

                dec_grads, de_dec = backward(dec_tape, weights.w_mse * d_shat)
                de = de_dec + weights.w_triplet * de_trip
                dmu = de + weights.w_kl * dmu_kl
                dlv = (de * eps * 0.5 * std + weights.w_kl * dlv_kl) * inside
                enc_grads, _ = backward(enc_tape, np.concatenate([dmu, dlv], axis=1))

                enc.params = update_running_stats(adam_step(enc_state, enc.params, enc_grads),
                                                  enc_tape, config.bn_momentum)
                dec.params = update_running_stats(adam_step(dec_state, dec.params, dec_grads),
                                                  dec_tape, config.bn_momentum)

                sums['mse'] += l_mse
                sums['kl'] += l_kl
                sums['triplet'] += l_trip
                sums['total'] += total
                n_triplets += len(triplets)

            n_batches = max(1, len(batches))
            record = {'epoch': epoch, **{k: v / n_batches for k, v in sums.items()}, 'n_triplets': n_triplets}
            writer.write(record)
            log.append(record)
            logger.debug(f"epoch {epoch}: total={record['total']:.5f} mse={record['mse']:.5f} "
                         f"kl={record['kl']:.5f} triplet={record['triplet']:.5f}")
    finally:
        writer.close()
    return TrainResult(model, log)


def reconstruction_mpjpe(model: VaeModel, canonical: np.ndarray) -> float:
    """Mean MPJPE between canonical poses and their eval-mode reconstructions."""
    canonical = np.asarray(canonical, dtype=np.float64)
    _, _, e = encode(model, canonical, check=False)
    return float(np.mean(mpjpe_array(canonical, decode(model, e))))


def embedding_locality(model: VaeModel, canonical: np.ndarray) -> float:
    """
    Spearman correlation between embedding distance and 3D MPJPE over all
    pose pairs of ``canonical``.
    """
    canonical = np.asarray(canonical, dtype=np.float64)
    mu, _, _ = encode(model, canonical, check=False)
    upper = np.triu_indices(len(canonical), k=1)
    emb = np.linalg.norm(mu[:, None, :] - mu[None, :, :], axis=-1)[upper]
    pose = pairwise_mpjpe(canonical)[upper]
    rho, _ = spearmanr(emb, pose)
    return float(rho)


def save_vae(model: VaeModel, path: str) -> Tuple[str, str]:
    """
    Write ``<path>.encoder`` and ``<path>.decoder`` checkpoints.

    Returns:
        Tuple of (encoder checkpoint name, decoder checkpoint name)
    """
    enc_path, dec_path = path + ENCODER_SUFFIX, path + DECODER_SUFFIX
    save_checkpoint(model.encoder.params, model.encoder.spec, enc_path, {**model.meta(), 'role': 'encoder'})
    save_checkpoint(model.decoder.params, model.decoder.spec, dec_path, {**model.meta(), 'role': 'decoder'})
    logger.info(f"Saved VAE checkpoints {enc_path} and {dec_path}")
    return enc_path, dec_path


def load_decoder(path: str) -> Tuple[Mlp, Dict[str, Any]]:
    """Load a decoder checkpoint by name (``<out>.decoder``)."""
    spec, params, meta = load_network(path)
    return Mlp(spec, params), meta


def load_vae(path: str) -> VaeModel:
    """Load the pair written by :func:`save_vae` from its common prefix."""
    enc_spec, enc_params, meta = load_network(path + ENCODER_SUFFIX)
    decoder, _ = load_decoder(path + DECODER_SUFFIX)
    return VaeModel(Mlp(enc_spec, enc_params), decoder,
                    n_joints=int(meta.get('n_joints', enc_spec.input_dim // 3)),
                    skeleton=meta.get('skeleton', 'h36m17'),
                    canonical_rotation=bool(meta.get('canonical_rotation', True)),
                    universal_skeleton=bool(meta.get('universal_skeleton', True)))
