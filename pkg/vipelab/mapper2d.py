# -*- coding: utf-8 -*-
"""
2D mapping network.

A deterministic encoder from normalized 2D keypoints to the VAE latent
space, trained by reconstructing canonical 3D poses through the VAE decoder.
The decoder passes gradients back to the encoder but is never updated; its
digest is compared before and after every run.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np
from tqdm import tqdm

from .camera import AugmentConfig, compose_augmented_batch, normalize_2d_array
from .errors import ConfigError, DimensionError, FrozenDecoderError, TrainingDivergedError
from .log import RecordWriter
from .losses import LossWeights, TripletConfig, loss_mse_with_grad, loss_triplet_with_grad, mine_triplets
from .nn import (
    AdamConfig, AdamState, Mlp, NetworkConfig,
    adam_step, backward, forward, load_network, params_digest, save_checkpoint, update_running_stats,
)
from .pose.metrics import aligned_mpjpe_array, mpjpe_array
from .pose.skeleton import Skeleton
from .pose.transforms import preprocess_poses
from .pose.types import CanonicalPose3D, Pose2D
from .vae import TrainResult, decode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MapperTrainConfig:
    """
    Settings for :func:`train_mapper`. ``pretrained_decoder=False`` trains
    the mapper together with a freshly initialized decoder instead of the
    frozen one.
    """

    epochs: int = 100
    batch_size: int = 128
    network: NetworkConfig = field(default_factory=NetworkConfig)
    adam: AdamConfig = field(default_factory=AdamConfig)
    weights: LossWeights = field(default_factory=lambda: LossWeights(w_kl=0.0))
    triplet: TripletConfig = field(default_factory=TripletConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    pretrained_decoder: bool = True
    canonical_rotation: bool = True
    universal_skeleton: bool = True
    bn_momentum: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass
class Mapper2D:
    """2D encoder plus the digest of the decoder it was trained against."""

    encoder: Mlp
    decoder_digest: str = ''
    decoder_path: str = ''
    root_idx: int = 0
    canonical_rotation: bool = True
    universal_skeleton: bool = True

    @property
    def n_joints(self) -> int:
        return self.encoder.spec.input_dim // 2

    @property
    def latent_dim(self) -> int:
        return self.encoder.spec.output_dim


def build_mapper(n_joints: int, latent_dim: int, network: NetworkConfig = NetworkConfig(),
                 rng: Optional[np.random.Generator] = None, **kwargs: Any) -> Mapper2D:
    return Mapper2D(Mlp(network.spec(2 * n_joints, latent_dim), rng=rng or np.random.default_rng()), **kwargs)


def _as_2d(poses: Union[np.ndarray, List[Pose2D]]) -> np.ndarray:
    if isinstance(poses, np.ndarray):
        return np.asarray(poses, dtype=np.float64)
    return np.stack([p.joints for p in poses])


def encode2d(mapper: Mapper2D, poses: Union[np.ndarray, List[Pose2D]], normalize: bool = True) -> np.ndarray:
    """
    Embed 2D poses in eval mode.

    Args:
        mapper: Trained or fresh mapper
        poses: (B, N, 2) keypoints or a list of Pose2D
        normalize: Root-center and RMS-normalize first

    Returns:
        np.ndarray: (B, n) embeddings

    Raises:
        DimensionError: If the joint count does not match the mapper
    """
    joints = _as_2d(poses)
    if joints.ndim != 3 or joints.shape[1:] != (mapper.n_joints, 2):
        raise DimensionError(f"Expected (B, {mapper.n_joints}, 2) keypoints, got {joints.shape}")
    if normalize:
        joints = normalize_2d_array(joints, mapper.root_idx)
    return mapper.encoder(joints.reshape(len(joints), -1), 'eval')


def lift_array(mapper: Mapper2D, decoder: Mlp, joints2d: np.ndarray) -> np.ndarray:
    return decode(decoder, encode2d(mapper, joints2d))


def lift(mapper: Mapper2D, decoder: Mlp, p: Pose2D) -> CanonicalPose3D:
    """
    Lift one 2D pose to a canonical 3D pose: normalize, embed, decode.
    """
    return CanonicalPose3D(lift_array(mapper, decoder, p.joints[None])[0])


def train_mapper(joints2d: np.ndarray, joints3d: np.ndarray, skel: Skeleton, decoder: Optional[Mlp],
                 config: MapperTrainConfig = MapperTrainConfig(), log_path: Optional[str] = None,
                 progress: bool = False, decoder_path: str = '') -> TrainResult:
    """
    Train a 2D mapper against a decoder.

    Args:
        joints2d: (M, N, 2) recorded keypoints
        joints3d: (M, N, 3) paired world poses
        skel: Skeleton
        decoder: Pretrained decoder, kept frozen; ignored when
            ``config.pretrained_decoder`` is False
        config: Training settings
        log_path: Optional line-delimited JSON file for per-epoch losses
        progress: Show a progress bar
        decoder_path: Checkpoint name recorded in the mapper

    Returns:
        TrainResult: ``model`` is a (Mapper2D, decoder Mlp) pair

    Raises:
        FrozenDecoderError: If the pretrained decoder changed during training
        TrainingDivergedError: If a batch loss is not finite
    """
    joints2d = np.asarray(joints2d, dtype=np.float64)
    world = np.asarray(joints3d, dtype=np.float64)
    if len(joints2d) != len(world):
        raise DimensionError(f"{len(joints2d)} 2D poses paired with {len(world)} 3D poses")
    init_seq, order_seq, noise_seq, aug_seq = np.random.SeedSequence(config.seed).spawn(4)
    init_rng = np.random.default_rng(init_seq)
    order_rng = np.random.default_rng(order_seq)
    noise_rng = np.random.default_rng(noise_seq)
    aug_rng = np.random.default_rng(aug_seq)

    frozen = config.pretrained_decoder
    if frozen:
        if decoder is None:
            raise ConfigError("A pretrained decoder is required unless pretrained_decoder is false")
        latent_dim = decoder.spec.input_dim
    else:
        latent_dim = decoder.spec.input_dim if decoder is not None else 32
        decoder = Mlp(config.network.spec(latent_dim, 3 * skel.n_joints), rng=init_rng)
    digest_before = params_digest(decoder.params)
    stored_digest = params_digest(decoder.params, '<f4')

    mapper = build_mapper(skel.n_joints, latent_dim, config.network, init_rng,
                          decoder_digest=stored_digest if frozen else '', decoder_path=decoder_path,
                          root_idx=skel.root_idx, canonical_rotation=config.canonical_rotation,
                          universal_skeleton=config.universal_skeleton)
    enc = mapper.encoder
    enc_state = AdamState.for_params(enc.params, config.adam)
    dec_state = None if frozen else AdamState.for_params(decoder.params, config.adam)
    dec_mode = 'eval' if frozen else 'train'
    weights = config.weights
    augmenting = config.augment.enabled and len(world) > 0
    per_batch = max(1, config.batch_size // 2) if augmenting else config.batch_size

    def prep(batch: np.ndarray) -> np.ndarray:
        return preprocess_poses(batch, skel, rotate=config.canonical_rotation,
                                universal_skeleton=config.universal_skeleton)

    log: List[Dict[str, Any]] = []
    writer = RecordWriter(log_path)
    logger.info(f"Training 2D mapper on {len(world)} pairs for {config.epochs} epochs "
                f"({'frozen' if frozen else 'jointly trained'} decoder)")
    try:
        for epoch in tqdm(range(config.epochs), desc='train-mapper', disable=not progress):
            sums = {'mse': 0.0, 'triplet': 0.0, 'total': 0.0}
            n_triplets = 0
            order = order_rng.permutation(len(world))
            n_batches = max(1, math.ceil(len(world) / per_batch))
            batches = [b for b in np.array_split(order, n_batches) if len(b)]
            for b, idx in enumerate(batches):
                x3, x2 = world[idx], joints2d[idx]
                if augmenting:
                    sources = world[aug_rng.integers(0, len(world), size=len(idx))]
                    x3, x2, _ = compose_augmented_batch(x3, x2, sources, aug_rng, config.augment, skel.root_idx)
                target = prep(x3)
                batch = len(target)
                x = normalize_2d_array(x2, skel.root_idx).reshape(batch, -1)
                t = target.reshape(batch, -1)

                e, enc_tape = forward(enc.spec, enc.params, x, 'train', noise_rng)
                s_hat, dec_tape = forward(decoder.spec, decoder.params, e, dec_mode, noise_rng)
                l_mse, d_shat = loss_mse_with_grad(t, s_hat)
                if weights.w_triplet > 0:
                    triplets = mine_triplets(target, config.triplet)
                    l_trip, de_trip = loss_triplet_with_grad(e, triplets, config.triplet)
                else:
                    triplets, l_trip, de_trip = [], 0.0, np.zeros_like(e)
                total = weights.w_mse * l_mse + weights.w_triplet * l_trip
                if not math.isfinite(total):
                    raise TrainingDivergedError("Loss is not finite", epoch=epoch, batch=b,
                                                mse=l_mse, triplet=l_trip)

                dec_grads, de_dec = backward(dec_tape, weights.w_mse * d_shat)
                enc_grads, _ = backward(enc_tape, de_dec + weights.w_triplet * de_trip)
                enc.params = update_running_stats(adam_step(enc_state, enc.params, enc_grads),
                                                  enc_tape, config.bn_momentum)
                if dec_state is not None:
                    decoder.params = update_running_stats(adam_step(dec_state, decoder.params, dec_grads),
                                                          dec_tape, config.bn_momentum)

                sums['mse'] += l_mse
                sums['triplet'] += l_trip
                sums['total'] += total
                n_triplets += len(triplets)

            record = {'epoch': epoch, **{k: v / max(1, len(batches)) for k, v in sums.items()},
                      'n_triplets': n_triplets}
            writer.write(record)
            log.append(record)
    finally:
        writer.close()

    if frozen:
        digest_after = params_digest(decoder.params)
        if digest_after != digest_before:
            raise FrozenDecoderError("Decoder parameters changed during mapper training",
                                     before=digest_before, after=digest_after)
    else:
        mapper.decoder_digest = params_digest(decoder.params, '<f4')
    return TrainResult((mapper, decoder), log)


def check_decoder(mapper: Mapper2D, decoder: Mlp) -> None:
    """
    Raises:
        FrozenDecoderError: If ``decoder`` is not the one the mapper was trained against
    """
    if mapper.decoder_digest and params_digest(decoder.params, '<f4') != mapper.decoder_digest:
        raise FrozenDecoderError("Decoder does not match the one the mapper was trained with",
                                 expected=mapper.decoder_digest)


def chance_level(canonical: np.ndarray, rng: np.random.Generator, n_pairs: int = 1000,
                 aligned: bool = False) -> float:
    """Mean MPJPE between randomly paired distinct poses."""
    canonical = np.asarray(canonical, dtype=np.float64)
    if len(canonical) < 2:
        raise DimensionError("Chance level needs at least two poses")
    a = rng.integers(0, len(canonical), size=n_pairs)
    b = (a + rng.integers(1, len(canonical), size=n_pairs)) % len(canonical)
    metric = aligned_mpjpe_array if aligned else mpjpe_array
    return float(np.mean(metric(canonical[a], canonical[b])))


def evaluate_lifting(mapper: Mapper2D, decoder: Mlp, joints2d: np.ndarray, joints3d: np.ndarray,
                     skel: Skeleton, rng: Optional[np.random.Generator] = None) -> Dict[str, float]:
    """
    Reconstruction quality of lifted poses against their canonical targets.

    Targets are preprocessed with the flags the mapper was trained under.

    Returns:
        dict: ``mpjpe``, ``aligned_mpjpe`` and ``chance_mpjpe`` (random pairs of targets)
    """
    target = preprocess_poses(joints3d, skel, rotate=mapper.canonical_rotation,
                              universal_skeleton=mapper.universal_skeleton)
    lifted = lift_array(mapper, decoder, joints2d)
    return {
        'mpjpe': float(np.mean(mpjpe_array(target, lifted))),
        'aligned_mpjpe': float(np.mean(aligned_mpjpe_array(target, lifted, skel.root_idx))),
        'chance_mpjpe': chance_level(target, rng or np.random.default_rng(0)),
        'n': int(len(target)),
    }


def save_mapper(mapper: Mapper2D, path: str) -> None:
    save_checkpoint(mapper.encoder.params, mapper.encoder.spec, path, {
        'role': 'mapper',
        'decoder_digest': mapper.decoder_digest,
        'decoder_path': mapper.decoder_path,
        'root_idx': mapper.root_idx,
        'canonical_rotation': mapper.canonical_rotation,
        'universal_skeleton': mapper.universal_skeleton,
    })
    logger.info(f"Saved mapper checkpoint {path}")


def load_mapper(path: str) -> Mapper2D:
    spec, params, meta = load_network(path)
    return Mapper2D(Mlp(spec, params), decoder_digest=meta.get('decoder_digest', ''),
                    decoder_path=meta.get('decoder_path', ''), root_idx=int(meta.get('root_idx', 0)),
                    canonical_rotation=bool(meta.get('canonical_rotation', True)),
                    universal_skeleton=bool(meta.get('universal_skeleton', True)))
