# -*- coding: utf-8 -*-
"""
End-to-end pipelines over a dataset: train the VAE and the 2D mapper,
evaluate cross-view retrieval on held-out data, and run ablations that
retrain with one component switched off.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import PoseDataset
from .errors import ConfigError
from .mapper2d import MapperTrainConfig, Mapper2D, encode2d, evaluate_lifting, train_mapper
from .nn import Mlp
from .pose.skeleton import Skeleton
from .pose.transforms import preprocess_poses
from .retrieval import EmbeddingIndex, HitConfig, RigHitResult, keypoint_index, rig_hit_at_k
from .vae import VaeModel, VaeTrainConfig, train_vae

logger = logging.getLogger(__name__)

ABLATIONS = ('no_triplet', 'no_canonical_rotation', 'no_pretrain')


def eval_rows(dataset: PoseDataset, split: str = 'test') -> PoseDataset:
    rows = dataset.select(split=split)
    if len(rows) == 0:
        rows = dataset
    return rows


def training_rows(dataset: PoseDataset) -> PoseDataset:
    """Train-split rows seen by the training cameras (held-out cameras removed)."""
    held_out = dataset.manifest.held_out_cameras if dataset.manifest else []
    rows = dataset.select(split='train', exclude_cameras=held_out)
    if len(rows) == 0:
        raise ConfigError("Dataset has no training rows outside the held-out cameras")
    return rows


def canonical_targets(rows: PoseDataset, skel: Skeleton, rotate: bool = True,
                      universal_skeleton: bool = True) -> np.ndarray:
    return preprocess_poses(rows.joints3d, skel, rotate=rotate, universal_skeleton=universal_skeleton)


def mapper_index(mapper: Mapper2D, rows: PoseDataset, skel: Skeleton) -> EmbeddingIndex:
    """Index of 2D-encoder embeddings with the canonical 3D pose behind each row."""
    return EmbeddingIndex(rows.pose_ids, rows.camera_ids, encode2d(mapper, rows.joints2d),
                          canonical_targets(rows, skel, True, mapper.universal_skeleton))


def keypoint_rows_index(rows: PoseDataset, skel: Skeleton, universal_skeleton: bool = True) -> EmbeddingIndex:
    return keypoint_index(rows.pose_ids, rows.camera_ids, rows.joints2d,
                          canonical_targets(rows, skel, True, universal_skeleton), skel.root_idx)


def query_cameras(dataset: PoseDataset, rows: PoseDataset) -> Optional[List[int]]:
    held_out = list(dataset.manifest.held_out_cameras) if dataset.manifest else []
    present = set(rows.camera_list())
    chosen = [c for c in held_out if c in present]
    return chosen or None


def evaluate_mapper_retrieval(mapper: Mapper2D, dataset: PoseDataset, skel: Skeleton, cfg: HitConfig,
                              workers: int = 1, split: str = 'test') -> RigHitResult:
    """
    Rig Hit@k of a mapper on one split. Held-out cameras query galleries of
    every other camera when the dataset declares any, otherwise all ordered
    camera pairs are used. The hit rule always compares rotation-canonical poses.
    """
    rows = eval_rows(dataset, split)
    return rig_hit_at_k(mapper_index(mapper, rows, skel), cfg, query_cameras=query_cameras(dataset, rows),
                        workers=workers, root_idx=skel.root_idx)


def evaluate_keypoint_retrieval(dataset: PoseDataset, skel: Skeleton, cfg: HitConfig,
                                workers: int = 1, split: str = 'test') -> RigHitResult:
    rows = eval_rows(dataset, split)
    return rig_hit_at_k(keypoint_rows_index(rows, skel), cfg, query_cameras=query_cameras(dataset, rows),
                        workers=workers, root_idx=skel.root_idx)


@dataclass
class PipelineResult:
    """Models and held-out metrics of one pipeline run."""

    label: str
    vae: Optional[VaeModel]
    mapper: Mapper2D
    decoder: Mlp
    hit: RigHitResult
    lifting: Dict[str, float] = field(default_factory=dict)
    logs: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)


def run_pipeline(dataset: PoseDataset, skel: Skeleton, vae_cfg: VaeTrainConfig, mapper_cfg: MapperTrainConfig,
                 hit_cfg: HitConfig, workers: int = 1, label: str = 'baseline',
                 progress: bool = False) -> PipelineResult:
    """
    Train the VAE on unique training poses, train the mapper on training-camera
    rows, then measure held-out retrieval and lifting error.
    """
    train = training_rows(dataset)
    _, world = train.unique_poses()
    vae = None
    decoder = None
    logs: Dict[str, List[Dict[str, Any]]] = {}
    if mapper_cfg.pretrained_decoder:
        vae_result = train_vae(world, skel, vae_cfg, progress=progress)
        vae = vae_result.model
        decoder = vae.decoder
        logs['vae'] = vae_result.log
    mapper_result = train_mapper(train.joints2d, train.joints3d, skel, decoder, mapper_cfg, progress=progress)
    mapper, decoder = mapper_result.model
    logs['mapper'] = mapper_result.log

    hit = evaluate_mapper_retrieval(mapper, dataset, skel, hit_cfg, workers)
    rows = eval_rows(dataset)
    lifting = evaluate_lifting(mapper, decoder, rows.joints2d, rows.joints3d, skel,
                               np.random.default_rng(vae_cfg.seed))
    logger.info(f"[{label}] held-out Hit@k {hit.average}, lifting MPJPE {lifting['mpjpe']:.4f}")
    return PipelineResult(label, vae, mapper, decoder, hit, lifting, logs)


def ablated_configs(ablation: str, vae_cfg: VaeTrainConfig,
                    mapper_cfg: MapperTrainConfig) -> Tuple[VaeTrainConfig, MapperTrainConfig]:
    """
    Configs with one component disabled.

    - ``no_triplet``: triplet weight 0 in both training stages
    - ``no_canonical_rotation``: skip hip/spine realignment in preprocessing
    - ``no_pretrain``: train the mapper with a fresh, trainable decoder
    """
    if ablation == 'no_triplet':
        return (dataclasses.replace(vae_cfg, weights=dataclasses.replace(vae_cfg.weights, w_triplet=0.0)),
                dataclasses.replace(mapper_cfg, weights=dataclasses.replace(mapper_cfg.weights, w_triplet=0.0)))
    if ablation == 'no_canonical_rotation':
        return (dataclasses.replace(vae_cfg, canonical_rotation=False),
                dataclasses.replace(mapper_cfg, canonical_rotation=False))
    if ablation == 'no_pretrain':
        return vae_cfg, dataclasses.replace(mapper_cfg, pretrained_decoder=False)
    raise ConfigError(f"Unknown ablation {ablation!r}; expected one of {ABLATIONS}")


def run_ablation(dataset: PoseDataset, skel: Skeleton, ablations: Sequence[str], vae_cfg: VaeTrainConfig,
                 mapper_cfg: MapperTrainConfig, hit_cfg: HitConfig, workers: int = 1,
                 progress: bool = False) -> List[Dict[str, Any]]:
    """
    Train the baseline and each ablated pipeline on the same data and seed.

    Returns:
        Result rows: the 2D keypoint baseline, the full pipeline, then one
        row per ablation, each with held-out Hit@k and lifting MPJPE
    """
    rows: List[Dict[str, Any]] = []
    keypoints = evaluate_keypoint_retrieval(dataset, skel, hit_cfg, workers)
    rows.append({'variant': '2d_keypoints', **{f'hit@{k}': v for k, v in keypoints.average.items()},
                 'mpjpe': None})

    baseline = run_pipeline(dataset, skel, vae_cfg, mapper_cfg, hit_cfg, workers, 'baseline', progress)
    rows.append(_row('baseline', baseline))
    for ablation in ablations:
        vae_ablated, mapper_ablated = ablated_configs(ablation, vae_cfg, mapper_cfg)
        result = run_pipeline(dataset, skel, vae_ablated, mapper_ablated, hit_cfg, workers, ablation, progress)
        rows.append(_row(ablation, result))
    return rows


def _row(variant: str, result: PipelineResult) -> Dict[str, Any]:
    return {'variant': variant, **{f'hit@{k}': v for k, v in result.hit.average.items()},
            'mpjpe': result.lifting.get('mpjpe')}
