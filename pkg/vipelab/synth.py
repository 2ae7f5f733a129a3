# -*- coding: utf-8 -*-
"""
Synthetic articulated-pose generator.

Poses are built by forward kinematics from the skeleton's rest directions
with per-joint rotations drawn inside configured ranges, then projected
through every camera of a rig. Each pose id owns an independent random
stream, so output does not depend on how generation is sharded.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation as ScipyRotation

from .camera import Camera, project_array
from .dataset import SPLITS, DatasetManifest, write_dataset
from .errors import ConfigError
from .pose.skeleton import Skeleton
from .pose.types import Pose3D

logger = logging.getLogger(__name__)

# Half-widths (rad) for local X/Y/Z rotations; hips stay rigid with the pelvis.
DEFAULT_ANGLE_RANGES: Dict[str, Tuple[float, float, float]] = {
    'RKnee': (0.9, 0.5, 0.3), 'RFoot': (1.2, 0.1, 0.1),
    'LKnee': (0.9, 0.5, 0.3), 'LFoot': (1.2, 0.1, 0.1),
    'Spine': (0.3, 0.4, 0.3), 'Thorax': (0.2, 0.2, 0.3),
    'Neck': (0.3, 0.3, 0.3), 'Head': (0.3, 0.3, 0.3),
    'LShoulder': (0.1, 0.1, 0.1), 'LElbow': (1.4, 1.2, 1.0), 'LWrist': (1.4, 1.0, 0.5),
    'RShoulder': (0.1, 0.1, 0.1), 'RElbow': (1.4, 1.2, 1.0), 'RWrist': (1.4, 1.0, 0.5),
}
ANATOMICAL_LIMIT = math.pi / 2


def default_rig() -> List[Camera]:
    """Four chest-level training cameras plus two elevated held-out ones."""
    chest = [Camera(azimuth=math.pi / 4 + k * math.pi / 2, elevation=0.0, radius=5.0, focal=1.0,
                    name=f'chest{k}') for k in range(4)]
    elevated = [Camera(azimuth=k * math.pi, elevation=math.pi / 5, radius=5.0, focal=1.0,
                       name=f'elevated{k}') for k in range(2)]
    return chest + elevated


@dataclass(frozen=True)
class GeneratorConfig:
    """Synthetic dataset parameters."""

    n_poses: int = 5000
    angle_ranges: Dict[str, Tuple[float, float, float]] = field(default_factory=lambda: dict(DEFAULT_ANGLE_RANGES))
    joint_limits: Dict[str, float] = field(default_factory=dict)
    default_limit: float = ANATOMICAL_LIMIT
    root_yaw_range: Tuple[float, float] = (0.0, 2 * math.pi)
    root_tilt: float = 0.15
    rig: Tuple[Camera, ...] = field(default_factory=lambda: tuple(default_rig()))
    held_out_cameras: Tuple[int, ...] = (4, 5)
    seed: int = 0
    split_fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.n_poses < 0:
            raise ConfigError("n_poses must be >= 0")
        if len(self.split_fractions) != 3 or abs(sum(self.split_fractions) - 1.0) > 1e-9 \
                or min(self.split_fractions) < 0:
            raise ConfigError(f"split_fractions must be three non-negative values summing to 1, "
                              f"got {self.split_fractions}")
        for joint, ranges in self.angle_ranges.items():
            limit = self.joint_limits.get(joint, self.default_limit)
            if len(ranges) != 3 or any(r < 0 or r > limit for r in ranges):
                raise ConfigError(f"Angle ranges for {joint} must be three values in [0, {limit}]")
        for cam in self.held_out_cameras:
            if not 0 <= cam < len(self.rig):
                raise ConfigError(f"Held-out camera {cam} is not in the rig")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GeneratorConfig':
        data = dict(data)
        if 'rig' in data:
            data['rig'] = tuple(c if isinstance(c, Camera) else Camera.from_dict(c) for c in data['rig'])
        if 'angle_ranges' in data:
            data['angle_ranges'] = {k: tuple(float(x) for x in v) for k, v in data['angle_ranges'].items()}
        for key in ('root_yaw_range', 'split_fractions', 'held_out_cameras'):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['rig'] = [c.to_dict() for c in self.rig]
        data['angle_ranges'] = {k: list(v) for k, v in sorted(self.angle_ranges.items())}
        for key in ('root_yaw_range', 'split_fractions', 'held_out_cameras'):
            data[key] = list(data[key])
        return data


def _sample_joints(rng: np.random.Generator, skel: Skeleton, cfg: GeneratorConfig) -> np.ndarray:
    yaw = rng.uniform(cfg.root_yaw_range[0], cfg.root_yaw_range[1])
    tilt = rng.uniform(-1.0, 1.0, size=2) * cfg.root_tilt
    ranges = np.array([cfg.angle_ranges.get(name, (0.0, 0.0, 0.0)) for name in skel.joint_names])
    local_angles = rng.uniform(-1.0, 1.0, size=(skel.n_joints, 3)) * ranges

    root_rotation = ScipyRotation.from_euler('ZXY', [yaw, tilt[0], tilt[1]]).as_matrix()
    local = ScipyRotation.from_euler('XYZ', local_angles).as_matrix()
    directions = np.asarray(skel.rest_directions, dtype=np.float64)

    world = np.empty((skel.n_joints, 3, 3))
    world[skel.root_idx] = root_rotation
    joints = np.zeros((skel.n_joints, 3))
    for parent, child in skel.bones():
        world[child] = world[parent] @ local[child]
        joints[child] = joints[parent] + skel.bone_lengths[child] * (world[child] @ directions[child])
    return joints


def sample_pose(rng: np.random.Generator, skel: Skeleton, cfg: GeneratorConfig) -> Pose3D:
    """
    Draw one pose by forward kinematics.

    Each bone is its rest direction rotated by the accumulated parent
    rotations and its own local rotation, scaled to the skeleton's bone
    length, so bone lengths are exact by construction.

    Args:
        rng: Random generator
        skel: Skeleton with rest directions
        cfg: Generator config (angle ranges, root yaw/tilt)

    Returns:
        Pose3D: Pose with the root at the origin
    """
    return Pose3D(_sample_joints(rng, skel, cfg), skel.name)


def assign_splits(n_poses: int, fractions: Sequence[float], rng: np.random.Generator) -> List[str]:
    """Split tag per pose id; counts follow the fractions, membership is shuffled."""
    n_train = int(round(fractions[0] * n_poses))
    n_val = min(int(round(fractions[1] * n_poses)), n_poses - n_train)
    tags = np.array(['train'] * n_train + ['val'] * n_val + ['test'] * (n_poses - n_train - n_val), dtype=object)
    order = rng.permutation(n_poses)
    out = np.empty(n_poses, dtype=object)
    out[order] = tags
    return [str(t) for t in out]


def _generate_shard(start: int, seeds: Sequence[np.random.SeedSequence], skel: Skeleton,
                    cfg: GeneratorConfig) -> Tuple[int, np.ndarray, np.ndarray]:
    poses = np.stack([_sample_joints(np.random.default_rng(s), skel, cfg) for s in seeds]) \
        if len(seeds) else np.zeros((0, skel.n_joints, 3))
    projections = np.stack([project_array(poses, cam, skel.root_idx) for cam in cfg.rig], axis=1) \
        if len(seeds) else np.zeros((0, len(cfg.rig), skel.n_joints, 2))
    return start, poses, projections


def generate_poses(cfg: GeneratorConfig, skel: Skeleton, workers: int = 1) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """
    Generate world poses, their per-camera projections and split tags.

    Returns:
        Tuple of ((P, N, 3) poses, (P, C, N, 2) projections, split per pose)
    """
    root_seq = np.random.SeedSequence(cfg.seed)
    split_seq, pose_seq = root_seq.spawn(2)
    seeds = pose_seq.spawn(cfg.n_poses)
    splits = assign_splits(cfg.n_poses, cfg.split_fractions, np.random.default_rng(split_seq))

    workers = max(1, workers)
    shard = max(1, math.ceil(cfg.n_poses / workers))
    ranges = [(s, seeds[s:s + shard]) for s in range(0, cfg.n_poses, shard)]
    if workers == 1 or len(ranges) <= 1:
        results = [_generate_shard(s, chunk, skel, cfg) for s, chunk in ranges]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda item: _generate_shard(item[0], item[1], skel, cfg), ranges))
    results.sort(key=lambda r: r[0])

    if results:
        poses = np.concatenate([r[1] for r in results])
        projections = np.concatenate([r[2] for r in results])
    else:
        poses = np.zeros((0, skel.n_joints, 3))
        projections = np.zeros((0, len(cfg.rig), skel.n_joints, 2))
    return poses, projections, splits


def generate_dataset(cfg: GeneratorConfig, skel: Skeleton, out_path: str, workers: int = 1) -> DatasetManifest:
    """
    Generate a synthetic multi-camera dataset and write it to ``out_path``.

    Args:
        cfg: Generator config
        skel: Skeleton used for forward kinematics
        out_path: Dataset directory (created if missing)
        workers: Number of generation threads; output is independent of it

    Returns:
        DatasetManifest: Counts and provenance of the written dataset

    Raises:
        DatasetIOError: If the directory cannot be written
    """
    poses, projections, splits = generate_poses(cfg, skel, workers)
    n_cams = len(cfg.rig)

    def records():
        for pid in range(cfg.n_poses):
            for cid in range(n_cams):
                yield {
                    'id': pid,
                    'split': splits[pid],
                    'camera_id': cid,
                    'joints3d': poses[pid],
                    'joints2d': projections[pid, cid],
                }

    manifest = DatasetManifest(
        n_poses=cfg.n_poses,
        n_records=cfg.n_poses * n_cams,
        n_cameras=n_cams,
        split_counts={s: splits.count(s) for s in SPLITS},
        seed=cfg.seed,
        skeleton=skel.name,
        rig=[c.to_dict() for c in cfg.rig],
        n_joints=skel.n_joints,
        held_out_cameras=list(cfg.held_out_cameras),
        generator=cfg.to_dict(),
    )
    write_dataset(out_path, manifest, records())
    logger.info(f"Wrote {manifest.n_records} records ({cfg.n_poses} poses x {n_cams} cameras) to {out_path}")
    return manifest
