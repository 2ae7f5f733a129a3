# -*- coding: utf-8 -*-
"""
Pose distances: MPJPE, Procrustes-aligned MPJPE and greedy deduplication.
"""

from typing import List, Sequence, Union

import numpy as np

from ..errors import ConfigError, DimensionError
from .transforms import procrustes_align_array, root_center_array
from .types import Pose3D

PoseLike = Union[Pose3D, np.ndarray]


def _joints(p: PoseLike) -> np.ndarray:
    return p.joints if isinstance(p, Pose3D) else np.asarray(p, dtype=np.float64)


def mpjpe_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Mean per-joint Euclidean distance over the last two axes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"MPJPE needs matching shapes, got {a.shape} and {b.shape}")
    return np.mean(np.linalg.norm(a - b, axis=-1), axis=-1)


def mpjpe(a: PoseLike, b: PoseLike) -> float:
    """
    Mean Per Joint Position Error between two poses.

    Args:
        a: First pose
        b: Second pose

    Returns:
        float: Mean over joints of the Euclidean joint distance

    Raises:
        DimensionError: If the poses have different joint counts
    """
    return float(mpjpe_array(_joints(a), _joints(b)))


def aligned_mpjpe_array(a: np.ndarray, b: np.ndarray, root_idx: int = 0) -> np.ndarray:
    """MPJPE after rigidly aligning b onto a (both root-centered)."""
    a = np.asarray(a, dtype=np.float64)
    aligned = procrustes_align_array(a, b, root_idx=root_idx)
    return mpjpe_array(root_center_array(a, root_idx), aligned)


def aligned_mpjpe(a: PoseLike, b: PoseLike, root_idx: int = 0) -> float:
    return float(aligned_mpjpe_array(_joints(a), _joints(b), root_idx=root_idx))


def pairwise_mpjpe(joints: np.ndarray) -> np.ndarray:
    """
    B×B MPJPE matrix for a batch of poses.

    The matrix is exactly symmetric with a zero diagonal.
    """
    joints = np.asarray(joints, dtype=np.float64)
    diff = joints[:, None, :, :] - joints[None, :, :, :]
    return np.mean(np.linalg.norm(diff, axis=-1), axis=-1)


def dedup_poses(poses: Sequence[PoseLike], min_dist: float, root_idx: int = 0) -> List[int]:
    """
    Greedy sequential filter over a pose list.

    A pose is kept iff its Procrustes-aligned MPJPE to every already kept pose
    is at least ``min_dist``.

    Args:
        poses: Poses in the order they are considered
        min_dist: Minimum aligned MPJPE to every kept pose (>= 0)
        root_idx: Joint used for centering

    Returns:
        List[int]: Indices of kept poses, ascending
    """
    if min_dist < 0:
        raise ConfigError("min_dist must be >= 0", min_dist=min_dist)
    kept: List[int] = []
    stack = [_joints(p) for p in poses]
    for i, joints in enumerate(stack):
        if kept:
            reference = np.stack([stack[k] for k in kept])
            candidate = np.broadcast_to(joints, reference.shape)
            distances = aligned_mpjpe_array(reference, candidate, root_idx=root_idx)
            if np.any(distances < min_dist):
                continue
        kept.append(i)
    return kept
