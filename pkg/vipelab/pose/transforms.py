# -*- coding: utf-8 -*-
"""
Pose normalization: root centering, RMS scaling, hip/spine realignment
(Kabsch), universal-skeleton retargeting and Procrustes alignment.

Every transform has an array form working on ``(..., N, 3)`` stacks and a
pose-object form; the pose form calls the array form so single poses and
batches go through identical arithmetic.
"""

from typing import Tuple, Union

import numpy as np

from ..errors import AlignmentDegenerateError, DegenerateBoneError, DegeneratePoseError, DimensionError
from .skeleton import Skeleton
from .types import CanonicalPose3D, Pose3D, Rotation

# Left hip, right hip and spine are pulled onto these points.
ALIGN_TARGETS = np.array([[0.0, -1.0, 0.0],
                          [0.0, 1.0, 0.0],
                          [0.0, 0.0, 1.0]])

DEGENERATE_EPS = 1e-12
RANK_RTOL = 1e-10

PoseLike = Union[Pose3D, np.ndarray]


def _joints(p: PoseLike) -> np.ndarray:
    return p.joints if isinstance(p, Pose3D) else np.asarray(p, dtype=np.float64)


def kabsch(source: np.ndarray, target: np.ndarray, min_rank: int = 2) -> np.ndarray:
    """
    Proper rotations R minimizing Σ‖R·sᵢ − tᵢ‖² for stacks of paired points.

    Args:
        source: (..., M, 3) points to rotate
        target: (..., M, 3) points to rotate onto
        min_rank: Minimum rank of the cross-covariance accepted; below it the
            optimum is not unique

    Returns:
        np.ndarray: (..., 3, 3) rotation matrices with det = +1

    Raises:
        AlignmentDegenerateError: If a cross-covariance has rank < min_rank
    """
    h = np.swapaxes(source, -1, -2) @ target
    u, s, vh = np.linalg.svd(h)
    scale = np.maximum(s[..., :1], DEGENERATE_EPS)
    rank = np.sum(s > RANK_RTOL * scale, axis=-1) * (s[..., 0] > DEGENERATE_EPS)
    if np.any(rank < min_rank):
        bad = np.argwhere(np.atleast_1d(rank < min_rank)).ravel().tolist()
        raise AlignmentDegenerateError(
            f"Cross-covariance rank below {min_rank}; alignment is not unique",
            indices=bad[:10],
        )
    v = np.swapaxes(vh, -1, -2)
    ut = np.swapaxes(u, -1, -2)
    d = np.sign(np.linalg.det(v @ ut))
    correction = np.broadcast_to(np.eye(3), h.shape).copy()
    correction[..., 2, 2] = d
    return v @ correction @ ut


def root_center_array(joints: np.ndarray, root_idx: int = 0) -> np.ndarray:
    joints = np.asarray(joints, dtype=np.float64)
    return joints - joints[..., root_idx:root_idx + 1, :]


def rms_radius(joints: np.ndarray) -> np.ndarray:
    """√(Σᵢ‖sᵢ‖²/N) per pose."""
    joints = np.asarray(joints, dtype=np.float64)
    return np.sqrt(np.mean(np.sum(joints ** 2, axis=-1), axis=-1))


def normalize_scale_array(joints: np.ndarray) -> np.ndarray:
    joints = np.asarray(joints, dtype=np.float64)
    radius = rms_radius(joints)
    if np.any(radius <= DEGENERATE_EPS):
        raise DegeneratePoseError("Cannot normalize a pose whose joints all sit at the origin")
    return joints / radius[..., None, None]


def align_rotation_array(joints: np.ndarray, skel: Skeleton) -> Tuple[np.ndarray, np.ndarray]:
    """Rotate root-centered, scaled joints so hips/spine best match the targets."""
    joints = np.asarray(joints, dtype=np.float64)
    triad = joints[..., [skel.left_hip_idx, skel.right_hip_idx, skel.spine_idx], :]
    targets = np.broadcast_to(ALIGN_TARGETS, triad.shape)
    rotation = kabsch(triad, targets)
    return joints @ np.swapaxes(rotation, -1, -2), rotation


def canonicalize_batch(joints: np.ndarray, skel: Skeleton, rotate: bool = True) -> np.ndarray:
    """
    Canonicalize a stack of poses.

    Args:
        joints: (B, N, 3) or (N, 3) joint coordinates
        skel: Skeleton giving the root and hip/spine joints
        rotate: Apply hip/spine realignment (disable for the rotation ablation)

    Returns:
        np.ndarray: Canonical joints with the same shape
    """
    joints = np.asarray(joints, dtype=np.float64)
    if joints.shape[-2:] != (skel.n_joints, 3):
        raise DimensionError(f"Expected (..., {skel.n_joints}, 3) joints, got {joints.shape}")
    out = normalize_scale_array(root_center_array(joints, skel.root_idx))
    if rotate:
        out, _ = align_rotation_array(out, skel)
    return out


def enforce_bone_lengths_array(joints: np.ndarray, skel: Skeleton) -> np.ndarray:
    joints = np.asarray(joints, dtype=np.float64)
    out = np.empty_like(joints)
    out[..., skel.root_idx, :] = joints[..., skel.root_idx, :]
    for parent, child in skel.bones():
        bone = joints[..., child, :] - joints[..., parent, :]
        length = np.linalg.norm(bone, axis=-1, keepdims=True)
        if np.any(length <= DEGENERATE_EPS):
            raise DegenerateBoneError(
                f"Bone {skel.joint_names[parent]}->{skel.joint_names[child]} has zero length")
        out[..., child, :] = out[..., parent, :] + skel.bone_lengths[child] * bone / length
    return out


def preprocess_poses(joints: np.ndarray, skel: Skeleton, rotate: bool = True,
                     universal_skeleton: bool = True) -> np.ndarray:
    """Retarget to the skeleton's bone lengths (optional) and canonicalize."""
    joints = np.asarray(joints, dtype=np.float64)
    if universal_skeleton:
        joints = enforce_bone_lengths_array(joints, skel)
    return canonicalize_batch(joints, skel, rotate=rotate)


def root_center(p: Pose3D, skel: Skeleton) -> Pose3D:
    """Translate every joint so the root sits at the origin."""
    return p.with_joints(root_center_array(p.joints, skel.root_idx))


def normalize_scale(p: Pose3D) -> Pose3D:
    """
    Divide joints by their RMS radius.

    Raises:
        DegeneratePoseError: If every joint is at the origin
    """
    return p.with_joints(normalize_scale_array(p.joints))


def align_rotation(p: Pose3D, skel: Skeleton) -> Tuple[CanonicalPose3D, Rotation]:
    """
    Rotate a root-centered, scale-normalized pose onto the canonical triad.

    The rotation C minimizes ½Σ‖C·aᵢ − bᵢ‖² where a are the left hip, right
    hip and spine vectors and b the fixed targets; the returned pose is C·p.

    Raises:
        AlignmentDegenerateError: If the hip/spine triad has rank < 2
    """
    rotated, rotation = align_rotation_array(p.joints, skel)
    return CanonicalPose3D(rotated, p.skeleton_id), Rotation(rotation)


def canonicalize(p: Pose3D, skel: Skeleton, rotate: bool = True) -> CanonicalPose3D:
    """Root-center, scale-normalize and realign a pose."""
    return CanonicalPose3D(canonicalize_batch(p.joints, skel, rotate=rotate), p.skeleton_id)


def enforce_bone_lengths(p: Pose3D, skel: Skeleton) -> Pose3D:
    """
    Rescale every bone (root outward) to the skeleton's canonical length,
    keeping bone directions.

    Raises:
        DegenerateBoneError: If an input bone has zero length
    """
    if p.n_joints != skel.n_joints:
        raise DimensionError(f"Pose has {p.n_joints} joints, skeleton {skel.n_joints}")
    return p.with_joints(enforce_bone_lengths_array(p.joints, skel))


def procrustes_align_array(a: np.ndarray, b: np.ndarray, scale: bool = False,
                           root_idx: int = 0) -> np.ndarray:
    """
    Root-center both stacks and rotate (optionally scale) b onto a.

    Args:
        a: (..., N, 3) reference joints
        b: (..., N, 3) joints to align
        scale: Also fit an isotropic scale
        root_idx: Joint used for centering

    Returns:
        np.ndarray: Aligned, root-centered b
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"Cannot align poses of shapes {a.shape} and {b.shape}")
    a_c = root_center_array(a, root_idx)
    b_c = root_center_array(b, root_idx)
    if np.any(rms_radius(b_c) <= DEGENERATE_EPS) or np.any(rms_radius(a_c) <= DEGENERATE_EPS):
        raise AlignmentDegenerateError("Cannot align a pose whose joints all coincide")
    rotation = kabsch(b_c, a_c, min_rank=1)
    aligned = b_c @ np.swapaxes(rotation, -1, -2)
    if scale:
        num = np.sum(aligned * a_c, axis=(-1, -2))
        den = np.sum(b_c * b_c, axis=(-1, -2))
        aligned = aligned * (num / den)[..., None, None]
    return aligned


def procrustes_align(a: Pose3D, b: Pose3D, scale: bool = False, root_idx: int = 0) -> Pose3D:
    """
    Best rigid fit of b onto a (rotation over all joints, root-centered).

    Raises:
        DimensionError: If the poses have different joint counts
        AlignmentDegenerateError: If all joints coincide
    """
    return b.with_joints(procrustes_align_array(_joints(a), _joints(b), scale=scale, root_idx=root_idx))
