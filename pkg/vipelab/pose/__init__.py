# -*- coding: utf-8 -*-
"""
Pose core: skeletons, pose containers, canonicalization and pose distances.
"""

from .skeleton import Skeleton, load_skeleton, default_skeleton, ROOT_PARENT
from .types import Pose3D, Pose2D, CanonicalPose3D, Rotation
from .transforms import (
    ALIGN_TARGETS,
    kabsch, rms_radius,
    root_center, normalize_scale, align_rotation, canonicalize,
    enforce_bone_lengths, procrustes_align,
    root_center_array, normalize_scale_array, align_rotation_array,
    canonicalize_batch, enforce_bone_lengths_array, procrustes_align_array,
    preprocess_poses,
)
from .metrics import (
    mpjpe, mpjpe_array, aligned_mpjpe, aligned_mpjpe_array,
    pairwise_mpjpe, dedup_poses,
)

__all__ = [
    'Skeleton', 'load_skeleton', 'default_skeleton', 'ROOT_PARENT',
    'Pose3D', 'Pose2D', 'CanonicalPose3D', 'Rotation',
    'ALIGN_TARGETS', 'kabsch', 'rms_radius',
    'root_center', 'normalize_scale', 'align_rotation', 'canonicalize',
    'enforce_bone_lengths', 'procrustes_align',
    'root_center_array', 'normalize_scale_array', 'align_rotation_array',
    'canonicalize_batch', 'enforce_bone_lengths_array', 'procrustes_align_array',
    'preprocess_poses',
    'mpjpe', 'mpjpe_array', 'aligned_mpjpe', 'aligned_mpjpe_array',
    'pairwise_mpjpe', 'dedup_poses',
]
