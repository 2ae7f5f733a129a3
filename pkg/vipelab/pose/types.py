# -*- coding: utf-8 -*-
"""
Immutable pose containers.

Joint arrays are copied to float64 and marked read-only on construction so
pose objects can be shared freely between worker threads.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, VipeLabError

ORTHONORMAL_TOL = 1e-9


def _frozen_array(values, cols: int, label: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.shape[1] != cols:
        raise DimensionError(f"{label} joints must be N×{cols}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{label} joints must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Pose3D:
    """N×3 joint coordinates plus the id of the skeleton they follow."""

    joints: np.ndarray
    skeleton_id: str = 'h36m17'

    def __post_init__(self):
        object.__setattr__(self, 'joints', _frozen_array(self.joints, 3, 'Pose3D'))

    @property
    def n_joints(self) -> int:
        return self.joints.shape[0]

    def with_joints(self, joints: np.ndarray) -> 'Pose3D':
        """Same pose type and skeleton, new coordinates."""
        return type(self)(joints, self.skeleton_id)


@dataclass(frozen=True, eq=False)
class CanonicalPose3D(Pose3D):
    """
    Pose in the canonical frame: root at the origin, RMS joint radius 1, and
    hips/spine rotated onto the fixed targets.

    Decoder outputs are also reported as canonical poses because the decoder
    only ever learned the canonical frame; use :meth:`is_canonical` to check
    the invariants numerically.
    """

    canonical: bool = True

    def with_joints(self, joints: np.ndarray) -> 'CanonicalPose3D':
        return CanonicalPose3D(joints, self.skeleton_id)

    def is_canonical(self, root_idx: int = 0, tol: float = 1e-6) -> bool:
        root_ok = bool(np.all(np.abs(self.joints[root_idx]) <= tol))
        rms = float(np.sqrt(np.mean(np.sum(self.joints ** 2, axis=1))))
        return root_ok and abs(rms - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class Pose2D:
    """N×2 joint coordinates in normalized image units."""

    joints: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'joints', _frozen_array(self.joints, 2, 'Pose2D'))

    @property
    def n_joints(self) -> int:
        return self.joints.shape[0]


@dataclass(frozen=True, eq=False)
class Rotation:
    """Proper 3×3 rotation matrix."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=np.float64, copy=True)
        if m.shape != (3, 3):
            raise DimensionError(f"Rotation must be 3×3, got {m.shape}")
        if np.max(np.abs(m.T @ m - np.eye(3))) > ORTHONORMAL_TOL:
            raise VipeLabError("Rotation matrix is not orthonormal")
        if abs(np.linalg.det(m) - 1.0) > ORTHONORMAL_TOL:
            raise VipeLabError("Rotation matrix must have determinant +1")
        m.flags.writeable = False
        object.__setattr__(self, 'm', m)

    @classmethod
    def identity(cls) -> 'Rotation':
        return cls(np.eye(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Rotate row vectors: returns points · mᵀ."""
        return np.asarray(points, dtype=np.float64) @ self.m.T
