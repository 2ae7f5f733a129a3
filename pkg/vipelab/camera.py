# -*- coding: utf-8 -*-
"""
Pinhole cameras on a sphere around the subject, 3D→2D projection, 2D input
conditioning and the rotate-then-project augmentation used during training.
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from scipy.spatial.transform import Rotation as ScipyRotation

from .errors import ConfigError, DegeneratePoseError, DimensionError, ProjectionError
from .pose.transforms import rms_radius, root_center_array
from .pose.types import Pose2D, Pose3D, Rotation

PROJECTION_EPS = 1e-6
WORLD_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Camera:
    """
    Camera looking at ``look_at`` (the pose root when None) from a point on a
    sphere of ``radius`` given by azimuth/elevation in radians.
    """

    azimuth: float = 0.0
    elevation: float = 0.0
    radius: float = 5.0
    focal: float = 1.0
    look_at: Optional[Tuple[float, float, float]] = None
    name: str = ''

    def __post_init__(self):
        if not self.focal > 0:
            raise ConfigError(f"Camera focal must be > 0, got {self.focal}")
        if not self.radius > 0:
            raise ConfigError(f"Camera radius must be > 0, got {self.radius}")
        if not -math.pi / 2 < self.elevation < math.pi / 2:
            raise ConfigError(f"Camera elevation must lie in (-pi/2, pi/2), got {self.elevation}")
        if self.look_at is not None:
            object.__setattr__(self, 'look_at', tuple(float(v) for v in self.look_at))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Camera':
        known = {'azimuth', 'elevation', 'radius', 'focal', 'look_at', 'name'}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown camera keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if data['look_at'] is not None:
            data['look_at'] = list(data['look_at'])
        return data

    def rotated(self, azimuth_delta: float) -> 'Camera':
        """Same camera moved by ``azimuth_delta`` around the vertical axis."""
        return Camera(self.azimuth + azimuth_delta, self.elevation, self.radius,
                      self.focal, self.look_at, self.name)


@dataclass(frozen=True)
class AugmentConfig:
    """Random view augmentation: rotation ranges and the projecting camera."""

    enabled: bool = True
    azimuth_range: Tuple[float, float] = (0.0, 2 * math.pi)
    elevation_range: Tuple[float, float] = (-math.pi / 6, math.pi / 6)
    camera: Camera = field(default_factory=Camera)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AugmentConfig':
        data = dict(data)
        if 'camera' in data and isinstance(data['camera'], dict):
            data['camera'] = Camera.from_dict(data['camera'])
        for key in ('azimuth_range', 'elevation_range'):
            if key in data:
                data[key] = tuple(float(v) for v in data[key])
        return cls(**data)


def camera_pose(cam: Camera, look_at: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    World→camera transform.

    Args:
        cam: Camera
        look_at: Point the optical axis passes through

    Returns:
        Tuple of (3×3 matrix with rows right/up/forward, camera position)
    """
    target = np.asarray(look_at, dtype=np.float64)
    ce = math.cos(cam.elevation)
    offset = np.array([ce * math.cos(cam.azimuth), ce * math.sin(cam.azimuth), math.sin(cam.elevation)])
    position = target + cam.radius * offset
    forward = -offset
    right = np.cross(forward, WORLD_UP)
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    return np.stack([right, up, forward]), position


def project_array(joints: np.ndarray, cam: Camera, root_idx: int = 0) -> np.ndarray:
    """
    Perspective projection of (..., N, 3) joints to (..., N, 2).

    Raises:
        ProjectionError: If any joint is at or behind the camera plane
    """
    joints = np.asarray(joints, dtype=np.float64)
    if joints.shape[-1] != 3:
        raise DimensionError(f"Expected (..., N, 3) joints, got {joints.shape}")
    flat = joints.reshape(-1, joints.shape[-2], 3)
    out = np.empty(flat.shape[:-1] + (2,))
    for i, pose in enumerate(flat):
        look_at = pose[root_idx] if cam.look_at is None else cam.look_at
        rotation, position = camera_pose(cam, look_at)
        local = (pose - position) @ rotation.T
        if np.any(local[:, 2] <= PROJECTION_EPS):
            raise ProjectionError("Joint at or behind the camera plane",
                                  camera=cam.name or cam.azimuth, pose=i)
        out[i] = cam.focal * local[:, :2] / local[:, 2:3]
    return out.reshape(joints.shape[:-1] + (2,))


def project(p: Pose3D, cam: Camera, root_idx: int = 0) -> Pose2D:
    """
    Project a pose through a pinhole camera.

    Args:
        p: Pose in world coordinates
        cam: Camera; looks at the pose root when ``look_at`` is None
        root_idx: Root joint index

    Returns:
        Pose2D: (focal·x/z, focal·y/z) per joint

    Raises:
        ProjectionError: If the camera sits inside the subject or a joint
            is at or behind the camera plane
    """
    centered = root_center_array(p.joints, root_idx)
    if cam.look_at is None and cam.radius <= float(rms_radius(centered)):
        raise ProjectionError("Camera radius must exceed the pose RMS radius", camera=cam.name)
    return Pose2D(project_array(p.joints, cam, root_idx))


def normalize_2d_array(joints: np.ndarray, root_idx: int = 0) -> np.ndarray:
    joints = np.asarray(joints, dtype=np.float64)
    centered = joints - joints[..., root_idx:root_idx + 1, :]
    radius = np.sqrt(np.mean(np.sum(centered ** 2, axis=-1), axis=-1))
    if np.any(radius <= 1e-12):
        raise DegeneratePoseError("Cannot normalize a 2D pose whose joints all coincide")
    return centered / radius[..., None, None]


def normalize_2d(p: Pose2D, root_idx: int = 0) -> Pose2D:
    """Root-center a 2D pose and divide by its RMS radius."""
    return Pose2D(normalize_2d_array(p.joints, root_idx))


def random_rotation_matrices(rng: np.random.Generator, config: AugmentConfig, count: int) -> np.ndarray:
    """``count`` rotations Rz(azimuth)·Ry(elevation) drawn from the config ranges."""
    azimuth = rng.uniform(config.azimuth_range[0], config.azimuth_range[1], size=count)
    elevation = rng.uniform(config.elevation_range[0], config.elevation_range[1], size=count)
    angles = np.stack([azimuth, elevation], axis=1)
    return ScipyRotation.from_euler('ZY', angles).as_matrix()


def random_rotation(rng: np.random.Generator, config: AugmentConfig) -> Rotation:
    """
    Random view rotation: azimuth about the vertical axis, then elevation tilt.

    A config with zero-width ranges at 0 yields the identity.
    """
    return Rotation(random_rotation_matrices(rng, config, 1)[0])


def rotate_about_root(joints: np.ndarray, rotation: np.ndarray, root_idx: int = 0) -> np.ndarray:
    joints = np.asarray(joints, dtype=np.float64)
    root = joints[..., root_idx:root_idx + 1, :]
    return (joints - root) @ np.swapaxes(rotation, -1, -2) + root


def augment_pair(p: Pose3D, rng: np.random.Generator, config: AugmentConfig,
                 root_idx: int = 0) -> Tuple[Pose3D, Pose2D]:
    """
    Randomly rotate a pose about its root and project it through the
    augmentation camera.

    Returns:
        Tuple of (rotated 3D pose, its 2D projection)
    """
    rotation = random_rotation(rng, config)
    rotated = p.with_joints(rotate_about_root(p.joints, rotation.m, root_idx))
    return rotated, project(rotated, config.camera, root_idx)


def augment_batch(joints3d: np.ndarray, rng: np.random.Generator, config: AugmentConfig,
                  root_idx: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`augment_pair` for a (B, N, 3) stack."""
    rotations = random_rotation_matrices(rng, config, len(joints3d))
    rotated = rotate_about_root(joints3d, rotations, root_idx)
    return rotated, project_array(rotated, config.camera, root_idx)


def compose_augmented_batch(originals3d: np.ndarray, originals2d: np.ndarray, sources3d: np.ndarray,
                            rng: np.random.Generator, config: AugmentConfig,
                            root_idx: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Build a training batch where half the poses are view-augmented.

    Args:
        originals3d: (B, N, 3) world poses used as-is
        originals2d: (B, N, 2) their recorded projections
        sources3d: (B, N, 3) world poses to rotate and re-project
        rng: Random generator
        config: Augmentation config

    Returns:
        Tuple of (2B 3D poses, 2B 2D poses, boolean mask of augmented rows)
    """
    if len(originals3d) != len(originals2d) or len(originals3d) != len(sources3d):
        raise DimensionError("Original and augmentation halves must have the same size")
    rotated, projected = augment_batch(sources3d, rng, config, root_idx)
    joints3d = np.concatenate([np.asarray(originals3d, dtype=np.float64), rotated])
    joints2d = np.concatenate([np.asarray(originals2d, dtype=np.float64), projected])
    mask = np.concatenate([np.zeros(len(originals3d), dtype=bool), np.ones(len(sources3d), dtype=bool)])
    return joints3d, joints2d, mask


def load_rig(path: str) -> List[Camera]:
    """
    Read a camera rig file: a YAML document with a ``cameras`` list of
    {azimuth, elevation, radius, focal, look_at?, name?} entries (radians).
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            doc = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"Cannot read camera rig: {e}", path=path) from e
    cameras = doc.get('cameras')
    if not isinstance(cameras, list):
        raise ConfigError("Camera rig file needs a 'cameras' list", path=path)
    return [Camera.from_dict(c) for c in cameras]
