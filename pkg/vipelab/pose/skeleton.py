# -*- coding: utf-8 -*-
"""
Skeleton topology and the structured-text skeleton definition file.

See ``vipelab/data/skeleton_h36m17.yaml`` for the documented schema.
"""

import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
import yaml

from ..errors import ConfigError

ROOT_PARENT = -1
DEFAULT_SKELETON_PATH = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'data', 'skeleton_h36m17.yaml')


@dataclass(frozen=True)
class Skeleton:
    """
    Joint tree with canonical bone lengths and rest-pose bone directions.

    ``bone_lengths[j]`` is the length of the bone from ``parent[j]`` to ``j``;
    the root entry is unused. ``rest_directions`` are unit vectors in the body
    frame and drive forward kinematics in :mod:`vipelab.synth`.
    """

    joint_names: Tuple[str, ...]
    parent: Tuple[int, ...]
    bone_lengths: Tuple[float, ...]
    root_idx: int
    left_hip_idx: int
    right_hip_idx: int
    spine_idx: int
    rest_directions: Tuple[Tuple[float, float, float], ...] = ()
    name: str = 'h36m17'
    _order: Tuple[int, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.joint_names)
        if len(set(self.joint_names)) != n:
            raise ConfigError("Skeleton joint names must be unique", skeleton=self.name)
        if len(self.parent) != n or len(self.bone_lengths) != n:
            raise ConfigError("Skeleton parent/bone_lengths must have one entry per joint", skeleton=self.name)
        for label, idx in (('root', self.root_idx), ('left_hip', self.left_hip_idx),
                           ('right_hip', self.right_hip_idx), ('spine', self.spine_idx)):
            if not 0 <= idx < n:
                raise ConfigError(f"Skeleton {label} index {idx} out of range", skeleton=self.name)
        special = {self.left_hip_idx, self.right_hip_idx, self.spine_idx}
        if len(special) != 3 or self.root_idx in special:
            raise ConfigError("left_hip, right_hip and spine must be distinct non-root joints",
                              skeleton=self.name)
        if self.parent[self.root_idx] != ROOT_PARENT:
            raise ConfigError("Root joint must have the sentinel parent -1", skeleton=self.name)
        for j, length in enumerate(self.bone_lengths):
            if j != self.root_idx and not length > 0:
                raise ConfigError(f"Bone length of joint {self.joint_names[j]} must be > 0", skeleton=self.name)

        object.__setattr__(self, '_order', self._tree_order())

        if self.rest_directions:
            if len(self.rest_directions) != n:
                raise ConfigError("rest_directions must have one entry per joint", skeleton=self.name)
            normalized = []
            for j, direction in enumerate(self.rest_directions):
                vec = np.asarray(direction, dtype=np.float64)
                norm = float(np.linalg.norm(vec))
                if j == self.root_idx:
                    normalized.append((0.0, 0.0, 0.0))
                    continue
                if norm == 0.0:
                    raise ConfigError(f"Rest direction of joint {self.joint_names[j]} is zero",
                                      skeleton=self.name)
                normalized.append(tuple(float(v) for v in vec / norm))
            object.__setattr__(self, 'rest_directions', tuple(normalized))

    def _tree_order(self) -> Tuple[int, ...]:
        """Breadth-first joint order from the root; fails if parent is not a tree."""
        n = len(self.joint_names)
        children: List[List[int]] = [[] for _ in range(n)]
        for j, p in enumerate(self.parent):
            if j == self.root_idx:
                continue
            if not 0 <= p < n or p == j:
                raise ConfigError(f"Joint {self.joint_names[j]} has invalid parent {p}", skeleton=self.name)
            children[p].append(j)
        order = [self.root_idx]
        cursor = 0
        while cursor < len(order):
            order.extend(children[order[cursor]])
            cursor += 1
        if len(order) != n:
            raise ConfigError("Parent array does not form a tree rooted at the root joint",
                              skeleton=self.name)
        return tuple(order)

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    @property
    def topological_order(self) -> Tuple[int, ...]:
        """Joint indices ordered so every parent precedes its children."""
        return self._order

    def index(self, joint_name: str) -> int:
        return self.joint_names.index(joint_name)

    def bones(self) -> List[Tuple[int, int]]:
        """(parent, child) pairs in tree order."""
        return [(self.parent[j], j) for j in self._order if j != self.root_idx]

    def rest_pose(self) -> np.ndarray:
        """Rest pose joints (N×3) with the root at the origin."""
        if not self.rest_directions:
            raise ConfigError("Skeleton has no rest directions", skeleton=self.name)
        joints = np.zeros((self.n_joints, 3), dtype=np.float64)
        directions = np.asarray(self.rest_directions, dtype=np.float64)
        for parent, child in self.bones():
            joints[child] = joints[parent] + self.bone_lengths[child] * directions[child]
        return joints


def load_skeleton(path: str) -> Skeleton:
    """
    Load a skeleton definition file.

    Args:
        path: Path to the YAML skeleton file

    Returns:
        Skeleton: Validated skeleton

    Raises:
        ConfigError: If the file is missing fields or describes an invalid tree
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            doc = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read skeleton file: {e}", path=path) from e

    try:
        joints = doc['joints']
        names = tuple(str(j['name']) for j in joints)
        parent = tuple(ROOT_PARENT if j.get('parent') is None else names.index(j['parent']) for j in joints)
        return Skeleton(
            joint_names=names,
            parent=parent,
            bone_lengths=tuple(float(j.get('length', 0.0)) for j in joints),
            root_idx=names.index(doc['root']),
            left_hip_idx=names.index(doc['left_hip']),
            right_hip_idx=names.index(doc['right_hip']),
            spine_idx=names.index(doc['spine']),
            rest_directions=tuple(tuple(float(v) for v in j['direction']) for j in joints)
            if all('direction' in j for j in joints) else (),
            name=str(doc.get('name', os.path.splitext(os.path.basename(path))[0])),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Malformed skeleton file: {e}", path=path) from e


@lru_cache(maxsize=None)
def default_skeleton(path: Optional[str] = None) -> Skeleton:
    """The shipped 17-joint skeleton (cached)."""
    return load_skeleton(path or DEFAULT_SKELETON_PATH)
