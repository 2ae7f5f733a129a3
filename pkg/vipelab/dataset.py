# -*- coding: utf-8 -*-
"""
Dataset directory format.

A dataset directory holds ``manifest.json`` and ``records.jsonl``. Each line
of the records file is one (pose, camera) pair::

    {"camera_id": 0, "id": 17, "joints2d": [[x, y], ...],
     "joints3d": [[x, y, z], ...], "split": "train"}

Pose arrays are written with 17 significant digits, which is lossless for
64-bit reals. Keys are sorted, so identical inputs produce byte-identical
files.
"""

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence

import numpy as np

from .camera import Camera
from .errors import DatasetIOError

MANIFEST_FILE = 'manifest.json'
RECORDS_FILE = 'records.jsonl'
FORMAT_VERSION = 1
SPLITS = ('train', 'val', 'test')
FLOAT_FORMAT = '%.17g'


@dataclass
class DatasetManifest:
    """Summary of a generated dataset."""

    n_poses: int
    n_records: int
    n_cameras: int
    split_counts: Dict[str, int]
    seed: int
    skeleton: str
    rig: List[Dict[str, Any]]
    n_joints: int = 17
    held_out_cameras: List[int] = field(default_factory=list)
    generator: Dict[str, Any] = field(default_factory=dict)
    records_file: str = RECORDS_FILE
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DatasetManifest':
        return cls(**data)

    def cameras(self) -> List[Camera]:
        return [Camera.from_dict(c) for c in self.rig]


@dataclass
class PoseDataset:
    """Array view over dataset records, one row per (pose, camera) pair."""

    pose_ids: np.ndarray
    camera_ids: np.ndarray
    splits: np.ndarray
    joints3d: np.ndarray
    joints2d: np.ndarray
    manifest: Optional[DatasetManifest] = None

    def __len__(self) -> int:
        return len(self.pose_ids)

    def select(self, split: Optional[str] = None, cameras: Optional[Iterable[int]] = None,
               exclude_cameras: Optional[Iterable[int]] = None) -> 'PoseDataset':
        """Rows matching a split and/or a camera subset."""
        mask = np.ones(len(self), dtype=bool)
        if split is not None:
            mask &= self.splits == split
        if cameras is not None:
            mask &= np.isin(self.camera_ids, list(cameras))
        if exclude_cameras is not None:
            mask &= ~np.isin(self.camera_ids, list(exclude_cameras))
        return PoseDataset(self.pose_ids[mask], self.camera_ids[mask], self.splits[mask],
                           self.joints3d[mask], self.joints2d[mask], self.manifest)

    def camera_list(self) -> List[int]:
        return sorted(int(c) for c in np.unique(self.camera_ids))

    def unique_poses(self):
        """
        One row per pose id.

        Returns:
            Tuple of (pose ids ascending, (P, N, 3) world joints)
        """
        ids, first = np.unique(self.pose_ids, return_index=True)
        return ids, self.joints3d[first]


def _write_text(path: str, lines: Iterable[str]) -> None:
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            for line in lines:
                f.write(line)
                f.write('\n')
    except OSError as e:
        raise DatasetIOError(f"Cannot write {path}: {e.strerror or e}", path=path) from e


def _read_lines(path: str) -> Iterator[str]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            for line in f:
                line = line.strip()
                if line:
                    yield line
    except OSError as e:
        raise DatasetIOError(f"Cannot read {path}: {e.strerror or e}", path=path) from e


def _encode_array(values: np.ndarray) -> str:
    if values.ndim == 0:
        value = float(values)
        return FLOAT_FORMAT % value if np.isfinite(value) else json.dumps(value)
    return '[' + ','.join(_encode_array(v) for v in values) + ']'


def encode_record(record: Dict[str, Any]) -> str:
    """
    One compact JSON line with sorted keys.

    Array values are written element by element with 17 significant digits,
    so every float64 reads back bit-identical.
    """
    fields = []
    for key in sorted(record):
        value = record[key]
        if isinstance(value, np.ndarray) and value.dtype.kind == 'f':
            text = _encode_array(value)
        else:
            text = json.dumps(value.tolist() if isinstance(value, np.ndarray) else value,
                              sort_keys=True, separators=(',', ':'))
        fields.append(f'{json.dumps(key)}:{text}')
    return '{' + ','.join(fields) + '}'


def write_dataset(directory: str, manifest: DatasetManifest, records: Iterable[Dict[str, Any]]) -> DatasetManifest:
    """
    Write the records file and then the manifest into ``directory``.

    Raises:
        DatasetIOError: On any filesystem failure, with the path attached
    """
    _write_text(os.path.join(directory, manifest.records_file), (encode_record(r) for r in records))
    _write_text(os.path.join(directory, MANIFEST_FILE),
                [json.dumps(manifest.to_dict(), sort_keys=True, indent=2)])
    return manifest


def read_manifest(directory: str) -> DatasetManifest:
    path = os.path.join(directory, MANIFEST_FILE)
    try:
        return DatasetManifest.from_dict(json.loads('\n'.join(_read_lines(path))))
    except (ValueError, TypeError) as e:
        raise DatasetIOError(f"Malformed manifest: {e}", path=path) from e


def load_dataset(directory: str) -> PoseDataset:
    """
    Load a dataset directory written by :func:`write_dataset`.

    Raises:
        DatasetIOError: If files are missing, malformed or disagree with the manifest
    """
    manifest = read_manifest(directory)
    path = os.path.join(directory, manifest.records_file)
    pose_ids: List[int] = []
    camera_ids: List[int] = []
    splits: List[str] = []
    joints3d: List[Any] = []
    joints2d: List[Any] = []
    for lineno, line in enumerate(_read_lines(path), 1):
        try:
            rec = json.loads(line)
            pose_ids.append(int(rec['id']))
            camera_ids.append(int(rec['camera_id']))
            splits.append(str(rec['split']))
            joints3d.append(rec['joints3d'])
            joints2d.append(rec['joints2d'])
        except (ValueError, KeyError, TypeError) as e:
            raise DatasetIOError(f"Malformed record on line {lineno}: {e}", path=path) from e
    if len(pose_ids) != manifest.n_records:
        raise DatasetIOError(
            f"Manifest lists {manifest.n_records} records, file holds {len(pose_ids)}", path=path)

    n = len(pose_ids)
    return PoseDataset(
        pose_ids=np.asarray(pose_ids, dtype=np.int64),
        camera_ids=np.asarray(camera_ids, dtype=np.int64),
        splits=np.asarray(splits, dtype=object) if splits else np.zeros(0, dtype=object),
        joints3d=np.asarray(joints3d, dtype=np.float64).reshape(n, manifest.n_joints, 3),
        joints2d=np.asarray(joints2d, dtype=np.float64).reshape(n, manifest.n_joints, 2),
        manifest=manifest,
    )


def write_pose_records(path: str, ids: Sequence[Any], joints: np.ndarray, key: str = 'joints3d',
                       extra: Optional[Sequence[Dict[str, Any]]] = None) -> None:
    """Write standalone pose records ``{"id": ..., key: [...]}`` one per line."""
    lines = []
    for i, (pid, pose) in enumerate(zip(ids, np.asarray(joints, dtype=np.float64))):
        record: Dict[str, Any] = {'id': pid, key: pose}
        if extra is not None:
            record.update(extra[i])
        lines.append(encode_record(record))
    _write_text(path, lines)


def read_pose_records(path: str, key: str):
    """
    Read standalone pose records.

    Returns:
        Tuple of (ids list, stacked joints array)
    """
    ids: List[Any] = []
    joints: List[Any] = []
    for lineno, line in enumerate(_read_lines(path), 1):
        try:
            rec = json.loads(line)
            ids.append(rec['id'])
            joints.append(rec[key])
        except (ValueError, KeyError) as e:
            raise DatasetIOError(f"Malformed pose record on line {lineno}: {e}", path=path) from e
    if not joints:
        raise DatasetIOError(f"No '{key}' records found", path=path)
    return ids, np.asarray(joints, dtype=np.float64)
