# -*- coding: utf-8 -*-
"""
Tests for the synthetic pose generator and the dataset directory format.
"""

import json
import os

import numpy as np
import pytest

from vipelab.dataset import (
    MANIFEST_FILE, RECORDS_FILE, load_dataset, read_manifest, read_pose_records, write_pose_records,
)
from vipelab.errors import ConfigError, DatasetIOError
from vipelab.synth import (
    GeneratorConfig, assign_splits, default_rig, generate_dataset, generate_poses, sample_pose,
)


class TestGenerator:
    """Forward-kinematics pose sampling."""

    def test_bone_lengths_are_exact(self, skel, rng):
        pose = sample_pose(rng, skel, GeneratorConfig())
        for parent, child in skel.bones():
            length = np.linalg.norm(pose.joints[child] - pose.joints[parent])
            assert length == pytest.approx(skel.bone_lengths[child], rel=1e-9)
        assert np.allclose(pose.joints[skel.root_idx], 0.0)

    def test_generation_is_deterministic(self, skel):
        cfg = GeneratorConfig(n_poses=12, seed=4)
        a, pa, sa = generate_poses(cfg, skel)
        b, pb, sb = generate_poses(cfg, skel)
        assert np.array_equal(a, b)
        assert np.array_equal(pa, pb)
        assert sa == sb

    def test_output_independent_of_workers(self, skel):
        cfg = GeneratorConfig(n_poses=13, seed=9)
        single, proj_single, _ = generate_poses(cfg, skel, workers=1)
        sharded, proj_sharded, _ = generate_poses(cfg, skel, workers=4)
        assert np.array_equal(single, sharded)
        assert np.array_equal(proj_single, proj_sharded)
        print("✅ Sharded generation matches single-threaded output")

    def test_different_seeds_differ(self, skel):
        a, _, _ = generate_poses(GeneratorConfig(n_poses=3, seed=1), skel)
        b, _, _ = generate_poses(GeneratorConfig(n_poses=3, seed=2), skel)
        assert not np.allclose(a, b)

    def test_projection_shape(self, skel):
        poses, projections, _ = generate_poses(GeneratorConfig(n_poses=5), skel)
        assert poses.shape == (5, 17, 3)
        assert projections.shape == (5, len(default_rig()), 17, 2)

    def test_split_counts(self):
        splits = assign_splits(30, (0.8, 0.1, 0.1), np.random.default_rng(0))
        assert (splits.count('train'), splits.count('val'), splits.count('test')) == (24, 3, 3)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            GeneratorConfig(split_fractions=(0.5, 0.1, 0.1))
        with pytest.raises(ConfigError):
            GeneratorConfig(angle_ranges={'LElbow': (2.0, 0.0, 0.0)})
        with pytest.raises(ConfigError):
            GeneratorConfig(held_out_cameras=(6,))
        with pytest.raises(ConfigError):
            GeneratorConfig(n_poses=-1)

    def test_config_dict_round_trip(self):
        cfg = GeneratorConfig(n_poses=7, seed=3)
        assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg


class TestDatasetFiles:
    """Dataset directories on disk."""

    def test_tiny_dataset_layout(self, tiny_dataset):
        manifest = read_manifest(tiny_dataset)
        assert manifest.n_poses == 30
        assert manifest.n_cameras == 6
        assert manifest.n_records == 180
        assert manifest.split_counts == {'train': 24, 'val': 3, 'test': 3}
        assert manifest.held_out_cameras == [4, 5]
        assert len(manifest.cameras()) == 6

        data = load_dataset(tiny_dataset)
        assert len(data) == 180
        assert data.joints3d.shape == (180, 17, 3)
        assert data.joints2d.shape == (180, 17, 2)

    def test_rows_share_world_pose_across_cameras(self, tiny_dataset):
        data = load_dataset(tiny_dataset)
        rows = data.select(split='test')
        for pid in np.unique(rows.pose_ids):
            same = rows.joints3d[rows.pose_ids == pid]
            assert np.array_equal(same, np.broadcast_to(same[0], same.shape))

    def test_select_and_unique_poses(self, tiny_dataset):
        data = load_dataset(tiny_dataset)
        train = data.select(split='train', exclude_cameras=[4, 5])
        assert len(train) == 24 * 4
        assert train.camera_list() == [0, 1, 2, 3]
        ids, world = train.unique_poses()
        assert len(ids) == 24
        assert world.shape == (24, 17, 3)
        assert list(ids) == sorted(ids)

    def test_written_files_are_byte_identical(self, skel, tmp_path):
        cfg = GeneratorConfig(n_poses=6, seed=21)
        generate_dataset(cfg, skel, str(tmp_path / 'a'))
        generate_dataset(cfg, skel, str(tmp_path / 'b'), workers=3)
        for name in (MANIFEST_FILE, RECORDS_FILE):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    def test_floats_survive_the_text_format(self, skel, tmp_path):
        cfg = GeneratorConfig(n_poses=4, seed=5)
        poses, projections, _ = generate_poses(cfg, skel)
        generate_dataset(cfg, skel, str(tmp_path / 'd'))
        data = load_dataset(str(tmp_path / 'd'))
        assert np.array_equal(data.joints3d[data.camera_ids == 0], poses)
        assert np.array_equal(data.joints2d[data.camera_ids == 2], projections[:, 2])

    def test_empty_dataset(self, skel, tmp_path):
        manifest = generate_dataset(GeneratorConfig(n_poses=0), skel, str(tmp_path / 'empty'))
        assert manifest.n_records == 0
        data = load_dataset(str(tmp_path / 'empty'))
        assert len(data) == 0

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetIOError):
            load_dataset(str(tmp_path / 'nope'))

    def test_record_count_mismatch(self, skel, tmp_path):
        path = tmp_path / 'cut'
        generate_dataset(GeneratorConfig(n_poses=3), skel, str(path))
        records = (path / RECORDS_FILE).read_text().splitlines()
        (path / RECORDS_FILE).write_text('\n'.join(records[:-2]) + '\n')
        with pytest.raises(DatasetIOError):
            load_dataset(str(path))

    def test_malformed_record(self, skel, tmp_path):
        path = tmp_path / 'bad'
        generate_dataset(GeneratorConfig(n_poses=2), skel, str(path))
        with open(os.path.join(path, RECORDS_FILE), 'a', encoding='utf-8') as f:
            f.write('{"id": 1\n')
        manifest = json.loads((path / MANIFEST_FILE).read_text())
        manifest['n_records'] += 1
        (path / MANIFEST_FILE).write_text(json.dumps(manifest))
        with pytest.raises(DatasetIOError):
            load_dataset(str(path))


class TestPoseRecords:
    """Standalone pose record files used by lift/generate/interpolate."""

    def test_records_keep_ids_and_extra_fields(self, world_poses, tmp_path):
        path = str(tmp_path / 'poses.jsonl')
        write_pose_records(path, ['a', 'b'], world_poses[:2], extra=[{'alpha': 0.2}, {'alpha': 0.3}])
        ids, joints = read_pose_records(path, 'joints3d')
        assert ids == ['a', 'b']
        assert np.array_equal(joints, world_poses[:2])
        first = json.loads(open(path, encoding='utf-8').readline())
        assert first['alpha'] == 0.2

    def test_floats_written_with_17_significant_digits(self, tmp_path):
        path = tmp_path / 'poses.jsonl'
        joints = np.array([[[0.1, 1.0 / 3.0, -2.0]]])
        write_pose_records(str(path), [7], joints)
        line = path.read_text().strip()
        assert line == ('{"id":7,"joints3d":[[0.10000000000000001,0.33333333333333331,'
                        '-2]]}')
        _, back = read_pose_records(str(path), 'joints3d')
        assert np.array_equal(back, joints)

    def test_missing_key(self, world_poses, tmp_path):
        path = str(tmp_path / 'poses.jsonl')
        write_pose_records(path, [0], world_poses[:1])
        with pytest.raises(DatasetIOError):
            read_pose_records(path, 'joints2d')
