# -*- coding: utf-8 -*-
"""
Tests for skeletons, pose containers, canonicalization and pose metrics.
"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation as ScipyRotation

from vipelab.errors import (
    AlignmentDegenerateError, ConfigError, DegenerateBoneError, DegeneratePoseError,
    DimensionError, VipeLabError,
)
from vipelab.pose import (
    ALIGN_TARGETS, CanonicalPose3D, Pose2D, Pose3D, Rotation, align_rotation,
    aligned_mpjpe, aligned_mpjpe_array, canonicalize, canonicalize_batch, dedup_poses,
    enforce_bone_lengths, kabsch, load_skeleton, mpjpe, mpjpe_array, normalize_scale,
    pairwise_mpjpe, procrustes_align, rms_radius, root_center,
)
from vipelab.synth import GeneratorConfig, generate_poses


def _bone_lengths(joints, skel):
    return np.array([np.linalg.norm(joints[c] - joints[p]) for p, c in skel.bones()])


class TestSkeleton:
    """Skeleton file loading and tree validation."""

    def test_default_skeleton_shape(self, skel):
        """The shipped skeleton has 17 joints rooted at the hip."""
        assert skel.n_joints == 17
        assert skel.joint_names[skel.root_idx] == 'Hip'
        assert skel.joint_names[skel.left_hip_idx] == 'LHip'
        assert skel.joint_names[skel.right_hip_idx] == 'RHip'
        assert skel.joint_names[skel.spine_idx] == 'Spine'
        print("✅ Default skeleton loaded")

    def test_topological_order_puts_parents_first(self, skel):
        seen = set()
        for j in skel.topological_order:
            if j != skel.root_idx:
                assert skel.parent[j] in seen
            seen.add(j)
        assert len(seen) == skel.n_joints

    def test_rest_pose_matches_bone_lengths(self, skel):
        rest = skel.rest_pose()
        expected = np.array([skel.bone_lengths[c] for _, c in skel.bones()])
        assert np.allclose(_bone_lengths(rest, skel), expected)
        assert np.allclose(rest[skel.root_idx], 0.0)

    def test_duplicate_joint_names_rejected(self, tmp_path):
        path = tmp_path / 'bad.yaml'
        path.write_text(
            "root: A\nleft_hip: B\nright_hip: C\nspine: D\njoints:\n"
            "  - {name: A, parent: null}\n"
            "  - {name: B, parent: A, length: 1.0}\n"
            "  - {name: B, parent: A, length: 1.0}\n"
            "  - {name: D, parent: A, length: 1.0}\n"
        )
        with pytest.raises(ConfigError):
            load_skeleton(str(path))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_skeleton(str(tmp_path / 'missing.yaml'))

    def test_parent_cycle_rejected(self, tmp_path):
        path = tmp_path / 'cycle.yaml'
        path.write_text(
            "root: A\nleft_hip: B\nright_hip: C\nspine: D\njoints:\n"
            "  - {name: A, parent: null}\n"
            "  - {name: B, parent: C, length: 1.0}\n"
            "  - {name: C, parent: B, length: 1.0}\n"
            "  - {name: D, parent: A, length: 1.0}\n"
        )
        with pytest.raises(ConfigError):
            load_skeleton(str(path))


class TestPoseTypes:
    """Immutable pose containers."""

    def test_pose_joints_are_read_only_copies(self):
        source = np.ones((17, 3))
        pose = Pose3D(source)
        source[0, 0] = 5.0
        assert pose.joints[0, 0] == 1.0
        with pytest.raises(ValueError):
            pose.joints[0, 0] = 2.0

    def test_wrong_shape_rejected(self):
        with pytest.raises(DimensionError):
            Pose3D(np.zeros((17, 2)))
        with pytest.raises(DimensionError):
            Pose2D(np.zeros((17, 3)))

    def test_non_finite_rejected(self):
        joints = np.zeros((17, 3))
        joints[3, 1] = np.nan
        with pytest.raises(DimensionError):
            Pose3D(joints)

    def test_rotation_validation(self):
        assert np.allclose(Rotation.identity().m, np.eye(3))
        with pytest.raises(VipeLabError):
            Rotation(np.diag([1.0, 1.0, -1.0]))
        with pytest.raises(VipeLabError):
            Rotation(np.eye(3) * 2.0)


class TestKabsch:
    """Optimal rotation between paired point sets."""

    def test_recovers_known_rotation(self, rng):
        source = rng.normal(size=(5, 8, 3))
        truth = ScipyRotation.random(5, random_state=7).as_matrix()
        target = source @ np.swapaxes(truth, -1, -2)
        estimate = kabsch(source, target)
        assert np.allclose(estimate, truth, atol=1e-10)
        assert np.allclose(np.linalg.det(estimate), 1.0)

    def test_rank_one_rejected(self):
        source = np.array([[0.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, -1.0, 0.0]])
        with pytest.raises(AlignmentDegenerateError):
            kabsch(source, ALIGN_TARGETS)


class TestCanonicalize:
    """Root centering, scale normalization and hip/spine realignment."""

    def test_canonical_invariants(self, world_poses, skel):
        canonical = canonicalize_batch(world_poses, skel)
        assert np.allclose(canonical[:, skel.root_idx], 0.0, atol=1e-12)
        assert np.allclose(rms_radius(canonical), 1.0)
        pose = canonicalize(Pose3D(world_poses[0]), skel)
        assert isinstance(pose, CanonicalPose3D)
        assert pose.is_canonical(skel.root_idx)

    def test_root_center_keeps_skeleton_id(self, world_poses, skel):
        centered = root_center(Pose3D(world_poses[0], 'custom'), skel)
        assert np.array_equal(centered.joints[skel.root_idx], np.zeros(3))
        assert np.allclose(centered.joints, world_poses[0] - world_poses[0][skel.root_idx])
        assert centered.skeleton_id == 'custom'

    def test_align_rotation_undoes_known_rotation(self, skel):
        rest = skel.rest_pose()
        turn = ScipyRotation.from_euler('zyx', [0.7, -0.4, 1.1]).as_matrix()
        pose = normalize_scale(root_center(Pose3D(rest @ turn.T), skel))
        aligned, rotation = align_rotation(pose, skel)
        assert isinstance(aligned, CanonicalPose3D)
        assert isinstance(rotation, Rotation)
        assert np.allclose(rotation.m, turn.T, atol=1e-9)
        assert np.allclose(rotation.apply(pose.joints), aligned.joints)
        assert np.allclose(aligned.joints, canonicalize(Pose3D(rest), skel).joints, atol=1e-9)

    def test_rest_pose_is_already_aligned(self, skel):
        rest = skel.rest_pose()
        canonical = canonicalize(Pose3D(rest), skel)
        assert np.allclose(canonical.joints, rest / rms_radius(rest), atol=1e-9)

    def test_rigid_invariance(self, skel):
        """1,000 poses under 10 random rigid transforms each map to one canonical pose."""
        poses, _, _ = generate_poses(GeneratorConfig(n_poses=1000, seed=11), skel)
        rotations = ScipyRotation.random(10 * len(poses), random_state=5).as_matrix()
        offsets = np.random.default_rng(5).uniform(-3.0, 3.0, size=(10 * len(poses), 1, 3))
        repeated = np.repeat(poses, 10, axis=0)
        moved = repeated @ np.swapaxes(rotations, -1, -2) + offsets
        reference = canonicalize_batch(repeated, skel)
        errors = mpjpe_array(canonicalize_batch(moved, skel), reference)
        assert np.all(errors < 1e-6)
        print(f"✅ Rigid invariance holds, max error {errors.max():.2e}")

    def test_scale_invariance(self, world_poses, skel):
        a = canonicalize_batch(world_poses, skel)
        b = canonicalize_batch(world_poses * 3.7, skel)
        assert np.allclose(a, b, atol=1e-9)

    def test_without_rotation_keeps_orientation(self, world_poses, skel):
        canonical = canonicalize_batch(world_poses, skel, rotate=False)
        centered = world_poses - world_poses[:, skel.root_idx:skel.root_idx + 1]
        expected = centered / rms_radius(centered)[:, None, None]
        assert np.allclose(canonical, expected)

    def test_all_zero_pose_is_degenerate(self, skel):
        with pytest.raises(DegeneratePoseError):
            normalize_scale(Pose3D(np.zeros((17, 3))))
        with pytest.raises(DegeneratePoseError):
            canonicalize(Pose3D(np.zeros((17, 3))), skel)

    def test_collinear_triad_is_degenerate(self, skel, rng):
        joints = rng.normal(size=(17, 3))
        joints[skel.root_idx] = 0.0
        joints[skel.left_hip_idx] = [0.0, -1.0, 0.0]
        joints[skel.right_hip_idx] = [0.0, 1.0, 0.0]
        joints[skel.spine_idx] = [0.0, 2.0, 0.0]
        with pytest.raises(AlignmentDegenerateError):
            canonicalize(Pose3D(joints), skel)

    def test_wrong_joint_count_rejected(self, skel):
        with pytest.raises(DimensionError):
            canonicalize_batch(np.ones((2, 16, 3)), skel)


class TestBoneLengths:
    """Retargeting onto the universal skeleton."""

    def test_enforced_lengths_match_skeleton(self, world_poses, skel, rng):
        stretched = world_poses[0] * rng.uniform(0.5, 2.0, size=(17, 1))
        stretched[skel.root_idx] = world_poses[0][skel.root_idx]
        out = enforce_bone_lengths(Pose3D(stretched), skel)
        expected = np.array([skel.bone_lengths[c] for _, c in skel.bones()])
        assert np.allclose(_bone_lengths(out.joints, skel), expected)

    def test_directions_are_kept(self, world_poses, skel):
        scaled = world_poses[1] * 2.0
        out = enforce_bone_lengths(Pose3D(scaled), skel)
        assert np.allclose(out.joints, world_poses[1], atol=1e-12)

    def test_zero_length_bone_rejected(self, skel, world_poses):
        joints = world_poses[0].copy()
        knee = skel.index('RKnee')
        joints[knee] = joints[skel.parent[knee]]
        with pytest.raises(DegenerateBoneError):
            enforce_bone_lengths(Pose3D(joints), skel)


class TestMetrics:
    """MPJPE, aligned MPJPE and deduplication."""

    def test_mpjpe_matches_brute_force(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 64))
            a = rng.normal(size=(n, 3))
            b = rng.normal(size=(n, 3))
            expected = sum(np.sqrt(sum((a[j, c] - b[j, c]) ** 2 for c in range(3))) for j in range(n)) / n
            assert mpjpe(Pose3D(a), Pose3D(b)) == pytest.approx(expected, rel=1e-12)

    def test_mpjpe_shape_mismatch(self):
        with pytest.raises(DimensionError):
            mpjpe(np.zeros((17, 3)), np.zeros((16, 3)))

    def test_aligned_mpjpe_ignores_rigid_motion(self, world_poses):
        rotation = ScipyRotation.random(random_state=3).as_matrix()
        moved = world_poses[0] @ rotation.T + np.array([1.0, -2.0, 0.5])
        assert aligned_mpjpe(world_poses[0], moved) < 1e-10
        assert mpjpe(world_poses[0], moved) > 0.1

    def test_procrustes_output_is_root_centered(self, world_poses, skel):
        moved = world_poses[2] + np.array([4.0, 0.0, 0.0])
        aligned = procrustes_align(Pose3D(world_poses[2]), Pose3D(moved))
        assert np.allclose(aligned.joints[skel.root_idx], 0.0)
        assert np.allclose(aligned.joints, world_poses[2] - world_poses[2][skel.root_idx], atol=1e-10)

    def test_procrustes_scale_fit(self, world_poses):
        scaled = world_poses[3] * 0.5
        fitted = procrustes_align(Pose3D(world_poses[3]), Pose3D(scaled), scale=True)
        assert np.allclose(fitted.joints, world_poses[3] - world_poses[3][0], atol=1e-10)

    def test_pairwise_is_symmetric(self, world_poses):
        d = pairwise_mpjpe(world_poses[:10])
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0.0)

    def test_dedup_matches_brute_force(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 10))
            poses = rng.normal(size=(n, 5, 3))
            if n > 2:
                poses[2] = poses[0] @ ScipyRotation.random(random_state=1).as_matrix().T
            min_dist = float(rng.uniform(0.0, 1.5))
            kept = []
            for i in range(n):
                if all(float(aligned_mpjpe_array(poses[k], poses[i])) >= min_dist for k in kept):
                    kept.append(i)
            assert dedup_poses(list(poses), min_dist) == kept

    def test_dedup_negative_threshold(self):
        with pytest.raises(ConfigError):
            dedup_poses([np.ones((3, 3))], -1.0)
