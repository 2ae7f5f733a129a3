# -*- coding: utf-8 -*-
"""
Shared fixtures: the default skeleton, seeded generators, small synthetic
datasets and network settings small enough for finite-difference checks.
"""

import numpy as np
import pytest

from vipelab.nn import NetworkConfig
from vipelab.pose import default_skeleton, preprocess_poses
from vipelab.settings import SettingsManager
from vipelab.synth import GeneratorConfig, generate_dataset, generate_poses
from vipelab.vae import VaeTrainConfig, train_vae

TINY_NETWORK = NetworkConfig(hidden_dim=16, n_blocks=1, dropout_p=0.0)


@pytest.fixture(autouse=True)
def reset_settings():
    """Each test starts without a loaded settings singleton."""
    SettingsManager.reset_instance()
    yield
    SettingsManager.reset_instance()


@pytest.fixture
def skel():
    return default_skeleton()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def world_poses():
    """(40, 17, 3) synthetic world poses."""
    poses, _, _ = generate_poses(GeneratorConfig(n_poses=40, seed=3), default_skeleton())
    return poses


@pytest.fixture(scope='session')
def tiny_dataset(tmp_path_factory):
    """30 poses on the default 6-camera rig: 24 train, 3 val, 3 test."""
    path = tmp_path_factory.mktemp('data') / 'tiny'
    generate_dataset(GeneratorConfig(n_poses=30, seed=7), default_skeleton(), str(path))
    return str(path)


@pytest.fixture(scope='session')
def overfit_vae():
    """
    Default-sized VAE (latent 32, hidden 1024, 2 blocks, dropout 0.1,
    margin 1.0) trained for 2,000 epochs on 256 poses.

    Returns:
        Tuple of (VaeModel, (256, 17, 3) canonical training poses)
    """
    skel = default_skeleton()
    poses, _, _ = generate_poses(GeneratorConfig(n_poses=256, seed=21), skel)
    result = train_vae(poses, skel, VaeTrainConfig(epochs=2000, seed=0))
    return result.model, preprocess_poses(poses, skel)
