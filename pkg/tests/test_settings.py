# -*- coding: utf-8 -*-
"""
Tests for layered configuration: defaults, config files, environment and flags.
"""

import os

import pytest

from vipelab.errors import ConfigError
from vipelab.settings import (
    RuntimeConfig, SettingsManager, deep_merge, get_settings, load_settings,
)


def _write(tmp_path, text, name='config.yaml'):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestDefaults:
    """Shipped default configuration."""

    def test_default_values(self):
        settings = load_settings(env={})
        assert settings.vae.latent_dim == 32
        assert settings.vae.network.hidden_dim == 1024
        assert settings.retrieval.ks == (1, 10, 20)
        assert settings.retrieval.threshold == 0.1
        assert settings.generation.alphas == (0.2, 0.3, 0.4, 0.5)
        assert settings.generator.held_out_cameras == (4, 5)
        assert len(settings.rig()) == 6
        assert settings.mapper.weights.w_kl == 0.0
        assert settings.skeleton().n_joints == 17
        print("✅ Default settings resolved")

    def test_workers_default_to_core_count(self):
        assert load_settings(env={}).runtime.workers == (os.cpu_count() or 1)

    def test_runtime_validation(self):
        assert RuntimeConfig(workers=2, log_level='debug').log_level == 'DEBUG'
        with pytest.raises(ConfigError):
            RuntimeConfig(workers=0)
        with pytest.raises(ConfigError):
            RuntimeConfig(workers=1, log_level='LOUD')


class TestConfigFiles:
    """User config files merged over the defaults."""

    def test_file_values_override_defaults(self, tmp_path):
        path = _write(tmp_path, "vae:\n  epochs: 3\n  canonical_rotation: false\n"
                                "network:\n  hidden_dim: 64\nretrieval:\n  ks: [5, 1]\n")
        settings = load_settings(path, env={})
        assert settings.vae.epochs == 3
        assert settings.vae.batch_size == 128
        assert settings.vae.network.hidden_dim == 64
        assert settings.mapper.network.hidden_dim == 64
        assert settings.retrieval.ks == (1, 5)

    def test_mapper_inherits_preprocessing_flags(self, tmp_path):
        path = _write(tmp_path, "vae:\n  canonical_rotation: false\n  universal_skeleton: false\n")
        settings = load_settings(path, env={})
        assert settings.mapper.canonical_rotation is False
        assert settings.mapper.universal_skeleton is False

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(_write(tmp_path, "database:\n  url: x\n"), env={})

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(_write(tmp_path, "vae:\n  learning_rate: 0.1\n"), env={})

    def test_injected_keys_cannot_be_set_per_section(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(_write(tmp_path, "vae:\n  seed: 5\n"), env={})

    def test_invalid_values_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(_write(tmp_path, "vae:\n  triplet: {margin: -1.0}\n"), env={})

    def test_invalid_yaml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(_write(tmp_path, "vae: [unclosed\n"), env={})
        with pytest.raises(ConfigError):
            load_settings(_write(tmp_path, "- a\n- b\n", 'list.yaml'), env={})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(str(tmp_path / 'absent.yaml'), env={})

    def test_deep_merge_replaces_lists(self):
        merged = deep_merge({'a': {'b': [1, 2], 'c': 1}}, {'a': {'b': [3]}})
        assert merged == {'a': {'b': [3], 'c': 1}}


class TestOverrides:
    """Environment variables and command-line overrides."""

    def test_env_seed_reaches_every_section(self):
        settings = load_settings(env={'VIPELAB_SEED': '9', 'VIPELAB_WORKERS': '3'})
        assert settings.runtime.seed == 9
        assert settings.runtime.workers == 3
        assert settings.generator.seed == 9
        assert settings.vae.seed == 9
        assert settings.mapper.seed == 9

    def test_bad_env_value(self):
        with pytest.raises(ConfigError):
            load_settings(env={'VIPELAB_WORKERS': 'many'})

    def test_overrides_beat_env_and_file(self, tmp_path):
        path = _write(tmp_path, "runtime:\n  seed: 2\n")
        settings = load_settings(path, env={'VIPELAB_SEED': '9'}, overrides={'runtime': {'seed': 4}})
        assert settings.runtime.seed == 4

    def test_env_beats_file(self, tmp_path):
        path = _write(tmp_path, "runtime:\n  seed: 2\n")
        assert load_settings(path, env={'VIPELAB_SEED': '9'}).runtime.seed == 9


class TestSettingsManager:
    """Process-wide settings singleton."""

    def test_singleton(self):
        manager = SettingsManager.get_instance()
        assert SettingsManager.get_instance() is manager
        with pytest.raises(RuntimeError):
            SettingsManager()

    def test_lazy_defaults(self, monkeypatch):
        monkeypatch.delenv('VIPELAB_SEED', raising=False)
        monkeypatch.delenv('VIPELAB_WORKERS', raising=False)
        manager = SettingsManager.get_instance()
        assert not manager.is_initialized()
        assert get_settings().runtime.seed == 0
        assert manager.is_initialized()

    def test_initialize_with_file(self, tmp_path):
        path = _write(tmp_path, "generation:\n  steps: 9\n")
        manager = SettingsManager.get_instance()
        manager.initialize(path, env={})
        assert manager.config_path == path
        assert get_settings().generation.steps == 9
