# -*- coding: utf-8 -*-
"""
Tests for the pose VAE: encoding contract, training loop and checkpoints.
"""

import json

import numpy as np
import pytest

from conftest import TINY_NETWORK
from vipelab.errors import CheckpointCorruptionError, DimensionError, NonCanonicalPoseError, TrainingDivergedError
from vipelab.nn import AdamConfig, NetworkConfig, save_checkpoint
from vipelab.pose import canonicalize_batch
from vipelab.vae import (
    LOGVAR_CLAMP, VaeTrainConfig, build_vae, decode, decode_poses, embedding_locality, encode,
    load_decoder, load_vae, reconstruction_mpjpe, save_vae, train_vae,
)


def _tiny_config(**kwargs):
    base = dict(latent_dim=4, epochs=2, batch_size=8, network=TINY_NETWORK, seed=0)
    base.update(kwargs)
    return VaeTrainConfig(**base)


@pytest.fixture
def model():
    return build_vae(17, TINY_NETWORK, latent_dim=4, rng=np.random.default_rng(0))


@pytest.fixture
def canonical(world_poses, skel):
    return canonicalize_batch(world_poses, skel)


class TestEncoding:
    """Encoder and decoder contracts."""

    def test_shapes(self, model, canonical):
        mu, logvar, e = encode(model, canonical[:5])
        assert mu.shape == logvar.shape == e.shape == (5, 4)
        assert decode(model, e).shape == (5, 17, 3)

    def test_eval_embedding_is_the_mean(self, model, canonical):
        mu, _, e = encode(model, canonical[:5])
        assert np.array_equal(mu, e)

    def test_train_mode_samples(self, model, canonical, rng):
        mu, _, e = encode(model, canonical[:5], mode='train', rng=rng)
        assert not np.allclose(mu, e)

    def test_train_mode_needs_generator(self, model, canonical):
        with pytest.raises(ValueError):
            encode(model, canonical[:2], mode='train')

    def test_non_canonical_input_rejected(self, model, world_poses):
        with pytest.raises(NonCanonicalPoseError):
            encode(model, world_poses[:2] * 3.0)

    def test_wrong_joint_count(self, model):
        with pytest.raises(DimensionError):
            encode(model, np.zeros((2, 16, 3)), check=False)

    def test_logvar_is_clamped(self, model, canonical):
        model.encoder.params['output.b'][4:] = 1e3
        _, logvar, _ = encode(model, canonical[:3])
        assert np.all(logvar == LOGVAR_CLAMP)

    def test_decode_single_vector(self, model):
        assert decode(model, np.zeros(4)).shape == (1, 17, 3)
        poses = decode_poses(model, np.zeros((2, 4)))
        assert len(poses) == 2 and poses[0].joints.shape == (17, 3)

    def test_mismatched_encoder_decoder(self):
        a = build_vae(17, TINY_NETWORK, latent_dim=4, rng=np.random.default_rng(0))
        b = build_vae(17, TINY_NETWORK, latent_dim=3, rng=np.random.default_rng(0))
        with pytest.raises(DimensionError):
            type(a)(a.encoder, b.decoder)


class TestTraining:
    """train_vae on small batches."""

    def test_log_records(self, world_poses, skel, tmp_path):
        log_path = str(tmp_path / 'vae.log.jsonl')
        result = train_vae(world_poses[:20], skel, _tiny_config(), log_path=log_path)
        assert [r['epoch'] for r in result.log] == [0, 1]
        for record in result.log:
            assert set(record) == {'epoch', 'mse', 'kl', 'triplet', 'total', 'n_triplets'}
            assert np.isfinite(record['total'])
        lines = open(log_path, encoding='utf-8').read().splitlines()
        assert [json.loads(line)['epoch'] for line in lines] == [0, 1]

    def test_same_seed_same_model(self, world_poses, skel):
        a = train_vae(world_poses[:20], skel, _tiny_config())
        b = train_vae(world_poses[:20], skel, _tiny_config())
        assert a.log == b.log
        assert a.model.encoder.digest() == b.model.encoder.digest()
        assert a.model.decoder.digest() == b.model.decoder.digest()
        print("✅ VAE training is reproducible from the seed")

    def test_different_seed_different_model(self, world_poses, skel):
        a = train_vae(world_poses[:20], skel, _tiny_config(seed=0))
        b = train_vae(world_poses[:20], skel, _tiny_config(seed=1))
        assert a.model.decoder.digest() != b.model.decoder.digest()

    def test_without_triplets(self, world_poses, skel):
        from vipelab.losses import LossWeights
        result = train_vae(world_poses[:10], skel, _tiny_config(weights=LossWeights(w_triplet=0.0)))
        assert all(r['triplet'] == 0.0 and r['n_triplets'] == 0 for r in result.log)

    def test_non_finite_loss_raises(self, world_poses, skel):
        model = build_vae(17, TINY_NETWORK, latent_dim=4, rng=np.random.default_rng(0))
        model.encoder.params['output.W'] = np.full_like(model.encoder.params['output.W'], np.nan)
        with pytest.raises(TrainingDivergedError):
            train_vae(world_poses[:10], skel, _tiny_config(), model=model)

    def test_zero_epochs_returns_untrained_model(self, world_poses, skel):
        result = train_vae(world_poses[:10], skel, _tiny_config(epochs=0))
        assert result.log == []

    @pytest.mark.slow
    def test_reconstruction_improves(self, world_poses, skel, canonical):
        cfg = _tiny_config(epochs=40, network=NetworkConfig(hidden_dim=32, n_blocks=1, dropout_p=0.0),
                           adam=AdamConfig(lr=3e-3))
        result = train_vae(world_poses, skel, cfg)
        assert result.log[-1]['mse'] < result.log[0]['mse']
        assert reconstruction_mpjpe(result.model, canonical) < 1.0

    @pytest.mark.slow
    def test_default_network_overfits_small_set(self, overfit_vae):
        """Full-size network memorizes 256 poses to below 0.05 normalized MPJPE."""
        model, canonical = overfit_vae
        error = reconstruction_mpjpe(model, canonical)
        assert error < 0.05
        print(f"✅ Overfit reconstruction MPJPE {error:.4f}")


class TestQualityMetrics:
    """Reconstruction error and embedding locality."""

    def test_reconstruction_mpjpe_is_positive(self, model, canonical):
        assert reconstruction_mpjpe(model, canonical[:8]) > 0.0

    def test_locality_is_a_correlation(self, model, canonical):
        rho = embedding_locality(model, canonical[:10])
        assert -1.0 <= rho <= 1.0


class TestVaeCheckpoints:
    """Encoder/decoder checkpoint pair."""

    def test_round_trip(self, model, canonical, tmp_path):
        enc_path, dec_path = save_vae(model, str(tmp_path / 'vae'))
        assert enc_path.endswith('.encoder') and dec_path.endswith('.decoder')
        loaded = load_vae(str(tmp_path / 'vae'))
        assert loaded.latent_dim == 4
        assert loaded.canonical_rotation is True
        mu_a, _, _ = encode(model, canonical[:4])
        mu_b, _, _ = encode(loaded, canonical[:4])
        assert np.allclose(mu_a, mu_b, atol=1e-4)

        decoder, meta = load_decoder(dec_path)
        assert meta['role'] == 'decoder'
        assert np.allclose(decode(decoder, mu_a), decode(model, mu_a), atol=1e-4)

    def test_checkpoint_without_network_spec(self, model, tmp_path):
        path = str(tmp_path / 'bare.decoder')
        save_checkpoint(model.decoder.params, None, path, {'role': 'decoder'})
        with pytest.raises(CheckpointCorruptionError):
            load_decoder(path)
