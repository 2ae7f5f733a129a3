# -*- coding: utf-8 -*-
"""
Tests for the reconstruction, KL and triplet objectives and triplet mining.
"""

import numpy as np
import pytest

from vipelab.errors import ConfigError, DimensionError, MiningError
from vipelab.losses import (
    LossWeights, TripletConfig, loss_kl, loss_kl_with_grad, loss_mse, loss_mse_with_grad,
    loss_triplet, loss_triplet_with_grad, mine_triplets, mine_triplets_from_distances,
)


def _reference_mining(distances, min_separation):
    triplets = []
    n = len(distances)
    for i in range(n):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (distances[i][j], j))
        positive = order[0]
        for k in order[1:]:
            if distances[i][k] - distances[i][positive] >= min_separation:
                triplets.append((i, positive, k))
                break
    return triplets


class TestMse:
    """Mean squared reconstruction error."""

    def test_value(self):
        assert loss_mse(np.zeros((2, 3)), np.ones((2, 3))) == pytest.approx(1.0)

    def test_gradient(self, rng):
        s = rng.normal(size=(4, 5))
        s_hat = rng.normal(size=(4, 5))
        _, grad = loss_mse_with_grad(s, s_hat)
        h = 1e-6
        for idx in [(0, 0), (1, 3), (3, 4)]:
            plus, minus = s_hat.copy(), s_hat.copy()
            plus[idx] += h
            minus[idx] -= h
            numeric = (loss_mse(s, plus) - loss_mse(s, minus)) / (2 * h)
            assert grad[idx] == pytest.approx(numeric, rel=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            loss_mse(np.zeros((2, 3)), np.zeros((3, 2)))


class TestKl:
    """KL(N(mu, var) || N(0, I))."""

    def test_zero_at_standard_normal(self):
        assert loss_kl(np.zeros((3, 4)), np.zeros((3, 4))) == 0.0

    def test_matches_monte_carlo(self):
        """Sampled E_q[log q - log p] agrees with the closed form within 2%."""
        mu = np.array([0.8, -0.9])
        logvar = np.array([0.3, -0.4])
        std = np.exp(0.5 * logvar)
        rng = np.random.default_rng(42)
        total, count = 0.0, 0
        for _ in range(20):
            z = mu + std * rng.standard_normal((100_000, 2))
            log_q = -0.5 * logvar - 0.5 * ((z - mu) / std) ** 2
            log_p = -0.5 * z ** 2
            total += float(np.sum(log_q - log_p))
            count += len(z)
        estimate = total / count
        assert loss_kl(mu[None], logvar[None]) == pytest.approx(estimate, rel=0.02)
        print(f"✅ KL closed form matches sampling ({estimate:.4f})")

    def test_averaged_over_batch(self, rng):
        mu = rng.normal(size=(1, 3))
        logvar = rng.normal(size=(1, 3))
        single = loss_kl(mu, logvar)
        assert loss_kl(np.repeat(mu, 5, axis=0), np.repeat(logvar, 5, axis=0)) == pytest.approx(single)

    def test_gradient(self, rng):
        mu = rng.normal(size=(3, 2))
        logvar = rng.normal(scale=0.5, size=(3, 2))
        _, g_mu, g_logvar = loss_kl_with_grad(mu, logvar)
        h = 1e-6
        for idx in [(0, 0), (2, 1)]:
            mp, mm = mu.copy(), mu.copy()
            mp[idx] += h
            mm[idx] -= h
            assert g_mu[idx] == pytest.approx((loss_kl(mp, logvar) - loss_kl(mm, logvar)) / (2 * h), rel=1e-6)
            lp, lm = logvar.copy(), logvar.copy()
            lp[idx] += h
            lm[idx] -= h
            assert g_logvar[idx] == pytest.approx((loss_kl(mu, lp) - loss_kl(mu, lm)) / (2 * h), rel=1e-6)


class TestMining:
    """In-batch triplet selection by 3D distance."""

    def test_matches_reference_with_ties(self, rng):
        for _ in range(200):
            n = int(rng.integers(3, 12))
            d = rng.integers(0, 5, size=(n, n)).astype(float) * 0.1
            d = np.triu(d, 1)
            d = d + d.T
            min_sep = float(rng.choice([0.0, 0.1, 0.25]))
            assert mine_triplets_from_distances(d, min_sep) == _reference_mining(d.tolist(), min_sep)

    def test_positive_is_closest_and_separated(self, world_poses):
        from vipelab.pose import pairwise_mpjpe
        cfg = TripletConfig(min_separation=0.05)
        d = pairwise_mpjpe(world_poses[:12])
        for i, j, k in mine_triplets(world_poses[:12], cfg):
            others = [x for x in range(12) if x != i]
            assert d[i, j] == min(d[i, x] for x in others)
            assert d[i, k] - d[i, j] >= 0.05

    def test_small_batch_rejected(self):
        with pytest.raises(MiningError):
            mine_triplets_from_distances(np.zeros((2, 2)))
        with pytest.raises(MiningError):
            mine_triplets(np.zeros((2, 17, 3)))

    def test_no_valid_negative(self):
        d = np.ones((4, 4)) - np.eye(4)
        assert mine_triplets_from_distances(d, 0.1) == []


class TestTripletLoss:
    """Embedding-space margin loss."""

    def test_hinge_arithmetic(self):
        e = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
        assert loss_triplet(e, [(0, 1, 2)], TripletConfig(margin=1.0)) == 0.0
        value, grad = loss_triplet_with_grad(e, [(0, 1, 2)], TripletConfig(margin=3.0))
        assert value == pytest.approx(1.0)
        assert np.allclose(grad, [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])

    def test_empty_triplets(self, rng):
        value, grad = loss_triplet_with_grad(rng.normal(size=(4, 3)), [])
        assert value == 0.0
        assert np.all(grad == 0.0)

    def test_gradient(self, rng):
        e = rng.normal(size=(6, 4))
        triplets = [(0, 1, 2), (3, 4, 5), (1, 0, 5), (2, 3, 1)]
        cfg = TripletConfig(margin=10.0)
        _, grad = loss_triplet_with_grad(e, triplets, cfg)
        h = 1e-6
        for idx in [(0, 0), (1, 2), (3, 1), (5, 3)]:
            plus, minus = e.copy(), e.copy()
            plus[idx] += h
            minus[idx] -= h
            numeric = (loss_triplet(plus, triplets, cfg) - loss_triplet(minus, triplets, cfg)) / (2 * h)
            assert grad[idx] == pytest.approx(numeric, rel=1e-5, abs=1e-8)


class TestLossConfig:
    """Loss hyperparameter validation."""

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            TripletConfig(margin=0.0)
        with pytest.raises(ConfigError):
            TripletConfig(min_separation=-0.1)
        with pytest.raises(ConfigError):
            LossWeights(w_kl=-1.0)
