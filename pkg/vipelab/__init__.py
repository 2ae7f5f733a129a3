# -*- coding: utf-8 -*-
"""
vipelab - view-invariant 3D pose embeddings.

A pose VAE is trained on canonicalized 3D poses with a mined triplet
loss; a 2D mapping network then lifts keypoints from any camera through
the frozen decoder. Retrieval, generation and interpolation operate on
the shared embedding space.
"""

__version__ = '0.1.0'

from .errors import VipeLabError
from .settings import Settings, SettingsManager, get_settings, load_settings
from .vae import VaeModel, VaeTrainConfig, train_vae, encode, decode
from .mapper2d import Mapper2D, MapperTrainConfig, train_mapper, encode2d, lift
from .retrieval import EmbeddingIndex, HitConfig, knn_query, hit_at_k, rig_hit_at_k
from .genlab import perturb, interpolate

__all__ = [
    '__version__',
    'VipeLabError',
    'Settings', 'SettingsManager', 'get_settings', 'load_settings',
    'VaeModel', 'VaeTrainConfig', 'train_vae', 'encode', 'decode',
    'Mapper2D', 'MapperTrainConfig', 'train_mapper', 'encode2d', 'lift',
    'EmbeddingIndex', 'HitConfig', 'knn_query', 'hit_at_k', 'rig_hit_at_k',
    'perturb', 'interpolate',
]
