# -*- coding: utf-8 -*-
"""
Settings - layered configuration for vipelab runs.

Values are resolved in this order, later layers winning:

1. the shipped ``vipelab/data/default_config.yaml``
2. a user config file (``--config``)
3. environment variables ``VIPELAB_WORKERS`` and ``VIPELAB_SEED``
4. command-line flags

Every section maps onto the frozen config dataclass of the module that
uses it. Unknown keys are rejected.
"""

import copy
import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional

import yaml

from .camera import AugmentConfig
from .errors import ConfigError
from .genlab import GenerationConfig
from .losses import LossWeights, TripletConfig
from .mapper2d import MapperTrainConfig
from .nn import AdamConfig, NetworkConfig
from .pose.skeleton import Skeleton, default_skeleton, load_skeleton
from .retrieval import HitConfig
from .synth import GeneratorConfig
from .vae import VaeTrainConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), 'data', 'default_config.yaml')
SECTIONS = ('skeleton', 'camera', 'generator', 'network', 'vae', 'mapper', 'retrieval', 'generation', 'runtime')
ENV_OVERRIDES = {
    'VIPELAB_WORKERS': ('runtime', 'workers', int),
    'VIPELAB_SEED': ('runtime', 'seed', int),
}
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


@dataclass(frozen=True)
class RuntimeConfig:
    seed: int = 0
    workers: Optional[int] = None
    log_level: str = 'INFO'
    log_json: bool = False
    quiet: bool = False

    def __post_init__(self):
        if self.workers is None:
            object.__setattr__(self, 'workers', os.cpu_count() or 1)
        if self.workers < 1:
            raise ConfigError(f"runtime.workers must be >= 1, got {self.workers}")
        level = str(self.log_level).upper()
        if level not in LOG_LEVELS:
            raise ConfigError(f"runtime.log_level must be one of {LOG_LEVELS}, got {self.log_level}")
        object.__setattr__(self, 'log_level', level)


def _check_keys(section: str, data: Mapping[str, Any], allowed) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"Unknown keys in '{section}': {sorted(unknown)}", section=section)


def _build(cls, section: str, data: Optional[Mapping[str, Any]], **extra: Any):
    """Instantiate a config dataclass from a mapping, rejecting unknown keys."""
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(section, data, names - set(extra))
    try:
        return cls(**data, **extra)
    except TypeError as e:
        raise ConfigError(f"Invalid '{section}' section: {e}", section=section) from e


def _tuples(data: Mapping[str, Any], *keys: str) -> Dict[str, Any]:
    out = dict(data)
    for key in keys:
        if key in out and out[key] is not None:
            out[key] = tuple(out[key])
    return out


def deep_merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; ``update`` wins, lists are replaced whole."""
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def read_yaml(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            doc = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config file: {e.strerror or e}", path=path) from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file is not valid YAML: {e}", path=path) from e
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("Config file must hold a mapping of sections", path=path)
    return doc


@dataclass(frozen=True)
class Settings:
    """Resolved configuration for one run."""

    skeleton_path: Optional[str] = None
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    vae: VaeTrainConfig = field(default_factory=VaeTrainConfig)
    mapper: MapperTrainConfig = field(default_factory=MapperTrainConfig)
    retrieval: HitConfig = field(default_factory=HitConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)
    source: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> 'Settings':
        """
        Build settings from a full configuration document.

        Raises:
            ConfigError: On unknown sections or keys and on invalid values
        """
        _check_keys('config', doc, SECTIONS)
        skeleton = dict(doc.get('skeleton') or {})
        _check_keys('skeleton', skeleton, ('path',))

        runtime = _build(RuntimeConfig, 'runtime', doc.get('runtime'))
        network = _build(NetworkConfig, 'network', doc.get('network'))

        camera = dict(doc.get('camera') or {})
        _check_keys('camera', camera, {f.name for f in dataclasses.fields(AugmentConfig)})
        try:
            augment = AugmentConfig.from_dict(camera)
        except TypeError as e:
            raise ConfigError(f"Invalid 'camera' section: {e}", section='camera') from e

        gen = dict(doc.get('generator') or {})
        _check_keys('generator', gen, {f.name for f in dataclasses.fields(GeneratorConfig)} - {'seed'})
        generator = GeneratorConfig.from_dict({**gen, 'seed': runtime.seed})

        def train_section(name: str, config_cls, **extra):
            data = dict(doc.get(name) or {})
            nested = {
                'adam': (AdamConfig, data.pop('adam', None)),
                'weights': (LossWeights, data.pop('weights', None)),
                'triplet': (TripletConfig, data.pop('triplet', None)),
            }
            built = {key: _build(kind, f'{name}.{key}', value) for key, (kind, value) in nested.items()
                     if value is not None}
            return _build(config_cls, name, data, network=network, augment=augment,
                          seed=runtime.seed, **built, **extra)

        vae = train_section('vae', VaeTrainConfig)
        mapper = train_section('mapper', MapperTrainConfig, canonical_rotation=vae.canonical_rotation,
                               universal_skeleton=vae.universal_skeleton)
        retrieval = _build(HitConfig, 'retrieval', _tuples(doc.get('retrieval') or {}, 'ks'))
        generation = _build(GenerationConfig, 'generation', _tuples(doc.get('generation') or {}, 'alphas'))
        return cls(skeleton.get('path'), augment, generator, network, vae, mapper,
                   retrieval, generation, runtime, source=dict(doc))

    def skeleton(self) -> Skeleton:
        return load_skeleton(self.skeleton_path) if self.skeleton_path else default_skeleton()

    def rig(self):
        return list(self.generator.rig)


def load_settings(path: Optional[str] = None, env: Optional[Mapping[str, str]] = None,
                  overrides: Optional[Mapping[str, Any]] = None) -> Settings:
    """
    Resolve settings from defaults, a config file, the environment and overrides.

    Args:
        path: Optional YAML config file
        env: Environment mapping (``os.environ`` when None)
        overrides: Nested ``{section: {key: value}}`` from command-line flags

    Returns:
        Settings: Resolved, validated settings
    """
    doc = read_yaml(DEFAULT_CONFIG_PATH)
    if path:
        doc = deep_merge(doc, read_yaml(path))
    env = os.environ if env is None else env
    for var, (section, key, cast) in ENV_OVERRIDES.items():
        raw = env.get(var)
        if raw is None or raw == '':
            continue
        try:
            value = cast(raw)
        except ValueError as e:
            raise ConfigError(f"{var} must be an integer, got {raw!r}") from e
        doc = deep_merge(doc, {section: {key: value}})
    if overrides:
        doc = deep_merge(doc, overrides)
    return Settings.from_dict(doc)


class SettingsManager:
    """
    Singleton holding the settings of the running process.

    Usage:
        manager = SettingsManager.get_instance()
        manager.initialize(config_path, overrides=...)

        settings = get_settings()
    """

    _instance: Optional['SettingsManager'] = None

    def __init__(self):
        """Private constructor - use get_instance() instead."""
        if SettingsManager._instance is not None:
            raise RuntimeError("SettingsManager is a singleton. Use SettingsManager.get_instance() instead.")
        self._settings: Optional[Settings] = None
        self._config_path: Optional[str] = None

    @classmethod
    def get_instance(cls) -> 'SettingsManager':
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @classmethod
    def reset_instance(cls) -> None:
        """Drop the singleton (tests)."""
        cls._instance = None

    def initialize(self, config_path: Optional[str] = None, env: Optional[Mapping[str, str]] = None,
                   overrides: Optional[Mapping[str, Any]] = None) -> Settings:
        self._settings = load_settings(config_path, env, overrides)
        self._config_path = config_path
        logger.debug(f"Settings loaded (config={config_path or 'defaults'}, "
                     f"seed={self._settings.runtime.seed}, workers={self._settings.runtime.workers})")
        return self._settings

    @property
    def settings(self) -> Settings:
        if self._settings is None:
            return self.initialize()
        return self._settings

    @property
    def config_path(self) -> Optional[str]:
        return self._config_path

    def is_initialized(self) -> bool:
        return self._settings is not None


def get_settings() -> Settings:
    """Settings of the running process, loading defaults on first use."""
    return SettingsManager.get_instance().settings
