# -*- coding: utf-8 -*-
"""
Checkpoint files.

A checkpoint named ``<name>`` is two files:

- ``<name>.manifest``: JSON with the network spec, the ordered tensor list
  (name, shape, offset in floats), free-form metadata and a SHA-256 of the
  weights file.
- ``<name>.weights``: all tensors as little-endian float32, concatenated in
  manifest order.
"""

import hashlib
import json
import logging
import os
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..errors import CheckpointCorruptionError, DatasetIOError
from .network import MlpSpec, Params

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = '.manifest'
WEIGHTS_SUFFIX = '.weights'
CHECKPOINT_VERSION = 1


def save_checkpoint(params: Params, spec: Optional[MlpSpec], path: str,
                    meta: Optional[Dict[str, Any]] = None) -> None:
    """
    Write ``path.manifest`` and ``path.weights``.

    Args:
        params: Tensors to store, in the order they should be laid out
        spec: Network spec (None for a bare tensor bundle)
        path: Checkpoint name without suffix
        meta: Extra JSON-serializable metadata

    Raises:
        DatasetIOError: If either file cannot be written
    """
    tensors = []
    offset = 0
    chunks = []
    for name, value in params.items():
        arr = np.ascontiguousarray(value, dtype='<f4')
        tensors.append({'name': name, 'shape': list(arr.shape), 'offset': offset})
        offset += arr.size
        chunks.append(arr.tobytes())
    blob = b''.join(chunks)
    manifest = {
        'version': CHECKPOINT_VERSION,
        'spec': spec.to_dict() if spec is not None else None,
        'tensors': tensors,
        'n_floats': offset,
        'sha256': hashlib.sha256(blob).hexdigest(),
        'meta': meta or {},
    }
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path + WEIGHTS_SUFFIX, 'wb') as f:
            f.write(blob)
        with open(path + MANIFEST_SUFFIX, 'w', encoding='utf-8', newline='\n') as f:
            f.write(json.dumps(manifest, sort_keys=True, indent=2))
            f.write('\n')
    except OSError as e:
        raise DatasetIOError(f"Cannot write checkpoint: {e.strerror or e}", path=path) from e
    logger.debug(f"Saved checkpoint {path} ({len(tensors)} tensors, {offset} floats)")


def load_checkpoint(path: str) -> Tuple[Optional[MlpSpec], Params, Dict[str, Any]]:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Nothing is returned unless the whole weights file checks out.

    Returns:
        Tuple of (spec or None, float64 parameters in manifest order, metadata)

    Raises:
        DatasetIOError: If a file is missing or unreadable
        CheckpointCorruptionError: If the manifest and weights disagree
    """
    try:
        with open(path + MANIFEST_SUFFIX, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
        with open(path + WEIGHTS_SUFFIX, 'rb') as f:
            blob = f.read()
    except OSError as e:
        raise DatasetIOError(f"Cannot read checkpoint: {e.strerror or e}", path=path) from e
    except ValueError as e:
        raise CheckpointCorruptionError(f"Malformed checkpoint manifest: {e}", path=path) from e

    expected = int(manifest.get('n_floats', 0)) * 4
    if len(blob) != expected:
        raise CheckpointCorruptionError(
            f"Weights file holds {len(blob)} bytes, manifest expects {expected}", path=path)
    if hashlib.sha256(blob).hexdigest() != manifest.get('sha256'):
        raise CheckpointCorruptionError("Weights digest does not match manifest", path=path)

    flat = np.frombuffer(blob, dtype='<f4')
    params: Params = {}
    for entry in manifest['tensors']:
        shape = tuple(entry['shape'])
        size = int(np.prod(shape)) if shape else 1
        start = int(entry['offset'])
        if start + size > flat.size:
            raise CheckpointCorruptionError(f"Tensor {entry['name']} runs past the weights file", path=path)
        params[entry['name']] = flat[start:start + size].astype(np.float64).reshape(shape)
    spec = MlpSpec.from_dict(manifest['spec']) if manifest.get('spec') else None
    return spec, params, manifest.get('meta', {})


def load_network(path: str) -> Tuple[MlpSpec, Params, Dict[str, Any]]:
    """
    Read a checkpoint that must describe a network.

    Raises:
        CheckpointCorruptionError: If the manifest carries no network spec
    """
    spec, params, meta = load_checkpoint(path)
    if spec is None:
        raise CheckpointCorruptionError("Checkpoint has no network spec", path=path)
    return spec, params, meta
