# -*- coding: utf-8 -*-
"""
Error types raised across vipelab.

Every error carries a short machine-readable ``code`` so the command line
can turn failures into structured records instead of tracebacks.
"""

from typing import Any, Dict, Optional


class VipeLabError(Exception):
    """Base class for all vipelab failures."""

    code = 'vipelab_error'

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_record(self) -> Dict[str, Any]:
        """
        Build the machine-readable error record emitted by the CLI.

        Returns:
            dict: ``{"error": code, "message": ..., **context}``
        """
        record: Dict[str, Any] = {'error': self.code, 'message': self.message}
        for key, value in self.context.items():
            record[key] = str(value) if not isinstance(value, (int, float, bool, type(None))) else value
        return record


class DimensionError(VipeLabError, ValueError):
    code = 'dimension_error'


class DegeneratePoseError(VipeLabError, ValueError):
    code = 'degenerate_pose'


class AlignmentDegenerateError(VipeLabError, ValueError):
    code = 'alignment_degenerate'


class DegenerateBoneError(VipeLabError, ValueError):
    code = 'degenerate_bone'


class ProjectionError(VipeLabError, ValueError):
    code = 'projection_error'


class MiningError(VipeLabError, ValueError):
    code = 'mining_error'


class NonCanonicalPoseError(VipeLabError, ValueError):
    code = 'non_canonical_pose'


class EmptyIndexError(VipeLabError, ValueError):
    code = 'empty_index'


class ConfigError(VipeLabError, ValueError):
    code = 'config_error'


class CheckpointCorruptionError(VipeLabError, RuntimeError):
    code = 'checkpoint_corrupt'


class FrozenDecoderError(VipeLabError, RuntimeError):
    """The decoder changed while it was supposed to be frozen."""

    code = 'frozen_violation'


class TrainingDivergedError(VipeLabError, RuntimeError):
    """A loss became NaN or infinite."""

    code = 'training_diverged'


class DatasetIOError(VipeLabError, OSError):
    code = 'dataset_io'

    def __init__(self, message: str, path: Optional[str] = None, **context: Any):
        super().__init__(message, path=path, **context)
        self.path = path
