# -*- coding: utf-8 -*-
"""
Logging setup for the vipelab command line and library.

Library modules only create ``logging.getLogger(__name__)`` loggers; the
CLI calls :func:`configure_logging` once to attach a console handler.
"""

import json
import logging
import os
import sys
from typing import Any, Dict, Iterable, Optional, TextIO

import colorlog

try:
    from pythonjsonlogger.json import JsonFormatter
except ImportError:  # python-json-logger < 3
    from pythonjsonlogger.jsonlogger import JsonFormatter  # type: ignore[no-redef]


CONSOLE_FORMAT = '%(log_color)s%(levelname)-8s%(reset)s %(cyan)s%(name)s%(reset)s %(message)s'
JSON_FORMAT = '%(levelname)s %(name)s %(message)s'


def configure_logging(level: str = 'INFO', json_format: bool = False,
                      stream: Optional[TextIO] = None) -> logging.Logger:
    """
    Attach a single console handler to the ``vipelab`` logger.

    Args:
        level: Logging level name (DEBUG, INFO, WARNING, ...)
        json_format: Emit JSON lines instead of colored text
        stream: Target stream (defaults to stderr)

    Returns:
        logging.Logger: The configured package logger
    """
    handler = logging.StreamHandler(stream or sys.stderr)
    if json_format:
        handler.setFormatter(JsonFormatter(JSON_FORMAT))
    else:
        handler.setFormatter(colorlog.ColoredFormatter(
            CONSOLE_FORMAT,
            log_colors={
                'DEBUG': 'white',
                'INFO': 'green',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'bold_red',
            },
        ))

    root = logging.getLogger('vipelab')
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level.upper())
    root.propagate = False
    return root


class RecordWriter:
    """
    Line-delimited JSON writer for training logs and result records.

    Keys are sorted so repeated runs produce byte-identical files.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.records: list = []
        self._handle: Optional[TextIO] = None
        if path:
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok=True)
            self._handle = open(path, 'w', encoding='utf-8')

    def write(self, record: Dict[str, Any]) -> None:
        self.records.append(record)
        if self._handle is not None:
            self._handle.write(json.dumps(record, sort_keys=True) + '\n')
            self._handle.flush()

    def write_all(self, records: Iterable[Dict[str, Any]]) -> None:
        for record in records:
            self.write(record)

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self) -> 'RecordWriter':
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
