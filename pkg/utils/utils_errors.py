"""
utils_errors.py - exception types shared by the simulator, learners and runner.
"""

from __future__ import annotations

import pathlib


class FemadError(Exception):
    """Base class for every error raised on purpose by this project."""


class InvalidParameterError(FemadError, ValueError):
    """A parameter or input array is outside its allowed range or shape."""


class PreconditionError(FemadError, RuntimeError):
    """An operation was called in a state where it is not defined."""


class CheckpointError(FemadError, ValueError):
    """A checkpoint file is truncated, has a bad header, or mismatches a network."""


class ConfigError(FemadError, ValueError):
    """A config file is malformed. The message is anchored to path and line."""

    def __init__(
        self,
        message: str,
        path: pathlib.Path | str | None = None,
        line: int | None = None,
    ):
        self.path = path
        self.line = line
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
