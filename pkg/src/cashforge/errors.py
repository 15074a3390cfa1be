"""Exception types shared across the package.

``InputError`` covers anything wrong with user-supplied files or arguments
(CLI exit code 2); ``StageError`` wraps failures inside a pipeline stage
(CLI exit code 3).
"""

from __future__ import annotations


class CashForgeError(Exception):
    """Base class for package errors."""


class InputError(CashForgeError):
    """Malformed or inconsistent user input (files, flags, config keys)."""


class CapabilityError(CashForgeError):
    """An algorithm cannot process the given dataset."""


class TrainingDivergedError(CashForgeError):
    """Neural-net training produced a non-finite loss twice in a row."""


class SurrogateError(CashForgeError):
    """The Gaussian-process surrogate could not be fit (singular kernel)."""


class StageError(CashForgeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
