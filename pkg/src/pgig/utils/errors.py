# -*- coding: utf-8 -*-
"""
Exception hierarchy for pgig.

Every error raised by the toolkit derives from PgigError and carries the
process exit code the command line reports for it:

- 2: configuration file or flag could not be parsed
- 3: a precondition of an operation is not met
- 4: a numeric failure (NaN/Inf, diverging training)
"""

from typing import Optional, Sequence


class PgigError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1


class ConfigError(PgigError):
    """A configuration file or command-line value could not be parsed."""

    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class ConfigurationError(PgigError):
    """An operation was invoked on an object that lacks what it needs (e.g. patterns)."""

    exit_code = 3


class ArgumentError(PgigError, ValueError):
    """An argument is outside its documented range."""

    exit_code = 3


class DimensionError(PgigError, ValueError):
    """Tensor shapes do not agree."""

    exit_code = 3

    def __init__(self, message: str, *shapes: Sequence[int]):
        self.shapes = tuple(tuple(s) for s in shapes)
        if shapes:
            rendered = " vs ".join(str(tuple(s)) for s in shapes)
            message = f"{message} ({rendered})"
        super().__init__(message)


class NumericError(PgigError, ArithmeticError):
    """A computation produced a non-finite value."""

    exit_code = 4

    def __init__(self, message: str, step: Optional[str] = None):
        self.step = step
        if step:
            message = f"{message} [step: {step}]"
        super().__init__(message)


class TrainingError(NumericError):
    """Training diverged."""

    def __init__(self, message: str, epoch: int):
        self.epoch = epoch
        super().__init__(f"{message} (epoch {epoch})", step="train")
