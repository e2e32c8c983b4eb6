"""Exception taxonomy shared across the package.

Each error class maps to one failure category so the CLI can translate
failures into stable exit codes.
"""

from __future__ import annotations


class IwgtError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(IwgtError):
    """A precondition on an argument was violated."""


class ConfigError(IwgtError):
    """A config file or config field is missing or malformed."""


class GenerationError(IwgtError):
    """Topology sampling exhausted its retry budget."""

    def __init__(self, link_index: int, attempts: int):
        self.link_index = link_index
        self.attempts = attempts
        super().__init__(
            f"no valid receiver placement for link {link_index} "
            f"after {attempts} resamples"
        )


class ShapeError(IwgtError):
    """Tensor operands have incompatible shapes."""

    def __init__(self, op: str, *shapes: tuple[int, ...]):
        self.op = op
        self.shapes = shapes
        super().__init__(f"{op}: incompatible shapes {' vs '.join(map(str, shapes))}")


class NumericalError(IwgtError):
    """A numerical computation produced NaN/Inf or diverged."""


class DatasetIOError(IwgtError):
    """Reading or writing a dataset file failed."""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


class UndefinedRatioError(IwgtError):
    """Normalization against a zero reference utility."""


class ResourceLimitError(IwgtError):
    """An operation would exceed its configured cost guard."""


class DegenerateLossError(IwgtError):
    """The training loss has no gradient signal (e.g. empty mask, lambda=0)."""


class CheckpointError(IwgtError):
    """Base class for checkpoint load failures."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is unsupported."""


class CheckpointShapeError(CheckpointError):
    """A parameter blob does not match its manifest shape."""


class CheckpointTruncatedError(CheckpointError):
    """The parameter blob file is shorter than the manifest declares."""
