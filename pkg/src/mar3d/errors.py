"""Shared exception taxonomy.

Exit-code mapping lives in the CLI; library code raises these directly.
"""


class Mar3dError(Exception):
    """Base class for all project errors."""


class ShapeError(Mar3dError):
    """Operands with incompatible dimensions."""


class ContractError(Mar3dError):
    """An API precondition was violated by the caller."""


class ConfigError(Mar3dError):
    """Invalid configuration value or combination."""


class ValidationError(Mar3dError):
    """Data failed a structural validity check."""


class ParseError(Mar3dError):
    """Malformed input file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CheckpointError(Mar3dError):
    """Unreadable checkpoint or parameter-shape mismatch."""


class MissingPrerequisiteError(Mar3dError):
    """A required upstream artifact (checkpoint, corpus) is absent."""


class TrainingFault(Mar3dError):
    """Non-finite loss or gradients during training."""


class GenerationFault(Mar3dError):
    """A stage of the generation pipeline produced non-finite values."""

    def __init__(self, stage: str, message: str = ""):
        self.stage = stage
        super().__init__(f"stage {stage!r}: {message}" if message else f"stage {stage!r}")
