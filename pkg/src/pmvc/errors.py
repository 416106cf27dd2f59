"""Exception types shared across the package.

The CLI maps these onto exit codes: validation/configuration problems
exit 1, runtime/training problems exit 2, I/O problems exit 3.
"""


class PMVCError(Exception):
    """Base class for all package errors."""

    code = "ERROR"


class ValidationError(PMVCError):
    """Bad input data or arguments."""

    code = "VALIDATION"


class ConfigurationError(PMVCError):
    """Inconsistent model / run configuration."""

    code = "CONFIG"


class StateError(PMVCError):
    """Missing or incompatible state (checkpoints, untrained models)."""

    code = "STATE"


class TrainingError(PMVCError):
    """Training diverged or otherwise failed at runtime."""

    code = "TRAINING"


class AudioIOError(PMVCError):
    """Unreadable or unwritable audio / artifact files."""

    code = "IO"
