"""Exception types used across the package.

Errors split into two families: bad user input (configs, flags, unknown
names) and numerical failures (rank deficiency, divergence, accuracy).
The CLI maps the former to exit code 2 and the latter to exit code 3.
"""


class SpintomoError(Exception):
    """Base class for all package errors."""


class InputError(SpintomoError, ValueError):
    """Invalid user-supplied value (unknown name, bad range, bad flag)."""


class ConfigError(InputError):
    """Invalid or inconsistent experiment configuration."""


class SizeError(SpintomoError, ValueError):
    """Dimension or count outside the supported range, or shape mismatch."""


class ContractError(SpintomoError, ValueError):
    """A numerical precondition was violated (non-Hermitian input, grid
    mismatch, observable acting on a hidden spin, ...)."""


class NumericError(SpintomoError):
    """Non-finite values where finite ones are required."""


class IntegratorAccuracyError(SpintomoError):
    """Time integration drifted beyond tolerance; increase substeps."""


class RankDeficiencyError(SpintomoError):
    """Design matrix numerically rank deficient; need better-spread states."""


class DivergenceError(SpintomoError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class DegeneratePredictionError(SpintomoError):
    """All predicted coupling coefficients vanish; nothing to normalize."""


class UndefinedMetricError(SpintomoError):
    """Requested fidelity is undefined for this partition (e.g. no hidden
    spins, or zero-norm reference Hamiltonian)."""


class StageFailure(SpintomoError):
    """Wraps an error from one pipeline stage with reproduction info."""

    def __init__(self, stage: str, seed, cause: BaseException):
        self.stage = stage
        self.seed = seed
        self.cause = cause
        super().__init__(f"stage '{stage}' failed (seed {seed}): {cause}")
