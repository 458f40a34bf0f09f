"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """A vector's length disagrees with the potential's dimension."""


class NonFiniteInputError(ValueError):
    """An input vector contains NaN or infinity."""


class GridAlignmentError(ValueError):
    """A stepsize or horizon does not sit on the fine time grid."""


class MemoryBudgetError(ValueError):
    """A requested Brownian path would exceed the configured memory budget."""


class QuantizationGuardError(ValueError):
    """The coarse/fine step ratio is too small to quantize tau reliably."""


class StepsizeGuardError(ValueError):
    """The requested stepsize violates the admissible-stepsize cap."""


class MissingConstantError(ValueError):
    """A formula needs an assumption constant the potential does not declare."""


class DivergedReferenceError(RuntimeError):
    """The fine-grid reference solution blew up; the estimate is invalid."""


class ConfigError(ValueError):
    """Bad experiment configuration (CLI usage errors map to exit code 2)."""
