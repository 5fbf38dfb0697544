"""Exception types shared across the package."""


class FedCranError(Exception):
    """Base class for package errors."""


class InvalidConfigError(FedCranError, ValueError):
    """A config file or parameter set fails validation."""


class InfeasibleAllocationError(FedCranError, ValueError):
    """An allocation violates a power, fronthaul, or precision constraint."""


class AccuracyUnreachableError(FedCranError, ValueError):
    """The accuracy target maps to a non-positive round count (already met at init)."""


class SimulationDivergedError(FedCranError, RuntimeError):
    """Training produced non-finite weights."""
