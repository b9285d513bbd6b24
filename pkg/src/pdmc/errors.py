"""Exception hierarchy shared across the package."""


class PdmcError(Exception):
    """Base class for all package errors."""


class ConfigError(PdmcError):
    """Invalid parameters, flags, or configuration file contents."""


class NetworkFormatError(PdmcError):
    """Malformed or inconsistent network/spike file."""


class QueueOverflowError(PdmcError):
    """Spike queue capacity exceeded."""

    def __init__(self, tick: int, capacity: int):
        self.tick = tick
        self.capacity = capacity
        super().__init__(f"spike queue overflow at tick {tick} (capacity {capacity})")


class DeadlockError(PdmcError):
    """A bounded channel in multi-worker mode timed out."""


class StatsError(PdmcError):
    """Degenerate input or incompatible metadata in the statistics layer."""
