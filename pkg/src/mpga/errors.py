"""Exception hierarchy shared by the library and the command line."""


class MPGAError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MPGAError, ValueError):
    """Invalid configuration value; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalError(MPGAError, ArithmeticError):
    """A numerical invariant was violated (e.g. a negative variance).

    ``generation`` and ``island`` are filled in when the failure happens
    inside a trajectory so the caller can tell where it broke.
    """

    def __init__(self, message, generation=None, island=None):
        self.detail = message
        self.generation = generation
        self.island = island
        where = []
        if generation is not None:
            where.append(f"generation {generation}")
        if island is not None:
            where.append(f"island {island}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
