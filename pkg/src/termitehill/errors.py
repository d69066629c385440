class ConfigError(ValueError):
    """Invalid scenario or parameter value."""


class SchedulingError(RuntimeError):
    """An event was scheduled before the current simulation clock."""


class UnknownNodeError(KeyError):
    pass
