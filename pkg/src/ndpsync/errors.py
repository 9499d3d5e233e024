"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent system/run configuration."""


class ProtocolError(RuntimeError):
    """A coordinator observed a request that violates protocol rules
    (release by non-owner, counter decrement at zero, mismatched barrier
    parameters, inconsistent semaphore declaration, ...)."""


class SimulationDeadlock(RuntimeError):
    """Event queue drained while cores were still blocked."""

    def __init__(self, message, blocked=None):
        super().__init__(message)
        self.blocked = blocked or []
