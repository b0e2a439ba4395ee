"""Exception types shared across the package."""


class LineupLabError(Exception):
    """Base class for all package errors."""


class ConfigError(LineupLabError):
    """Bad configuration or usage: missing paths, malformed config values."""


class DataError(LineupLabError):
    """Invalid data content: malformed files, violated invariants, bad inputs."""


class HookError(LineupLabError):
    """External restoration hook failed beyond the configured tolerance."""
