from __future__ import annotations


class ConvLabError(Exception):
    """Base class for every error the lab raises on purpose."""

    kind = "error"
    exit_code = 2


class ShapeError(ConvLabError):
    kind = "shape"


class LayoutError(ConvLabError):
    kind = "layout"


class ConfigError(ConvLabError):
    kind = "config"


class UsageError(ConvLabError):
    kind = "usage"


class LaunchError(ConvLabError):
    """A kernel does not fit the simulated machine."""

    kind = "launch"
    exit_code = 3


class EmptySearchSpaceError(ConvLabError):
    kind = "empty-space"


class VerificationError(ConvLabError):
    kind = "verify"
    exit_code = 1
