"""Exception types shared across the package."""


class PopeqError(Exception):
    """Base class for all popeq errors."""


class ConfigError(PopeqError):
    """A configuration document failed to parse or validate."""


class WindowTooSmall(PopeqError):
    """A computation window does not cover the states it must reach."""


class NoSignChange(PopeqError):
    """No root of the drift was bracketed on the scanned interval."""


class MultipleRoots(PopeqError):
    """More than one drift root detected; the equilibrium is not unique."""


class UnstableEquilibrium(PopeqError):
    """The drift root exists but is not attracting."""


class SingularSystem(PopeqError):
    """The truncated balance equations have no unique solution."""


class RateOverflow(PopeqError):
    """A total jump rate evaluated to a non-finite value."""


class StuckState(PopeqError):
    """All jump rates vanish at the current state; the process is absorbed."""
