"""Exception hierarchy for the slowfast package.

Every error raised by the package derives from SlowfastError so callers
(and the command line driver) can distinguish numerical failures from
programming mistakes.
"""


class SlowfastError(Exception):
    """Base class for all package errors."""

    def diagnostic(self) -> dict:
        """Machine-readable payload for reports and the CLI."""
        return {"error": type(self).__name__, "message": str(self)}


class UnknownModelError(SlowfastError):
    """Requested registry name does not exist."""


class DomainError(SlowfastError):
    """A state coordinate lies outside the declared domain."""


class ConfigError(SlowfastError):
    """Simulation or report configuration violates an invariant."""


class BlowUpError(SlowfastError):
    """A path left the representable range (non-finite state)."""

    def __init__(self, message, path_index=None, step=None):
        super().__init__(message)
        self.path_index = path_index
        self.step = step

    def diagnostic(self) -> dict:
        d = super().diagnostic()
        d["path_index"] = self.path_index
        d["step"] = self.step
        return d


class DegenerateDiffusionError(SlowfastError):
    """Diffusion coefficient vanishes where positivity is required."""


class NotPositiveRecurrentError(SlowfastError):
    """Normalization integral of the frozen fast process diverges."""


class InfiniteMomentError(SlowfastError):
    """A requested moment or distance has a divergent tail."""


class ResolutionError(SlowfastError):
    """Input exceeds a resolution cap and must be coarsened by the caller."""


class ConservationError(SlowfastError):
    """A conservative solver drifted beyond its mass tolerance."""


class FitError(SlowfastError):
    """A least-squares fit is underdetermined or degenerate."""
