"""Exception types shared across the package."""


class BergmodError(Exception):
    """Base class for all package errors."""


class IterationLimit(BergmodError):
    """Fundamental-domain reduction did not terminate within the iteration cap.

    Signals numeric degeneracy (points extremely close to the real axis)."""


class CapacityExceeded(BergmodError):
    """A group enumeration or orbit sum would exceed its configured maximum size."""


class SeriesDivergence(BergmodError):
    """Power-series composition is invalid: the Mobius image of the expansion
    disk touches the boundary (not a genuine SU(1,1) element)."""


class TailTooLarge(BergmodError):
    """The q-series truncation tail bound exceeds the requested tolerance."""


class WeightMismatch(BergmodError):
    """Two forms (or a form and a space) have incompatible weights."""


class NotCuspidal(BergmodError):
    """A cusp form was required but the expansion has a nonzero constant term."""


class NotInLinftyH(BergmodError):
    """A matrix symbol fails the twisted essential-boundedness requirement."""


class EmptySpace(BergmodError):
    """Requested a cusp-form basis for a weight where the space is zero."""


class IntegrationError(BergmodError):
    """Integrand evaluation failed at a quadrature node."""

    def __init__(self, node_index, message=""):
        self.node_index = node_index
        super().__init__(f"integrand evaluation failed at node {node_index}: {message}")


class ConfigError(BergmodError):
    """CLI configuration failed validation."""


class RankDeficientWarning(UserWarning):
    """The point-separation evaluation matrix is numerically singular.

    Reported, not fatal: retry with a larger weight parameter."""
