"""Exception types shared across the package."""


class InvalidParameter(ValueError):
    """A parameter lies outside the range an operation is defined on."""


class DomainMismatch(ValueError):
    """Two distributions live on domains of different size."""


class MismatchedBucketing(ValueError):
    """Two histograms were built over different bucketings."""


class WeightMismatch(ValueError):
    """Two histograms carry different total weight."""


class ProtocolReject(Exception):
    """Raised inside a verifier to abort the current protocol with Reject.

    ``reason`` is a short machine-readable tag recorded in run outputs.
    """

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason
