"""Exception types raised across chaoskit."""


class ChaosKitError(Exception):
    """Base class for all library errors."""


class EmptySpace(ChaosKitError):
    pass


class NonPositiveWeight(ChaosKitError):
    def __init__(self, index: int, value: float):
        # index is 1-based, matching atom numbering in the docs
        super().__init__(f"weight at atom {index} must be > 0, got {value!r}")
        self.index = index
        self.value = value


class AsymmetricInput(ChaosKitError):
    pass


class OrderMismatch(ChaosKitError):
    pass


class SpaceMismatch(ChaosKitError):
    pass


class InvalidContractionOrder(ChaosKitError):
    pass


class NotCentered(ChaosKitError):
    pass


class NotNormalized(ChaosKitError):
    pass


class DegreeCap(ChaosKitError):
    pass


class NoRealRoot(ChaosKitError):
    pass


class EmptyBatch(ChaosKitError):
    pass


class TooFewAtoms(ChaosKitError):
    pass


class MissingEntry(ChaosKitError):
    pass


class MismatchWarning(UserWarning):
    """Batch and report do not describe the same pair."""
