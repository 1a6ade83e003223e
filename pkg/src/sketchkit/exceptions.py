class SketchError(Exception):
    """Base class for errors raised by sketchkit."""


class DegenerateInputError(SketchError):
    """Augmentation could not produce fresh orthogonal directions."""


class BudgetExhausted(SketchError):
    """Another Lanczos step would exceed the configured rank budget."""


class IngestionError(SketchError, ValueError):
    """A matrix or image file could not be parsed."""


class SketchWarning(UserWarning):
    """Non-fatal numerical condition: orientation, tolerance floor, truncation."""
