"""Exception types shared across the package."""


class SizeCapError(Exception):
    """An input exceeds the configured exhaustive-computation cap."""


class ModelingError(Exception):
    """A scenario or tail-policy combination leaves the outcome undecidable."""


class ConditioningError(Exception):
    """Conditioning on a zero-probability state sequence was requested."""
