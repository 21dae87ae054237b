"""Shared exception types."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its stated tolerance or bracket."""
