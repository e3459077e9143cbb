"""Exceptions shared by the analysis modules."""


class DegenerateSeriesError(ValueError):
    """The signal is constant (or numerically so); the analysis is undefined."""


class InsufficientDataError(ValueError):
    """Not enough samples, visits, or neighbor pairs for a reliable result."""
