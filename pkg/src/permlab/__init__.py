"""Exact permanents, polynomial recovery and Monte Carlo checks for Gaussian permanent reductions."""

from .matcore import permanent_batch, permanent_naive, permanent_ryser

__all__ = ["permanent_batch", "permanent_naive", "permanent_ryser"]
__version__ = "0.1.0"
