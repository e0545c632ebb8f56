"""Provides module specific helper functions."""

import os
from typing import Optional

import numpy as np

from pytessindex.exceptions import TessDomainError


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Converts array-like input (or anything with a ``values`` attribute) to a 1-D float array.

    Args:
        values: factor, numpy array or sequence of numbers
        name (str): name used in error messages

    Returns:
        np.ndarray: 1-D float64 array
    """
    if hasattr(values, "values") and not isinstance(values, np.ndarray):
        values = values.values
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim != 1:
        raise TessDomainError(f"{name} must be one-dimensional, got shape {vector.shape}")
    return vector


def resolve_threads(threads: Optional[int]) -> int:
    """Returns the worker count to use, defaulting to the available parallelism."""
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return threads


def chunked(count: int, parts: int) -> list:
    """Splits ``range(count)`` into at most ``parts`` contiguous slices."""
    parts = max(1, min(parts, count))
    bounds = np.linspace(0, count, parts + 1).astype(int)
    return [slice(int(start), int(stop)) for start, stop in zip(bounds[:-1], bounds[1:]) if stop > start]


# hack: working with global verbose variable
verbose = False


def is_verbose() -> bool:
    return verbose


def set_verbose(value: bool) -> None:
    global verbose
    verbose = value
