"""Input validation helpers.

Small checks shared by the DSP, corpus, and metric code paths. They raise
ValueError (or a DatseError subclass) with messages that name the offending
argument, so failures surface close to the caller's mistake.
"""

import numpy as np

from .errors import DegenerateInputError


def as_float_array(x, name="signal", dtype=np.float64):
    """Coerce to a 1-D float ndarray, rejecting empty or non-finite input."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_positive(value, name):
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_equal_length(a, b, name_a="reference", name_b="test"):
    if len(a) != len(b):
        raise ValueError(
            f"{name_a} and {name_b} must have equal length, got {len(a)} vs {len(b)}"
        )


def check_nonzero_power(x, name="signal", floor=0.0):
    power = float(np.mean(np.square(np.asarray(x, dtype=np.float64))))
    if power <= floor:
        raise DegenerateInputError(f"{name} has zero power")
    return power
