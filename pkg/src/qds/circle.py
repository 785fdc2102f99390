"""Circle coordinate helpers.

Points on the circle are reals in [0, 1) with endpoints identified.
"""

import numpy as np


def reduce_mod1(y):
    """Fractional part mapped into [0, 1).

    Uses truncation plus a post-correction so that neither negative inputs
    nor values rounding up to exactly 1.0 can leak out of the domain.
    """
    y = np.asarray(y, dtype=np.float64)
    f = y - np.trunc(y)
    f = np.where(f < 0.0, f + 1.0, f)
    f = np.where(f >= 1.0, 0.0, f)
    if f.ndim == 0:
        return float(f)
    return f


def circle_distance(x, y):
    """Arc-length metric on the circle, in [0, 1/2]."""
    d = np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))
    d = np.minimum(d % 1.0, 1.0 - (d % 1.0))
    if d.ndim == 0:
        return float(d)
    return d


def as_circle_point(x):
    """Validate a scalar circle coordinate."""
    x = float(x)
    if not 0.0 <= x < 1.0:
        raise ValueError(f"circle point must lie in [0, 1), got {x}")
    return x
