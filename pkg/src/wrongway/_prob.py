"""Small helpers for probability vectors stored as float64 arrays."""
import math

import numpy as np


def normalize_exact(w):
    """Return a copy of ``w`` nudged so that ``math.fsum`` of it is exactly 1.

    The correction goes on the largest entry, which keeps the relative change
    below one ulp of that entry.
    """
    w = np.array(w, dtype=float)
    for _ in range(4):
        s = math.fsum(w)
        if s == 1.0:
            break
        i = int(np.argmax(w))
        w[i] += 1.0 - s
    return w


def uniform(m):
    p = np.full(m, 1.0 / m)
    s = math.fsum(p[:-1])
    p[-1] = 1.0 - s
    return normalize_exact(p)


def check_probs(p, tol, name="probs"):
    from .errors import ValidationError

    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError(f"{name} must be finite and nonnegative")
    if abs(math.fsum(p) - 1.0) > tol:
        raise ValidationError(f"{name} sum to {math.fsum(p)!r}, expected 1 within {tol}")
    return p
