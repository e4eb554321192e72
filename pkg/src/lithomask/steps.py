"""Smooth C-infinity step functions built from the exponential bump partition.

Two shapes are used throughout:

* ``cutoff_step`` -- nonincreasing, identically 1 on (-inf, 0] and 0 on
  [1, +inf).  Used to blend and truncate kernel spectra.
* ``heaviside_step`` -- nondecreasing, 0 for t <= -1/2 and 1 for t >= +1/2.
  The smoothed exposure threshold.

Both are assembled from sigma(t) = exp(-1/t) for t > 0 (else 0), so every
derivative is continuous and vanishes identically outside the transition
band.
"""

from __future__ import annotations

import numpy as np

_T_MIN = 1e-12


def _bump(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > _T_MIN
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _bump_deriv(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > _T_MIN
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) / tp**2
    return out


def partition_step(t):
    """Rising smooth step: 0 on (-inf, 0], 1 on [1, +inf)."""
    t = np.asarray(t, dtype=float)
    a = _bump(t)
    b = _bump(1.0 - t)
    # a + b > 0 everywhere: a vanishes only for t <= 0, b only for t >= 1.
    return a / (a + b)


def partition_step_deriv(t):
    """Derivative of :func:`partition_step` (compactly supported on [0, 1])."""
    t = np.asarray(t, dtype=float)
    a = _bump(t)
    b = _bump(1.0 - t)
    ap = _bump_deriv(t)
    bp = _bump_deriv(1.0 - t)
    denom = (a + b) ** 2
    safe = denom > 0.0
    out = np.zeros_like(t)
    out[safe] = (ap[safe] * b[safe] + a[safe] * bp[safe]) / denom[safe]
    return out


def cutoff_step(t):
    """Nonincreasing step: 1 on (-inf, 0], 0 on [1, +inf)."""
    return partition_step(1.0 - np.asarray(t, dtype=float))


def heaviside_step(t):
    """Nondecreasing step: 0 for t <= -1/2, 1 for t >= +1/2."""
    return partition_step(np.asarray(t, dtype=float) + 0.5)


def heaviside_step_deriv(t):
    """Derivative of :func:`heaviside_step` (supported on [-1/2, +1/2])."""
    return partition_step_deriv(np.asarray(t, dtype=float) + 0.5)
