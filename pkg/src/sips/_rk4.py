"""Fixed-step classical Runge-Kutta integration onto a fixed output grid."""

from __future__ import annotations

import math

import numpy as np


def rk4_on_grid(deriv, y0: np.ndarray, times: np.ndarray, max_step: float,
                post_step=None) -> np.ndarray:
    """Integrate y' = deriv(y) recording at every point of ``times``.

    Each grid interval is split into equal substeps no longer than
    ``max_step``, so the scheme is genuinely fixed-step while landing
    exactly on the grid.  ``post_step``, when given, may adjust the state
    after every step (e.g. projection back into the feasible region).
    """
    y = np.array(y0, dtype=float)
    out = np.empty((len(times), y.size))
    out[0] = y
    for k in range(len(times) - 1):
        span = float(times[k + 1] - times[k])
        substeps = max(1, math.ceil(span / max_step - 1e-12))
        h = span / substeps
        for _ in range(substeps):
            k1 = deriv(y)
            k2 = deriv(y + 0.5 * h * k1)
            k3 = deriv(y + 0.5 * h * k2)
            k4 = deriv(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if post_step is not None:
                y = post_step(y)
        out[k + 1] = y
    return out
