"""Finite-difference gradient checking.

Central differences with step h on a scalar-valued function:

    df/dx_i ~ (f(x + h e_i) - f(x - h e_i)) / (2 h)

Comparisons use the relative error |a - n| / max(|a|, |n|, 1), which
behaves sensibly when both gradients are tiny. Coordinates whose value
sits within ``exclude_radius`` of a non-smooth point (kinks of abs/relu,
pooling or top-k selection boundaries) must be skipped by the caller via
``mask``; central differences straddle the kink there and measure the
wrong one-sided slope no matter how correct the analytic gradient is.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-3
DEFAULT_TOLERANCE = 1e-4


def numeric_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                     h: float = DEFAULT_STEP,
                     mask: np.ndarray | None = None) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``.

    ``mask`` (same shape as ``x``) marks coordinates to evaluate; masked-out
    entries come back as 0.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    mflat = None if mask is None else np.asarray(mask).reshape(-1)
    for i in range(flat.size):
        if mflat is not None and not mflat[i]:
            continue
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray,
                   mask: np.ndarray | None = None) -> float:
    """Worst-case relative error between two gradients over ``mask``."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    err = np.abs(analytic - numeric) / denom
    if mask is not None:
        if not np.any(mask):
            return 0.0
        err = err[np.asarray(mask, dtype=bool)]
    return float(err.max()) if err.size else 0.0


def check_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                   analytic: np.ndarray, h: float = DEFAULT_STEP,
                   mask: np.ndarray | None = None) -> float:
    """Return the worst relative error of ``analytic`` vs central differences."""
    numeric = numeric_gradient(f, x, h=h, mask=mask)
    return relative_error(analytic, numeric, mask=mask)
