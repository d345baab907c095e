"""Central finite differences; uses only forward evaluations."""

import numpy as np


def finite_difference_gradient(func, params, h=1e-6):
    """Approximate the gradient of scalar ``func`` at flat ``params``."""
    params = np.array(params, dtype=float)
    grad = np.empty_like(params)
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + h
        up = func(params)
        params[i] = orig - h
        down = func(params)
        params[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-6):
    """Max elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
