"""The GAN value function and a histogram Jensen-Shannon estimate."""

import math

import numpy as np

from ..exceptions import ValidationError

LN2 = math.log(2.0)


def _outputs(values, name):
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValidationError(f"{name} must hold values in [0, 1]")
    return arr


def v_gan(d_real, d_fake, epsilon=1e-7):
    """``mean log D(x) + mean log(1 - D(G(z)))`` with both logs clamped.

    Arguments are clamped to ``[epsilon, 1 - epsilon]`` so the value stays
    finite. At ``D = 1/2`` everywhere this is ``-2 ln 2``.
    """
    return clamped_value(_outputs(d_real, "d_real"), _outputs(d_fake, "d_fake"), epsilon)


def clamped_value(d_real, d_fake, epsilon):
    """:func:`v_gan` without input checks (NaNs propagate)."""
    lo, hi = epsilon, 1.0 - epsilon
    return float(np.mean(np.log(np.clip(d_real, lo, hi))) + np.mean(np.log(np.clip(1.0 - d_fake, lo, hi))))


def clamped_log_grad(p, epsilon):
    """Derivative of ``log(clip(p, eps, 1 - eps))`` with respect to ``p``."""
    inside = (p > epsilon) & (p < 1.0 - epsilon)
    return np.where(inside, 1.0 / np.where(inside, p, 1.0), 0.0)


def js_estimate(real, fake, bins=50):
    """Jensen-Shannon divergence (nats) between two sample sets.

    Both sets are histogrammed on shared bin edges spanning their joint
    range; the result lies in ``[0, ln 2]``.
    """
    real = np.asarray(real, dtype=float)
    fake = np.asarray(fake, dtype=float)
    real = real.reshape(len(real), -1) if real.ndim else real.reshape(1, 1)
    fake = fake.reshape(len(fake), -1) if fake.ndim else fake.reshape(1, 1)
    if len(real) < 2 or len(fake) < 2:
        raise ValidationError("need at least two samples in each set")
    if real.shape[1] != fake.shape[1]:
        raise ValidationError("sample sets have different dimensions")
    if int(bins) < 2:
        raise ValidationError(f"bins must be >= 2, got {bins}")
    both = np.vstack([real, fake])
    if not np.all(np.isfinite(both)):
        raise ValidationError("samples must be finite")
    lo, hi = both.min(axis=0), both.max(axis=0)
    if np.any(hi <= lo):
        raise ValidationError("degenerate samples: every value identical along some axis")
    ranges = list(zip(lo, hi))
    p, _ = np.histogramdd(real, bins=int(bins), range=ranges)
    q, _ = np.histogramdd(fake, bins=int(bins), range=ranges)
    p = p.ravel() / p.sum()
    q = q.ravel() / q.sum()
    m = 0.5 * (p + q)

    def kl(a):
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / m[mask])))

    return float(min(LN2, max(0.0, 0.5 * kl(p) + 0.5 * kl(q))))
