"""Small numerical helpers shared across modules (all logarithms natural)."""

import math

import numpy as np
from scipy import special

LN2 = math.log(2.0)


def binary_entropy(p):
    """Binary entropy h_b(p) in nats; h_b(0) = h_b(1) = 0."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -special.xlogy(p, p) - special.xlogy(1.0 - p, 1.0 - p)
    return float(h) if h.ndim == 0 else h


def entropy(pmf):
    """Shannon entropy of a probability vector, in nats."""
    pmf = np.asarray(pmf, dtype=float)
    return float(-np.sum(special.xlogy(pmf, pmf)))


def log_unit_ball_volume(n, p=2.0):
    """log of the volume of the unit L^p ball in R^n.

    Uses log-gamma throughout so that large ``n`` does not underflow.
    ``p = inf`` gives the cube [-1, 1]^n.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    if math.isinf(p) or n == 1:
        return n * LN2
    return n * (LN2 + special.gammaln(1.0 / p + 1.0)) - special.gammaln(n / p + 1.0)


def Q(x):
    """Complementary standard normal cdf."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def Qinv(eps):
    """Inverse of :func:`Q`, polished with Newton steps.

    Starts from the inverse complementary error function and applies a
    couple of Newton iterations on Q(x) - eps so that Q(Qinv(eps)) = eps to
    about 1e-14 relative accuracy.
    """
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    x = math.sqrt(2.0) * float(special.erfcinv(2.0 * eps))
    for _ in range(3):
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if pdf == 0.0:
            break
        step = (float(Q(x)) - eps) / pdf
        x += step
        if abs(step) < 1e-16 * max(1.0, abs(x)):
            break
    return x


def nats_to_bits(x):
    return np.asarray(x) / LN2 if isinstance(x, np.ndarray) else x / LN2
