"""Transverse-mode sums with analytic tails.

Every series in the package has the shape ``sum_n f_n cos(pi n x)`` where
``f_n`` admits an expansion ``c1/n^2 + c2/n^4 + O(n^-6)``.  The first N
terms are summed directly; the remainder uses the closed forms

    sum_{n>=1} cos(2 pi n t) / n^2 = pi^2 B_2(t)
    sum_{n>=1} cos(2 pi n t) / n^4 = -pi^4 B_4(t) / 3

(Bernoulli polynomials, 0 <= t < 1) minus their own heads.
"""

import math

import numpy as np

_MIN_TERMS = 32


def _bernoulli2(t):
    return t * t - t + 1.0 / 6.0


def _bernoulli4(t):
    return t * t * (t * t - 2.0 * t + 1.0) - 1.0 / 30.0


def cos_power_sums(x):
    """Return (sum cos(pi n x)/n^2, sum cos(pi n x)/n^4) over n >= 1."""
    t = (0.5 * x) % 1.0
    return math.pi ** 2 * _bernoulli2(t), -(math.pi ** 4) * _bernoulli4(t) / 3.0


def terms_needed(scale, order=3):
    """Head length N such that the neglected O(n^-2*order) tail of a series
    whose coefficients grow like ``scale**k`` stays below ~1e-17."""
    scale = abs(scale)
    n_sqrt = 2.0 * math.sqrt(scale) + 1.0
    n_tail = (scale ** order * 1e16 / (2 * order - 1)) ** (1.0 / (2 * order - 1))
    return int(max(_MIN_TERMS, math.ceil(n_sqrt), math.ceil(n_tail)))


def cos_series(head, xs, c1, c2):
    """Sum ``f_n cos(pi n x)`` for each x in ``xs``.

    Parameters
    ----------
    head : ndarray, shape (N,)
        Exact values f_1..f_N (real or complex).
    xs : sequence of float
        Points x at which the cosine series is wanted.
    c1, c2 : scalar
        Tail coefficients, f_n ~ c1 n^-2 + c2 n^-4 for n > N.

    Returns
    -------
    ndarray
        One sum per entry of ``xs``.
    """
    nmax = head.shape[0]
    n = np.arange(1, nmax + 1, dtype=float)
    inv2 = 1.0 / (n * n)
    inv4 = inv2 * inv2
    out = []
    for x in xs:
        c = np.cos(math.pi * n * x)
        s2, s4 = cos_power_sums(x)
        tail2 = s2 - np.dot(c, inv2)
        tail4 = s4 - np.dot(c, inv4)
        out.append(np.dot(c, head) + c1 * tail2 + c2 * tail4)
    return np.array(out)


def sin_sin_series(head, beta1, beta2, c1, c2):
    """Sum ``f_n sin(pi n beta1) sin(pi n beta2)`` using the cosine form."""
    lo, hi = cos_series(head, (beta1 - beta2, beta1 + beta2), c1, c2)
    return 0.5 * (lo - hi)
