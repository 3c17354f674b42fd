"""Real and complex special functions used by the physics modules.

Digamma, trigamma, the logarithmic-case Kummer function U(a, 1; x) and the
Laguerre polynomials are implemented here.  The Bessel family and the gamma
function are thin, domain-checked wrappers around :mod:`scipy.special`.

All functions accept scalars or numpy arrays; scalars in give Python floats
(or complex) out.
"""

import math

import numpy as np
from scipy import special as _sp

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061

# B_{2k} / (2k) for the digamma asymptotic series, k = 1..7
_PSI_ASYM = (1.0 / 12, -1.0 / 120, 1.0 / 252, -1.0 / 240, 1.0 / 132,
             -691.0 / 32760, 1.0 / 12)
# B_{2k} for the trigamma asymptotic series, k = 1..7
_PSI1_ASYM = (1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66,
              -691.0 / 2730, 7.0 / 6)

_SHIFT_TO = 10.0


def _scalar_out(arr, scalar):
    if scalar:
        v = arr.item()
        return v
    return arr


def _check_poles(x, name):
    bad = (x <= 0) & (x == np.round(x))
    if np.any(bad):
        raise DomainError(f"{name}: pole at nonpositive integer argument")


def _frac_part(x):
    """x - round(x), used to keep cot/sin accurate near integers."""
    return x - np.round(x)


def digamma(x):
    """Digamma function psi(x) for real x off the nonpositive integers.

    Shifts the argument to x >= 10 with psi(x+1) = psi(x) + 1/x and sums the
    asymptotic series there; negative arguments go through the reflection
    psi(1-x) = psi(x) + pi cot(pi x).
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    _check_poles(x, "digamma")
    x = np.atleast_1d(x).copy()
    out = np.zeros_like(x)

    refl = x < 0.5
    if np.any(refl):
        # psi(x) = psi(1-x) - pi cot(pi x)
        out[refl] -= np.pi / np.tan(np.pi * _frac_part(x[refl]))
        x[refl] = 1.0 - x[refl]

    acc = np.zeros_like(x)
    low = x < _SHIFT_TO
    while np.any(low):
        acc[low] -= 1.0 / x[low]
        x[low] += 1.0
        low = x < _SHIFT_TO

    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    for c in reversed(_PSI_ASYM):
        series = (series + c) * inv2
    out += np.log(x) - 0.5 / x - series + acc
    return _scalar_out(out, scalar)


def trigamma(x):
    """Trigamma function psi'(x) = sum_j 1/(x+j)^2 for real x."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    _check_poles(x, "trigamma")
    x = np.atleast_1d(x).copy()
    out = np.zeros_like(x)
    sign = np.ones_like(x)

    refl = x < 0.5
    if np.any(refl):
        # psi'(x) = -psi'(1-x) + pi^2 / sin^2(pi x)
        out[refl] = (np.pi / np.sin(np.pi * _frac_part(x[refl]))) ** 2
        sign[refl] = -1.0
        x[refl] = 1.0 - x[refl]

    acc = np.zeros_like(x)
    low = x < _SHIFT_TO
    while np.any(low):
        acc[low] += 1.0 / (x[low] * x[low])
        x[low] += 1.0
        low = x < _SHIFT_TO

    inv = 1.0 / x
    inv2 = inv * inv
    series = np.zeros_like(x)
    for c in reversed(_PSI1_ASYM):
        series = (series + c) * inv2
    val = inv + 0.5 * inv2 + series * inv + acc
    out += sign * val
    return _scalar_out(out, scalar)


def gamma_fn(x):
    """Gamma function; raises DomainError at the poles."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    _check_poles(x, "gamma_fn")
    if scalar:
        return math.gamma(float(x))
    return _sp.gamma(x)


def bessel_k0(x):
    """Macdonald function K_0(x), x > 0."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("bessel_k0 requires x > 0")
    out = _sp.k0(x)
    return float(out) if scalar else out


def bessel_j(m, x):
    """Bessel function J_m(x) of integer order m >= 0."""
    if int(m) != m or m < 0:
        raise DomainError("bessel_j requires an integer order m >= 0")
    scalar = np.ndim(x) == 0
    out = _sp.jv(int(m), np.asarray(x, dtype=float))
    return float(out) if scalar else out


def hankel1_0(w):
    """Hankel function H_0^(1)(w) on the principal branch.

    Arguments on the positive imaginary axis are routed through
    K_0(kappa) = (pi i / 2) H_0^(1)(i kappa) so that the result is exactly
    imaginary there.
    """
    scalar = np.ndim(w) == 0
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if np.any(w == 0):
        raise DomainError("hankel1_0 is singular at w = 0")
    out = np.empty_like(w)
    imag_axis = (w.real == 0) & (w.imag > 0)
    if np.any(imag_axis):
        out[imag_axis] = (2.0 / (np.pi * 1j)) * _sp.k0(w.imag[imag_axis])
    rest = ~imag_axis
    if np.any(rest):
        out[rest] = _sp.hankel1(0, w[rest])
    return complex(out[0]) if scalar else out


def laguerre(n, x):
    """Laguerre polynomial L_n(x) by the three-term recurrence."""
    if int(n) != n or n < 0:
        raise DomainError("laguerre requires an integer degree n >= 0")
    n = int(n)
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return float(prev) if scalar else prev
    cur = 1.0 - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return float(cur) if scalar else cur


# ---------------------------------------------------------------------------
# Kummer U(a, 1; x)
# ---------------------------------------------------------------------------

_U_CROSSOVER = 8.0
_SERIES_MAX_TERMS = 2000


def _nonpositive_integer(a, rtol=1e-13):
    r = round(a)
    return r <= 0 and abs(a - r) <= rtol * max(1.0, abs(a))


def u1_small_x(a, x):
    """Logarithmic Frobenius series for U(a, 1; x).

    Returns ``(value, cond)`` where ``cond`` estimates the cancellation
    ratio (largest partial term over the result).
    """
    rg = float(_sp.rgamma(a))
    lnx = math.log(x)
    poch = 1.0  # (a)_k x^k / (k!)^2
    harm = 0.0
    total = 0.0
    biggest = 0.0
    for k in range(_SERIES_MAX_TERMS):
        psi_ak = float(digamma(a + k))
        psi_1k = -EULER_GAMMA + harm
        contrib = poch * (lnx + psi_ak - 2.0 * psi_1k)
        total += contrib
        biggest = max(biggest, abs(contrib))
        poch *= (a + k) * x / ((k + 1) * (k + 1))
        harm += 1.0 / (k + 1)
        if k > 2 and abs(poch) * (abs(lnx) + abs(psi_ak) + 2 * abs(psi_1k) + 1) \
                <= 1e-17 * abs(total):
            break
        if poch == 0.0:
            break
    value = -rg * total
    if value == 0.0:
        return value, math.inf
    return value, abs(rg) * biggest / abs(value)


def _u1_asymptotic(a, x):
    """Poincare series x^-a sum (a)_k^2 (-x)^-k / k!, truncated at its
    smallest term.  Returns ``(value, error_estimate)``."""
    term = 1.0
    total = 1.0
    for k in range(400):
        nxt = -term * (a + k) * (a + k) / ((k + 1) * x)
        if nxt == 0.0:
            return x ** (-a) * total, 0.0
        if abs(nxt) >= abs(term):
            break
        total += nxt
        term = nxt
        if abs(term) <= 1e-17 * abs(total):
            break
    return x ** (-a) * total, abs(x ** (-a) * term)


def u1_large_x(a, x):
    """Large-x evaluation of U(a, 1; x).

    Uses the asymptotic series while its smallest term is below 1e-15
    relative; otherwise falls back to the integral representation of
    Gamma(a) U(a, 1; x) with downward recurrence in ``a``.
    """
    if _nonpositive_integer(a):
        n = -round(a)
        return (-1) ** n * math.factorial(n) * laguerre(n, x)
    val, err = _u1_asymptotic(a, x)
    if err <= 1e-15 * abs(val):
        return val
    return _strip_gamma(gamma_u1(a, x), a)


def _strip_gamma(g, a):
    # g / Gamma(a) without overflow of Gamma(a) for large a
    if g == 0.0:
        return 0.0
    sign = math.copysign(1.0, g) * _sp.gammasgn(a)
    return float(sign * math.exp(math.log(abs(g)) - _sp.gammaln(a)))


def kummer_u1(a, x):
    """Confluent hypergeometric function U(a, 1; x) for real a and x > 0.

    Nonpositive integer ``a`` reduces to (-1)^n n! L_n(x).  Otherwise the
    logarithmic series is used below x = 8 and the large-x evaluator above;
    if the series suffers heavy cancellation the integral route is used.
    """
    a = float(a)
    x = float(x)
    if not x > 0:
        raise DomainError("kummer_u1 requires x > 0")
    if _nonpositive_integer(a):
        n = -round(a)
        return (-1) ** n * math.factorial(n) * laguerre(n, x)
    if x < _U_CROSSOVER:
        val, cond = u1_small_x(a, x)
        if cond < 1e3:
            return val
        return _strip_gamma(gamma_u1(a, x), a)
    return u1_large_x(a, x)


# Gamma(a) U(a, 1; x) via  int_R exp(-x e^u - a log(1 + e^-u)) du  (a > 0)

_QUAD_NODES = 241
_QUAD_DROP = 42.0


def _softplus(v):
    return np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))


def _log_integrand(u, a, x):
    return -x * np.exp(u) - a * _softplus(-u)


def _edge(ustar, gcut, a, x, direction):
    step = np.ones_like(ustar)
    edge = ustar + direction * step
    inside = _log_integrand(edge, a, x) > gcut
    while np.any(inside):
        step = np.where(inside, 2.0 * step, step)
        edge = ustar + direction * step
        inside = _log_integrand(edge, a, x) > gcut
    lo, hi = ustar.copy(), edge
    for _ in range(12):
        mid = 0.5 * (lo + hi)
        above = _log_integrand(mid, a, x) > gcut
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return hi


def _gamma_u1_integral(a, x):
    v = 2.0 * a / (x + np.sqrt(x * x + 4.0 * a * x))
    ustar = np.log(v)
    gstar = _log_integrand(ustar, a, x)
    gcut = gstar - _QUAD_DROP
    left = _edge(ustar, gcut, a, x, -1.0)
    right = _edge(ustar, gcut, a, x, 1.0)
    t = np.linspace(0.0, 1.0, _QUAD_NODES)
    u = left[:, None] + (right - left)[:, None] * t[None, :]
    h = (right - left) / (_QUAD_NODES - 1)
    f = np.exp(_log_integrand(u, a[:, None], x[:, None]) - gstar[:, None])
    s = f.sum(axis=1) - 0.5 * (f[:, 0] + f[:, -1])
    return np.exp(gstar) * h * s


def gamma_u1(a, x):
    """Gamma(a) U(a, 1; x), the combination entering the magnetic Green's
    function.  Finite for every a off the nonpositive integers, x > 0."""
    scalar = np.ndim(a) == 0 and np.ndim(x) == 0
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float),
                               np.asarray(x, dtype=float))
    shape = a.shape
    a = np.atleast_1d(a).ravel()
    x = np.atleast_1d(x).ravel()
    if np.any(~(x > 0)):
        raise DomainError("gamma_u1 requires x > 0")
    out = np.empty_like(a)
    big = a >= 1.0
    if np.any(big):
        out[big] = _gamma_u1_integral(a[big], x[big])
    small = ~big
    if np.any(small):
        aa, xx = a[small], x[small]
        k = np.ceil(1.0 - aa)
        top = aa + k
        w_hi = _gamma_u1_integral(top + 1.0, xx)
        w = _gamma_u1_integral(top, xx)
        # W(s-1) = ((2s + x - 1) W(s) - s W(s+1)) / (s - 1), stable downward
        with np.errstate(divide="ignore", invalid="ignore"):
            for step in range(int(k.max())):
                act = step < k
                s = top - step
                new = ((2.0 * s + xx - 1.0) * w - s * w_hi) / (s - 1.0)
                w_hi = np.where(act, w, w_hi)
                w = np.where(act, new, w)
        out[small] = w
    if scalar:
        return float(out[0])
    return out.reshape(shape)
