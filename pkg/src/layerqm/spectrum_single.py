"""Bound state of a single point interaction in the layer.

The eigenvalue solves xi(a; z) = alpha below the first threshold T_1.
Because xi increases monotonically from -inf to +inf on (-inf, T_1) the
root is unique; it is bracketed and then located in the variable
u = ln(1 - z/T_1), which resolves eigenvalues exponentially close to T_1.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.optimize as opt
import scipy.special as sp

from .errors import DomainError, SingularInputError
from .layer_green import (Energy, LayerConfig, Perturbation, check_transverse,
                          dxi_dz, free_green, xi)

XI_TOL = 1e-11
MAX_ITER = 200


def energy_at(u, cfg):
    """Energy with log-gap u = ln(1 - z/T_1)."""
    return Energy.from_log_gap(u, cfg)


def log_gap_of(z, cfg):
    """u = ln(1 - z/T_1) for real z below the first threshold."""
    return math.log1p(-z / cfg.first_threshold)


@dataclass(frozen=True)
class BoundState1:
    """Eigenvalue and eigenfunction data of a one-center Hamiltonian.

    Attributes
    ----------
    eps : float
        Eigenvalue (below the first threshold).
    log_gap : float
        ln(1 - eps/T_1); carries the precision lost in ``eps`` near T_1.
    pert : Perturbation
    cfg : LayerConfig
    residual : float
        |xi(eps) - alpha| at the returned root.
    """

    eps: float
    log_gap: float
    pert: Perturbation
    cfg: LayerConfig
    residual: float = 0.0

    @property
    def alpha(self):
        return self.pert.alpha

    @property
    def energy(self):
        return Energy.from_log_gap(self.log_gap, self.cfg)

    def norm2(self):
        """Squared L^2 norm of the unnormalized eigenfunction, dxi/dz(eps)."""
        return dxi_dz(self.pert.b, self.energy, self.cfg)

    def eigenfunction(self, x, normalized=False):
        return eigenfunction_1(x, self, normalized)


def _bracket(f, start, step, limit):
    """Walk ``u`` from ``start`` by ``step`` (doubling) until f changes sign."""
    u = start
    while abs(u) < limit:
        if f(u) > 0 if step < 0 else f(u) < 0:
            return u
        u += step
        step *= 2.0
    raise DomainError("failed to bracket the bound state")


def solve_bound_state(pert, cfg=None):
    """Unique eigenvalue of the one-center Hamiltonian below T_1.

    Parameters
    ----------
    pert : Perturbation
        Finite coupling required.
    cfg : LayerConfig, optional

    Returns
    -------
    BoundState1
    """
    cfg = cfg or LayerConfig()
    if pert.switched_off:
        raise DomainError("alpha = inf has no bound state")
    b = check_transverse(pert.b, cfg)
    alpha = pert.alpha

    def f(u):
        return xi(b, energy_at(u, cfg), cfg) - alpha

    # f decreases in u; deep side starts from the strong-coupling estimate
    z0 = min(0.0, -32.0 * math.pi ** 2 * alpha ** 2 - 1.0)
    u_far = _bracket(f, log_gap_of(z0, cfg), 2.0, 1e4)
    u_near = _bracket(f, -1.0, -4.0, 1e9)
    u = opt.brentq(f, u_near, u_far, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                   maxiter=MAX_ITER)
    res = abs(f(u))
    E = energy_at(u, cfg)
    return BoundState1(E.z, u, pert, cfg, res)


def eigenfunction_1(x, bs, normalized=False):
    """Bound-state wavefunction G_0(x, a; eps).

    Unnormalized by default; with ``normalized=True`` it is divided by
    sqrt(dxi/dz(eps)), the exact norm of G_0(., a; eps).
    """
    a = bs.pert.point
    if tuple(float(v) for v in x) == a:
        raise SingularInputError("eigenfunction is singular at the perturbation")
    val = free_green(x, a, bs.energy, bs.cfg)
    if normalized:
        val /= math.sqrt(bs.norm2())
    return val


def weak_coupling_log_gap(alpha, b, cfg=None):
    """Leading weak-coupling value of ln(1 - eps/T_1): -2 pi d alpha / sin^2(pi b/d)."""
    cfg = cfg or LayerConfig()
    if not alpha > 0:
        raise DomainError("weak coupling requires alpha > 0")
    s = math.sin(math.pi * b / cfg.d)
    return -2.0 * math.pi * cfg.d * alpha / (s * s)


def weak_coupling_estimate(alpha, b, cfg=None):
    """Weak-coupling eigenvalue T_1 (1 - exp(-2 pi d alpha / sin^2(pi b/d))).

    For d = pi this is 1 - exp(-2 pi^2 alpha / sin^2 b).
    """
    cfg = cfg or LayerConfig()
    return -cfg.first_threshold * math.expm1(weak_coupling_log_gap(alpha, b, cfg))


def strong_coupling_estimate(alpha):
    """Strong-coupling eigenvalue -16 pi^2 alpha^2 (alpha < 0)."""
    if not alpha < 0:
        raise DomainError("strong coupling requires alpha < 0")
    return -16.0 * math.pi ** 2 * alpha ** 2


@dataclass(frozen=True)
class StrongBracket:
    """Dirichlet-bracketing bounds lower <= eps <= upper."""

    lower: float
    upper: float
    kappa: float
    radius: float


def dirichlet_ball_bound(alpha, b, cfg=None):
    """Upper bound on eps from a Dirichlet ball of radius c = dist(a, walls).

    Solves (-4 pi alpha)^2 = kappa^2 (1 + sinh^-2(kappa c)), i.e.
    kappa coth(kappa c) = -4 pi alpha, and returns the bracket
    -16 pi^2 alpha^2 <= eps <= -kappa^2.  If the ball has no negative
    eigenvalue (-4 pi alpha <= 1/c), ``upper`` is +inf.
    """
    cfg = cfg or LayerConfig()
    lower = strong_coupling_estimate(alpha)
    c = min(b, cfg.d - b)
    target = -4.0 * math.pi * alpha
    if target * c <= 1.0:
        return StrongBracket(lower, math.inf, 0.0, c)

    def g(k):
        return k * c / math.tanh(k * c) - target * c

    hi = target
    lo = 1e-12 / c
    kappa = opt.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return StrongBracket(lower, -kappa * kappa, kappa, c)


def _planar(x, pert):
    return math.hypot(x[0] - pert.a[0], x[1] - pert.a[1])


def strong_eigenfunction(x, pert, cfg=None, nmax=200):
    """Localized strong-coupling form of the eigenfunction.

    (1/(pi d)) sum_n sqrt(pi/(2 K_n rho)) exp(-K_n rho) sin(pi n b/d) sin(pi n y/d),
    K_n = sqrt(16 pi^2 alpha^2 + (pi n/d)^2), rho = |x - a| > 0.
    """
    cfg = cfg or LayerConfig()
    rho = _planar(x, pert)
    if rho == 0.0:
        raise SingularInputError("strong-coupling form needs a planar offset")
    n = np.arange(1, nmax + 1, dtype=float)
    k = np.sqrt(16 * math.pi ** 2 * pert.alpha ** 2 + (math.pi * n / cfg.d) ** 2)
    terms = (np.sqrt(math.pi / (2 * k * rho)) * np.exp(-k * rho)
             * np.sin(math.pi * n * pert.b / cfg.d) * np.sin(math.pi * n * x[2] / cfg.d))
    return float(np.sum(terms)) / (math.pi * cfg.d)


def weak_eigenfunction(x, pert, cfg=None, nmax=400):
    """Weak-coupling form of the eigenfunction near the perturbation.

    alpha sin(pi y/d)/sin(pi b/d) - (1/(pi d)) ln|x-a| sin(pi b/d) sin(pi y/d)
    + (1/(pi d)) sum_{n>=2} K_0(sqrt((pi n/d)^2 - T_1) |x-a|) sin(pi n b/d) sin(pi n y/d).
    The n >= 2 terms are the closed-channel (K_0) reading of the Hankel form.
    """
    cfg = cfg or LayerConfig()
    rho = _planar(x, pert)
    if rho == 0.0:
        raise SingularInputError("weak-coupling form needs a planar offset")
    d, b, y = cfg.d, pert.b, x[2]
    s1b, s1y = math.sin(math.pi * b / d), math.sin(math.pi * y / d)
    n = np.arange(2, nmax + 1, dtype=float)
    kap = np.sqrt((math.pi * n / d) ** 2 - cfg.first_threshold)
    tail = np.sum(sp.k0(kap * rho) * np.sin(math.pi * n * b / d) * np.sin(math.pi * n * y / d))
    return (pert.alpha * s1y / s1b - math.log(rho) * s1b * s1y / (math.pi * d)
            + tail / (math.pi * d))
