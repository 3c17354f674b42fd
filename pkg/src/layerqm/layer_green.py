"""Free resolvent of the Dirichlet layer, the regularized Green's function
xi and the Krein matrix Lambda for point perturbations (no magnetic field).

Units are hbar = 2m = 1.  The layer is R^2 x [0, d]; transverse modes are
chi_n(y) = sqrt(2/d) sin(pi n y / d) with thresholds (pi n / d)^2.

Two evaluation routes are used.  For real z < 0 with sqrt(-z) d >= 1 the
method of images converges geometrically and is used for xi, G_0 and their
z-derivatives.  Everywhere else the transverse-mode series is summed with
an analytic tail (see ``_modesum``).  Energies just below the first
threshold may be specified through ``log_gap = ln(1 - z/T_1)``, which keeps
full relative precision on 1 - z/T_1 when it underflows in z itself.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.special as sp

from ._modesum import sin_sin_series, terms_needed
from .errors import (ConfigurationError, DomainError, SingularInputError,
                     ThresholdError)
from .specfun import EULER_GAMMA, digamma

BOUNDARY_GUARD = 1e-9
_IMAGE_MIN_KD = 1.0
_DECAY_CUT = 45.0
_CHUNK = 1 << 16
_ACCEL_TOL = 1e-17


@dataclass(frozen=True)
class LayerConfig:
    """Layer R^2 x [0, d]."""

    d: float = math.pi

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d > 0):
            raise DomainError(f"layer width must be positive, got {self.d}")

    def threshold(self, n=1):
        """Transverse threshold (pi n / d)^2."""
        return (math.pi * n / self.d) ** 2

    @property
    def first_threshold(self):
        return self.threshold(1)


@dataclass(frozen=True)
class Perturbation:
    """Point interaction at (a, b) with coupling alpha.

    ``alpha = inf`` switches the interaction off; it is then ignored by the
    Krein matrix and all solvers.
    """

    a: tuple = (0.0, 0.0)
    b: float = math.pi / 2
    alpha: float = 0.0

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        if len(a) != 2:
            raise DomainError("planar position a must have two components")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "alpha", float(self.alpha))
        if math.isnan(self.alpha) or self.alpha == -math.inf:
            raise DomainError("alpha must be real or +inf")

    @property
    def switched_off(self):
        return math.isinf(self.alpha)

    @property
    def point(self):
        return (self.a[0], self.a[1], self.b)

    def with_alpha(self, alpha):
        return Perturbation(self.a, self.b, alpha)


@dataclass(frozen=True)
class Energy:
    """Spectral parameter z.

    Real z is understood as the boundary value z + i0 from the upper
    half-plane.  ``log_gap`` (optional, real z only) is ln(1 - z/T_1) and
    takes precedence over z for the first transverse mode.
    """

    z: complex
    log_gap: float = None

    def __post_init__(self):
        z = complex(self.z)
        if z.imag == 0.0:
            z = z.real
        object.__setattr__(self, "z", z)
        if self.log_gap is not None and not self.is_real:
            raise DomainError("log_gap is only meaningful for real z")

    @classmethod
    def from_log_gap(cls, log_gap, cfg=None, threshold=None):
        """Energy T_1 (1 - exp(log_gap)) just below the first threshold."""
        t1 = threshold if threshold is not None else (cfg or LayerConfig()).first_threshold
        return cls(-t1 * math.expm1(log_gap), float(log_gap))

    @property
    def is_real(self):
        return isinstance(self.z, float)

    @property
    def real(self):
        return self.z.real


def as_energy(z):
    """Coerce a number or Energy to Energy."""
    return z if isinstance(z, Energy) else Energy(z)


def check_transverse(b, cfg, name="b"):
    """Validate a transverse position against the boundary guard band."""
    b = float(b)
    if not (BOUNDARY_GUARD * cfg.d < b < cfg.d * (1.0 - BOUNDARY_GUARD)):
        raise DomainError(f"{name}={b} must lie inside (0, d) away from the walls")
    return b


def _check_off_threshold(E, cfg, nmax):
    if not E.is_real or E.log_gap is not None:
        return
    w = E.z / cfg.first_threshold
    if w >= 1.0:
        m = round(math.sqrt(w))
        if 1 <= m <= nmax and w == m * m:
            raise ThresholdError(f"z={E.z} coincides with threshold n={m}")


def k_n(z, n, cfg=None):
    """Longitudinal momentum sqrt(z - (pi n/d)^2) with Im k_n >= 0."""
    cfg = cfg or LayerConfig()
    if n < 1:
        raise DomainError("mode index must be >= 1")
    E = as_energy(z)
    q = cfg.threshold(n)
    if E.is_real:
        if n == 1 and E.log_gap is not None:
            return 1j * math.sqrt(q) * math.exp(0.5 * E.log_gap)
        diff = E.z - q
        return complex(math.sqrt(diff)) if diff > 0 else 1j * math.sqrt(-diff)
    return 1j * np.sqrt(q - E.z)


def _kappas(E, n, cfg):
    """kappa_n = -i k_n for an array of mode indices (complex in general)."""
    q = (math.pi * n / cfg.d) ** 2
    if E.is_real:
        diff = q - E.z
        kap = np.where(diff >= 0, np.sqrt(np.abs(diff)) + 0j, -1j * np.sqrt(np.abs(diff)))
        if E.log_gap is not None and n[0] == 1:
            kap[0] = math.sqrt(q[0]) * math.exp(0.5 * E.log_gap)
        return kap
    return np.sqrt(q - E.z + 0j)


def _log_head(E, nmax, cfg):
    """ln(1 - z (d/pi n)^2) for n = 1..nmax on the physical sheet."""
    n = np.arange(1, nmax + 1, dtype=float)
    if E.is_real:
        w = E.z / cfg.first_threshold
        ratio = 1.0 - w / (n * n)
        with np.errstate(divide="ignore"):
            out = np.log(np.abs(ratio))
        if E.log_gap is not None:
            out[0] = E.log_gap
        if w > 1.0:
            return out - 1j * math.pi * (ratio < 0)
        return out
    w = E.z / cfg.first_threshold
    return np.log(1.0 - w / (n * n))


def _inv_head(E, nmax, cfg):
    """1 / (n^2 - z (d/pi)^2) with the first mode taken from log_gap."""
    n = np.arange(1, nmax + 1, dtype=float)
    w = E.z / cfg.first_threshold
    if E.log_gap is not None:
        gap = math.exp(E.log_gap)
        with np.errstate(divide="ignore"):
            return 1.0 / (n * n - 1.0 + gap)
    return 1.0 / (n * n - w)


def _use_images(E, cfg):
    return E.is_real and E.z < 0 and math.sqrt(-E.z) * cfg.d >= _IMAGE_MIN_KD


def _image_orders(kappa, d):
    mmax = int(math.ceil(0.5 * _DECAY_CUT / (kappa * d))) + 2
    return np.arange(-mmax, mmax + 2, dtype=float)


def xi2(b, d=math.pi):
    """z-independent part of xi: gamma/(4 pi d) + (2 psi(b/d) + pi cot(pi b/d))/(8 pi d)."""
    b = float(b)
    if not 0.0 < b < d:
        raise DomainError(f"xi2 needs 0 < b < d, got b={b}, d={d}")
    beta = b / d
    return (EULER_GAMMA / (4 * math.pi * d)
            + (2.0 * digamma(beta) + math.pi / math.tan(math.pi * beta)) / (8 * math.pi * d))


def _xi_images(b, kappa, d, derivative=False):
    m = np.arange(1, int(math.ceil(0.5 * _DECAY_CUT / (kappa * d))) + 3, dtype=float)
    mm = _image_orders(kappa, d)
    r_opp = np.abs(2.0 * b - 2.0 * mm * d)
    if derivative:
        same = 2.0 * np.sum(np.exp(-2.0 * kappa * m * d))
        opp = np.sum(np.exp(-kappa * r_opp))
        return (1.0 + same - opp) / (8 * math.pi * kappa)
    same = np.sum(np.exp(-2.0 * kappa * m * d) / (m * d))
    opp = np.sum(np.exp(-kappa * r_opp) / r_opp)
    return -kappa / (4 * math.pi) + (same - opp) / (4 * math.pi)


def xi(b, z, cfg=None):
    """Regularized Green's function xi(a; z) of a point at height b.

    Parameters
    ----------
    b : float or Perturbation
        Transverse position (the planar position is irrelevant).
    z : complex, float or Energy
        Spectral parameter; real values mean z + i0.
    cfg : LayerConfig, optional

    Returns
    -------
    float or complex
        Real below the first threshold, complex (Im > 0) above it.
    """
    cfg = cfg or LayerConfig()
    if isinstance(b, Perturbation):
        b = b.b
    b = check_transverse(b, cfg)
    E = as_energy(z)
    if _use_images(E, cfg):
        return float(_xi_images(b, math.sqrt(-E.z), cfg.d))
    w = E.z / cfg.first_threshold
    nmax = terms_needed(abs(w))
    _check_off_threshold(E, cfg, nmax)
    head = _log_head(E, nmax, cfg)
    beta = b / cfg.d
    s = sin_sin_series(head, beta, beta, -w, -0.5 * w * w)
    val = -s / (2 * math.pi * cfg.d) + xi2(b, cfg.d)
    if np.iscomplexobj(val) and val.imag == 0 and E.is_real and w < 1:
        return float(val.real)
    return val.item() if isinstance(val, np.ndarray) else val


def dxi_dz(b, z, cfg=None):
    """Derivative of xi with respect to z for real z below the first threshold.

    Equals (1/(2 pi d)) (d/pi)^2 sum_n sin^2(pi n b/d) / (n^2 - z (d/pi)^2)
    and is the squared norm of G_0(., a; z).
    """
    cfg = cfg or LayerConfig()
    if isinstance(b, Perturbation):
        b = b.b
    b = check_transverse(b, cfg)
    E = as_energy(z)
    if not E.is_real or (E.log_gap is None and E.z >= cfg.first_threshold):
        raise DomainError("dxi_dz is defined for real z below the first threshold")
    if _use_images(E, cfg):
        return float(_xi_images(b, math.sqrt(-E.z), cfg.d, derivative=True))
    w = E.z / cfg.first_threshold
    head = _inv_head(E, terms_needed(abs(w)), cfg)
    beta = b / cfg.d
    s = sin_sin_series(head, beta, beta, 1.0, w)
    return float(s) * cfg.d / (2 * math.pi ** 3)


def _point(x):
    x = tuple(float(v) for v in x)
    if len(x) != 3:
        raise DomainError("points are (x1, x2, y) triples")
    return x


def _green_images(r, y1, y2, kappa, d, derivative=False):
    mm = _image_orders(kappa, d)
    rp = np.sqrt(r * r + (y1 - y2 - 2.0 * mm * d) ** 2)
    rm = np.sqrt(r * r + (y1 + y2 - 2.0 * mm * d) ** 2)
    if derivative:
        return (np.sum(np.exp(-kappa * rp)) - np.sum(np.exp(-kappa * rm))) / (8 * math.pi * kappa)
    return (np.sum(np.exp(-kappa * rp) / rp) - np.sum(np.exp(-kappa * rm) / rm)) / (4 * math.pi)


def _green_vertical(y1, y2, E, cfg, derivative=False):
    """G_0 (or dG_0/dz) for two points on a common vertical line."""
    d = cfg.d
    w = E.z / cfg.first_threshold
    nmax = terms_needed(abs(w))
    _check_off_threshold(E, cfg, nmax)
    b1, b2 = y1 / d, y2 / d
    if derivative:
        s = sin_sin_series(_inv_head(E, nmax, cfg), b1, b2, 1.0, w)
        return s * d / (2 * math.pi ** 3)
    s = sin_sin_series(_log_head(E, nmax, cfg), b1, b2, -w, -0.5 * w * w)
    return -s / (2 * math.pi * d) + xi2(0.5 * (y1 + y2), d) - xi2(0.5 * abs(y1 - y2), d)


def _green_modes(r, y1, y2, E, cfg, derivative=False):
    """Mode series (1/(pi d)) sum K_0(kappa_n r) sin sin for r > 0.

    For small r the plain series needs ~1/r terms.  Then the image sum at a
    reference energy z0 (and its first z-derivative) is subtracted term by
    term; the remainder decays like n^-4 independently of r.
    """
    d = cfg.d
    total = 0.0 + 0.0j
    start = 1
    zr = max(E.real, 0.0)
    # keep terms within exp(-_DECAY_CUT) of the first one
    k1 = math.sqrt(max(cfg.first_threshold - E.real, 0.0))
    nlast = int(math.ceil(d / math.pi * math.sqrt((k1 + _DECAY_CUT / r) ** 2 + zr))) + 1
    z0 = None
    if nlast > _CHUNK:
        z0 = -(_IMAGE_MIN_KD / d) ** 2
        dz = abs(E.z - z0)
        ncut = (int(math.ceil((dz * dz * d ** 3 / (12 * math.pi ** 5 * _ACCEL_TOL)) ** (1 / 3)))
                + int(d * math.sqrt(zr) / math.pi) + 16)
        if ncut < nlast:
            nlast = ncut
        else:
            z0 = None
    while start <= nlast:
        n = np.arange(start, min(start + _CHUNK, nlast + 1), dtype=float)
        kap = _kappas(E, n, cfg)
        arg = kap * r
        if E.is_real and np.all(kap.imag == 0):
            kr = arg.real
            vals = sp.k1(kr) * r / (2 * kap.real) if derivative else sp.k0(kr)
            if start == 1 and E.log_gap is not None and not derivative and kr[0] < 1e-5:
                # small-argument form with ln(kappa_1) taken from log_gap
                lx2 = math.log(0.5 * r) + 0.5 * (math.log(cfg.first_threshold) + E.log_gap)
                x2 = 0.25 * kr[0] * kr[0]
                vals[0] = -(lx2 + EULER_GAMMA) * (1.0 + x2) + x2
        else:
            if derivative:
                raise DomainError("dG_0/dz is only provided below the first threshold")
            # K_0(kappa r) = (pi i / 2) H_0^(1)(i kappa r) on the physical sheet
            vals = (math.pi * 1j / 2) * sp.hankel1(0, 1j * arg)
        if z0 is not None:
            k0 = np.sqrt((math.pi * n / d) ** 2 - z0)
            dk = sp.k1(k0 * r) * r / (2 * k0)
            if derivative:
                vals = vals - dk
            else:
                vals = vals - sp.k0(k0 * r) - (E.z - z0) * dk
        total += np.sum(vals * np.sin(math.pi * n * y1 / d) * np.sin(math.pi * n * y2 / d))
        start = int(n[-1]) + 1
    total /= math.pi * d
    if z0 is not None:
        k0 = math.sqrt(-z0)
        slope = _green_images(r, y1, y2, k0, d, derivative=True)
        total += slope if derivative else (_green_images(r, y1, y2, k0, d)
                                           + (E.z - z0) * slope)
    if E.is_real and total.imag == 0:
        return total.real
    return total


def free_green(x1, x2, z, cfg=None):
    """Free resolvent kernel G_0(x1, x2; z) of the Dirichlet layer.

    Parameters
    ----------
    x1, x2 : sequence of 3 floats
        Points (x_1, x_2, y) with 0 <= y <= d.
    z : complex, float or Energy

    Raises
    ------
    SingularInputError
        If the two points coincide.
    """
    cfg = cfg or LayerConfig()
    p1, p2 = _point(x1), _point(x2)
    for y in (p1[2], p2[2]):
        if not 0.0 <= y <= cfg.d:
            raise DomainError(f"y={y} outside the layer")
    if p1 == p2:
        raise SingularInputError("G_0 is singular at coinciding points; use xi")
    if p1[2] in (0.0, cfg.d) or p2[2] in (0.0, cfg.d):
        return 0.0
    E = as_energy(z)
    r = math.hypot(p1[0] - p2[0], p1[1] - p2[1])
    if _use_images(E, cfg):
        return float(_green_images(r, p1[2], p2[2], math.sqrt(-E.z), cfg.d))
    if r == 0.0:
        val = _green_vertical(p1[2], p2[2], E, cfg)
    else:
        val = _green_modes(r, p1[2], p2[2], E, cfg)
    if isinstance(val, complex) and val.imag == 0.0:
        return val.real
    return val


def free_green_dz(x1, x2, z, cfg=None):
    """Derivative dG_0/dz for real z below the first threshold."""
    cfg = cfg or LayerConfig()
    p1, p2 = _point(x1), _point(x2)
    if p1 == p2:
        raise SingularInputError("use dxi_dz at coinciding points")
    E = as_energy(z)
    if not E.is_real or (E.log_gap is None and E.z >= cfg.first_threshold):
        raise DomainError("free_green_dz is defined for real z below the first threshold")
    if p1[2] in (0.0, cfg.d) or p2[2] in (0.0, cfg.d):
        return 0.0
    r = math.hypot(p1[0] - p2[0], p1[1] - p2[1])
    if _use_images(E, cfg):
        return float(_green_images(r, p1[2], p2[2], math.sqrt(-E.z), cfg.d, derivative=True))
    if r == 0.0:
        return float(np.real(_green_vertical(p1[2], p2[2], E, cfg, derivative=True)))
    return float(np.real(_green_modes(r, p1[2], p2[2], E, cfg, derivative=True)))


@dataclass(frozen=True)
class KreinMatrix:
    """The N x N matrix Lambda(alpha, a; z) at a fixed energy."""

    entries: np.ndarray
    z: Energy
    perturbations: tuple = field(default_factory=tuple)

    @property
    def size(self):
        return self.entries.shape[0]

    @property
    def is_real(self):
        return not np.iscomplexobj(self.entries)

    def eigh(self):
        """Eigen-decomposition of the Hermitian matrix (real z only)."""
        return np.linalg.eigh(self.entries)

    def eigvals(self):
        if self.is_real or np.allclose(self.entries, self.entries.conj().T, rtol=0, atol=0):
            return np.linalg.eigvalsh(self.entries)
        return np.linalg.eigvals(self.entries)

    def det(self):
        return np.linalg.det(self.entries)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def active(perts):
    """Perturbations with finite coupling, after checking positions."""
    perts = list(perts)
    seen = set()
    for p in perts:
        if p.point in seen:
            raise ConfigurationError(f"duplicate perturbation position {p.point}")
        seen.add(p.point)
    return [p for p in perts if not p.switched_off]


def _assemble(perts, diag, offdiag):
    n = len(perts)
    vals = {}
    for j in range(n):
        vals[(j, j)] = diag(perts[j])
        for m in range(j + 1, n):
            vals[(j, m)] = offdiag(perts[j], perts[m])
    cplx = any(isinstance(v, complex) or np.iscomplexobj(v) for v in vals.values())
    out = np.zeros((n, n), dtype=complex if cplx else float)
    for (j, m), v in vals.items():
        out[j, m] = v
        out[m, j] = v
    return out


def krein_matrix(perts, z, cfg=None):
    """Krein matrix Lambda for the active (finite-alpha) perturbations.

    Diagonal alpha_j - xi(a_j; z), off-diagonal -G_0(a_j, a_m; z); vertically
    stacked pairs (identical planar position) use the logarithmic series.
    """
    cfg = cfg or LayerConfig()
    perts = active(perts)
    for p in perts:
        check_transverse(p.b, cfg)
    E = as_energy(z)
    entries = _assemble(perts,
                        lambda p: p.alpha - xi(p.b, E, cfg),
                        lambda p, q: -free_green(p.point, q.point, E, cfg))
    return KreinMatrix(entries, E, tuple(perts))


def krein_matrix_dz(perts, z, cfg=None):
    """dLambda/dz below the first threshold (negative semidefinite)."""
    cfg = cfg or LayerConfig()
    perts = active(perts)
    E = as_energy(z)
    return _assemble(perts,
                     lambda p: -dxi_dz(p.b, E, cfg),
                     lambda p, q: -free_green_dz(p.point, q.point, E, cfg))


@dataclass(frozen=True)
class ScaledProblem:
    """A one-center problem after the thickness scaling d -> sigma d."""

    cfg: LayerConfig
    pert: Perturbation
    z: float


def scale_transform(pert, z, cfg=None, sigma=1.0):
    """Map (alpha, a, z, d) to (alpha/sigma, sigma a, z/sigma^2, sigma d).

    Under this map xi scales by 1/sigma and eigenvalues by 1/sigma^2.
    """
    cfg = cfg or LayerConfig()
    sigma = float(sigma)
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    a = (sigma * pert.a[0], sigma * pert.a[1])
    new = Perturbation(a, sigma * pert.b, pert.alpha / sigma)
    zz = as_energy(z)
    return ScaledProblem(LayerConfig(sigma * cfg.d), new, zz.z / sigma ** 2)
