"""Point interactions in the layer with a perpendicular homogeneous field B.

Symmetric gauge.  The essential spectrum consists of the Landau-type
points z_0(m, n) = |B|(2m + 1) + (pi n/d)^2, m >= 0, n >= 1.  With
beta = 2|B|, q_n = (pi n/d)^2 and u_n(z) = (q_n + |B| - z)/beta,

    G^B(x, x'; z) = (1/(2 pi d)) Phi^B(x, x') sum_n Gamma(u_n) U(u_n, 1; |B| r^2/2)
                    sin(pi n y/d) sin(pi n y'/d),
    xi_B(b; z)    = (1/(2 pi d)) sum_n [ln(q_n/beta) - psi(u_n)] sin^2(pi n b/d)
                    + xi2(b, d),

where Phi^B is the gauge factor.  xi_B is taken without the gauge factor.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.optimize as opt
import scipy.special as sp

from ._modesum import sin_sin_series, terms_needed
from .errors import DomainError, SingularInputError, ThresholdError
from .layer_green import (LayerConfig, Perturbation, _green_images, active,
                          check_transverse, dxi_dz, free_green, xi, xi2)
from .specfun import digamma, gamma_u1, laguerre, trigamma

GROUP_TOL = 1e-9
GAP_GUARD = 1e-6
MIN_GUARD = 1e-13
MERGE_TOL = 1e-8
_DECAY_CUT = 45.0
_CHUNK = 1 << 14
_ACCEL_TOL = 1e-15


@dataclass(frozen=True)
class MagneticConfig:
    """Layer of width d in the field B (symmetric gauge)."""

    B: float = 1.0
    d: float = math.pi

    def __post_init__(self):
        if not (math.isfinite(self.B) and self.B != 0):
            raise DomainError("B must be finite and nonzero")
        LayerConfig(self.d)

    @property
    def layer(self):
        return LayerConfig(self.d)

    @property
    def absB(self):
        return abs(self.B)

    @property
    def beta(self):
        return 2.0 * abs(self.B)

    def level(self, m, n):
        """Essential-spectrum point |B|(2m + 1) + (pi n/d)^2."""
        return self.absB * (2 * m + 1) + (math.pi * n / self.d) ** 2

    def scaled(self, sigma):
        """Configuration after d -> sigma d, B -> B / sigma^2."""
        return MagneticConfig(self.B / sigma ** 2, self.d * sigma)


@dataclass(frozen=True)
class EssentialPoint:
    """A point z_0 of the essential spectrum with its (m, n) family J(z_0)."""

    value: float
    pairs: tuple

    def strength(self, b, d):
        """sum over J(z_0) of sin^2(pi n b/d)."""
        return sum(math.sin(math.pi * n * b / d) ** 2 for _, n in self.pairs)


@dataclass(frozen=True)
class Gap:
    """Open interval between neighbouring essential points (left may be -inf)."""

    index: int
    left: float
    right: float
    left_point: EssentialPoint = None
    right_point: EssentialPoint = None

    def __contains__(self, z):
        return self.left < z < self.right


def essential_spectrum(cfg, z_max):
    """Essential-spectrum points up to z_max, degenerate pairs grouped.

    Points within GROUP_TOL (1 + z_0) of each other are merged.
    """
    z_max = float(z_max)
    if not math.isfinite(z_max):
        raise DomainError("z_max must be finite")
    cands = []
    n = 1
    while cfg.level(0, n) <= z_max * (1 + GROUP_TOL) + GROUP_TOL:
        m = 0
        while cfg.level(m, n) <= z_max * (1 + GROUP_TOL) + GROUP_TOL:
            cands.append((cfg.level(m, n), (m, n)))
            m += 1
        n += 1
    cands.sort()
    points = []
    for val, mn in cands:
        if points and abs(val - points[-1][0]) <= GROUP_TOL * (1 + abs(points[-1][0])):
            points[-1][1].append(mn)
        else:
            points.append((val, [mn]))
    return [EssentialPoint(v, tuple(sorted(p))) for v, p in points]


def gaps(cfg, count):
    """The first ``count`` gaps; gap 0 is (-inf, |B| + (pi/d)^2)."""
    z_max = cfg.level(0, 1)
    pts = essential_spectrum(cfg, z_max)
    while len(pts) < count:
        z_max *= 2.0
        pts = essential_spectrum(cfg, z_max)
    out = [Gap(0, -math.inf, pts[0].value, None, pts[0])]
    for r in range(1, count):
        out.append(Gap(r, pts[r - 1].value, pts[r].value, pts[r - 1], pts[r]))
    return out[:count]


def gauge_phase(x1, x2, cfg):
    """Phi^B(x, x') = exp((iB/2)(-x_1 x'_2 + x_2 x'_1) - |B| |x - x'|^2 / 4)."""
    rho2 = (x1[0] - x2[0]) ** 2 + (x1[1] - x2[1]) ** 2
    phase = 0.5 * cfg.B * (-x1[0] * x2[1] + x1[1] * x2[0])
    return complex(math.cos(phase), math.sin(phase)) * math.exp(-0.25 * cfg.absB * rho2)


def _u(cfg, z, n):
    return ((math.pi * n / cfg.d) ** 2 + cfg.absB - z) / cfg.beta


def _check_level(cfg, z, nmax):
    n = np.arange(1, nmax + 1, dtype=float)
    u = _u(cfg, z, n)
    near = np.abs(u - np.round(u)) <= 1e-14 * (1 + np.abs(u))
    if np.any(near & (np.round(u) <= 0)):
        raise ThresholdError(f"z={z} lies on the essential spectrum")


def _xi_head(cfg, z, nmax):
    n = np.arange(1, nmax + 1, dtype=float)
    q = (math.pi * n / cfg.d) ** 2
    return np.log(q / cfg.beta) - digamma(_u(cfg, z, n))


def _tail_scale(cfg, z):
    return (abs(z) + cfg.beta) * (cfg.d / math.pi) ** 2


def _log_minus_digamma(u, derivative=False):
    """g(u) = ln(u - 1/2) - psi(u) (or g'(u)), asymptotic series for large u."""
    u = np.asarray(u, dtype=float)
    v = u - 0.5
    out = np.empty_like(u)
    big = v > 50.0
    w = 1.0 / v[big] ** 2
    if derivative:
        out[big] = w / v[big] * (1 / 12 + w * (-7 / 240 + w * (31 / 1344 - w * 127 / 3840)))
        out[~big] = 1.0 / v[~big] - trigamma(u[~big])
    else:
        out[big] = w * (-1 / 24 + w * (7 / 960 + w * (-31 / 8064 + w * 127 / 30720)))
        out[~big] = np.log(v[~big]) - digamma(u[~big])
    return out


def _deep(cfg, z):
    """Far below the spectrum: split off the field-free functions (image sums)."""
    return z < -(1.0 / cfg.d) ** 2


def _deep_terms(cfg, z):
    c = (cfg.d / math.pi) ** 2
    scale = abs(z) * c
    nmax = int(max(64, math.ceil(2 * math.sqrt(scale)),
                   math.ceil((cfg.beta ** 2 * scale * c * c / 6e-16) ** 0.2)))
    n = np.arange(1, nmax + 1, dtype=float)
    return n, _u(cfg, z, n), c


def _series_B(cfg, z, b1, b2):
    """(1/(2 pi d)) sum_n [ln(q_n/beta) - psi(u_n)] sin(pi n b1/d) sin(pi n b2/d)."""
    z = float(z)
    if _deep(cfg, z):
        # ln(q/beta) - psi(u) = -ln(1 - z/q) + g(u), and (q - z)/beta = u - 1/2
        lay = cfg.layer
        if b1 == b2:
            free = xi(b1, z, lay) - xi2(b1, cfg.d)
        else:
            free = (free_green((0.0, 0.0, b1), (0.0, 0.0, b2), z, lay)
                    - xi2(0.5 * (b1 + b2), cfg.d) + xi2(0.5 * abs(b1 - b2), cfg.d))
        n, u, c = _deep_terms(cfg, z)
        s = sin_sin_series(_log_minus_digamma(u), b1 / cfg.d, b2 / cfg.d,
                           0.0, -cfg.beta ** 2 * c * c / 24.0)
        return float(free) + float(s) / (2 * math.pi * cfg.d)
    nmax = terms_needed(_tail_scale(cfg, z))
    _check_level(cfg, z, nmax)
    v = cfg.absB - z
    beta = cfg.beta
    c = (cfg.d / math.pi) ** 2
    c1 = z * c
    c2 = (0.5 * v * v - 0.5 * beta * v + beta * beta / 12.0) * c * c
    s = sin_sin_series(_xi_head(cfg, z, nmax), b1 / cfg.d, b2 / cfg.d, c1, c2)
    return float(s) / (2 * math.pi * cfg.d)


def xi_B(b, z, cfg):
    """Regularized Green's function xi_B(b; z) for real z off the essential spectrum."""
    b = check_transverse(b, cfg.layer)
    return _series_B(cfg, z, b, b) + xi2(b, cfg.d)


def dxi_B_dz(b, z, cfg):
    """dxi_B/dz = (1/(4 pi d |B|)) sum_n psi'(u_n) sin^2(pi n b/d) > 0."""
    b = check_transverse(b, cfg.layer)
    z = float(z)
    if _deep(cfg, z):
        n, u, _ = _deep_terms(cfg, z)
        s = sin_sin_series(-_log_minus_digamma(u, derivative=True) / cfg.beta,
                           b / cfg.d, b / cfg.d, 0.0, 0.0)
        return dxi_dz(b, z, cfg.layer) + float(s) / (2 * math.pi * cfg.d)
    nmax = terms_needed(_tail_scale(cfg, z))
    _check_level(cfg, z, nmax)
    n = np.arange(1, nmax + 1, dtype=float)
    beta, v = cfg.beta, cfg.absB - z
    c = (cfg.d / math.pi) ** 2
    head = trigamma(_u(cfg, z, n))
    s = sin_sin_series(head, b / cfg.d, b / cfg.d, beta * c,
                       (0.5 * beta * beta - beta * v) * c * c)
    return float(s) / (4 * math.pi * cfg.d * cfg.absB)


def free_green_B(x1, x2, z, cfg):
    """Free magnetic resolvent kernel G^B(x1, x2; z) for real z.

    Raises
    ------
    SingularInputError
        If the points coincide.
    """
    p1 = tuple(float(v) for v in x1)
    p2 = tuple(float(v) for v in x2)
    if p1 == p2:
        raise SingularInputError("G^B is singular at coinciding points; use xi_B")
    for y in (p1[2], p2[2]):
        if not 0.0 <= y <= cfg.d:
            raise DomainError(f"y={y} outside the layer")
    if p1[2] in (0.0, cfg.d) or p2[2] in (0.0, cfg.d):
        return 0j
    z = float(z)
    rho2 = (p1[0] - p2[0]) ** 2 + (p1[1] - p2[1]) ** 2
    if rho2 == 0.0:
        y1, y2 = p1[2], p2[2]
        val = (_series_B(cfg, z, y1, y2) + xi2(0.5 * (y1 + y2), cfg.d)
               - xi2(0.5 * abs(y1 - y2), cfg.d))
        return complex(val)
    s = 0.5 * cfg.absB * rho2
    # Gamma(u) U(u, 1; s) ~ 2 K_0(2 sqrt(u s)) once u is large; keep terms
    # within exp(-_DECAY_CUT) of the first one
    u1 = max(_u(cfg, z, 1), 0.0)
    u_cut = (math.sqrt(u1) + 0.5 * _DECAY_CUT / math.sqrt(s)) ** 2
    nlast = int(math.ceil(cfg.d / math.pi * math.sqrt(max(
        u_cut * cfg.beta + z - cfg.absB, 0.0)))) + 1
    # for close points subtract 2 e^{s/2} K_0(rho sqrt(q_n - z)), expanded
    # about a real reference energy where the field-free image sum is fast;
    # the remainder then decays like n^-4
    z0 = None
    if nlast > _CHUNK:
        z0 = -(1.0 / cfg.d) ** 2
        dz = abs(z - z0) + cfg.beta
        ncut = (int(math.ceil((dz * dz * cfg.d ** 3 / (12 * math.pi ** 5 * _ACCEL_TOL)) ** (1 / 3)))
                + int(cfg.d * math.sqrt(max(z, 0.0)) / math.pi) + 16)
        if ncut < nlast:
            nlast = ncut
        else:
            z0 = None
    _check_level(cfg, z, nlast)
    rho = math.sqrt(rho2)
    total = 0.0
    start = 1
    while start <= nlast:
        n = np.arange(start, min(start + _CHUNK, nlast + 1), dtype=float)
        vals = gamma_u1(_u(cfg, z, n), s)
        if z0 is not None:
            k0 = np.sqrt((math.pi * n / cfg.d) ** 2 - z0)
            ref = sp.k0(k0 * rho) + (z - z0) * sp.k1(k0 * rho) * rho / (2 * k0)
            vals = vals - 2.0 * math.exp(0.5 * s) * ref
        total += float(np.sum(vals * np.sin(math.pi * n * p1[2] / cfg.d)
                              * np.sin(math.pi * n * p2[2] / cfg.d)))
        start = int(n[-1]) + 1
    total /= 2 * math.pi * cfg.d
    if z0 is not None:
        k0 = math.sqrt(-z0)
        total += math.exp(0.5 * s) * (
            _green_images(rho, p1[2], p2[2], k0, cfg.d)
            + (z - z0) * _green_images(rho, p1[2], p2[2], k0, cfg.d, derivative=True))
    return gauge_phase(p1, p2, cfg) * total


def krein_matrix_B(perts, z, cfg):
    """Hermitian Krein matrix Lambda_B(z) for the active perturbations."""
    perts = active(perts)
    n = len(perts)
    out = np.zeros((n, n), dtype=complex)
    for j, p in enumerate(perts):
        out[j, j] = p.alpha - xi_B(p.b, z, cfg)
        for m in range(j + 1, n):
            v = -free_green_B(p.point, perts[m].point, z, cfg)
            out[j, m] = v
            out[m, j] = np.conj(v)
    return out


def _branches_B(perts, z, cfg):
    return np.linalg.eigvalsh(krein_matrix_B(perts, z, cfg))


def _far_left(perts, cfg, right):
    worst = max(0.0, -min(p.alpha for p in perts))
    z = min(right - 1.0, -(8.0 * math.pi * (worst + 1.0)) ** 2)
    for _ in range(60):
        if _branches_B(perts, z, cfg)[0] > 0:
            return z
        z *= 4.0
    raise DomainError("Krein matrix does not become positive definite")


def _guarded_ends(perts, gap, cfg):
    """Inner endpoints of the gap at which the root count is stable.

    The guard starts at GAP_GUARD (1 + |z_0|) and shrinks by 100 until two
    consecutive counts agree (or the floating-point floor is reached).
    """
    def ends(delta):
        lo = (_far_left(perts, cfg, gap.right) if gap.left == -math.inf
              else gap.left + delta * (1 + abs(gap.left)))
        hi = gap.right - delta * (1 + abs(gap.right))
        return lo, hi

    def count(lo, hi):
        ml, mh = _branches_B(perts, lo, cfg), _branches_B(perts, hi, cfg)
        return int(np.sum(ml > 0) - np.sum(mh > 0)), ml, mh

    delta = GAP_GUARD
    lo, hi = ends(delta)
    prev = count(lo, hi)
    stable = 0
    while delta > MIN_GUARD and stable < 2:
        delta *= 1e-2
        lo2, hi2 = ends(delta)
        cur = count(lo2, hi2)
        stable = stable + 1 if cur[0] == prev[0] else 0
        lo, hi, prev = lo2, hi2, cur
    return lo, hi, prev[1], prev[2]


def gap_eigenvalue_single(pert, gap, cfg):
    """The eigenvalue of one point interaction in ``gap``, or None.

    xi_B increases strictly inside each gap, so the root of xi_B = alpha
    is unique; it is absent only when alpha lies outside the range of
    xi_B, which needs a vanishing pole strength at an endpoint.
    """
    if pert.switched_off:
        return None
    res = gap_eigenvalues_multi([pert], gap, cfg)
    return res.eigenvalues[0][0] if res.eigenvalues else None


@dataclass
class GapSpectrum:
    """Eigenvalues of the N-center magnetic Hamiltonian in one gap.

    Attributes
    ----------
    eigenvalues : list of (float, int)
    eigenvectors : list of ndarray
    residuals : list of float
    gap : Gap
    diagnostics : dict
        ``z`` and ``branches`` of Lambda_B on the scan grid.
    """

    eigenvalues: list
    eigenvectors: list
    residuals: list
    gap: Gap
    perturbations: tuple
    diagnostics: dict = field(default_factory=dict)

    @property
    def count(self):
        return sum(m for _, m in self.eigenvalues)


def gap_eigenvalues_multi(perts, gap, cfg, grid=0):
    """All roots of det Lambda_B(z) = 0 in ``gap`` with multiplicities.

    Every sorted eigenvalue branch of Lambda_B decreases in z inside a gap,
    so the number of roots is the drop in positive branches between the
    guarded endpoints and each root is bisected on its own branch.
    """
    perts = active(perts)
    for p in perts:
        check_transverse(p.b, cfg.layer)
    if not perts:
        return GapSpectrum([], [], [], gap, ())
    lo, hi, ml, mh = _guarded_ends(perts, gap, cfg)
    roots = []
    for k in range(len(perts)):
        if ml[k] > 0 > mh[k]:
            z = opt.brentq(lambda t, k=k: _branches_B(perts, t, cfg)[k], lo, hi,
                           xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=300)
            roots.append((k, z))
    roots.sort(key=lambda t: t[1])
    groups = []
    for k, z in roots:
        if groups and abs(z - groups[-1][-1][1]) <= MERGE_TOL * (1 + abs(z)):
            groups[-1].append((k, z))
        else:
            groups.append([(k, z)])
    vals, vecs, resid = [], [], []
    for g in groups:
        z = float(np.mean([t[1] for t in g]))
        lam = krein_matrix_B(perts, z, cfg)
        _, v = np.linalg.eigh(lam)
        cols = v[:, [t[0] for t in g]]
        scale = max(np.linalg.norm(lam, 2), 1.0)
        vals.append((z, len(g)))
        vecs.append(cols)
        resid.append(float(np.max(np.linalg.norm(lam @ cols, axis=0)) / scale))
    diag = {}
    if grid:
        zs = np.linspace(lo, hi, grid)
        diag = {"z": zs, "branches": np.array([_branches_B(perts, t, cfg) for t in zs])}
    return GapSpectrum(vals, vecs, resid, gap, tuple(perts), diag)


def eigenfunction_B(x, z, perts, dvec, cfg):
    """Eigenfunction sum_j d_j G^B(x, a_j; z)."""
    perts = active(perts)
    xp = tuple(float(v) for v in x)
    if any(xp == p.point for p in perts):
        raise SingularInputError("eigenfunction is singular at a perturbation point")
    return sum(dj * free_green_B(xp, p.point, z, cfg) for dj, p in zip(dvec, perts))


def laguerre_eigenfunction_B(x, point, pert, cfg):
    """Leading large-|alpha| eigenfunction near the essential point ``point``.

    alpha / S Phi^B(x, a) sum_J L_{m_j}(|B| |x-a|^2 / 2) sin(pi n_j b/d) sin(pi n_j y/d),
    S = sum_J sin^2(pi n_j b/d).
    """
    a = pert.point
    rho2 = (x[0] - a[0]) ** 2 + (x[1] - a[1]) ** 2
    strength = point.strength(pert.b, cfg.d)
    if strength == 0.0:
        raise DomainError("the perturbation sits on a node of every mode in J(z_0)")
    tot = sum(laguerre(m, 0.5 * cfg.absB * rho2) * math.sin(math.pi * n * pert.b / cfg.d)
              * math.sin(math.pi * n * x[2] / cfg.d) for m, n in point.pairs)
    return pert.alpha / strength * gauge_phase(x, a, cfg) * tot


def localized_eigenfunction_B(x, pert, cfg, nmax=None):
    """Strong-coupling (alpha -> -inf) eigenfunction of the lowest gap.

    (1/d) Phi^B sum_n (2 pi K_n rho)^(-1/2) exp(-K_n rho) sin(pi n y/d) sin(pi n b/d),
    K_n = sqrt(|B| + 16 pi^2 alpha^2 + (pi n/d)^2).
    """
    a = pert.point
    rho = math.hypot(x[0] - a[0], x[1] - a[1])
    if rho == 0.0:
        raise SingularInputError("localized form needs a planar offset")
    if nmax is None:
        # terms decay like exp(-pi n rho/d)
        nmax = int(math.ceil(cfg.d / math.pi * _DECAY_CUT / rho)) + 1
    n = np.arange(1, nmax + 1, dtype=float)
    k = np.sqrt(cfg.absB + 16 * math.pi ** 2 * pert.alpha ** 2 + (math.pi * n / cfg.d) ** 2)
    tot = np.sum(np.exp(-k * rho) / np.sqrt(2 * math.pi * k * rho)
                 * np.sin(math.pi * n * x[2] / cfg.d) * np.sin(math.pi * n * pert.b / cfg.d))
    return gauge_phase(x, a, cfg) * float(tot) / cfg.d


def m_matrix_traces(perts_tilde, gap, cfg, grid=200):
    """Eigenvalues of M(z) = -Lambda_B(z; alpha_tilde) across a finite gap.

    Returns (z, branches) with branches increasing in z.  With
    alpha_j = alpha_tilde_j + alpha_bar, alpha_bar is an eigenvalue of the
    Hamiltonian at z exactly when it is an eigenvalue of M(z).
    """
    if gap.left == -math.inf:
        raise DomainError("M traces need a finite gap")
    lo, hi = gap.left, gap.right
    dl, dh = GAP_GUARD * (1 + abs(lo)), GAP_GUARD * (1 + abs(hi))
    zs = np.linspace(lo + dl, hi - dh, grid)
    br = np.array([np.linalg.eigvalsh(-krein_matrix_B(perts_tilde, t, cfg)) for t in zs])
    return zs, br


def empty_alpha_intervals(perts_tilde, gap, cfg, guard=1e-9):
    """alpha_bar intervals for which the shifted couplings give no root in ``gap``.

    Each branch of M is increasing, so its range over the gap is the open
    interval between its values at the guarded endpoints; the empty set
    is the complement of the union of these ranges.
    """
    lo = gap.left + guard * (1 + abs(gap.left))
    hi = gap.right - guard * (1 + abs(gap.right))
    ml = np.linalg.eigvalsh(-krein_matrix_B(perts_tilde, lo, cfg))
    mh = np.linalg.eigvalsh(-krein_matrix_B(perts_tilde, hi, cfg))
    ranges = sorted(zip(ml, mh))
    out = []
    reach = -math.inf
    for a, b in ranges:
        if a > reach and reach > -math.inf:
            out.append((float(reach), float(a)))
        reach = max(reach, b)
    return out
