"""Discrete spectrum of N point interactions: det Lambda(z) = 0.

Below the first threshold Lambda(z) is real symmetric and
dLambda/dz = -Gram(G_0(., a_j; z)) is negative definite, so every sorted
eigenvalue branch mu_k(z) decreases strictly.  The number of eigenvalues in
a window is therefore the drop in the count of positive mu_k between its
ends, and each root is bracketed on its own branch.  Branches are followed
in u = ln(1 - z/T_1); near the threshold

    Lambda(u) = A + (u / (2 pi d)) s s^T + O(e^u),   s_j = sin(pi b_j / d),

so exactly one branch diverges to -inf and the others converge to the
eigenvalues of A compressed to the complement of s.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.optimize as opt
import scipy.special as sp

from .errors import DomainError, SingularInputError
from .layer_green import (Energy, LayerConfig, Perturbation, active, as_energy,
                          check_transverse, free_green, krein_matrix,
                          krein_matrix_dz)
from .spectrum_single import energy_at, log_gap_of, strong_coupling_estimate

MERGE_TOL = 1e-8
RESIDUAL_TOL = 1e-9
DEFAULT_GRID = 64
_U_FROZEN = -40.0
_U_LIMIT = 1e12


@dataclass
class SpectrumResult:
    """Eigenvalues below the first threshold with eigenvectors.

    Attributes
    ----------
    eigenvalues : list of (float, int)
        (value, multiplicity), ascending.
    log_gaps : list of float
        ln(1 - z/T_1) of each eigenvalue.
    eigenvectors : list of ndarray
        Columns span the null space of Lambda at each eigenvalue.
    residuals : list of float
        ||Lambda d|| / (||Lambda|| ||d||), worst column.
    perturbations : tuple
        The active perturbations, in matrix order.
    diagnostics : dict
        ``u``, ``z`` and ``branches`` (sorted eigenvalues of Lambda) on the
        scan grid, when a grid was requested.
    """

    eigenvalues: list
    log_gaps: list
    eigenvectors: list
    residuals: list
    perturbations: tuple
    cfg: LayerConfig
    diagnostics: dict = field(default_factory=dict)

    @property
    def count(self):
        return sum(m for _, m in self.eigenvalues)

    def energy(self, i):
        return Energy.from_log_gap(self.log_gaps[i], self.cfg)

    def eigenfunction(self, i, x, column=0, normalized=False):
        return eigenfunction_N(x, self.energy(i), self.eigenvectors[i][:, column],
                               self.perturbations, self.cfg, normalized)


def _branches(perts, u, cfg):
    return np.linalg.eigvalsh(krein_matrix(perts, energy_at(u, cfg), cfg).entries)


def _far_end(perts, cfg):
    """u where every branch is positive (deep below the spectrum)."""
    worst = max(0.0, -min(p.alpha for p in perts))
    z = -max(1.0, (8.0 * math.pi * (worst + 1.0)) ** 2)
    for _ in range(60):
        u = log_gap_of(z, cfg)
        if _branches(perts, u, cfg)[0] > 0:
            return u
        z *= 4.0
    raise DomainError("Krein matrix does not become positive definite")


def _near_end(perts, cfg, need):
    """u close enough to T_1 that the ``need`` lowest branches are negative."""
    u = _U_FROZEN
    while True:
        mu = _branches(perts, u, cfg)
        if need == 0 or mu[need - 1] < 0:
            return u, mu
        if u < -_U_LIMIT:
            return u, mu
        u *= 4.0


def threshold_count(perts, cfg=None):
    """Number of eigenvalues below T_1 (with multiplicity).

    One for the divergent branch plus the negative eigenvalues of A
    compressed to s-perp.
    """
    cfg = cfg or LayerConfig()
    perts = active(perts)
    if not perts:
        return 0
    lam = krein_matrix(perts, energy_at(_U_FROZEN, cfg), cfg).entries
    s = np.array([math.sin(math.pi * p.b / cfg.d) for p in perts])
    a = lam - (_U_FROZEN / (2 * math.pi * cfg.d)) * np.outer(s, s)
    q, _ = np.linalg.qr(np.column_stack([s, np.eye(len(s))]))
    comp = q[:, 1:len(s)]
    lim = np.linalg.eigvalsh(comp.T @ a @ comp) if len(s) > 1 else np.array([])
    return 1 + int(np.sum(lim < 0))


def _cluster(roots):
    groups = []
    for k, u in sorted(roots, key=lambda t: -t[1]):
        if groups and abs(u - groups[-1][-1][1]) <= MERGE_TOL * (1.0 + abs(u)):
            groups[-1].append((k, u))
        else:
            groups.append([(k, u)])
    return groups


def find_eigenvalues(perts, cfg=None, window=None, grid=DEFAULT_GRID):
    """All eigenvalues of the N-center Hamiltonian in a window below T_1.

    Parameters
    ----------
    perts : sequence of Perturbation
        Perturbations with alpha = inf are ignored.
    cfg : LayerConfig, optional
    window : (float, float), optional
        Real interval (z_lo, z_hi) with z_hi <= T_1; z_hi == T_1 means up to
        the threshold.  Default: everything below T_1.
    grid : int
        Number of scan points recorded in ``diagnostics`` (0 to skip).

    Returns
    -------
    SpectrumResult
    """
    cfg = cfg or LayerConfig()
    perts = active(perts)
    for p in perts:
        check_transverse(p.b, cfg)
    t1 = cfg.first_threshold
    if not perts:
        return SpectrumResult([], [], [], [], (), cfg)

    if window is None:
        z_lo, z_hi = -math.inf, t1
    else:
        z_lo, z_hi = (float(w) for w in window)
        if not z_lo < z_hi:
            raise DomainError("empty window")
        if z_hi > t1:
            raise DomainError("window must lie below the first threshold")
    if z_lo == -math.inf:
        u_far = _far_end(perts, cfg)
    else:
        u_far = log_gap_of(z_lo, cfg)
    if z_hi == t1:
        u_near, mu_near = _near_end(perts, cfg, threshold_count(perts, cfg))
    else:
        u_near = log_gap_of(z_hi, cfg)
        mu_near = _branches(perts, u_near, cfg)
    if not u_near < u_far:
        raise DomainError("empty window")
    mu_far = _branches(perts, u_far, cfg)

    roots = []
    for k in range(len(perts)):
        if mu_near[k] < 0 < mu_far[k]:
            def f(u, k=k):
                return _branches(perts, u, cfg)[k]
            u = opt.brentq(f, u_near, u_far, xtol=1e-14,
                           rtol=4 * np.finfo(float).eps, maxiter=300)
            roots.append((k, u))

    values, gaps, vecs, resid = [], [], [], []
    for group in _cluster(roots):
        u = float(np.mean([g[1] for g in group]))
        E = energy_at(u, cfg)
        lam = krein_matrix(perts, E, cfg).entries
        w, v = np.linalg.eigh(lam)
        cols = v[:, [g[0] for g in group]]
        scale = max(np.linalg.norm(lam, 2), 1.0)
        res = float(np.max(np.linalg.norm(lam @ cols, axis=0)) / scale)
        values.append((E.z, len(group)))
        gaps.append(u)
        vecs.append(cols)
        resid.append(res)

    diag = {}
    if grid:
        us = np.linspace(u_near, u_far, grid)
        diag = {"u": us, "z": -t1 * np.expm1(us),
                "branches": np.array([_branches(perts, u, cfg) for u in us])}
    return SpectrumResult(values, gaps, vecs, resid, tuple(perts), cfg, diag)


def eigenfunction_N(x, z, dvec, perts, cfg=None, normalized=False):
    """Eigenfunction sum_j d_j G_0(x, a_j; z).

    With ``normalized=True`` (z below T_1, real d) the result is divided by
    sqrt(-d^T Lambda'(z) d), the exact L^2 norm.
    """
    cfg = cfg or LayerConfig()
    perts = active(perts)
    dvec = np.asarray(dvec)
    if dvec.shape != (len(perts),):
        raise DomainError("coefficient vector does not match the perturbations")
    xp = tuple(float(v) for v in x)
    if any(xp == p.point for p in perts):
        raise SingularInputError("eigenfunction is singular at a perturbation point")
    E = as_energy(z)
    val = sum(dj * free_green(xp, p.point, E, cfg) for dj, p in zip(dvec, perts))
    if normalized:
        dl = krein_matrix_dz(perts, E, cfg)
        val /= math.sqrt(float(-np.real(np.conj(dvec) @ dl @ dvec)))
    return val


@dataclass(frozen=True)
class EmbeddedCertificate:
    """Orthogonality of a candidate embedded eigenvector to open channels.

    ``violations[n-1, g]`` is |sum_{j in group g} d_j chi_n(b_j)| for the
    unit-normalized d, groups being perturbations sharing a planar position.
    """

    z: float
    open_modes: tuple
    violations: np.ndarray
    max_violation: float
    null_residual: float
    certified: bool


def certify_embedded(z, dvec, perts, cfg=None, tol=1e-10):
    """Check that (z, d) can be an eigenvalue embedded above T_1.

    Open-channel components of sum_j d_j G_0(., a_j; z) vanish for every
    direction only if, for each open n and each planar position,
    sum_j d_j chi_n(b_j) = 0.  Report-only: never raises on failure.
    """
    cfg = cfg or LayerConfig()
    perts = active(perts)
    d = np.asarray(dvec, dtype=complex)
    d = d / np.linalg.norm(d)
    z = float(z)
    nopen = int(math.floor(math.sqrt(max(z, 0.0)) * cfg.d / math.pi))
    while nopen and cfg.threshold(nopen) >= z:
        nopen -= 1
    groups = {}
    for j, p in enumerate(perts):
        groups.setdefault(p.a, []).append(j)
    viol = np.zeros((nopen, len(groups)))
    amp = math.sqrt(2.0 / cfg.d)
    for n in range(1, nopen + 1):
        for g, idx in enumerate(groups.values()):
            viol[n - 1, g] = abs(sum(d[j] * amp * math.sin(math.pi * n * perts[j].b / cfg.d)
                                     for j in idx))
    worst = float(viol.max()) if viol.size else 0.0
    null = math.nan
    if all(abs(z - cfg.threshold(n)) > 1e-12 * (1 + z) for n in range(1, nopen + 2)):
        lam = krein_matrix(perts, z, cfg).entries
        null = float(np.linalg.norm(lam @ d) / max(np.linalg.norm(lam, 2), 1.0))
    return EmbeddedCertificate(z, tuple(range(1, nopen + 1)), viol, worst, null,
                               worst <= tol)


def vertical_pair(b, alpha, cfg=None, a=(0.0, 0.0)):
    """The mirror-symmetric stacked pair (a, b), (a, d - b) with equal alpha."""
    cfg = cfg or LayerConfig()
    b = check_transverse(b, cfg)
    if abs(2 * b - cfg.d) < 1e-12 * cfg.d:
        raise DomainError("the pair degenerates at b = d/2")
    return (Perturbation(a, b, alpha), Perturbation(a, cfg.d - b, alpha))


def sector_root(pair, sector="antisymmetric", cfg=None):
    """Root of one symmetry sector of a pair with Lambda_11 = Lambda_22.

    The symmetric sector solves Lambda_11 + Lambda_12 = 0 and the
    antisymmetric one Lambda_11 - Lambda_12 = 0, both below T_1 with a single
    exception: for a vertical mirror pair (a, b), (a, d - b) the
    antisymmetric sector is odd under y -> d - y, decouples from the odd
    transverse modes and is searched below the second threshold, where
    the imaginary parts of Lambda_11 and Lambda_12 cancel.

    Returns
    -------
    float
        The eigenvalue z, or None when the sector has no root.  A root
        closer to the second threshold than one ulp is returned as the
        largest double below it.
    """
    cfg = cfg or LayerConfig()
    p, q = active(pair)
    sign = {"symmetric": 1.0, "antisymmetric": -1.0}.get(sector)
    if sign is None:
        raise DomainError(f"unknown sector {sector!r}")
    if p.alpha != q.alpha:
        raise DomainError("sector split needs equal couplings")
    mirror = p.a == q.a and abs(p.b + q.b - cfg.d) <= 1e-12 * cfg.d
    if not mirror and abs(math.sin(math.pi * p.b / cfg.d)
                          - math.sin(math.pi * q.b / cfg.d)) > 1e-12:
        raise DomainError("pair is not symmetric")
    above = sign < 0 and mirror
    top = cfg.threshold(2) if above else cfg.first_threshold

    def energy(u):
        if not above:
            return energy_at(u, cfg)
        z = -top * math.expm1(u)
        for t in (cfg.first_threshold, top):
            if z == t or (z > t and t == top):
                z = math.nextafter(t, -math.inf)
        return Energy(z)

    def f(u):
        lam = krein_matrix((p, q), energy(u), cfg).entries
        return float(np.real(lam[0, 0] + sign * lam[0, 1]))

    u_far = math.log1p(max(1.0, (8 * math.pi * (max(0.0, -p.alpha) + 1)) ** 2) / top)
    while f(u_far) <= 0:
        u_far *= 2.0
    u_near = -1.0
    while f(u_near) >= 0:
        if above and energy(u_near).z == math.nextafter(top, -math.inf):
            # root closer to the threshold than the floating-point spacing
            return energy(u_near).z
        u_near *= 4.0
        if u_near < -_U_LIMIT:
            return None
    u = opt.brentq(f, u_near, u_far, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                   maxiter=300)
    return energy(u).z


def strong_coupling_N(alphas):
    """Strong-coupling estimates -16 pi^2 alpha_j^2, one per center."""
    return [strong_coupling_estimate(float(a)) for a in alphas]


def weak_coupling_N_log_gap(alphas, bs, cfg=None):
    """Weak-coupling ln(1 - eps/T_1) = -2 pi d / sum_j (sin^2(pi b_j/d) / alpha_j)."""
    cfg = cfg or LayerConfig()
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0):
        raise DomainError("weak coupling requires all alpha > 0")
    s2 = np.sin(math.pi * np.asarray(bs, dtype=float) / cfg.d) ** 2
    return -2.0 * math.pi * cfg.d / float(np.sum(s2 / alphas))


def weak_coupling_N(alphas, bs, cfg=None):
    """Weak-coupling eigenvalue T_1 (1 - exp(-2 pi d / sum_j sin^2(pi b_j/d)/alpha_j))."""
    cfg = cfg or LayerConfig()
    return -cfg.first_threshold * math.expm1(weak_coupling_N_log_gap(alphas, bs, cfg))


def weak_eigenfunction_N(x, perts, cfg=None, nmax=400):
    """Weak-coupling shape of the N-center eigenfunction (d_j = sin(pi b_j/d)).

    sin(pi y/d) [sum s_j^2 / sum(s_j^2/alpha_j) - (1/(pi d)) sum s_j^2 ln|x-a_j|]
    + (1/(pi d)) sum_{n>=2} sin(pi n y/d) sum_j s_j sin(pi n b_j/d) K_0(kappa_n |x-a_j|).
    """
    cfg = cfg or LayerConfig()
    perts = active(perts)
    d, y = cfg.d, x[2]
    s = np.array([math.sin(math.pi * p.b / d) for p in perts])
    al = np.array([p.alpha for p in perts])
    rho = np.array([math.hypot(x[0] - p.a[0], x[1] - p.a[1]) for p in perts])
    if np.any(rho == 0):
        raise SingularInputError("weak-coupling form needs planar offsets")
    n = np.arange(2, nmax + 1, dtype=float)
    kap = np.sqrt((math.pi * n / d) ** 2 - cfg.first_threshold)
    tail = 0.0
    for sj, p, r in zip(s, perts, rho):
        tail += sj * np.sum(np.sin(math.pi * n * y / d) * np.sin(math.pi * n * p.b / d)
                            * sp.k0(kap * r))
    lead = np.sum(s * s) / np.sum(s * s / al) - np.sum(s * s * np.log(rho)) / (math.pi * d)
    return math.sin(math.pi * y / d) * lead + tail / (math.pi * d)


def degenerate_triple(a, b1, z, cfg=None):
    """Three centers with a doubly degenerate eigenvalue at z.

    Centers sit at (+-a, 0, b1) and (0, 0, b2).  b2 in (0, b1) is tuned so
    that g_12 = g_13 (g = -G_0 at z), and each alpha_j = xi(b_j; z) + g_12.
    Then every entry of Lambda(z) equals g_12, a rank-one matrix with a
    two-dimensional kernel.

    Returns
    -------
    list of Perturbation
    """
    cfg = cfg or LayerConfig()
    from .layer_green import xi
    if not z < cfg.first_threshold:
        raise DomainError("z must lie below the first threshold")
    p1, p3 = (a, 0.0, b1), (-a, 0.0, b1)
    g13 = -free_green(p1, p3, z, cfg)

    def h(b2):
        return -free_green(p1, (0.0, 0.0, b2), z, cfg) - g13

    b2 = opt.brentq(h, cfg.d * 1e-6, b1, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    g = -free_green(p1, (0.0, 0.0, b2), z, cfg)
    return [Perturbation((a, 0.0), b1, xi(b1, z, cfg) + g),
            Perturbation((0.0, 0.0), b2, xi(b2, z, cfg) + g),
            Perturbation((-a, 0.0), b1, xi(b1, z, cfg) + g)]
