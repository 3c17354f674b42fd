"""On-shell scattering for point interactions in the layer.

For real z above the first threshold the open channels are the transverse
modes with (pi n/d)^2 < z, each carrying longitudinal momentum
k_n = sqrt(z - (pi n/d)^2).  One center gives the matrix

    S_nj = delta_nj + (i/d) sin(pi n b/d) sin(pi j b/d) / (alpha - xi(a; z)),

N centers give a finite-rank operator on L^2(S^1) x C^open with kernel

    (i/(2 pi d)) sum_jk sin(pi m b_j/d) sin(pi n b_k/d) lambda_jk
                 exp(-i k_m w'.a_j) exp(+i k_n w.a_k),   lambda = Lambda^-1.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.special as sp

from .errors import DomainError, EmbeddedEigenvalueError
from .layer_green import (LayerConfig, Perturbation, active, free_green,
                          krein_matrix, xi)

THRESHOLD_GUARD = 1e-9
_COND_MAX = 1e12


@dataclass(frozen=True)
class ChannelBasis:
    """Open channels at a real energy z.

    Attributes
    ----------
    z : float
    open_count : int
        Number of n with (pi n/d)^2 < z.
    momenta : ndarray
        k_n for n = 1..open_count.
    """

    z: float
    open_count: int
    momenta: np.ndarray
    cfg: LayerConfig

    @classmethod
    def at(cls, z, cfg=None):
        cfg = cfg or LayerConfig()
        if isinstance(z, complex) or not np.isreal(z):
            raise DomainError("scattering energy must be real")
        z = float(z)
        if not z > cfg.first_threshold * (1 + THRESHOLD_GUARD):
            raise DomainError("no open channel: z must exceed the first threshold")
        n = int(math.floor(cfg.d * math.sqrt(z) / math.pi))
        for m in (n, n + 1):
            t = cfg.threshold(m)
            if m >= 1 and abs(z - t) <= THRESHOLD_GUARD * t:
                raise DomainError(f"z={z} is within the guard band of threshold n={m}")
        while cfg.threshold(n) >= z:
            n -= 1
        idx = np.arange(1, n + 1, dtype=float)
        k = np.sqrt(z - (math.pi * idx / cfg.d) ** 2)
        return cls(z, n, k, cfg)

    def sines(self, b):
        """sin(pi n b/d) for the open n."""
        n = np.arange(1, self.open_count + 1, dtype=float)
        return np.sin(math.pi * n * b / self.cfg.d)


@dataclass(frozen=True)
class SMatrix1:
    """Single-center S-matrix over the open channels."""

    matrix: np.ndarray
    basis: ChannelBasis
    pert: Perturbation

    @property
    def alpha(self):
        return self.pert.alpha

    def phase_shifts(self):
        """delta_nn = ln(S_nn) / (2i) (complex when channels couple)."""
        return np.log(np.diag(self.matrix).astype(complex)) / 2j


def unitarity_defect(s):
    """max |S S^dagger - I| for a matrix (or SMatrix1)."""
    m = np.asarray(s.matrix if isinstance(s, SMatrix1) else s)
    return float(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))))


def smatrix_from_xi(basis, pert, xi_value):
    """Single-center S-matrix for a given value of xi(a; z)."""
    v = basis.sines(pert.b)
    if pert.switched_off:
        return SMatrix1(np.eye(basis.open_count, dtype=complex), basis, pert)
    coef = (1j / basis.cfg.d) / (pert.alpha - xi_value)
    return SMatrix1(np.eye(basis.open_count) + coef * np.outer(v, v), basis, pert)


def smatrix_single(z, pert, cfg=None):
    """S-matrix of one point interaction at real z above T_1.

    Parameters
    ----------
    z : float
        Energy, off the thresholds.
    pert : Perturbation
    cfg : LayerConfig, optional

    Returns
    -------
    SMatrix1
    """
    cfg = cfg or LayerConfig()
    basis = ChannelBasis.at(z, cfg)
    xv = 0.0 if pert.switched_off else xi(pert.b, basis.z, cfg)
    return smatrix_from_xi(basis, pert, xv)


def _angle_vec(w):
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        return np.array([math.cos(w), math.sin(w)])
    return w / np.linalg.norm(w)


def amplitude_single(z, omega, omega_x, pert, cfg=None):
    """Scattering amplitude matrix f_jn (outgoing j, incoming n).

    e^{i pi/4} / (d sqrt(2 pi k_j)) sin(pi j b/d) sin(pi n b/d) / (alpha - xi)
    times exp(i k_n omega.a - i k_j omega_x.a).  Directions are angles or
    planar vectors.
    """
    cfg = cfg or LayerConfig()
    basis = ChannelBasis.at(z, cfg)
    w, wx = _angle_vec(omega), _angle_vec(omega_x)
    a = np.array(pert.a)
    k = basis.momenta
    v = basis.sines(pert.b)
    if pert.switched_off:
        return np.zeros((basis.open_count, basis.open_count), dtype=complex)
    denom = pert.alpha - xi(pert.b, basis.z, cfg)
    pref = np.exp(1j * math.pi / 4) / (cfg.d * np.sqrt(2 * math.pi * k))
    phase_in = np.exp(1j * k * (w @ a))
    phase_out = np.exp(-1j * k * (wx @ a))
    return (pref * v * phase_out)[:, None] * (v * phase_in)[None, :] / denom


def s_wave_function(x, z, channel, pert, cfg=None):
    """Generalized eigenfunction for an s-wave incident in ``channel``.

    J_0(k_j r) chi_j(y) + G_0(x, a; z) chi_j(b) / (alpha - xi(a; z)),
    r measured from the planar position of the center.
    """
    cfg = cfg or LayerConfig()
    basis = ChannelBasis.at(z, cfg)
    if not 1 <= channel <= basis.open_count:
        raise DomainError("channel is not open")
    amp = math.sqrt(2.0 / cfg.d)
    k = basis.momenta[channel - 1]
    r = math.hypot(x[0] - pert.a[0], x[1] - pert.a[1])
    chi = lambda y: amp * math.sin(math.pi * channel * y / cfg.d)
    incoming = sp.j0(k * r) * chi(x[2])
    if pert.switched_off:
        return complex(incoming)
    denom = pert.alpha - xi(pert.b, basis.z, cfg)
    return incoming + free_green(x, pert.point, basis.z, cfg) * chi(pert.b) / denom


@dataclass(frozen=True)
class SOperatorN:
    """Finite-rank on-shell scattering operator of N centers.

    ``coef[m, n, j, k]`` multiplies exp(-i k_m w'.a_j) exp(i k_n w.a_k) in the
    kernel of S - I; m, n index open channels.
    """

    coef: np.ndarray
    basis: ChannelBasis
    positions: np.ndarray

    def kernel(self, m, w_out, n, w_in):
        """Kernel of S - I between (channel m, direction w_out) and (n, w_in)."""
        k = self.basis.momenta
        wo, wi = _angle_vec(w_out), _angle_vec(w_in)
        po = np.exp(-1j * k[m - 1] * (self.positions @ wo))
        pi_ = np.exp(1j * k[n - 1] * (self.positions @ wi))
        return complex(po @ self.coef[m - 1, n - 1] @ pi_)

    def discretize(self, points=256):
        """Matrix of S on the grid of ``points`` equispaced directions.

        Rows and columns are (channel, angle) pairs; the quadrature weight
        2 pi / points is included, so the result is unitary up to quadrature
        error for band-limited kernels.
        """
        q = self.basis.open_count
        th = 2 * math.pi * np.arange(points) / points
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        proj = dirs @ self.positions.T
        k = self.basis.momenta
        out_ph = np.exp(-1j * k[:, None, None] * proj[None])   # (m, angle, j)
        in_ph = np.exp(1j * k[:, None, None] * proj[None])     # (n, angle, k)
        blocks = np.einsum("maj,mnjk,nbk->manb", out_ph, self.coef, in_ph)
        mat = blocks.reshape(q * points, q * points) * (2 * math.pi / points)
        return np.eye(q * points) + mat

    def unitarity_defect(self, points=256):
        return unitarity_defect(self.discretize(points))


def soperator_N(z, perts, cfg=None):
    """On-shell scattering operator of several point interactions.

    Raises
    ------
    EmbeddedEigenvalueError
        If Lambda(z) is singular (an embedded eigenvalue at z).
    """
    cfg = cfg or LayerConfig()
    basis = ChannelBasis.at(z, cfg)
    perts = active(perts)
    q = basis.open_count
    if not perts:
        return SOperatorN(np.zeros((q, q, 0, 0), dtype=complex), basis, np.zeros((0, 2)))
    lam = krein_matrix(perts, basis.z, cfg).entries
    if np.linalg.cond(lam) > _COND_MAX:
        raise EmbeddedEigenvalueError(f"Lambda(z) is singular at z={basis.z}")
    inv = np.linalg.inv(lam)
    s = np.array([basis.sines(p.b) for p in perts])        # (j, m)
    coef = (1j / (2 * math.pi * cfg.d)) * np.einsum("jm,nk,jk->mnjk", s, s.T, inv)
    pos = np.array([p.a for p in perts], dtype=float)
    return SOperatorN(coef, basis, pos)
