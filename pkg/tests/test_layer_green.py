import cmath
import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings, strategies as st

from layerqm.errors import ConfigurationError, DomainError, SingularInputError
from layerqm.layer_green import (Energy, LayerConfig, Perturbation, dxi_dz, free_green,
                                 free_green_dz, krein_matrix, krein_matrix_dz,
                                 scale_transform, xi, xi2)

PI = math.pi


def midplane_xi(z):
    # closed form for b = d/2 in the layer of width pi
    return -cmath.log(2 * cmath.cos(PI * cmath.sqrt(z) / 2)) / (2 * PI ** 2)


def green_mode_sum(x1, x2, z, d, nmax=4000):
    """Direct transverse-mode sum with K_0 / Hankel functions."""
    r = math.hypot(x1[0] - x2[0], x1[1] - x2[1])
    n = np.arange(1, nmax + 1)
    s = np.sin(PI * n * x1[2] / d) * np.sin(PI * n * x2[2] / d)
    k2 = z - (PI * n / d) ** 2
    out = 0j
    for kk, ss in zip(k2, s):
        if kk < 0:
            out += ss * sp.k0(math.sqrt(-kk) * r) / (PI * d)
        else:
            out += ss * 1j * sp.hankel1(0, math.sqrt(kk) * r) / (2 * d)
    return out


def green_images(x1, x2, kappa, d, mmax=60):
    r = math.hypot(x1[0] - x2[0], x1[1] - x2[1])
    tot = 0.0
    for m in range(-mmax, mmax + 1):
        rp = math.hypot(r, x1[2] - x2[2] - 2 * m * d)
        rm = math.hypot(r, x1[2] + x2[2] - 2 * m * d)
        tot += math.exp(-kappa * rp) / rp - math.exp(-kappa * rm) / rm
    return tot / (4 * PI)


@pytest.mark.parametrize("z", [-30.0, -3.0, -0.5, 0.0, 0.4, 0.9, 0.999, 1.7, 3.5])
def test_midplane_closed_form(z):
    got = xi(PI / 2, z)
    assert complex(got) == pytest.approx(midplane_xi(z), abs=1e-14)


def test_midplane_value_at_zero():
    assert xi(PI / 2, 0.0) == pytest.approx(-math.log(2) / (2 * PI ** 2), abs=1e-15)
    assert xi(PI / 2, 0.0) == pytest.approx(-0.0351152464, abs=1e-10)


def test_real_below_threshold_and_mirror_symmetric():
    for b in (0.2, 1.0, 2.5):
        for z in (-4.0, 0.3, 0.97):
            v = xi(b, z)
            assert isinstance(v, float)
            assert v == pytest.approx(xi(PI - b, z), abs=1e-13)


def test_imaginary_part_counts_open_channels():
    d = 2.0
    cfg = LayerConfig(d)
    for b in (0.3, 0.77, 1.4):
        for z in (3.0, 12.0, 40.0, 95.0):
            n = np.arange(1, 40)
            open_ = (PI * n / d) ** 2 < z
            expect = np.sum(np.sin(PI * n[open_] * b / d) ** 2) / (2 * d)
            assert xi(b, z, cfg).imag == pytest.approx(expect, rel=1e-12)


def test_complex_z_matches_boundary_value():
    b = 1.1
    z = 2.3
    near = xi(b, complex(z, 1e-9))
    assert near == pytest.approx(xi(b, z), abs=1e-8)
    assert xi(b, complex(z, -1e-9)) == pytest.approx(np.conj(xi(b, z)), abs=1e-8)


def test_images_and_modes_agree_at_switch():
    cfg = LayerConfig(1.3)
    b = 0.4
    # switch to images at kappa d = 1; straddle it
    z_lo = -(1.0 + 1e-11) ** 2 / cfg.d ** 2
    z_hi = -(1.0 - 1e-11) ** 2 / cfg.d ** 2
    assert xi(b, z_lo, cfg) == pytest.approx(xi(b, z_hi, cfg), abs=1e-12)
    assert dxi_dz(b, z_lo, cfg) == pytest.approx(dxi_dz(b, z_hi, cfg), rel=1e-6)


@pytest.mark.parametrize("z", [-50.0, -2.0, -0.2, 0.5])
def test_green_matches_independent_mode_sum(z):
    d = PI
    x1, x2 = (0.1, -0.2, 0.7), (0.9, 0.4, 2.1)
    got = free_green(x1, x2, z)
    assert got == pytest.approx(green_mode_sum(x1, x2, z, d).real, rel=1e-10)


def test_green_matches_image_sum():
    d = 1.0
    x1, x2 = (0.0, 0.0, 0.3), (0.05, 0.0, 0.35)
    kappa = 2.5
    assert free_green(x1, x2, -kappa ** 2, LayerConfig(d)) == pytest.approx(
        green_images(x1, x2, kappa, d), rel=1e-12)


def test_green_above_threshold_against_hankel_sum():
    x1, x2 = (0.0, 0.0, 1.0), (1.5, 0.5, 2.0)
    z = 6.3
    got = free_green(x1, x2, z)
    assert complex(got) == pytest.approx(green_mode_sum(x1, x2, z, PI), rel=1e-9)


def test_green_vertical_and_symmetry():
    x1, x2 = (0.2, 0.3, 0.5), (0.2, 0.3, 2.6)
    for z in (-1.0, 0.6, 2.2):
        g = free_green(x1, x2, z)
        assert g == pytest.approx(free_green(x2, x1, z), abs=1e-14)
        off = (0.2 + 1e-7, 0.3, 2.6)
        assert complex(g) == pytest.approx(complex(free_green(x1, off, z)), abs=1e-6)


def test_green_walls_and_coincidence():
    assert free_green((0, 0, 0.0), (1, 0, 1.0), 0.3) == 0.0
    assert free_green((0, 0, PI), (1, 0, 1.0), 0.3) == 0.0
    with pytest.raises(SingularInputError):
        free_green((0, 0, 1.0), (0, 0, 1.0), 0.3)
    with pytest.raises(DomainError):
        free_green((0, 0, -0.1), (0, 0, 1.0), 0.3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, PI - 0.05), st.floats(-20.0, 0.95))
def test_dxi_dz_matches_finite_difference(b, z):
    h = 1e-5
    fd = (xi(b, z + h) - xi(b, z - h)) / (2 * h)
    assert dxi_dz(b, z) == pytest.approx(fd, rel=1e-6, abs=1e-9)
    assert dxi_dz(b, z) > 0


def test_dxi_dz_is_green_norm():
    # ||G_0(., a; z)||^2 via the transverse-mode formula
    d, b, z = PI, 0.9, -0.7
    n = np.arange(1, 200001)
    norm2 = np.sum(np.sin(n * b) ** 2 / (n * n - z)) / (2 * PI * d)
    assert dxi_dz(b, z) == pytest.approx(norm2, rel=1e-5)


def test_green_dz_matches_finite_difference():
    x1, x2 = (0.0, 0.0, 1.0), (0.8, 0.1, 2.2)
    for z in (-3.0, 0.4):
        h = 1e-5
        fd = (free_green(x1, x2, z + h) - free_green(x1, x2, z - h)) / (2 * h)
        assert free_green_dz(x1, x2, z) == pytest.approx(fd, rel=1e-6)


def test_log_gap_energy_is_consistent():
    cfg = LayerConfig()
    # z itself only resolves the gap to ~1e-16 / |1 - z/T1|
    for u in (-3.0, -8.0):
        e = Energy.from_log_gap(u, cfg)
        assert xi(1.2, e, cfg) == pytest.approx(xi(1.2, e.z, cfg), rel=1e-9)
    # deep in the weak-coupling regime xi ~ -u sin^2 / (2 pi d)
    u = -1e6
    e = Energy.from_log_gap(u, cfg)
    assert xi(PI / 2, e, cfg) == pytest.approx(-u / (2 * PI ** 2), rel=1e-5)


def test_xi2_is_regular_part():
    assert xi2(PI / 2) == pytest.approx(
        np.euler_gamma / (4 * PI ** 2) + 2 * sp.digamma(0.5) / (8 * PI ** 2), rel=1e-14)
    with pytest.raises(DomainError):
        xi2(0.0)


@pytest.mark.parametrize("sigma", [0.5, 2.0, 3.7])
def test_thickness_scaling(sigma):
    pert = Perturbation((0.2, 0.0), 0.8, -0.1)
    cfg = LayerConfig()
    for z in (-2.0, 0.5, 2.5):
        new = scale_transform(pert, z, cfg, sigma)
        lhs = xi(new.pert.b, new.z, new.cfg)
        assert complex(lhs) == pytest.approx(complex(xi(pert.b, z, cfg)) / sigma, rel=1e-12)
    with pytest.raises(DomainError):
        scale_transform(pert, 0.0, cfg, -1.0)


def test_transverse_guard():
    with pytest.raises(DomainError):
        xi(0.0, 0.2)
    with pytest.raises(DomainError):
        xi(PI * (1 - 1e-12), 0.2)
    with pytest.raises(DomainError):
        LayerConfig(0.0)
    with pytest.raises(DomainError):
        Perturbation(alpha=float("nan"))


def test_krein_matrix_structure():
    perts = [Perturbation((0, 0), 1.0, 0.1), Perturbation((1, 0), 2.0, -0.2),
             Perturbation((0, 1), 1.5, 0.0)]
    lam = krein_matrix(perts, 0.4)
    assert lam.is_real and lam.size == 3
    assert np.allclose(lam.entries, lam.entries.T)
    assert lam.entries[0, 0] == pytest.approx(0.1 - xi(1.0, 0.4))
    assert lam.entries[0, 1] == pytest.approx(-free_green(perts[0].point, perts[1].point, 0.4))
    dl = krein_matrix_dz(perts, 0.4)
    assert np.all(np.linalg.eigvalsh(dl) < 0)
    h = 1e-6
    fd = (krein_matrix(perts, 0.4 + h).entries - krein_matrix(perts, 0.4 - h).entries) / (2 * h)
    assert np.allclose(dl, fd, atol=1e-7)
    above = krein_matrix(perts, 2.0)
    assert not above.is_real
    assert np.allclose(above.entries, above.entries.T)


def test_krein_matrix_drops_switched_off_and_rejects_duplicates():
    p = Perturbation((0, 0), 1.0, 0.1)
    off = Perturbation((3, 0), 1.0, math.inf)
    assert krein_matrix([p, off], 0.2).size == 1
    with pytest.raises(ConfigurationError):
        krein_matrix([p, Perturbation((0, 0), 1.0, 0.5)], 0.2)


@pytest.mark.parametrize("r", [1e-9, 1e-6, 5e-4])
def test_green_small_planar_distance(r):
    # near-vertical pairs: compare with the image sum and the vertical limit
    x1, x2 = (0.0, 0.0, 0.5), (r, 0.0, 2.6)
    assert free_green(x1, x2, -0.5) == pytest.approx(
        green_images(x1, x2, math.sqrt(0.5), PI), rel=1e-12)
    vert = free_green(x1, (0.0, 0.0, 2.6), 0.6)
    assert free_green(x1, x2, 0.6) == pytest.approx(vert, abs=max(1e-13, r))


def test_threshold_singularity_is_logarithmic():
    # xi + sin^2(pi b/d) u / (2 pi d) stays bounded as u = ln(1 - z/T_1) -> -inf
    cfg = LayerConfig()
    for b in (0.4, PI / 2, 2.0):
        s2 = math.sin(b) ** 2
        rest = [xi(b, Energy.from_log_gap(u, cfg), cfg) + s2 * u / (2 * PI * cfg.d)
                for u in (-5.0, -10.0, -20.0, -40.0)]
        steps = np.abs(np.diff(rest))
        assert np.all(steps[1:] < steps[:-1]) and steps[-1] < 1e-8
