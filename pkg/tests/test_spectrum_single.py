import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layerqm.errors import DomainError, SingularInputError
from layerqm.layer_green import LayerConfig, Perturbation, dxi_dz, free_green, xi
from layerqm.spectrum_single import (dirichlet_ball_bound, eigenfunction_1, log_gap_of,
                                     solve_bound_state, strong_coupling_estimate,
                                     strong_eigenfunction, weak_coupling_estimate,
                                     weak_coupling_log_gap, weak_eigenfunction)

PI = math.pi


def midplane_eigenvalue(alpha):
    """Inverse of xi(pi/2; z) = -ln(2 cos(pi sqrt(z)/2)) / (2 pi^2)."""
    c = 0.5 * math.exp(-2 * PI ** 2 * alpha)
    if c <= 1.0:
        return (2 / PI * math.acos(c)) ** 2
    return -(2 / PI * math.acosh(c)) ** 2


@pytest.mark.parametrize("alpha", [-0.3, -0.05, 0.0, 0.02, 0.1, 0.3])
def test_midplane_exact(alpha):
    bs = solve_bound_state(Perturbation((0, 0), PI / 2, alpha))
    assert bs.eps == pytest.approx(midplane_eigenvalue(alpha), rel=1e-12, abs=1e-13)
    assert bs.residual < 1e-12


def test_known_values_at_zero_coupling():
    assert solve_bound_state(Perturbation(b=PI / 2)).eps == pytest.approx(4 / 9, abs=1e-13)
    assert solve_bound_state(Perturbation(b=PI / 3)).eps == pytest.approx(9 / 16, abs=1e-12)


def test_midplane_log_gap_far_below_threshold_precision():
    # exp(-2 pi^2 alpha) tiny, so the gap is only resolved in u
    alpha = 1.5
    bs = solve_bound_state(Perturbation(b=PI / 2, alpha=alpha))
    c = 0.5 * math.exp(-2 * PI ** 2 * alpha)
    # 1 - (2/pi acos c)^2 with acos c = pi/2 - asin c
    t = math.asin(c)
    gap = (4 / PI) * t * (1 - t / PI)
    assert bs.log_gap == pytest.approx(math.log(gap), rel=1e-12)
    assert bs.eps < 1.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, PI - 0.05), st.floats(-1.0, 1.0))
def test_root_solves_xi_equation(b, alpha):
    cfg = LayerConfig()
    bs = solve_bound_state(Perturbation((0.3, -1.0), b, alpha), cfg)
    # eps may round to T_1 when the binding is weaker than machine epsilon
    assert bs.eps <= cfg.first_threshold
    if bs.log_gap > -12:
        assert bs.log_gap == pytest.approx(log_gap_of(bs.eps, cfg), rel=1e-9, abs=1e-12)
    assert abs(xi(b, bs.energy, cfg) - alpha) <= 1e-10 * max(1.0, abs(alpha))


def test_monotone_in_alpha_and_mirror_invariant():
    b = 0.8
    eps = [solve_bound_state(Perturbation(b=b, alpha=a)).eps for a in np.linspace(-0.5, 0.5, 11)]
    assert np.all(np.diff(eps) > 0)
    for a in (-0.2, 0.0, 0.2):
        assert solve_bound_state(Perturbation(b=b, alpha=a)).eps == pytest.approx(
            solve_bound_state(Perturbation(b=PI - b, alpha=a)).eps, rel=1e-12)


def test_other_widths_by_scaling():
    sigma = 2.5
    p = Perturbation(b=1.0, alpha=-0.05)
    e1 = solve_bound_state(p).eps
    e2 = solve_bound_state(Perturbation(b=sigma * 1.0, alpha=-0.05 / sigma),
                           LayerConfig(sigma * PI)).eps
    assert e2 == pytest.approx(e1 / sigma ** 2, rel=1e-12)


def test_weak_coupling_asymptotics():
    b = 1.1
    errs = []
    for alpha in (0.5, 1.0, 2.0, 4.0):
        bs = solve_bound_state(Perturbation(b=b, alpha=alpha))
        errs.append(abs(bs.log_gap / weak_coupling_log_gap(alpha, b) - 1))
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    assert errs[-1] < 0.02
    assert weak_coupling_estimate(0.3, PI / 2) == pytest.approx(
        1 - math.exp(-2 * PI ** 2 * 0.3), rel=1e-15)
    with pytest.raises(DomainError):
        weak_coupling_log_gap(-0.1, b)


def test_strong_coupling_asymptotics_and_bracket():
    b = 1.3
    prev = math.inf
    for alpha in (-0.2, -0.5, -1.0, -3.0):
        bs = solve_bound_state(Perturbation(b=b, alpha=alpha))
        br = dirichlet_ball_bound(alpha, b)
        assert br.lower <= bs.eps <= br.upper
        err = abs(bs.eps / strong_coupling_estimate(alpha) - 1)
        assert err < prev
        prev = err
    assert prev < 1e-12
    with pytest.raises(DomainError):
        strong_coupling_estimate(0.1)


def test_ball_bound_without_ball_state():
    br = dirichlet_ball_bound(-0.01, 1.0)
    assert br.upper == math.inf
    br = dirichlet_ball_bound(-0.5, 1.0)
    assert br.kappa / math.tanh(br.kappa * br.radius) == pytest.approx(2 * PI, rel=1e-13)


def test_eigenfunction_and_norm():
    p = Perturbation((0.0, 0.0), 1.2, -0.1)
    bs = solve_bound_state(p)
    x = (0.7, 0.2, 2.0)
    assert eigenfunction_1(x, bs) == pytest.approx(free_green(x, p.point, bs.eps), rel=1e-12)
    assert bs.norm2() == pytest.approx(dxi_dz(p.b, bs.eps), rel=1e-12)
    assert eigenfunction_1(x, bs, normalized=True) == pytest.approx(
        eigenfunction_1(x, bs) / math.sqrt(bs.norm2()), rel=1e-14)
    with pytest.raises(SingularInputError):
        eigenfunction_1(p.point, bs)


def test_eigenfunction_norm_by_quadrature():
    # ||G_0(., a; eps)||^2 from radial quadrature of the transverse modes
    from scipy.integrate import quad
    import scipy.special as sp
    p = Perturbation(b=1.0, alpha=-0.05)
    bs = solve_bound_state(p)
    n = np.arange(1, 4_000_001, dtype=float)
    kap = np.sqrt(n * n - bs.eps)
    radial = np.array([quad(lambda r, k=k: sp.k0(k * r) ** 2 * r, 0, np.inf)[0] for k in kap[:5]])
    radial = np.concatenate([radial, 0.5 / kap[5:] ** 2])
    norm2 = np.sum((2 / PI) * np.sin(n * p.b) ** 2 * radial) / (2 * PI)
    assert bs.norm2() == pytest.approx(norm2, rel=1e-6)


def test_strong_form_approaches_exact():
    b = PI / 2
    # asymptotic in K rho; the planar offset is fixed
    x = (0.3, 0.0, b)
    errs = []
    for alpha in (-0.5, -1.0, -2.0, -4.0):
        p = Perturbation((0, 0), b, alpha)
        exact = eigenfunction_1(x, solve_bound_state(p))
        errs.append(abs(strong_eigenfunction(x, p) / exact - 1))
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    assert errs[-1] < 0.02
    with pytest.raises(SingularInputError):
        strong_eigenfunction((0, 0, 1.0), Perturbation(alpha=-1.0))


def test_weak_form_dominant_term():
    b = 1.0
    x = (0.4, 0.0, 1.8)
    rels = []
    for alpha in (1.0, 3.0, 9.0):
        p = Perturbation((0, 0), b, alpha)
        exact = eigenfunction_1(x, solve_bound_state(p))
        rels.append(abs(weak_eigenfunction(x, p) - exact) / abs(exact))
    assert all(e2 < e1 for e1, e2 in zip(rels, rels[1:]))
    assert rels[-1] < 0.05


def test_switched_off_and_bad_positions():
    with pytest.raises(DomainError):
        solve_bound_state(Perturbation(alpha=math.inf))
    with pytest.raises(DomainError):
        solve_bound_state(Perturbation(b=0.0))
