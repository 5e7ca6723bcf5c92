import numpy as np
import pytest

from qdnls.bounds import (AuxiliarySystem, certify_bounds, conjugation_residual, f3_ode_residual,
                          g_transform_check, real_data_check, rotation_relation_check, solve_f_system,
                          support_points)
from qdnls.errors import DomainError, InvalidDataError
from qdnls.grid import GridFunction


@pytest.fixture(scope="module", params=[0.3, 1.0, 3.0])
def bump_a(request):
    return GridFunction.bump(request.param)


def test_alpha_identities(bump_a):
    res = AuxiliarySystem(bump_a).identity_residuals(np.linspace(-1, 1, 201))
    assert max(res.values()) < 1e-12 * max(1.0, 9 * bump_a(0.0).real ** 2)


def test_conjugation(bump):
    assert conjugation_residual(bump, -2.0, np.linspace(-1, 1, 11)) < 1e-10


def test_f_normalised_right_of_support(bump):
    _, b = support_points(bump)
    sysf = solve_f_system(bump, -1.5, np.array([b, b + 5]))
    assert np.allclose(sysf.f, np.exp(-1.5 * np.array([b, b + 5]))[:, None], rtol=1e-14)


@pytest.mark.parametrize("k", [0.0, -0.5, -4.0])
def test_f3_equation(bump_a, k):
    assert f3_ode_residual(bump_a, k) < 1e-9


def test_rotation_relation(bump_a):
    assert rotation_relation_check(bump_a, -1.0) < 1e-10


def test_real_data_relations(bump):
    res = real_data_check(bump)
    assert max(res.values()) < 1e-12


@pytest.mark.parametrize("k", [-0.5, -3.0])
def test_g_transform(bump_a, k):
    rep = g_transform_check(bump_a, k)
    assert rep.passed, rep.failures
    assert rep.y2_closed_vs_integrated <= 1e-8 and rep.y3_closed_vs_integrated <= 1e-8
    assert rep.abel_residual <= 1e-9 and abs(rep.wronskian_at_x0 - 1) <= 1e-9
    assert rep.gp_negative_left


def test_g_transform_needs_negative_k(bump):
    with pytest.raises(DomainError):
        g_transform_check(bump, 0.0)


def test_certificate_small_grid(bump):
    cert = certify_bounds(bump, k_grid=[0.0, -1.0, -5.0], x_grid=np.linspace(-20, 20, 81))
    assert cert.passed, cert.failures
    assert min(cert.min_f) > 0 and cert.r2_margin > 0
    assert cert.x33_residual <= 1e-7 and cert.quotient_residual <= 1e-6


def test_certificate_zero(zero):
    cert = certify_bounds(zero)
    assert cert.passed and cert.min_f == [1.0, 1.0, 1.0]


def test_certificate_truncated_gaussian(gaussian):
    cert = certify_bounds(gaussian, k_grid=[0.0, -1.0, -3.0], x_grid=np.linspace(-10, 10, 101))
    assert not cert.compact
    assert min(cert.min_f) > 0 and cert.r2_margin > 0
    assert cert.x33_residual <= 1e-7 and cert.quotient_residual <= 1e-6


def test_certificate_rejects_undecayed():
    q = GridFunction.gaussian(1.0, width=4.0, window=(-3.0, 3.0))
    with pytest.raises(InvalidDataError):
        certify_bounds(q)


def test_certificate_rejects_positive_k(bump):
    with pytest.raises(InvalidDataError):
        certify_bounds(bump, k_grid=[0.5])


def _fd(v, h, order):
    """Sixth-neighbour central differences, fourth order in h, on interior points."""
    n = v.size
    c = np.s_[3:n - 3]
    sh = lambda j: v[3 + j:n - 3 + j]
    if order == 1:
        return (sh(-2) - 8 * sh(-1) + 8 * sh(1) - sh(2)) / (12 * h), c
    if order == 2:
        return (-sh(-2) + 16 * sh(-1) - 30 * sh(0) + 16 * sh(1) - sh(2)) / (12 * h * h), c
    return (-sh(3) + 8 * sh(2) - 13 * sh(1) + 13 * sh(-1) - 8 * sh(-2) + sh(-3)) / (8 * h ** 3), c


def test_f3_equation_finite_difference_oracle(bump):
    # the stencil differentiates the sampled solution only; the coefficients are evaluated directly
    k, h = -2.0, 4e-3
    x = np.arange(-0.8, 0.8 + h / 2, h)
    f = solve_f_system(bump, k, x).F[:, 2] * np.exp(k * x)
    aux = AuxiliarySystem(bump)
    a, da, d2a = aux.alpha(x), aux.alpha(x, 1), aux.alpha(x, 2)
    q2 = np.abs(bump(x)) ** 2
    c1 = -9 * q2 + 2 * da[:, 2] + da[:, 0]
    c0 = -k ** 3 + a[:, 0] * a[:, 1] * a[:, 2] + (a[:, 0] + a[:, 1]) * da[:, 2] + a[:, 2] * da[:, 0] + d2a[:, 2]
    f1, c = _fd(f, h, 1)
    f3, _ = _fd(f, h, 3)
    res = f3 + c1[c] * f1 + c0[c] * f[c]
    assert np.max(np.abs(res)) <= 1e-6 * np.max(np.abs(f3))


def test_f3_closed_form_at_zero(bump):
    from scipy.integrate import quad
    aux = AuxiliarySystem(bump)
    for x in (-0.9, -0.3, 0.4):
        ref = np.exp(quad(lambda s: aux.alpha(s)[2], x, 1.0, epsabs=1e-14, epsrel=1e-13)[0])
        assert abs(solve_f_system(bump, 0.0, np.array([x])).F[0, 2] - ref) < 1e-9
