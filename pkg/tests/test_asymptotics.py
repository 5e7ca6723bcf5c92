import math

import numpy as np
import pytest
from scipy.integrate import quad

from qdnls.asymptotics import (_density, amplitude_identity_residual, chi1, d0, d0_crosscheck,
                               leading_term, leading_term_via_reflection, ln0, phase_integral)
from qdnls.errors import DomainError
from qdnls.lax import OMEGA
from qdnls.scattering import ScatteringTable

# phase integrals of the Gaussian 0.3 table; agree with a 1e6-node trapezoid
# (log singularity subtracted) to 6e-10 and with the integrated-by-parts form to 1e-15
FROZEN_POSITIVE = {
    0.05: -0.03014204597208308,
    0.25: -0.14651671040946643,
    0.5: -0.23702846345824552,
    0.75: -0.2423492080109089,
    2.0: -0.005497479164551795,
}
FROZEN_NEGATIVE = {
    -0.25: 0.1465167104094592,
    -0.5: 0.23702846345828912,
    -1.0: 0.18237976873617262,
}


def _ibp(table, k0, branch):
    """(1/pi) [w (rho - rho(k0))]_{k0}^{K} - (1/pi) int (rho - rho(k0)) w' ds on the mirrored half-line."""
    spl, K = _density(table, branch)
    a = abs(k0)
    r0 = spl(a)
    wa = OMEGA * a
    w = lambda s: math.log(abs(s - a)) - math.log(abs(s - wa))
    wp = lambda s: 1 / (s - a) - (s - wa.real) / abs(s - wa) ** 2
    edges = np.concatenate([[a], spl.x[(spl.x > a) & (spl.x < K)], [K]])
    inner = sum(quad(lambda s: (spl(s) - r0) * wp(s), lo, hi, epsabs=1e-14, epsrel=1e-13)[0]
                for lo, hi in zip(edges[:-1], edges[1:]))
    return (w(K) * (spl(K) - r0) - inner) / math.pi


def _trapezoid(table, k0, n=10 ** 6):
    spl, K = _density(table, "positive")
    s = np.linspace(k0, K, n + 1)
    d, d0_ = spl(s, 1), spl(k0, 1)
    u = s - k0
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(u > 0, np.log(u) * (d - d0_), 0.0)
    f = f - np.log(np.abs(s - OMEGA * k0)) * d
    return (np.trapezoid(f, s) + d0_ * ((K - k0) * math.log(K - k0) - (K - k0))) / math.pi


@pytest.mark.parametrize("k0,ref", FROZEN_POSITIVE.items())
def test_phase_integral_frozen(gaussian_table, k0, ref):
    assert phase_integral(gaussian_table, k0) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("k0,ref", FROZEN_NEGATIVE.items())
def test_phase_integral_negative_frozen(gaussian_table, k0, ref):
    assert phase_integral(gaussian_table, k0, "negative") == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("k0", [0.1, 0.5, 1.5])
def test_phase_integral_by_parts(gaussian_table, k0):
    assert abs(phase_integral(gaussian_table, k0) - _ibp(gaussian_table, k0, "positive")) < 1e-10


def test_phase_integral_negative_by_parts(gaussian_table):
    k0 = -0.7
    assert abs(-phase_integral(gaussian_table, k0, "negative") - _ibp(gaussian_table, k0, "negative")) < 1e-10


def test_phase_integral_trapezoid(gaussian_table):
    assert abs(phase_integral(gaussian_table, 0.5) - _trapezoid(gaussian_table, 0.5)) < 1e-6


def test_phase_integral_wrong_branch(gaussian_table):
    with pytest.raises(DomainError):
        phase_integral(gaussian_table, -0.5, "positive")
    with pytest.raises(DomainError):
        phase_integral(gaussian_table, 0.5, "negative")


def _zero_table():
    k = np.linspace(-5, 5, 11)
    s = np.tile(np.eye(3, dtype=complex), (k.size, 1, 1))
    return ScatteringTable(k, s, s.copy())


def test_zero_table():
    tab = _zero_table()
    assert phase_integral(tab, 0.5) == 0.0
    st = leading_term(tab, 1.0, 100.0)
    assert st.leading == 0 and st.nu == 0
    assert d0(tab, 1.0, 50.0) == 1
    assert leading_term(tab, -1.0, 10.0).leading == 0


def test_leading_frozen(gaussian_table):
    st = leading_term(gaussian_table, 1.0, 50.0)
    assert st.nu == pytest.approx(0.09069944399683026, rel=1e-12)
    assert st.phi == pytest.approx(-18.56645475904276, rel=1e-12)
    assert abs(st.leading) == pytest.approx(0.022883476223449824, rel=1e-12)


@pytest.mark.parametrize("zeta,ref", [(-0.5, -0.017380961358376516 - 0.003166254672250548j),
                                      (-1.0, -0.010434563243822057 + 0.012367159412950446j)])
def test_leading_negative_frozen(gaussian_table, zeta, ref):
    assert abs(leading_term(gaussian_table, zeta, 100.0).leading - ref) < 1e-12


@pytest.mark.parametrize("zeta", [0.3, 1.0, 3.0, -0.4, -2.0])
def test_amplitude_identity(gaussian_table, zeta):
    assert amplitude_identity_residual(leading_term(gaussian_table, zeta, 100.0)) < 1e-10


def test_phase_is_real(gaussian_table):
    st = leading_term(gaussian_table, 0.8, 20.0)
    assert isinstance(st.phi, float) and math.isfinite(st.phi)


@pytest.mark.parametrize("zeta", [-0.5, -1.0, -2.0])
def test_negative_branch_matches_reflection(gaussian_table, reflected_table, zeta):
    a = leading_term(gaussian_table, zeta, 100.0).leading
    b = leading_term_via_reflection(reflected_table, zeta, 100.0).leading
    assert abs(a - b) < 1e-8


def test_domain_errors(gaussian_table):
    with pytest.raises(DomainError):
        leading_term(gaussian_table, 0.0, 10.0)
    with pytest.raises(DomainError):
        leading_term(gaussian_table, 0.05, 10.0)
    with pytest.raises(DomainError):
        leading_term(gaussian_table, 1.0, 0.0)
    with pytest.raises(DomainError):
        d0_crosscheck(gaussian_table, -1.0, 10.0)
    with pytest.raises(DomainError):
        leading_term_via_reflection(gaussian_table, 1.0, 10.0)


def test_ln0_branch():
    assert ln0(-1).imag == pytest.approx(math.pi)
    assert ln0(-1j).imag == pytest.approx(1.5 * math.pi)
    assert ln0(1).imag == 0.0
    assert 0.0 <= ln0(1 - 1e-300j).imag < 2 * math.pi


def test_d0_modulus(gaussian_table):
    st = leading_term(gaussian_table, 1.0, 50.0)
    assert abs(abs(d0(gaussian_table, 1.0, 50.0)) - math.exp(2 * math.pi * st.nu)) < 1e-12


@pytest.mark.parametrize("zeta,t", [(1.0, 50.0), (0.4, 200.0), (2.5, 10.0)])
def test_d0_route(gaussian_table, zeta, t):
    a = leading_term(gaussian_table, zeta, t).leading
    b = d0_crosscheck(gaussian_table, zeta, t)
    assert abs(a - b) < 1e-8 * abs(a)


def test_chi1_real_part_on_axis(gaussian_table):
    # at k = k0 the imaginary part of ln0(k0 - s) is pi, so Re chi1 = -(1/2pi) pi rho(k0)... = -rho(k0)/2
    spl, _ = _density(gaussian_table, "positive")
    k0 = 0.5
    c = chi1(gaussian_table, k0, k0)
    assert abs(c.real - (-spl(k0) / 2)) < 1e-10
