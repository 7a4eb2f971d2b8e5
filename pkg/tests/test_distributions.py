import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from blockrip.distributions import (DistributionSpec, PhiFunction, estimate_psi_alpha_norm, estimate_tau_phi,
                                    increment_tail_check, log_mgf, phi_conjugate, phi_conjugate_grid, sample,
                                    tau_phi, weibull_tail)
from blockrip.errors import ParameterDomainError
from blockrip.rng import RngStream

# Oracle: root of (1 - 2/t^2)^(-1/2) = 2, solved numerically.
PSI2_GAUSS = optimize.brentq(lambda t: (1 - 2 / t**2) ** -0.5 - 2, 1.5, 3.0)


def test_psi2_oracle_matches_closed_form():
    assert PSI2_GAUSS == pytest.approx(math.sqrt(8 / 3), rel=1e-12)


@pytest.mark.parametrize("alpha,x,expected", [(1, 0, 1.0), (1, 1, math.exp(-1)), (0.5, 4, math.exp(-2))])
def test_weibull_tail_values(alpha, x, expected):
    assert weibull_tail(alpha, x) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("bad", [0.0, -1.0, 2.5])
def test_weibull_alpha_domain(bad):
    with pytest.raises(ParameterDomainError, match=r"dist: alpha in \(0,2\]"):
        DistributionSpec.weibull(bad)


@pytest.mark.parametrize("q", [1.0, 2.1])
def test_power_phi_domain(q):
    with pytest.raises(ParameterDomainError):
        DistributionSpec.power_phi(q)


def test_rademacher_support():
    x = sample(DistributionSpec.rademacher(), 4, RngStream(3))
    assert set(np.unique(x)) <= {-1.0, 1.0}


@pytest.mark.parametrize("alpha,x", [(1.0, 1.0), (2.0, 2.0)])
def test_weibull_tail_frequency(alpha, x):
    n = 10**6
    z = sample(DistributionSpec.weibull(alpha), n, RngStream(11))
    p = math.exp(-x**alpha)
    emp = np.mean(np.abs(z) > x)
    assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_weibull_ks_distance():
    alpha = 0.7
    z = np.abs(sample(DistributionSpec.weibull(alpha), 10**6, RngStream(5)))
    res = stats.kstest(z, lambda t: 1 - np.exp(-np.maximum(t, 0) ** alpha))
    assert res.statistic < 1.63 / math.sqrt(z.size)


@pytest.mark.parametrize("spec", [DistributionSpec.gaussian(2.5), DistributionSpec.rademacher(),
                                  DistributionSpec.weibull(0.8), DistributionSpec.power_phi(1.5, 0.7)])
def test_moments_match_spec(spec):
    z = sample(spec, 400_000, RngStream(9))
    se = z.std() / math.sqrt(z.size)
    assert abs(z.mean()) < 4 * se
    assert z.var() == pytest.approx(spec.variance, rel=0.03)


def test_sample_is_deterministic():
    s = RngStream(123, 7)
    assert np.array_equal(sample(DistributionSpec.weibull(1.3), 1000, s), sample(DistributionSpec.weibull(1.3), 1000, s))


def test_config_roundtrip():
    spec = DistributionSpec.power_phi(1.25, 2.0)
    assert DistributionSpec.from_config(spec.to_config()) == spec


def test_psi_norm_gaussian():
    z = sample(DistributionSpec.gaussian(1.0), 10**6, RngStream(1))
    assert estimate_psi_alpha_norm(z, 2.0) == pytest.approx(PSI2_GAUSS, rel=0.05)


def test_psi_norm_zero_samples():
    assert estimate_psi_alpha_norm(np.zeros(1000), 1.0) == 0.0


def test_psi_norm_weibull_against_quadrature():
    # E exp(|xi|/t) = 1/(1 - 1/t) for |xi| ~ Exp(1); the root of that = 2 is t = 2
    oracle = optimize.brentq(lambda t: integrate.quad(lambda x: math.exp(x / t - x), 0, np.inf)[0] - 2, 1.2, 5)
    z = sample(DistributionSpec.weibull(1.0), 10**6, RngStream(2))
    est = estimate_psi_alpha_norm(z, 1.0)
    assert 1 < est < 3
    assert est == pytest.approx(oracle, rel=0.1)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100.0))
def test_psi_norm_scale_equivariant(c):
    z = sample(DistributionSpec.weibull(1.5), 2000, RngStream(4))
    assert estimate_psi_alpha_norm(c * z, 1.5) == pytest.approx(c * estimate_psi_alpha_norm(z, 1.5), rel=3e-4)


def test_psi_norm_empty_input():
    with pytest.raises(ValueError):
        estimate_psi_alpha_norm(np.array([]), 2.0)


GRID = np.logspace(-2, 0.6, 60)


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_tau_phi_gaussian(sigma):
    z = sample(DistributionSpec.gaussian(sigma**2), 10**6, RngStream(6))
    est = estimate_tau_phi(z - z.mean(), PhiFunction(2.0), GRID)
    assert est.value == pytest.approx(sigma, rel=0.05)


def test_tau_phi_rademacher_below_one():
    z = sample(DistributionSpec.rademacher(), 10**5, RngStream(6))
    assert estimate_tau_phi(z - z.mean(), PhiFunction(2.0), GRID).value <= 1.0 + 0.02


def test_tau_phi_flags_overflow():
    z = np.array([-1.0, 1.0]) * 200
    est = estimate_tau_phi(z, PhiFunction(2.0), np.array([0.1, 1.0, 10.0]))
    assert est.skipped  # exp(2000) overflows the clip


def test_exact_tau_values():
    assert tau_phi(DistributionSpec.gaussian(4.0), PhiFunction(2.0)) == pytest.approx(2.0)
    assert tau_phi(DistributionSpec.rademacher(), PhiFunction(2.0)) <= 1.0 + 1e-9
    assert math.isinf(tau_phi(DistributionSpec.weibull(1.0), PhiFunction(2.0)))


def test_log_mgf_against_quadrature():
    lam = 0.4
    dens = lambda z: 0.5 * math.exp(-abs(z))  # noqa: E731
    oracle = math.log(integrate.quad(lambda z: math.exp(lam * z) * dens(z), -60, 60, points=[0])[0])
    assert log_mgf(DistributionSpec.weibull(1.0), lam) == pytest.approx(oracle, rel=1e-8)
    assert log_mgf(DistributionSpec.rademacher(), 0.7) == pytest.approx(math.log(math.cosh(0.7)))


@pytest.mark.parametrize("q,y,expected", [(2.0, 3.0, 4.5), (1.5, 0.0, 0.0), (1.5, 2.0, 8 / 3)])
def test_phi_conjugate_values(q, y, expected):
    assert phi_conjugate(PhiFunction(q), y) == pytest.approx(expected, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("q", [1.25, 1.5, 2.0])
@pytest.mark.parametrize("y", [0.1, 0.7, 3.0, 10.0])
def test_phi_conjugate_vs_legendre_grid(q, y):
    phi = PhiFunction(q)
    assert phi_conjugate(phi, y) == pytest.approx(phi_conjugate_grid(phi, y), rel=1e-3)


def test_phi_inverse_roundtrip():
    phi = PhiFunction(1.5)
    x = np.linspace(0, 5, 11)
    assert np.allclose(phi.inverse(phi(x)), x)
    assert phi.conjugate_inverse(phi.conjugate(2.0)) == pytest.approx(2.0)


def test_increment_check_gaussian():
    rep = increment_tail_check(DistributionSpec.gaussian(1.0), PhiFunction(2.0), [0.0, 2.0, 4.0], 10**6,
                               RngStream(8))
    assert rep.passed
    assert rep.empirical[1] == pytest.approx(2 * stats.norm.sf(2), abs=4e-4)
    assert rep.bound[0] == 2.0
    assert rep.bound[1] == pytest.approx(2 * math.exp(-2))
