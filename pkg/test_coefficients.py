"""
Derived dissipation coefficients and the sharp-causality threshold chi*
"""
import numpy as np
import pytest

from coefficients import (
    CausalityStatus,
    CoefficientError,
    DissipationCoeffs,
    causality_status,
    chi_star,
    chi_star_bisection,
    derive_coefficients,
    fixed_point_coefficients,
)
from thermo import GasParams, eos_from_n_theta

PARAMS = GasParams()
S0 = eos_from_n_theta(PARAMS, 1.0, 1.0)


def test_reference_shear_only():
    """eta = 1 at n = theta = 1: sigma = 20/11, zeta_tilde = 16/33"""
    d = derive_coefficients(PARAMS, S0, DissipationCoeffs(eta=1.0, zeta=0.0, chi=0.0, mu=0.0))
    assert d.sigma == pytest.approx(20.0 / 11.0)
    assert d.zeta_tilde == pytest.approx(16.0 / 33.0)
    assert d.zt1 == 0.0 and d.zt3 == 0.0
    assert d.sigma_tilde == pytest.approx(4.0 / 11.0)


@pytest.mark.parametrize("mu, expected", [(0.0, 27.0 / 13.0), (0.1, 55.0 / 26.0)])
def test_chi_star_reference(mu, expected):
    assert chi_star(PARAMS, S0, eta=1.0, zeta=0.0, mu=mu) == pytest.approx(expected, rel=1e-12)
    assert chi_star_bisection(PARAMS, S0, 1.0, 0.0, mu) == pytest.approx(expected, abs=1e-10)


def test_sigma_identity():
    """sigma = (4/3)eta + zeta_tilde for every input"""
    rng = np.random.default_rng(11)
    for _ in range(50):
        params = GasParams(m=rng.uniform(0.1, 3.0), gamma=rng.uniform(1.05, 1.95))
        state = eos_from_n_theta(params, rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0))
        c = DissipationCoeffs(*rng.uniform(0.0, 2.0, 4))
        d = derive_coefficients(params, state, c)
        assert d.sigma == pytest.approx(4.0 / 3.0 * c.eta + d.zeta_tilde, rel=1e-12, abs=1e-12)


def test_fixed_point_agrees_with_closed_form():
    rng = np.random.default_rng(12)
    for _ in range(100):
        params = GasParams(m=rng.uniform(0.1, 3.0), gamma=rng.uniform(1.05, 1.95))
        state = eos_from_n_theta(params, rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0))
        c = DissipationCoeffs(*rng.uniform(0.0, 2.0, 4))
        closed = derive_coefficients(params, state, c)
        iterated = fixed_point_coefficients(params, state, c)
        assert iterated.sigma == pytest.approx(closed.sigma, rel=1e-10, abs=1e-12)
        assert iterated.zeta_tilde == pytest.approx(closed.zeta_tilde, rel=1e-10, abs=1e-12)


def test_bisection_agrees_on_random_states():
    rng = np.random.default_rng(13)
    for _ in range(20):
        params = GasParams(m=rng.uniform(0.1, 3.0), gamma=rng.uniform(1.05, 1.95))
        state = eos_from_n_theta(params, rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0))
        eta, zeta, mu = rng.uniform(0.1, 2.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)
        closed = chi_star(params, state, eta, zeta, mu)
        if closed > 1e3:
            continue
        assert chi_star_bisection(params, state, eta, zeta, mu) == pytest.approx(closed, rel=1e-8)


@pytest.mark.parametrize("multiple, status", [
    (1.0, CausalityStatus.SHARPLY_CAUSAL),
    (0.5, CausalityStatus.CAUSAL),
    (2.0, CausalityStatus.ACAUSAL),
])
def test_status_around_threshold(multiple, status):
    star = chi_star(PARAMS, S0, 1.0, 0.0, 0.1)
    c = DissipationCoeffs(1.0, 0.0, multiple * star, 0.1)
    assert causality_status(c, derive_coefficients(PARAMS, S0, c)) is status


def test_negative_coefficient_rejected():
    with pytest.raises(CoefficientError):
        DissipationCoeffs(eta=1.0, zeta=-0.1, chi=1.0, mu=0.1)


def test_require_five_field():
    DissipationCoeffs(1.0, 0.0, 1.0, 0.1).require_five_field()
    with pytest.raises(CoefficientError):
        DissipationCoeffs(1.0, 0.0, 1.0, 0.0).require_five_field()


def test_state_dependent_coefficients():
    c = DissipationCoeffs(eta=lambda s: 2.0 * s.theta, zeta=0.0, chi=1.0, mu=0.1)
    state = eos_from_n_theta(PARAMS, 1.0, 1.5)
    assert c.evaluate(state).eta == pytest.approx(3.0)
    with pytest.raises(CoefficientError):
        c.scaled(0.5)
    d = derive_coefficients(PARAMS, state, c)
    assert d.sigma == pytest.approx(4.0 / 3.0 * 3.0 + d.zeta_tilde)


def test_scaling_is_linear():
    c = DissipationCoeffs(1.0, 0.3, 1.2, 0.1)
    full = derive_coefficients(PARAMS, S0, c)
    half = derive_coefficients(PARAMS, S0, c.scaled(0.5))
    assert half.sigma == pytest.approx(0.5 * full.sigma)
    assert half.zeta_tilde == pytest.approx(full.scaled(0.5).zeta_tilde)
