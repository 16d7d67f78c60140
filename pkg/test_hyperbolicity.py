"""
HKM definiteness, signal speeds and the causality certificate
"""
import numpy as np
import pytest
from scipy.linalg import eigh

from coefficients import CausalityStatus, DissipationCoeffs, chi_star, derive_coefficients
from dissipation import assemble_b_tensor
from hyperbolicity import (
    DegenerateDiffusion,
    causality_certificate,
    hkm_check,
    signal_speeds,
    spectral_status,
)
from kinematics import FluidState, four_velocity
from thermo import GasParams, eos_from_n_theta

PARAMS = GasParams()
S0 = eos_from_n_theta(PARAMS, 1.0, 1.0)
CHI_STAR = chi_star(PARAMS, S0, eta=1.0, zeta=0.0, mu=0.1)


def _coeffs(multiple: float) -> DissipationCoeffs:
    return DissipationCoeffs(eta=1.0, zeta=0.0, chi=multiple * CHI_STAR, mu=0.1)


def _b_tensor(state: FluidState, c: DissipationCoeffs):
    return assemble_b_tensor(state, derive_coefficients(PARAMS, state.thermo, c), c)


@pytest.mark.parametrize("v3", [(0.0, 0.0, 0.0), (0.5, 0.0, 0.0), (0.2, 0.3, -0.4)])
def test_hkm_passes_for_five_field_coefficients(v3):
    state = FluidState(S0, four_velocity(v3))
    report = hkm_check(_b_tensor(state, _coeffs(1.0)), state)
    assert report.passed
    time_margin, space_margin = report.margins
    assert time_margin > 0.0 and space_margin > 0.0


def test_zero_diffusion_is_degenerate():
    state = FluidState(S0)
    c = DissipationCoeffs(eta=1.0, zeta=0.0, chi=1.0, mu=0.0)
    with pytest.raises(DegenerateDiffusion):
        hkm_check(_b_tensor(state, c), state)


def test_sharp_speeds_are_all_light_speed():
    state = FluidState(S0)
    spectrum = signal_speeds(_b_tensor(state, _coeffs(1.0)), state, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(np.abs(spectrum.speeds), 1.0, atol=1e-9)
    assert len(spectrum.speeds) == 10


def test_subcritical_transverse_speed():
    state = FluidState(S0)
    c = _coeffs(0.5)
    d = derive_coefficients(PARAMS, S0, c)
    spectrum = signal_speeds(_b_tensor(state, c), state, [0.0, 1.0, 1.0])
    assert spectrum.sector_speeds["transverse_1"] == pytest.approx(np.sqrt(1.0 / d.sigma), abs=1e-9)
    assert spectrum.max_speed == pytest.approx(1.0, abs=1e-9)
    assert spectrum.min_speed < 1.0 - 1e-4


def test_supercritical_speed_exceeds_light():
    state = FluidState(S0)
    spectrum = signal_speeds(_b_tensor(state, _coeffs(1.5)), state, [1.0, 2.0, 0.5])
    assert spectrum.max_speed > 1.0 + 1e-4


def test_speeds_match_generalized_eigenproblem():
    """tau^2 solves B_nn v = tau^2 (-B_00) v in the rest frame"""
    state = FluidState(S0)
    b = _b_tensor(state, _coeffs(0.7))
    tau2 = eigh(b.b[:, 1, :, 1], -b.b[:, 0, :, 0], eigvals_only=True)
    spectrum = signal_speeds(b, state, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(np.sort(np.sqrt(tau2)), np.sort(list(spectrum.sector_speeds.values())),
                               atol=1e-9)


def test_speeds_are_frame_independent():
    c = _coeffs(0.8)
    rest = FluidState(S0)
    moving = FluidState(S0, four_velocity([0.4, -0.3, 0.1]))
    at_rest = signal_speeds(_b_tensor(rest, c), rest, [0.0, 0.0, 1.0])
    boosted = signal_speeds(_b_tensor(moving, c), moving, [0.0, 0.0, 1.0])
    np.testing.assert_allclose(boosted.speeds, at_rest.speeds, atol=1e-8)


def test_speeds_are_isotropic():
    state = FluidState(S0)
    b = _b_tensor(state, _coeffs(0.6))
    reference = signal_speeds(b, state, [1.0, 0.0, 0.0]).speeds
    for direction in np.random.default_rng(4).normal(size=(5, 3)):
        np.testing.assert_allclose(signal_speeds(b, state, direction).speeds, reference, atol=1e-8)


@pytest.mark.parametrize("multiple, status", [
    (1.0, CausalityStatus.SHARPLY_CAUSAL),
    (0.5, CausalityStatus.CAUSAL),
    (1.5, CausalityStatus.ACAUSAL),
])
def test_certificate_statuses_agree(multiple, status):
    cert = causality_certificate(PARAMS, S0, _coeffs(multiple), directions=4, seed=1)
    assert cert.algebraic_status is status
    assert cert.status is status
    assert cert.agrees
    assert cert.isotropy_spread < 1e-8


def test_spectral_status_thresholds():
    assert spectral_status(1.0, 1.0) is CausalityStatus.SHARPLY_CAUSAL
    assert spectral_status(1.0, 0.9) is CausalityStatus.CAUSAL
    assert spectral_status(1.01, 0.9) is CausalityStatus.ACAUSAL


def test_hkm_directions_are_unit_vectors():
    from hyperbolicity import _HKM_DIRECTIONS
    assert _HKM_DIRECTIONS.shape == (5, 3)
    np.testing.assert_allclose(np.linalg.norm(_HKM_DIRECTIONS, axis=1), 1.0, atol=1e-15)


# ========================================
# RANDOM PARAMETER DRAWS
# ========================================

def _random_draw(rng):
    state = eos_from_n_theta(PARAMS, rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0))
    eta, zeta, mu = rng.uniform(0.1, 2.0), rng.uniform(0.0, 1.0), rng.uniform(0.05, 1.0)
    return state, eta, zeta, mu


def _sigma_zero_chi(state, eta, zeta, mu) -> float:
    """sigma is affine in chi; chi where it crosses zero"""
    s0 = float(derive_coefficients(PARAMS, state, DissipationCoeffs(eta, zeta, 0.0, mu)).sigma)
    s1 = float(derive_coefficients(PARAMS, state, DissipationCoeffs(eta, zeta, 1.0, mu)).sigma)
    return -s0 / (s1 - s0)


def test_hkm_holds_for_random_causal_draws():
    rng = np.random.default_rng(31)
    for _ in range(40):
        state, eta, zeta, mu = _random_draw(rng)
        chi = rng.uniform(0.05, 1.0) * chi_star(PARAMS, state, eta, zeta, mu)
        fluid = FluidState(state, four_velocity(rng.uniform(-0.35, 0.35, size=3)))
        report = hkm_check(_b_tensor(fluid, DissipationCoeffs(eta, zeta, chi, mu)), fluid)
        assert (report.negative_definite, report.positive_definite) == (True, True)


def test_hkm_fails_below_minus_four_thirds_eta():
    """zeta_tilde < -(4/3)eta makes sigma negative"""
    chi = 1.2 * _sigma_zero_chi(S0, 1.0, 0.0, 0.1)
    c = DissipationCoeffs(eta=1.0, zeta=0.0, chi=chi, mu=0.1)
    assert float(derive_coefficients(PARAMS, S0, c).zeta_tilde) < -4.0 / 3.0
    state = FluidState(S0)
    report = hkm_check(_b_tensor(state, c), state)
    assert not report.passed
    assert not report.positive_definite


def test_max_speed_does_not_increase_with_zeta_tilde():
    state = FluidState(S0)
    zeta_tildes, max_speeds = [], []
    for multiple in np.linspace(1.5, 0.2, 14):
        c = _coeffs(float(multiple))
        zeta_tildes.append(float(derive_coefficients(PARAMS, S0, c).zeta_tilde))
        max_speeds.append(signal_speeds(_b_tensor(state, c), state, [1.0, 0.0, 0.0]).max_speed)
    assert np.all(np.diff(zeta_tildes) > 0.0)
    assert np.all(np.diff(max_speeds) <= 1e-9)


def test_algebraic_and_spectral_status_agree_on_random_draws():
    rng = np.random.default_rng(12)
    for k in range(20):
        state, eta, zeta, mu = _random_draw(rng)
        threshold = chi_star(PARAMS, state, eta, zeta, mu)
        if k % 2:
            chi = rng.uniform(0.1, 0.9) * threshold
            expected = CausalityStatus.CAUSAL
        else:
            chi = threshold + rng.uniform(0.1, 0.5) * (_sigma_zero_chi(state, eta, zeta, mu) - threshold)
            expected = CausalityStatus.ACAUSAL
        cert = causality_certificate(PARAMS, state, DissipationCoeffs(eta, zeta, chi, mu),
                                     directions=3, seed=k)
        assert cert.agrees
        assert cert.algebraic_status is expected
        assert cert.spectral_status is expected
