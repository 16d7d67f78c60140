"""
One-dimensional five-field solver: fluxes, stepping, conservation and physics runs
"""
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from cli import build_run_config
from coefficients import DissipationCoeffs, chi_star, derive_coefficients
from config import load_run_file
from dissipation import delta_tensors_covariant, ideal_tensors, state_from_godunov
from kinematics import GB_LOWER, GradientField
from solver1d import (
    ConfigurationError,
    PerturbationSpec,
    RunConfig,
    Solver1D,
    SolverAbort,
    SolverState,
    ideal_characteristic_speeds,
    initial_state,
    run_decay,
    run_front_speed,
    self_convergence_order,
    semi_discrete_rhs,
)
from thermo import GasParams, eos_from_n_theta

PARAMS = GasParams()
S0 = eos_from_n_theta(PARAMS, 1.0, 1.0)
COEFFS = DissipationCoeffs(eta=1.0, zeta=0.0, chi=1.0, mu=0.1)
CONFIG_DIR = Path(__file__).parent / "configs"


# ========================================
# HELPERS
# ========================================

def _config(coeffs: DissipationCoeffs = COEFFS, **overrides) -> RunConfig:
    values = dict(params=PARAMS, coeffs=coeffs, background=S0, nx=32, length=10.0, t_end=1.0,
                  output_stride=1)
    values.update(overrides)
    return RunConfig(**values)


def _front_coeffs(multiple: float) -> DissipationCoeffs:
    chi = multiple * chi_star(PARAMS, S0, eta=20.0, zeta=0.0, mu=2.0)
    return DissipationCoeffs(eta=20.0, zeta=0.0, chi=chi, mu=2.0)


# ========================================
# TESTS
# ========================================

def test_constant_state_is_preserved():
    cfg = _config(perturbation=PerturbationSpec(amplitude=0.0), nx=16, t_end=50.0)
    solver = Solver1D(cfg)
    state = solver.initial_state()
    assert not np.any(state.psi_t)
    for _ in range(solver.steps):
        state = solver.step(state)
    assert np.max(np.abs(state.psi - solver.background_vars)) <= 1e-13
    assert np.max(np.abs(semi_discrete_rhs(state, cfg))) <= 1e-12


def test_flux_matches_covariant_tensors():
    """F = ideal + Delta(T, N) with d psi/dt and d psi/dx as the only gradients"""
    solver = Solver1D(_config())
    rng = np.random.default_rng(21)
    psi = solver.background_vars + 1e-2 * rng.normal(size=5)
    psi_t = rng.normal(size=5)
    psi_x = rng.normal(size=5)
    flux, _ = solver.flux(psi[None], psi_t[None], psi_x[None])

    state = state_from_godunov(PARAMS, psi)
    d = np.zeros((4, 5))
    d[0] = GB_LOWER * psi_t
    d[1] = GB_LOWER * psi_x
    derived = derive_coefficients(PARAMS, state.thermo, COEFFS)
    t, n = ideal_tensors(state)
    expected = (np.vstack([t, n[None]])
                + delta_tensors_covariant(state, GradientField(d), derived, COEFFS).stacked())
    np.testing.assert_allclose(flux[0], expected, atol=1e-11)


def test_ideal_characteristic_speeds():
    speeds = ideal_characteristic_speeds(PARAMS, S0)
    c_s = np.sqrt(4.0 / 15.0)
    np.testing.assert_allclose(speeds, [-c_s, 0.0, 0.0, 0.0, c_s], atol=1e-6)


def test_initial_conserved_densities_match_flux():
    cfg = _config(perturbation=PerturbationSpec(amplitude=1e-2))
    solver = Solver1D(cfg)
    state = solver.initial_state()
    np.testing.assert_allclose(solver.recover_psi_t(state.psi, state.conserved), state.psi_t, atol=1e-12)


def test_totals_are_conserved():
    """A 1% thermal mode needs a resolved grid; nx = 32 leaves the physical domain near t = 0.8"""
    cfg = _config(perturbation=PerturbationSpec(amplitude=1e-2, field="theta"), nx=128, t_end=2.0,
                  output_stride=32)
    series = Solver1D(cfg).run().series
    assert series[-1]["t"] == pytest.approx(2.0)
    for key in ("total_E", "total_P", "total_N"):
        assert series[-1][key] == pytest.approx(series[0][key], rel=1e-10, abs=1e-11)


def test_step_reverses():
    cfg = _config(perturbation=PerturbationSpec(amplitude=1e-2), filter_strength=0.0)
    solver = Solver1D(cfg)
    start = solver.initial_state()
    back = solver.step(solver.step(start, dt=1e-3), dt=-1e-3)
    np.testing.assert_allclose(back.psi, start.psi, atol=1e-12)
    np.testing.assert_allclose(back.conserved, start.conserved, atol=1e-12)


def test_second_derivative_readout():
    """psi_tt of the scheme agrees with a centred time difference of psi_t"""
    cfg = _config(perturbation=PerturbationSpec(amplitude=1e-2))
    solver = Solver1D(cfg)
    state = solver.initial_state()
    dt = 1e-3
    fd = (solver.step(state, dt=dt).psi_t - solver.step(state, dt=-dt).psi_t) / (2.0 * dt)
    psi_tt = semi_discrete_rhs(state, cfg)
    scale = np.max(np.abs(psi_tt))
    assert scale > 0.0
    assert np.max(np.abs(psi_tt - fd)) <= 1e-4 * scale


def test_abort_keeps_last_state():
    solver = Solver1D(_config())
    state = solver.initial_state()
    psi = state.psi.copy()
    psi[3, :4] = 0.0
    broken = SolverState(psi=psi, psi_t=state.psi_t, conserved=state.conserved, t=0.5)
    with pytest.raises(SolverAbort) as info:
        solver.step(broken)
    assert info.value.last_state is broken


def test_zero_diffusion_rejected():
    with pytest.raises(ConfigurationError):
        Solver1D(_config(DissipationCoeffs(eta=1.0, zeta=0.0, chi=1.0, mu=0.0)))


def test_run_config_validation():
    with pytest.raises(ValidationError):
        _config(cfl=1.0)
    with pytest.raises(ValidationError):
        _config(nx=8)
    with pytest.raises(ValidationError):
        _config(perturbation=PerturbationSpec(amplitude=0.5))


def test_time_step_lands_on_t_end():
    solver = Solver1D(_config(t_end=1.0))
    assert solver.steps * solver.dt == pytest.approx(1.0)
    assert solver.dt <= 0.5 * solver.grid.dx / solver.v_max * (1.0 + 1e-12)


def test_zero_pulse_has_no_front():
    cfg = _config(_front_coeffs(1.0), nx=64, length=40.0, t_end=0.5,
                  perturbation=PerturbationSpec(shape="pulse", field="transverse", amplitude=0.0))
    result = run_front_speed(cfg)
    assert not result.detected
    assert result.speed is None


def test_front_position_interpolates_half_maximum():
    """Half-maximum crossing of the cos^4 pulse lies at x0 + (2/pi) arccos(2^(-1/4))"""
    cfg = _config(_front_coeffs(1.0), nx=800, length=40.0, front_fraction=0.5,
                  perturbation=PerturbationSpec(shape="pulse", field="transverse", amplitude=0.05))
    solver = Solver1D(cfg)
    expected = cfg.pulse_center + 2.0 / np.pi * np.arccos(0.5 ** 0.25)
    assert solver.front_position(solver.initial_state()) == pytest.approx(expected, abs=1e-3)


def test_front_leaving_window_is_reported():
    cfg = _config(_front_coeffs(1.0), nx=64, length=8.0, t_end=6.0,
                  perturbation=PerturbationSpec(shape="pulse", field="transverse", amplitude=0.05))
    with pytest.raises(ConfigurationError):
        run_front_speed(cfg)


def test_zero_end_time_reports_initial_norms_only():
    cfg = _config(perturbation=PerturbationSpec(amplitude=1e-2), t_end=0.0)
    result = run_decay(cfg)
    assert len(result.series) == 1
    assert result.series[0]["t"] == 0.0
    assert result.initial_l2 > 0.0
    assert result.decayed


def test_named_initial_state():
    cfg = _config(perturbation=PerturbationSpec(field="psi", amplitude=1e-2))
    state = initial_state(cfg)
    assert state.t == 0.0
    assert state.psi.shape == (32, 5)
    np.testing.assert_allclose(state.psi[:, :4], np.tile(Solver1D(cfg).background_vars[:4], (32, 1)))


@pytest.mark.slow
def test_sine_perturbation_decays():
    cfg = _config(nx=64, t_end=20.0, output_stride=16,
                  perturbation=PerturbationSpec(amplitude=1e-3, field="longitudinal"))
    result = run_decay(cfg)
    assert result.decayed
    assert result.final_l2 < result.initial_l2


@pytest.mark.slow
def test_second_order_self_convergence():
    cfg = _config(nx=64, t_end=1.0, perturbation=PerturbationSpec(amplitude=1e-3))
    result = self_convergence_order(cfg)
    assert result.errors[1] < result.errors[0]
    assert result.order >= 1.9


@pytest.mark.slow
def test_sharp_front_moves_at_light_speed():
    cfg = build_run_config(load_run_file(CONFIG_DIR / "front_speed.toml"))
    result = run_front_speed(cfg)
    assert result.detected
    assert 0.95 <= result.speed <= 1.02


@pytest.mark.slow
def test_causal_front_is_slower_than_sharp_front():
    run = load_run_file(CONFIG_DIR / "front_speed.toml")
    sharp = run_front_speed(build_run_config(run))
    causal = run_front_speed(build_run_config(run).model_copy(update={"coeffs": _front_coeffs(0.5)}))
    assert causal.detected
    assert causal.speed <= 1.02
    assert causal.speed < sharp.speed


@pytest.mark.slow
@pytest.mark.parametrize("eta", [20.0, 40.0])
@pytest.mark.parametrize("multiple", [1.0, 0.85, 0.7, 0.55, 0.4])
def test_causal_fronts_stay_within_light_speed(eta, multiple):
    run = load_run_file(CONFIG_DIR / "front_speed.toml")
    chi = multiple * chi_star(PARAMS, S0, eta=eta, zeta=0.0, mu=2.0)
    coeffs = DissipationCoeffs(eta=eta, zeta=0.0, chi=chi, mu=2.0)
    result = run_front_speed(build_run_config(run).model_copy(update={"coeffs": coeffs}))
    assert result.detected
    assert result.speed <= 1.02
    if multiple == 1.0:
        assert result.speed >= 0.95


@pytest.mark.slow
def test_decay_is_resolution_independent():
    """Doubling nx moves the final norms by less than 5%"""
    finals = []
    for nx in (64, 128):
        cfg = _config(nx=nx, t_end=10.0, output_stride=64,
                      perturbation=PerturbationSpec(amplitude=1e-3, field="longitudinal"))
        finals.append(run_decay(cfg).series[-1])
    for key in ("L2", "Linf"):
        assert finals[1][key] == pytest.approx(finals[0][key], rel=0.05)
