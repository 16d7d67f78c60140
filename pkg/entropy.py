"""
Entropy Production
Rest-frame entropy production Q of a dissipation-tensor pair, its heat / shear /
bulk / diffusion split, the Eckart closed form, the O(eps^2) invariance of Q under
equivalence shifts and the leading-order sign check of the five-field model.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np

from coefficients import DissipationCoeffs
from config import settings
from dissipation import DissipationTensors, GeneralAnsatz
from equivalence import (
    ResidualFit, ShiftSpec, apply_shift, eckart_ansatz, euler_consistent_ensemble, fit_slope,
    new_theory_ansatz,
)
from kinematics import FluidState, KinematicsError, RestFrameGradients
from thermo import GasParams, Scalar, ThermoState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EntropyReport:
    heat: Scalar
    shear: Scalar
    bulk: Scalar
    diffusion: Scalar

    @property
    def q(self) -> Scalar:
        return self.heat + self.shear + self.bulk + self.diffusion

    @property
    def decomposition(self) -> Dict[str, Scalar]:
        return {"heat": self.heat, "shear": self.shear, "bulk": self.bulk, "diffusion": self.diffusion}


def _rest_theta(state: Union[ThermoState, FluidState]) -> float:
    if isinstance(state, FluidState):
        if not state.is_at_rest:
            raise KinematicsError("entropy production is evaluated in the rest frame")
        return state.theta
    return float(state.theta)


def entropy_production(state: Union[ThermoState, FluidState], rg: RestFrameGradients,
                       tensors: DissipationTensors) -> EntropyReport:
    """
    Q = -theta_dot dT00/theta^2 - (grad theta + theta u_dot).dT^{i0}/theta^2
        - d_j u_i dT^{ij}/theta - psi_dot dN0 - grad psi.dN^i
    Batch dimensions of rg and tensors must agree.
    """
    theta = _rest_theta(state)
    dT, dN = tensors.dT, tensors.dN

    thermal_force = rg.grad_theta + theta * rg.u_dot
    heat = (-rg.theta_dot * dT[..., 0, 0] / theta ** 2
            - np.einsum("...i,...i->...", thermal_force, dT[..., 1:, 0]) / theta ** 2)

    spatial = dT[..., 1:, 1:]
    trace = np.trace(spatial, axis1=-2, axis2=-1)
    traceless = spatial - (trace / 3.0)[..., None, None] * np.eye(3)
    shear = -np.einsum("...ij,...ij->...", rg.shear, traceless) / (2.0 * theta)
    bulk = -rg.div_u * trace / (3.0 * theta)

    diffusion = -rg.psi_dot * dN[..., 0] - np.einsum("...i,...i->...", rg.grad_psi, dN[..., 1:])
    return EntropyReport(heat=heat, shear=shear, bulk=bulk, diffusion=diffusion)


def eckart_quadratic_form(state: Union[ThermoState, FluidState], rg: RestFrameGradients,
                          c: DissipationCoeffs) -> EntropyReport:
    """Closed form of Q for the Eckart pair; every term is non-negative"""
    theta = _rest_theta(state)
    thermo = state.thermo if isinstance(state, FluidState) else state
    c = c.evaluate(thermo)
    thermal_force = rg.grad_theta + theta * rg.u_dot
    return EntropyReport(
        heat=c.chi * np.sum(thermal_force ** 2, axis=-1) / theta ** 2,
        shear=c.eta * np.sum(rg.shear ** 2, axis=(-2, -1)) / (2.0 * theta),
        bulk=c.zeta * rg.div_u ** 2 / theta,
        diffusion=c.mu * np.sum(rg.grad_psi ** 2, axis=-1),
    )


def delta_q_order(params: GasParams, state: ThermoState, shift: ShiftSpec,
                  scales: Sequence[float] = None, samples: int = None, seed: int = None,
                  base: Optional[GeneralAnsatz] = None) -> ResidualFit:
    """
    RMS of the change in Q when the eps-scaled shift acts on the eps-scaled base ansatz,
    fitted against eps. Compatible shifts scale as eps^2.
    """
    scales = sorted(settings.residual_scales if scales is None else scales, reverse=True)
    if base is None:
        base = eckart_ansatz(params, state, DissipationCoeffs(eta=1.0, zeta=0.0, chi=1.0, mu=0.1))

    residuals = []
    for eps in scales:
        rg = euler_consistent_ensemble(params, state, eps, samples, seed)
        before = base.scaled(eps)
        after = apply_shift(before, params, state, shift.scaled(eps))
        change = after.rest_frame_tensors(rg) - before.rest_frame_tensors(rg)
        dq = entropy_production(state, rg, change).q
        residuals.append(float(np.sqrt(np.mean(dq ** 2))))

    fit = fit_slope(scales, residuals)
    logger.info(f"dQ under '{shift.label or shift.kind.value}': slope {fit.slope:.3f}"
                + (" (exact)" if fit.exact else ""))
    return fit


@dataclass(frozen=True)
class EntropySignReport:
    epsilon: float
    samples: int
    min_q: float
    min_q_over_eps: float
    min_leading: float
    envelope_k: float
    passed: bool

    @property
    def bound_holds(self) -> bool:
        """min Q >= -K eps^2"""
        return self.min_q >= -self.envelope_k * self.epsilon ** 2 - 1e-15


def new_model_entropy_sign(params: GasParams, state: ThermoState, c: DissipationCoeffs,
                           samples: int = None, epsilon: float = None,
                           seed: int = None) -> EntropySignReport:
    """
    Q of the eps-scaled five-field model on Euler-consistent draws, split as
    eps*q1 + remainder with q1 taken on the unperturbed draws.
    """
    samples = settings.entropy_samples if samples is None else samples
    epsilon = settings.entropy_epsilon if epsilon is None else epsilon
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")

    unit = new_theory_ansatz(params, state, c)
    on_shell = euler_consistent_ensemble(params, state, 0.0, samples, seed)
    q1 = entropy_production(state, on_shell, unit.rest_frame_tensors(on_shell)).q

    if epsilon == 0.0:
        q_eps = np.zeros(samples)
        envelope, min_over_eps = 0.0, float("nan")
    else:
        rg = euler_consistent_ensemble(params, state, epsilon, samples, seed)
        q_eps = entropy_production(state, rg, unit.scaled(epsilon).rest_frame_tensors(rg)).q
        envelope = float(np.max(np.abs(q_eps - epsilon * q1)) / epsilon ** 2)
        min_over_eps = float(np.min(q_eps) / epsilon)

    tolerance = 1e-12 * max(1.0, float(np.max(np.abs(q1))))
    min_leading = float(np.min(q1))
    report = EntropySignReport(
        epsilon=epsilon, samples=samples, min_q=float(np.min(q_eps)),
        min_q_over_eps=min_over_eps, min_leading=min_leading, envelope_k=envelope,
        passed=min_leading >= -tolerance,
    )
    if report.passed:
        logger.info(f"✅ leading-order entropy production non-negative (min q1 = {min_leading:.3e}, K = {envelope:.3e})")
    else:
        logger.warning(f"❌ leading-order entropy production negative: min q1 = {min_leading:.3e}")
    return report
