"""
Polytropic Gas Thermodynamics
Ideal-gas closure p = n*theta on top of the polytropic law rho = m*n + p/(gamma-1),
the Godunov-Boillat scalar variables (theta, psi) and the susceptibility matrix
A = d(rho, n)/d(theta, psi).

Units: c = k_B = 1. Every function broadcasts over numpy arrays so the solver can
evaluate whole grids at once.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Tuple, Union

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

Scalar = Union[float, npt.NDArray[np.float64]]


class DomainError(ValueError):
    """Raised when a thermodynamic input lies outside the physical domain"""


@dataclass(frozen=True)
class GasParams:
    m: float = 1.0
    gamma: float = 4.0 / 3.0
    s0: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m <= 0:
            raise DomainError(f"particle mass must be positive, got m={self.m}")
        if not 1.0 < self.gamma < 2.0:
            raise DomainError(f"adiabatic exponent must lie in (1, 2), got gamma={self.gamma}")

    @property
    def gm1(self) -> float:
        return self.gamma - 1.0


@dataclass(frozen=True)
class ThermoState:
    """Complete local thermodynamic point"""
    n: Scalar
    theta: Scalar
    rho: Scalar
    p: Scalar
    h: Scalar
    s: Scalar
    psi: Scalar

    @property
    def g(self) -> Scalar:
        """Chemical potential h - theta*s"""
        return self.h - self.theta * self.s

    @property
    def enthalpy_density(self) -> Scalar:
        return self.rho + self.p


@dataclass(frozen=True)
class PressureDerivatives:
    p: Scalar
    p_theta: Scalar
    p_psi: Scalar
    p_theta_theta: Scalar
    p_theta_psi: Scalar
    p_psi_psi: Scalar


class PressureFunction(Protocol):
    """Any equation of state given as p(theta, psi)"""

    def pressure_derivatives(self, theta: Scalar, psi: Scalar) -> PressureDerivatives:
        ...


@dataclass(frozen=True)
class IdealGas:
    """p(theta, psi) = theta^(gamma/(gamma-1)) * exp(psi - m/theta - gamma/(gamma-1) + s0)"""
    params: GasParams

    def pressure_derivatives(self, theta: Scalar, psi: Scalar) -> PressureDerivatives:
        m, gm1 = self.params.m, self.params.gm1
        k = self.params.gamma / gm1
        theta = np.asarray(theta, dtype=float)
        n = _density(self.params, theta, psi)
        p = n * theta

        # d ln p / d theta and its derivative
        l1 = k / theta + m / theta ** 2
        l2 = -k / theta ** 2 - 2.0 * m / theta ** 3
        p_theta = p * l1
        return PressureDerivatives(
            p=p,
            p_theta=p_theta,
            p_psi=p,
            p_theta_theta=p * (l1 * l1 + l2),
            p_theta_psi=p_theta,
            p_psi_psi=p,
        )


@dataclass(frozen=True)
class SusceptibilityMatrix:
    """A with rows (rho_theta, rho_psi) and (n_theta, n_psi)"""
    a: npt.NDArray[np.float64]
    theta: Scalar
    p_theta: Scalar
    p_psi: Scalar

    @property
    def rho_theta(self) -> Scalar:
        return self.a[..., 0, 0]

    @property
    def rho_psi(self) -> Scalar:
        return self.a[..., 0, 1]

    @property
    def n_theta(self) -> Scalar:
        return self.a[..., 1, 0]

    @property
    def n_psi(self) -> Scalar:
        return self.a[..., 1, 1]

    @property
    def det(self) -> Scalar:
        return np.linalg.det(self.a)

    def apply(self, d_theta: Scalar, d_psi: Scalar) -> Tuple[Scalar, Scalar]:
        """(d_rho, d_n) induced by (d_theta, d_psi)"""
        d_rho = self.rho_theta * d_theta + self.rho_psi * d_psi
        d_n = self.n_theta * d_theta + self.n_psi * d_psi
        return d_rho, d_n

    def solve(self, d_rho: Scalar, d_n: Scalar) -> Tuple[Scalar, Scalar]:
        """(d_theta, d_psi) producing (d_rho, d_n)"""
        det = self.det
        d_theta = (self.n_psi * d_rho - self.rho_psi * d_n) / det
        d_psi = (-self.n_theta * d_rho + self.rho_theta * d_n) / det
        return d_theta, d_psi

    def pressure_change(self, d_theta: Scalar, d_psi: Scalar) -> Scalar:
        return self.p_theta * d_theta + self.p_psi * d_psi


@dataclass(frozen=True)
class EulerRates:
    theta_dot: Scalar
    n_dot: Scalar
    p_dot: Scalar
    rho_dot: Scalar
    psi_dot: Scalar


def _check_positive(name: str, value: Scalar):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be positive and finite, got {value}")


def _density(params: GasParams, theta: Scalar, psi: Scalar) -> Scalar:
    gm1 = params.gm1
    log_n = (psi - params.m / theta - params.gamma / gm1 + params.s0
             + np.log(theta) / gm1)
    return np.exp(log_n)


def eos_from_n_theta(params: GasParams, n: Scalar, theta: Scalar) -> ThermoState:
    _check_positive("n", n)
    _check_positive("theta", theta)
    n = np.asarray(n, dtype=float) if np.ndim(n) else float(n)
    theta = np.asarray(theta, dtype=float) if np.ndim(theta) else float(theta)

    gm1 = params.gm1
    p = n * theta
    rho = params.m * n + p / gm1
    h = params.m + params.gamma * theta / gm1
    s = np.log(theta) / gm1 - np.log(n) + params.s0
    psi = h / theta - s
    return ThermoState(n=n, theta=theta, rho=rho, p=p, h=h, s=s, psi=psi)


def eos_from_godunov(params: GasParams, theta: Scalar, psi: Scalar) -> ThermoState:
    """Scalar part of the Godunov-Boillat inverse: (theta, psi) -> state"""
    _check_positive("theta", theta)
    n = _density(params, theta, psi)
    return eos_from_n_theta(params, n, theta)


def susceptibility(params: GasParams, state: ThermoState,
                   eos: Optional[PressureFunction] = None) -> SusceptibilityMatrix:
    """
    A from the partials of p(theta, psi):
        rho_theta = theta*p_tt            rho_psi = theta*p_tp - p_p
        n_theta = (theta*p_tp - p_p)/theta^2    n_psi = p_pp/theta
    """
    eos = eos or IdealGas(params)
    d = eos.pressure_derivatives(state.theta, state.psi)
    theta = state.theta
    cross = theta * d.p_theta_psi - d.p_psi
    a = np.stack([
        np.stack([theta * d.p_theta_theta, cross], axis=-1),
        np.stack([cross / theta ** 2, d.p_psi_psi / theta], axis=-1),
    ], axis=-2)
    return SusceptibilityMatrix(a=a, theta=theta, p_theta=d.p_theta, p_psi=d.p_psi)


def euler_rates(params: GasParams, state: ThermoState, div_u: Scalar) -> EulerRates:
    """Ideal-fluid rest-frame rates, each an exact multiple of div_u"""
    gm1 = params.gm1
    return EulerRates(
        theta_dot=(-gm1 * state.theta) * div_u,
        n_dot=(-state.n) * div_u,
        p_dot=(-params.gamma * state.p) * div_u,
        rho_dot=(-(state.rho + state.p)) * div_u,
        psi_dot=(gm1 * params.m / state.theta) * div_u,
    )


def sound_speed(params: GasParams, state: ThermoState) -> Scalar:
    return np.sqrt(params.gamma * state.p / (state.rho + state.p))
