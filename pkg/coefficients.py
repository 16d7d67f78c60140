"""
Dissipation Coefficients
Input coefficients (eta, zeta, chi, mu), the derived set
(sigma, zeta_tilde, sigma_tilde, zt1, zt2, zt3), causality classification and
the sharp-causality heat-conduction threshold chi*.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Union

import numpy as np
from scipy.optimize import bisect

from config import settings
from thermo import GasParams, Scalar, ThermoState

logger = logging.getLogger(__name__)

CoefficientValue = Union[float, Callable[[ThermoState], Scalar]]


class CoefficientError(ValueError):
    """Coefficients outside their admissible range"""


class CausalityStatus(str, Enum):
    SHARPLY_CAUSAL = "SHARPLY_CAUSAL"
    CAUSAL = "CAUSAL"
    ACAUSAL = "ACAUSAL"


@dataclass(frozen=True)
class DissipationCoeffs:
    """
    Shear viscosity eta, bulk viscosity zeta, heat conductivity chi, diffusion mu.
    Each is a constant or a function of the thermodynamic state.
    """
    eta: CoefficientValue
    zeta: CoefficientValue
    chi: CoefficientValue
    mu: CoefficientValue

    def __post_init__(self):
        for name in ("eta", "zeta", "chi", "mu"):
            value = getattr(self, name)
            if callable(value):
                continue
            if not np.all(np.isfinite(value)) or np.any(np.asarray(value) < 0):
                raise CoefficientError(f"{name} must be finite and non-negative, got {value}")

    @property
    def is_constant(self) -> bool:
        return not any(callable(getattr(self, name)) for name in ("eta", "zeta", "chi", "mu"))

    def evaluate(self, state: ThermoState) -> "DissipationCoeffs":
        """Pointwise values at a state (constants pass through)"""
        values = {}
        for name in ("eta", "zeta", "chi", "mu"):
            value = getattr(self, name)
            values[name] = value(state) if callable(value) else value
        return DissipationCoeffs(**values)

    def scaled(self, eps: float) -> "DissipationCoeffs":
        if not self.is_constant:
            raise CoefficientError("scale state-dependent coefficients after evaluate()")
        return DissipationCoeffs(eps * self.eta, eps * self.zeta, eps * self.chi, eps * self.mu)

    def with_chi(self, chi: float) -> "DissipationCoeffs":
        return replace(self, chi=chi)

    def require_five_field(self):
        """eta > 0, chi > 0, mu > 0: the full five-field structure"""
        for name in ("eta", "chi", "mu"):
            value = np.asarray(getattr(self, name))
            if np.any(value <= 0):
                raise CoefficientError(f"{name} must be positive for the five-field system")


@dataclass(frozen=True)
class DerivedCoeffs:
    sigma: Scalar
    zeta_tilde: Scalar
    sigma_tilde: Scalar
    zt1: Scalar
    zt2: Scalar
    zt3: Scalar

    def scaled(self, eps: float) -> "DerivedCoeffs":
        return DerivedCoeffs(*(eps * getattr(self, name) for name in
                               ("sigma", "zeta_tilde", "sigma_tilde", "zt1", "zt2", "zt3")))


def feedback_factor(params: GasParams, state: ThermoState) -> Scalar:
    """(gamma-1)(1-m/h): the sigma -> zt2 feedback"""
    return params.gm1 * (1.0 - params.m / state.h)


def derive_coefficients(params: GasParams, state: ThermoState, c: DissipationCoeffs) -> DerivedCoeffs:
    """
    Closed-form solution of the implicit sigma <-> zeta_tilde system:
        sigma = ((4/3)eta + zeta + zt1 + zt3) / (1 - (gamma-1)(1-m/h))
    """
    c = c.evaluate(state)
    gm1, m = params.gm1, params.m
    theta, h = state.theta, state.h

    denominator = 1.0 - feedback_factor(params, state)
    if np.any(denominator <= 1e-12):
        raise CoefficientError(f"sigma denominator 1-(gamma-1)(1-m/h) = {denominator} is not positive")

    zt1 = -gm1 * (2.0 - params.gamma + m / h) * c.chi * theta
    zt3 = gm1 ** 2 * (m ** 2 / theta) * c.mu
    sigma = ((4.0 / 3.0) * c.eta + c.zeta + zt1 + zt3) / denominator
    zt2 = feedback_factor(params, state) * sigma
    zeta_tilde = c.zeta + zt1 + zt2 + zt3
    sigma_tilde = (sigma + c.chi * theta) / h
    return DerivedCoeffs(sigma=sigma, zeta_tilde=zeta_tilde, sigma_tilde=sigma_tilde,
                         zt1=zt1, zt2=zt2, zt3=zt3)


def fixed_point_coefficients(params: GasParams, state: ThermoState, c: DissipationCoeffs,
                             tol: float = 1e-15, max_iter: int = 10_000) -> DerivedCoeffs:
    """Iterate sigma_{k+1} = (4/3)eta + zeta + zt1 + zt3 + (gamma-1)(1-m/h) sigma_k"""
    c = c.evaluate(state)
    gm1, m = params.gm1, params.m
    theta, h = float(state.theta), float(state.h)
    zt1 = -gm1 * (2.0 - params.gamma + m / h) * c.chi * theta
    zt3 = gm1 ** 2 * (m ** 2 / theta) * c.mu
    factor = float(feedback_factor(params, state))

    sigma = 0.0
    for _ in range(max_iter):
        updated = (4.0 / 3.0) * c.eta + c.zeta + zt1 + zt3 + factor * sigma
        if abs(updated - sigma) <= tol * max(1.0, abs(updated)):
            sigma = updated
            break
        sigma = updated
    else:
        logger.warning(f"⚠️  fixed-point iteration did not settle after {max_iter} steps")

    zt2 = factor * sigma
    return DerivedCoeffs(sigma=sigma, zeta_tilde=c.zeta + zt1 + zt2 + zt3,
                         sigma_tilde=(sigma + c.chi * theta) / h, zt1=zt1, zt2=zt2, zt3=zt3)


def causality_status(c: DissipationCoeffs, d: DerivedCoeffs,
                     tol_abs: float = None) -> CausalityStatus:
    tol_abs = settings.sharp_tolerance if tol_abs is None else tol_abs
    eta = float(c.eta)
    margin = float(d.zeta_tilde) + eta / 3.0

    # sigma = (4/3)eta + zeta_tilde, so sigma >= eta follows
    sigma_margin = float(d.sigma) - eta
    if abs(sigma_margin - margin) > 1e-8 * max(1.0, abs(float(d.sigma))):
        logger.warning(f"⚠️  sigma - eta = {sigma_margin} disagrees with zeta_tilde + eta/3 = {margin}")

    if abs(margin) <= tol_abs:
        return CausalityStatus.SHARPLY_CAUSAL
    if margin >= -tol_abs:
        return CausalityStatus.CAUSAL
    return CausalityStatus.ACAUSAL


def chi_star(params: GasParams, state: ThermoState, eta: float, zeta: float, mu: float) -> float:
    """chi at which zeta_tilde = -eta/3"""
    gm1, m = params.gm1, params.m
    theta, h = float(state.theta), float(state.h)
    numerator = (eta / 3.0 + zeta + gm1 * (1.0 - m / h) * eta
                 + gm1 ** 2 * (m ** 2 / theta) * mu)
    denominator = gm1 * (2.0 - params.gamma + m / h) * theta
    return numerator / denominator


def chi_star_bisection(params: GasParams, state: ThermoState, eta: float, zeta: float, mu: float,
                       upper: float = 1e3, xtol: float = None) -> float:
    """Bisection on chi -> zeta_tilde(chi) + eta/3"""
    xtol = settings.bisection_xtol if xtol is None else xtol

    def margin(chi: float) -> float:
        derived = derive_coefficients(params, state, DissipationCoeffs(eta, zeta, chi, mu))
        return float(derived.zeta_tilde) + eta / 3.0

    return bisect(margin, 0.0, upper, xtol=xtol, maxiter=400)
