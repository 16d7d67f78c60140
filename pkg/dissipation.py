"""
Dissipation Tensor Assembly
Ideal tensors, the covariant first-order dissipation tensors (Delta T, Delta N),
their rest-frame matrix forms, the 16-coefficient equivariant ansatz, the
Godunov-Boillat variables and the second-order coefficient tensor B.

Sign convention: every constructor builds -Delta T / -Delta N (the displayed
forms) and negates once on return.
"""
import logging
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from coefficients import DerivedCoeffs, DissipationCoeffs
from kinematics import (
    GB_LOWER, METRIC, FluidState, FourVector, GradientField, KinematicsError,
    RestFrameGradients, projector,
)
from thermo import DomainError, GasParams, ThermoState, eos_from_godunov

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class DissipationTensors:
    """Delta T^{ab} (symmetric) and Delta N^b; leading batch dimensions allowed"""
    dT: Array
    dN: Array

    def __post_init__(self):
        dT = np.asarray(self.dT, dtype=float)
        dN = np.asarray(self.dN, dtype=float)
        scale = 1.0 + np.max(np.abs(dT), initial=0.0)
        if not np.allclose(dT, np.swapaxes(dT, -1, -2), rtol=0.0, atol=1e-12 * scale):
            raise ValueError("Delta T must be symmetric")
        object.__setattr__(self, "dT", dT)
        object.__setattr__(self, "dN", dN)

    @classmethod
    def zeros(cls, batch: tuple = ()) -> "DissipationTensors":
        return cls(np.zeros(batch + (4, 4)), np.zeros(batch + (4,)))

    def __add__(self, other: "DissipationTensors") -> "DissipationTensors":
        return DissipationTensors(self.dT + other.dT, self.dN + other.dN)

    def __sub__(self, other: "DissipationTensors") -> "DissipationTensors":
        return DissipationTensors(self.dT - other.dT, self.dN - other.dN)

    def stacked(self) -> Array:
        """(..., 5, 4): rows 0-3 Delta T^{a b}, row 4 Delta N^b"""
        return np.concatenate([self.dT, self.dN[..., None, :]], axis=-2)


# ========================================
# IDEAL PART
# ========================================

def ideal_flux_arrays(rho, p, n, u4: Array) -> Array:
    """(..., 5, 4) stack of T = (rho+p) U U + p g and N = n U"""
    u = np.asarray(u4, dtype=float)
    rho, p, n = (np.asarray(x, dtype=float) for x in (rho, p, n))
    flux = np.empty(u.shape[:-1] + (5, 4))
    flux[..., :4, :] = ((rho + p)[..., None, None] * np.einsum("...a,...b->...ab", u, u)
                        + p[..., None, None] * METRIC)
    flux[..., 4, :] = n[..., None] * u
    return flux


def ideal_tensors(state: FluidState) -> Tuple[Array, Array]:
    th = state.thermo
    flux = ideal_flux_arrays(th.rho, th.p, th.n, state.u4.components)
    return flux[:4], flux[4]


# ========================================
# COVARIANT DISSIPATION TENSORS
# ========================================

def delta_tensors_covariant(state: FluidState, g: GradientField, d: DerivedCoeffs,
                            c: DissipationCoeffs) -> DissipationTensors:
    c = c.evaluate(state.thermo)
    u = state.u4.components
    pi = projector(state.u4)

    dtheta = g.dtheta(state)               # covariant
    du = g.du(state)                       # [s][b] = dU^s/dx^b
    dpsi = g.dpsi()                        # covariant
    div_u = np.trace(du)
    accel = du @ u                         # U^b dU^s/dx^b
    theta_dot = u @ dtheta
    grad_u_low = METRIC @ du               # [g][b] = dU_g/dx^b

    strain = grad_u_low + grad_u_low.T - (2.0 / 3.0) * METRIC * div_u
    minus_dT = c.eta * pi @ strain @ pi
    minus_dT = minus_dT + d.zeta_tilde * pi * div_u
    minus_dT = minus_dT + d.sigma * (np.outer(u, u) * div_u - np.outer(accel, u) - np.outer(u, accel))
    dtheta_up = METRIC @ dtheta
    minus_dT = minus_dT + c.chi * (np.outer(u, dtheta_up) + np.outer(dtheta_up, u) - METRIC * theta_dot)

    minus_dN = c.mu * (METRIC @ dpsi) + d.sigma_tilde * (u * div_u - accel)
    return DissipationTensors(-minus_dT, -minus_dN)


def rest_frame_matrices(state: FluidState, rg: RestFrameGradients, d: DerivedCoeffs,
                        c: DissipationCoeffs) -> Tuple[Array, Array]:
    """The displayed -Delta T|_0 and -Delta N|_0 (not negated)"""
    if not state.is_at_rest:
        raise KinematicsError("rest_frame_matrices needs a state at rest")
    c = c.evaluate(state.thermo)
    div_u = float(rg.div_u)

    m_t = np.empty((4, 4))
    m_t[0, 0] = -c.chi * rg.theta_dot + d.sigma * div_u
    m_t[0, 1:] = c.chi * rg.grad_theta - d.sigma * rg.u_dot
    m_t[1:, 0] = m_t[0, 1:]
    m_t[1:, 1:] = c.eta * rg.shear + (d.zeta_tilde * div_u - c.chi * rg.theta_dot) * np.eye(3)

    m_n = np.empty(4)
    m_n[0] = -c.mu * rg.psi_dot + d.sigma_tilde * div_u
    m_n[1:] = c.mu * rg.grad_psi - d.sigma_tilde * rg.u_dot
    return m_t, m_n


# ========================================
# GENERAL EQUIVARIANT ANSATZ
# ========================================

@dataclass(frozen=True)
class AnsatzSectors:
    """Rest-frame sectors: -T00 = P, -T0i = Q, -Tij = R I + S, -N0 = P_hat, -Ni = Q_hat"""
    P: Array
    Q: Array
    R: Array
    S: Array
    P_hat: Array
    Q_hat: Array

    def to_tensors(self) -> DissipationTensors:
        P = np.asarray(self.P, dtype=float)
        batch = P.shape
        minus_t = np.zeros(batch + (4, 4))
        minus_t[..., 0, 0] = P
        minus_t[..., 0, 1:] = self.Q
        minus_t[..., 1:, 0] = self.Q
        minus_t[..., 1:, 1:] = np.asarray(self.R)[..., None, None] * np.eye(3) + self.S
        minus_n = np.zeros(batch + (4,))
        minus_n[..., 0] = self.P_hat
        minus_n[..., 1:] = self.Q_hat
        return DissipationTensors(-minus_t, -minus_n)


@dataclass(frozen=True)
class GeneralAnsatz:
    """Sixteen gradient coefficients of the equivariant first-order ansatz"""
    # P: theta_dot, div u, psi_dot
    tau: float = 0.0
    sigma_c: float = 0.0
    iota_check: float = 0.0
    # Q: grad theta, u_dot, grad psi
    nu: float = 0.0
    varsigma_check: float = 0.0
    upsilon: float = 0.0
    # R
    omega: float = 0.0
    zeta_tilde: float = 0.0
    iota_tilde: float = 0.0
    # S
    eta: float = 0.0
    # P_hat
    tau_hat: float = 0.0
    sigma_hat: float = 0.0
    iota_hat: float = 0.0
    # Q_hat
    nu_hat: float = 0.0
    varsigma_hat: float = 0.0
    upsilon_hat: float = 0.0

    @classmethod
    def field_names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_vector(cls, values: npt.ArrayLike) -> "GeneralAnsatz":
        return cls(*(float(v) for v in np.asarray(values, dtype=float)))

    @classmethod
    def new_theory(cls, d: DerivedCoeffs, c: DissipationCoeffs) -> "GeneralAnsatz":
        ansatz = cls(
            tau=-c.chi, sigma_c=d.sigma,
            nu=c.chi, varsigma_check=-d.sigma,
            omega=-c.chi, zeta_tilde=d.zeta_tilde,
            eta=c.eta,
            sigma_hat=d.sigma_tilde, iota_hat=-c.mu,
            varsigma_hat=-d.sigma_tilde, upsilon_hat=c.mu,
        )
        if not ansatz.satisfies_new_theory_selection():
            raise ValueError("new-theory coefficients violate the selection rules")
        return ansatz

    def satisfies_new_theory_selection(self, tol: float = 1e-12) -> bool:
        scale = tol * max(1.0, float(np.max(np.abs(self.as_vector()))))
        rules = [
            self.nu + self.tau, self.nu + self.omega,
            self.varsigma_check + self.sigma_c,
            self.sigma_hat + self.varsigma_hat,
            self.upsilon_hat + self.iota_hat,
            self.tau_hat, self.nu_hat, self.iota_tilde, self.iota_check, self.upsilon,
        ]
        return all(abs(r) <= scale for r in rules)

    def as_vector(self) -> Array:
        return np.array([getattr(self, name) for name in self.field_names()], dtype=float)

    def __add__(self, other: "GeneralAnsatz") -> "GeneralAnsatz":
        return GeneralAnsatz.from_vector(self.as_vector() + other.as_vector())

    def __sub__(self, other: "GeneralAnsatz") -> "GeneralAnsatz":
        return GeneralAnsatz.from_vector(self.as_vector() - other.as_vector())

    def scaled(self, eps: float) -> "GeneralAnsatz":
        return GeneralAnsatz.from_vector(eps * self.as_vector())

    def updated(self, **increments: float) -> "GeneralAnsatz":
        """Add the given increments to the named slots"""
        values = asdict(self)
        for name, inc in increments.items():
            values[name] = values[name] + inc
        return replace(self, **values)

    def rest_frame_sectors(self, rg: RestFrameGradients) -> AnsatzSectors:
        div_u = rg.div_u
        td, pd = rg.theta_dot, rg.psi_dot
        return AnsatzSectors(
            P=self.tau * td + self.sigma_c * div_u + self.iota_check * pd,
            Q=self.nu * rg.grad_theta + self.varsigma_check * rg.u_dot + self.upsilon * rg.grad_psi,
            R=self.omega * td + self.zeta_tilde * div_u + self.iota_tilde * pd,
            S=self.eta * rg.shear,
            P_hat=self.tau_hat * td + self.sigma_hat * div_u + self.iota_hat * pd,
            Q_hat=self.nu_hat * rg.grad_theta + self.varsigma_hat * rg.u_dot + self.upsilon_hat * rg.grad_psi,
        )

    def rest_frame_tensors(self, rg: RestFrameGradients) -> DissipationTensors:
        return self.rest_frame_sectors(rg).to_tensors()


def ansatz_evaluate(a: GeneralAnsatz, state: FluidState, g: GradientField) -> DissipationTensors:
    u = state.u4.components
    pi = projector(state.u4)
    dtheta = g.dtheta(state)
    du = g.du(state)
    dpsi = g.dpsi()
    div_u = np.trace(du)
    accel_low = METRIC @ (du @ u)
    theta_dot = u @ dtheta
    psi_dot = u @ dpsi
    grad_u_low = METRIC @ du

    P = a.tau * theta_dot + a.sigma_c * div_u + a.iota_check * psi_dot
    Q = a.nu * dtheta + a.varsigma_check * accel_low + a.upsilon * dpsi
    R = a.omega * theta_dot + a.zeta_tilde * div_u + a.iota_tilde * psi_dot
    S = a.eta * (grad_u_low + grad_u_low.T - (2.0 / 3.0) * METRIC * div_u)
    P_hat = a.tau_hat * theta_dot + a.sigma_hat * div_u + a.iota_hat * psi_dot
    Q_hat = a.nu_hat * dtheta + a.varsigma_hat * accel_low + a.upsilon_hat * dpsi

    q_up = pi @ Q
    minus_dT = P * np.outer(u, u) + np.outer(q_up, u) + np.outer(u, q_up) + R * pi + pi @ S @ pi
    minus_dN = P_hat * u + pi @ Q_hat
    return DissipationTensors(-minus_dT, -minus_dN)


# ========================================
# GODUNOV-BOILLAT VARIABLES
# ========================================

@dataclass(frozen=True)
class GodunovFields:
    theta: Array
    u4: Array
    thermo: ThermoState


def godunov_vars(state: FluidState) -> Array:
    """(U^0/theta, U^1/theta, U^2/theta, U^3/theta, psi), stored contravariantly"""
    return np.concatenate([state.u4.components / state.theta, [float(state.thermo.psi)]])


def godunov_fields(params: GasParams, psi: npt.ArrayLike) -> GodunovFields:
    """Batched inverse of godunov_vars over (..., 5) arrays"""
    psi = np.asarray(psi, dtype=float)
    norm2 = -psi[..., 0] ** 2 + np.sum(psi[..., 1:4] ** 2, axis=-1)
    if np.any(norm2 >= 0.0) or np.any(psi[..., 0] <= 0.0):
        raise DomainError("Godunov-Boillat vector is not future timelike (theta undefined)")
    theta = 1.0 / np.sqrt(-norm2)
    u4 = theta[..., None] * psi[..., :4]
    return GodunovFields(theta=theta, u4=u4, thermo=eos_from_godunov(params, theta, psi[..., 4]))


def state_from_godunov(params: GasParams, vars5: npt.ArrayLike) -> FluidState:
    fields_ = godunov_fields(params, np.asarray(vars5, dtype=float).reshape(5))
    thermo = ThermoState(**{k: float(v) for k, v in asdict(fields_.thermo).items()})
    return FluidState(thermo, FourVector(fields_.u4))


# ========================================
# SECOND-ORDER COEFFICIENT TENSOR
# ========================================

def _scale4(x) -> Array:
    return np.asarray(x, dtype=float)[..., None, None, None, None]


def coefficient_arrays(u4: Array, theta, eta, chi, mu, sigma, zeta_tilde,
                       sigma_tilde=None) -> Array:
    """
    (..., 5, 4, 5, 4) array [a][b][c][d] contracting d^2 psi_c/dx^b dx^d.
    With sigma_tilde given, the particle row also carries the block
    sigma_tilde*theta*(U^b Pi^{cd} - U^d Pi^{bc}), making it the full
    first-order coefficient of -Delta(T, N).
    """
    u = np.asarray(u4, dtype=float)
    theta = np.asarray(theta, dtype=float)
    uu = np.einsum("...a,...b->...ab", u, u)
    pi = METRIC + uu

    uuuu = np.einsum("...ab,...gd->...abgd", uu, uu)
    uupi = np.einsum("...ab,...gd->...abgd", uu, pi)
    piuu = np.einsum("...ab,...gd->...abgd", pi, uu)
    pipi = np.einsum("...ab,...gd->...abgd", pi, pi)
    heat = (np.einsum("...ad,...b,...g->...abgd", pi, u, u)
            + np.einsum("...bd,...a,...g->...abgd", pi, u, u))
    accel = (np.einsum("...ag,...b,...d->...abgd", pi, u, u)
             + np.einsum("...bg,...a,...d->...abgd", pi, u, u))
    shear = (np.einsum("...ag,...bd->...abgd", pi, pi)
             + np.einsum("...ad,...bg->...abgd", pi, pi)
             - (2.0 / 3.0) * pipi)

    chi_t2 = _scale4(chi * theta ** 2)
    sig_t = _scale4(sigma * theta)
    velocity = (-chi_t2 * uuuu + sig_t * uupi
                - chi_t2 * piuu + _scale4(zeta_tilde * theta) * pipi
                + chi_t2 * heat
                - sig_t * accel
                + _scale4(eta * theta) * shear)

    b = np.zeros(u.shape[:-1] + (5, 4, 5, 4))
    b[..., :4, :, :4, :] = velocity
    b[..., 4, :, 4, :] = np.asarray(mu, dtype=float)[..., None, None] * (pi - uu)
    if sigma_tilde is not None:
        st = np.asarray(sigma_tilde * theta, dtype=float)[..., None, None, None]
        b[..., 4, :, :4, :] = st * (np.einsum("...b,...gd->...bgd", u, pi)
                                    - np.einsum("...d,...bg->...bgd", u, pi))
    return b


@dataclass(frozen=True)
class BTensor:
    b: Array

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.shape != (5, 4, 5, 4):
            raise ValueError(f"B tensor must be 5x4x5x4, got {b.shape}")
        scale = 1e-12 * (1.0 + np.max(np.abs(b)))
        if np.max(np.abs(b[:4, :, 4, :])) > scale or np.max(np.abs(b[4, :, :4, :])) > scale:
            raise ValueError("mixed velocity/diffusion blocks of B must vanish")
        object.__setattr__(self, "b", b)

    def contract(self, xi_b: npt.ArrayLike, xi_d: Optional[npt.ArrayLike] = None) -> Array:
        """B^{a b c d} xi_b xi_d; xi may carry a leading batch dimension"""
        xi_b = np.asarray(xi_b, dtype=float)
        xi_d = xi_b if xi_d is None else np.asarray(xi_d, dtype=float)
        return np.einsum("abcd,...b,...d->...ac", self.b, xi_b, xi_d)

    @property
    def time_block(self) -> Array:
        return self.b[:, 0, :, 0]


def assemble_b_tensor(state: FluidState, d: DerivedCoeffs, c: DissipationCoeffs) -> BTensor:
    c = c.evaluate(state.thermo)
    return BTensor(coefficient_arrays(state.u4.components, state.theta, c.eta, c.chi, c.mu,
                                      d.sigma, d.zeta_tilde))


def flux_coefficient_tensor(state: FluidState, d: DerivedCoeffs, c: DissipationCoeffs) -> Array:
    """C with -Delta(T,N)^{a b} = C^{a b c d} d psi_c/dx^d exactly"""
    c = c.evaluate(state.thermo)
    return coefficient_arrays(state.u4.components, state.theta, c.eta, c.chi, c.mu,
                              d.sigma, d.zeta_tilde, d.sigma_tilde)


def boost_b_tensor(b, lam: Array):
    """Transform a B-like array (a, c five-valued; b, d spacetime) by a Lorentz matrix"""
    lam5 = np.eye(5)
    lam5[:4, :4] = lam
    raw = b.b if isinstance(b, BTensor) else np.asarray(b, dtype=float)
    out = np.einsum("aA,bB,cC,dD,...ABCD->...abcd", lam5, lam, lam5, lam, raw)
    return BTensor(out) if isinstance(b, BTensor) else out
