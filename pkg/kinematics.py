"""
Minkowski Kinematics
Metric, 4-velocities, projectors, boosts and the transport of Godunov-Boillat
gradients between the lab frame and the local rest frame.

Stored tensors are contravariant; covariant components are produced on demand
with METRIC.
"""
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import numpy.typing as npt

from thermo import ThermoState

logger = logging.getLogger(__name__)

METRIC = np.diag([-1.0, 1.0, 1.0, 1.0])

# index-lowering signs for the five Godunov-Boillat slots (psi_4 is a scalar)
GB_LOWER = np.array([-1.0, 1.0, 1.0, 1.0, 1.0])

NORMALIZATION_TOL = 1e-9


class KinematicsError(ValueError):
    """Invalid 4-velocity or boost"""


@dataclass(frozen=True)
class FourVector:
    components: npt.NDArray[np.float64]

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if comps.shape != (4,):
            raise KinematicsError(f"a 4-vector needs 4 components, got shape {comps.shape}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def at_rest(cls) -> "FourVector":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    def lower(self) -> npt.NDArray[np.float64]:
        return METRIC @ self.components

    @property
    def norm2(self) -> float:
        return float(self.components @ METRIC @ self.components)

    @property
    def three_velocity(self) -> npt.NDArray[np.float64]:
        return self.components[1:] / self.components[0]


def four_velocity(v3: Sequence[float]) -> FourVector:
    v3 = np.asarray(v3, dtype=float)
    speed2 = float(v3 @ v3)
    if speed2 >= 1.0:
        raise KinematicsError(f"superluminal 3-velocity |v|^2={speed2}")
    lorentz = 1.0 / np.sqrt(1.0 - speed2)
    return FourVector(np.concatenate([[lorentz], lorentz * v3]))


def renormalize(u4: FourVector) -> FourVector:
    """Keep the spatial part and recompute U^0 so that U.U = -1"""
    spatial = u4.components[1:]
    return FourVector(np.concatenate([[np.sqrt(1.0 + spatial @ spatial)], spatial]))


def check_normalized(u4: FourVector, tol: float = NORMALIZATION_TOL):
    if abs(u4.norm2 + 1.0) > tol:
        raise KinematicsError(f"4-velocity not normalized: U.U = {u4.norm2}")
    if u4.components[0] <= 0:
        raise KinematicsError("4-velocity must be future-directed")


@dataclass(frozen=True)
class FluidState:
    """Thermodynamic point plus normalized 4-velocity"""
    thermo: ThermoState
    u4: FourVector = field(default_factory=FourVector.at_rest)

    def __post_init__(self):
        check_normalized(self.u4)

    @property
    def theta(self) -> float:
        return float(self.thermo.theta)

    @property
    def is_at_rest(self) -> bool:
        return bool(np.allclose(self.u4.components, [1.0, 0.0, 0.0, 0.0], rtol=0, atol=1e-12))

    def boost_matrix(self) -> npt.NDArray[np.float64]:
        """Lorentz matrix taking the rest-frame (1,0,0,0) to this 4-velocity"""
        return boost_from_four_velocity(self.u4)

    def at_rest(self) -> "FluidState":
        return FluidState(self.thermo, FourVector.at_rest())


def projector(u4: FourVector) -> npt.NDArray[np.float64]:
    """Pi^{ab} = g^{ab} + U^a U^b"""
    check_normalized(u4)
    u = u4.components
    return METRIC + np.outer(u, u)


def boost(v3: Sequence[float]) -> npt.NDArray[np.float64]:
    v3 = np.asarray(v3, dtype=float)
    speed2 = float(v3 @ v3)
    if speed2 >= 1.0:
        raise KinematicsError(f"superluminal boost |v|^2={speed2}")
    lam = np.eye(4)
    if speed2 == 0.0:
        return lam
    lorentz = 1.0 / np.sqrt(1.0 - speed2)
    lam[0, 0] = lorentz
    lam[0, 1:] = lorentz * v3
    lam[1:, 0] = lorentz * v3
    lam[1:, 1:] += (lorentz - 1.0) * np.outer(v3, v3) / speed2
    return lam


def boost_from_four_velocity(u4: FourVector) -> npt.NDArray[np.float64]:
    return boost(u4.three_velocity)


def inverse_boost(lam: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return METRIC @ lam.T @ METRIC


@dataclass(frozen=True)
class RestFrameGradients:
    """
    Rest-frame gradient data; every field may carry leading batch dimensions.
    grad_u[..., i, j] = du^i/dx^j.
    """
    theta_dot: npt.ArrayLike
    grad_theta: npt.ArrayLike
    u_dot: npt.ArrayLike
    grad_u: npt.ArrayLike
    psi_dot: npt.ArrayLike
    grad_psi: npt.ArrayLike

    def __post_init__(self):
        for name in ("theta_dot", "grad_theta", "u_dot", "grad_u", "psi_dot", "grad_psi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def zeros(cls, batch: tuple = ()) -> "RestFrameGradients":
        return cls(np.zeros(batch), np.zeros(batch + (3,)), np.zeros(batch + (3,)),
                   np.zeros(batch + (3, 3)), np.zeros(batch), np.zeros(batch + (3,)))

    @property
    def div_u(self):
        return np.trace(self.grad_u, axis1=-2, axis2=-1)

    @property
    def shear(self):
        """S u = grad u + grad u^T - (2/3)(div u) I"""
        gu = self.grad_u
        return gu + np.swapaxes(gu, -1, -2) - (2.0 / 3.0) * self.div_u[..., None, None] * np.eye(3)

    def __add__(self, other: "RestFrameGradients") -> "RestFrameGradients":
        return RestFrameGradients(
            self.theta_dot + other.theta_dot, self.grad_theta + other.grad_theta,
            self.u_dot + other.u_dot, self.grad_u + other.grad_u,
            self.psi_dot + other.psi_dot, self.grad_psi + other.grad_psi)

    def scaled(self, factor: float) -> "RestFrameGradients":
        return RestFrameGradients(
            factor * self.theta_dot, factor * self.grad_theta, factor * self.u_dot,
            factor * self.grad_u, factor * self.psi_dot, factor * self.grad_psi)


@dataclass(frozen=True)
class GradientField:
    """d[b][c] = d psi_c / dx^b with covariant psi_c = U_c/theta (c<4) and psi_4 = psi"""
    d: npt.NDArray[np.float64]

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.shape != (4, 5):
            raise KinematicsError(f"gradient field must be 4x5, got {d.shape}")
        object.__setattr__(self, "d", d)

    def dtheta(self, state: FluidState) -> npt.NDArray[np.float64]:
        """d theta / dx^b = theta^2 U^g d psi_g/dx^b"""
        return state.theta ** 2 * (self.d[:, :4] @ state.u4.components)

    def du(self, state: FluidState) -> npt.NDArray[np.float64]:
        """[s][b] = dU^s/dx^b = theta Pi^{sg} d psi_g/dx^b"""
        return state.theta * projector(state.u4) @ self.d[:, :4].T

    def dpsi(self) -> npt.NDArray[np.float64]:
        return self.d[:, 4].copy()

    @classmethod
    def from_physical(cls, state: FluidState, dtheta, du, dpsi) -> "GradientField":
        """
        Inverse of the accessors: d psi_g/dx^b = (dU_g/dx^b)/theta - U_g (dtheta/dx^b)/theta^2.
        du must satisfy U_s dU^s/dx^b = 0.
        """
        theta = state.theta
        u_low = state.u4.lower()
        du_low = METRIC @ np.asarray(du, dtype=float)          # [g][b]
        d = np.empty((4, 5))
        d[:, :4] = du_low.T / theta - np.outer(np.asarray(dtheta, dtype=float), u_low) / theta ** 2
        d[:, 4] = dpsi
        return cls(d)


def gradients_to_rest_frame(state: FluidState, g: GradientField) -> RestFrameGradients:
    lam = state.boost_matrix()
    d_rest = np.empty((4, 5))
    d_rest[:, :4] = lam.T @ g.d[:, :4] @ lam
    d_rest[:, 4] = lam.T @ g.d[:, 4]

    rest = state.at_rest()
    field_rest = GradientField(d_rest)
    dtheta = field_rest.dtheta(rest)
    du = field_rest.du(rest)
    return RestFrameGradients(
        theta_dot=dtheta[0],
        grad_theta=dtheta[1:],
        u_dot=du[1:, 0],
        grad_u=du[1:, 1:],
        psi_dot=d_rest[0, 4],
        grad_psi=d_rest[1:, 4],
    )


def gradients_from_rest_frame(state: FluidState, rg: RestFrameGradients) -> GradientField:
    """Push rest-frame data forward to the lab-frame gradient field of a moving state"""
    rest = state.at_rest()
    dtheta = np.concatenate([[float(rg.theta_dot)], rg.grad_theta])
    du = np.zeros((4, 4))
    du[1:, 0] = rg.u_dot
    du[1:, 1:] = rg.grad_u
    dpsi = np.concatenate([[float(rg.psi_dot)], rg.grad_psi])
    d_rest = GradientField.from_physical(rest, dtheta, du, dpsi).d

    lam_inv = inverse_boost(state.boost_matrix())
    d_lab = np.empty((4, 5))
    d_lab[:, :4] = lam_inv.T @ d_rest[:, :4] @ lam_inv
    d_lab[:, 4] = lam_inv.T @ d_rest[:, 4]
    return GradientField(d_lab)
