"""
One-Dimensional Five-Field Solver
Periodic method-of-lines integration of the second-order system in Godunov-Boillat
variables. The evolved pair is (psi, E) with E^a = T^{a0} + Delta T^{a0} the conserved
densities; psi_t is recovered cell by cell from E, and E advances by the divergence
of the face fluxes, so the discrete totals of E are conserved to round-off.

Godunov-Boillat arrays are stored contravariantly and lowered with GB_LOWER before
any contraction with the coefficient tensor.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, InstanceOf
from scipy import linalg

from coefficients import CoefficientError, DissipationCoeffs, derive_coefficients
from config import settings
from dissipation import (
    GodunovFields, assemble_b_tensor, coefficient_arrays, godunov_fields, godunov_vars,
    ideal_flux_arrays,
)
from hyperbolicity import hkm_check, signal_speeds
from kinematics import GB_LOWER, FluidState
from thermo import DomainError, GasParams, ThermoState

logger = logging.getLogger(__name__)

# perturbed Godunov-Boillat slot per perturbation field
FIELD_COMPONENT = {"theta": 0, "longitudinal": 1, "transverse": 2, "psi": 4}


class ConfigurationError(ValueError):
    """Run configuration the solver cannot honour"""


class SolverAbort(RuntimeError):
    """Integration stopped (state left the physical domain); carries the last valid state"""

    def __init__(self, message: str, last_state: Optional["SolverState"] = None):
        self.last_state = last_state
        super().__init__(message)


class PerturbationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: Literal["mode", "pulse"] = "mode"
    field: Literal["theta", "longitudinal", "transverse", "psi"] = "longitudinal"
    amplitude: float = Field(1e-3, ge=0, le=1e-1)
    mode: int = Field(1, ge=1)
    width: float = Field(1.0, gt=0)
    center: Optional[float] = None   # pulse centre; defaults to length/4


class RunConfig(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, extra="forbid")

    params: InstanceOf[GasParams]
    coeffs: InstanceOf[DissipationCoeffs]
    background: InstanceOf[ThermoState]
    perturbation: PerturbationSpec = Field(default_factory=PerturbationSpec)
    nx: int = Field(256, ge=16)
    length: float = Field(10.0, gt=0)
    cfl: float = Field(0.5, gt=0, le=0.9)
    t_end: float = Field(20.0, ge=0)
    output_stride: int = Field(10, ge=1)
    filter_strength: float = Field(default_factory=lambda: settings.filter_strength, ge=0)
    front_threshold: float = Field(default_factory=lambda: settings.front_threshold, gt=0)
    front_fraction: float = Field(default_factory=lambda: settings.front_fraction, ge=0, lt=1)
    fit_start: float = Field(0.0, ge=0)
    snapshots: bool = False

    @property
    def pulse_center(self) -> float:
        center = self.perturbation.center
        return self.length / 4.0 if center is None else center


@dataclass(frozen=True)
class Grid1D:
    nx: int
    length: float
    periodic: bool = True

    def __post_init__(self):
        if self.nx < 16:
            raise ConfigurationError(f"nx must be at least 16, got {self.nx}")
        if self.length <= 0:
            raise ConfigurationError("domain length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx


@dataclass(frozen=True)
class SolverState:
    psi: np.ndarray        # (nx, 5) contravariant Godunov-Boillat variables
    psi_t: np.ndarray      # (nx, 5)
    conserved: np.ndarray  # (nx, 5) E^a = F^{a0}
    t: float


@dataclass
class RunResult:
    series: List[Dict[str, float]]
    snapshots: List[Tuple[float, np.ndarray]]
    final: SolverState


@dataclass
class DecayResult:
    series: List[Dict[str, float]]
    snapshots: List[Tuple[float, np.ndarray]]

    @property
    def initial_l2(self) -> float:
        return self.series[0]["L2"]

    @property
    def final_l2(self) -> float:
        return self.series[-1]["L2"]

    @property
    def decayed(self) -> bool:
        """A run with no steps (t_end = 0) or no perturbation counts as decayed"""
        if len(self.series) == 1 or self.initial_l2 == 0.0:
            return True
        return self.final_l2 < self.initial_l2


@dataclass
class FrontSpeedResult:
    detected: bool
    speed: Optional[float]
    times: List[float]
    fronts: List[Optional[float]]
    series: List[Dict[str, float]]


@dataclass
class ConvergenceResult:
    nx: List[int]
    errors: List[float]
    order: float


def _centered(a: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(a, -1, axis=0) - np.roll(a, 1, axis=0)) / (2.0 * dx)


def _solve_cells(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return np.linalg.solve(matrix, rhs[..., None])[..., 0]


class Solver1D:
    """Grid, background, time step and RK4 stepping for one RunConfig"""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.params = cfg.params
        self.coeffs = cfg.coeffs
        self.grid = Grid1D(cfg.nx, cfg.length)
        self.background = FluidState(cfg.background)
        self.background_vars = godunov_vars(self.background)
        self.v_max = self._background_speed()

        dt_cfl = cfg.cfl * self.grid.dx / self.v_max
        self.steps = math.ceil(cfg.t_end / dt_cfl) if cfg.t_end > 0 else 0
        self.dt = cfg.t_end / self.steps if self.steps else dt_cfl
        logger.info(f"grid nx={cfg.nx} dx={self.grid.dx:.4g}, v_max={self.v_max:.6f}, "
                    f"dt={self.dt:.4g}, {self.steps} steps")

    def _background_speed(self) -> float:
        thermo = self.background.thermo
        try:
            c = self.coeffs.evaluate(thermo)
            c.require_five_field()
            derived = derive_coefficients(self.params, thermo, c)
        except CoefficientError as e:
            raise ConfigurationError(f"B^(a0c0) is singular or coefficients invalid: {e}") from e

        b = assemble_b_tensor(self.background, derived, c)
        report = hkm_check(b, self.background)
        if not report.passed:
            raise ConfigurationError(f"background is not symmetric hyperbolic (margins {report.margins})")
        spectrum = signal_speeds(b, self.background, [1.0, 0.0, 0.0])
        if spectrum.max_speed > 1.0 + settings.spectral_tolerance:
            logger.warning(f"⚠️  acausal background: signal speed {spectrum.max_speed:.6f} > 1")
        return spectrum.max_speed

    # ========================================
    # FLUXES
    # ========================================

    def _coefficient_tensor(self, fields_: GodunovFields) -> np.ndarray:
        c = self.coeffs.evaluate(fields_.thermo)
        d = derive_coefficients(self.params, fields_.thermo, c)
        return coefficient_arrays(fields_.u4, fields_.theta, c.eta, c.chi, c.mu,
                                  d.sigma, d.zeta_tilde, d.sigma_tilde)

    def _ideal(self, fields_: GodunovFields) -> np.ndarray:
        th = fields_.thermo
        return ideal_flux_arrays(th.rho, th.p, th.n, fields_.u4)

    def flux(self, psi: np.ndarray, psi_t: np.ndarray,
             psi_x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(F, C): F^{ab} = (T + Delta T, N + Delta N)^{ab} as (..., 5, 4), and C"""
        fields_ = godunov_fields(self.params, psi)
        coeff = self._coefficient_tensor(fields_)
        grad = np.zeros(np.shape(psi) + (4,))
        grad[..., 0] = GB_LOWER * psi_t
        grad[..., 1] = GB_LOWER * psi_x
        return self._ideal(fields_) - np.einsum("...abcd,...cd->...ab", coeff, grad), coeff

    def recover_psi_t(self, psi: np.ndarray, conserved: np.ndarray) -> np.ndarray:
        """Solve C^{a0c0} psi_t,c = T^{a0} - C^{a0c1} psi_x,c - E^a per cell"""
        psi_x = _centered(psi, self.grid.dx)
        fields_ = godunov_fields(self.params, psi)
        coeff = self._coefficient_tensor(fields_)
        rhs = (self._ideal(fields_)[..., :, 0]
               - np.einsum("...ac,...c->...a", coeff[..., :, 0, :, 1], GB_LOWER * psi_x)
               - conserved)
        return GB_LOWER * _solve_cells(coeff[..., :, 0, :, 0], rhs)

    def _filter(self, conserved: np.ndarray) -> np.ndarray:
        """Fourth-difference damping of grid-scale modes; sums to zero over the grid"""
        wide = np.roll(conserved, 2, axis=0) + np.roll(conserved, -2, axis=0)
        near = np.roll(conserved, 1, axis=0) + np.roll(conserved, -1, axis=0)
        return (wide - 4.0 * near) + 6.0 * conserved

    def derivatives(self, psi: np.ndarray, conserved: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(psi_t, E_t) of the semi-discrete system"""
        dx = self.grid.dx
        psi_t = self.recover_psi_t(psi, conserved)

        def ahead(a):
            return np.roll(a, -1, axis=0)

        face_flux, _ = self.flux(0.5 * (psi + ahead(psi)), 0.5 * (psi_t + ahead(psi_t)),
                                 (ahead(psi) - psi) / dx)
        f1 = face_flux[..., 1]                      # F^{a1} at x_{i+1/2}
        d_conserved = -(f1 - np.roll(f1, 1, axis=0)) / dx
        if self.cfg.filter_strength > 0:
            d_conserved -= self.cfg.filter_strength * self.v_max / dx * self._filter(conserved)
        return psi_t, d_conserved

    def psi_tt(self, state: SolverState) -> np.ndarray:
        """
        Quasilinear readout of the scheme:
        C^{a0c0} psi_tt,c = D_psi F^{a0}[psi_t] - C^{a0c1} d_x psi_t,c - E_t
        """
        dx, h = self.grid.dx, settings.fd_step
        psi, psi_t = state.psi, state.psi_t
        psi_x = _centered(psi, dx)
        _, d_conserved = self.derivatives(psi, state.conserved)

        def time_flux(shifted):
            return self.flux(shifted, psi_t, psi_x)[0][..., 0]

        directional = (time_flux(psi + h * psi_t) - time_flux(psi - h * psi_t)) / (2.0 * h)
        coeff = self._coefficient_tensor(godunov_fields(self.params, psi))
        rhs = (directional
               - np.einsum("...ac,...c->...a", coeff[..., :, 0, :, 1], GB_LOWER * _centered(psi_t, dx))
               - d_conserved)
        return GB_LOWER * _solve_cells(coeff[..., :, 0, :, 0], rhs)

    # ========================================
    # INITIAL DATA
    # ========================================

    def _shape(self, x: np.ndarray) -> np.ndarray:
        pert = self.cfg.perturbation
        if pert.shape == "mode":
            return np.sin(2.0 * np.pi * pert.mode * x / self.grid.length)
        offset = x - self.cfg.pulse_center
        inside = np.abs(offset) < pert.width
        return np.where(inside, np.cos(np.pi * offset / (2.0 * pert.width)) ** 4, 0.0)

    def _ideal_time_row(self, psi: np.ndarray) -> np.ndarray:
        return self._ideal(godunov_fields(self.params, psi))[..., :, 0]

    def ideal_psi_t(self, psi: np.ndarray) -> np.ndarray:
        """psi_t of the ideal fluid: (dT^{a0}/dpsi) psi_t = -d_x T^{a1}"""
        h = settings.fd_step
        spatial = _centered(self._ideal(godunov_fields(self.params, psi))[..., :, 1], self.grid.dx)
        jac = np.empty(psi.shape + (5,))
        for c in range(5):
            step = np.zeros(5)
            step[c] = h
            jac[..., c] = (self._ideal_time_row(psi + step) - self._ideal_time_row(psi - step)) / (2.0 * h)
        return _solve_cells(jac, -spatial)

    def initial_state(self) -> SolverState:
        pert = self.cfg.perturbation
        theta_bg = self.background.theta
        psi = np.tile(self.background_vars, (self.grid.nx, 1))
        amplitude = pert.amplitude * self._shape(self.grid.x)

        if pert.field == "theta":
            psi[:, 0] *= 1.0 - amplitude
        elif pert.field == "longitudinal":
            psi[:, 1] = amplitude / theta_bg
        elif pert.field == "transverse":
            psi[:, 2] = amplitude / theta_bg
        else:
            psi[:, 4] += amplitude

        try:
            psi_t = self.ideal_psi_t(psi)
            flux, _ = self.flux(psi, psi_t, _centered(psi, self.grid.dx))
        except DomainError as e:
            raise ConfigurationError(f"initial perturbation leaves the physical domain: {e}") from e
        return SolverState(psi=psi, psi_t=psi_t, conserved=flux[..., 0].copy(), t=0.0)

    # ========================================
    # STEPPING
    # ========================================

    def step(self, state: SolverState, dt: Optional[float] = None) -> SolverState:
        """Classical four-stage Runge-Kutta on (psi, E)"""
        dt = self.dt if dt is None else dt
        psi, cons = state.psi, state.conserved
        try:
            a1 = self.derivatives(psi, cons)
            a2 = self.derivatives(psi + 0.5 * dt * a1[0], cons + 0.5 * dt * a1[1])
            a3 = self.derivatives(psi + 0.5 * dt * a2[0], cons + 0.5 * dt * a2[1])
            a4 = self.derivatives(psi + dt * a3[0], cons + dt * a3[1])
            new_psi = psi + dt / 6.0 * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0])
            new_cons = cons + dt / 6.0 * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1])
            new_psi_t = self.recover_psi_t(new_psi, new_cons)
        except DomainError as e:
            logger.error(f"❌ solver abort at t={state.t:.6g}: {e}")
            raise SolverAbort(f"state left the physical domain at t={state.t:.6g}: {e}",
                              last_state=state) from e
        return SolverState(psi=new_psi, psi_t=new_psi_t, conserved=new_cons, t=state.t + dt)

    def diagnostics(self, state: SolverState) -> Dict[str, float]:
        dx = self.grid.dx
        deviation = state.psi - self.background_vars
        return {
            "t": float(state.t),
            "L2": float(np.sqrt(dx * np.sum(deviation ** 2))),
            "Linf": float(np.max(np.abs(deviation))),
            "total_E": float(dx * np.sum(state.conserved[:, 0])),
            "total_P": float(dx * np.sum(state.conserved[:, 1])),
            "total_N": float(dx * np.sum(state.conserved[:, 4])),
        }

    def run(self, observer: Optional[Callable[[SolverState], None]] = None) -> RunResult:
        """Integrate to t_end, recording diagnostics every output_stride steps"""
        state = self.initial_state()
        series = [self.diagnostics(state)]
        snapshots = [(state.t, state.psi.copy())] if self.cfg.snapshots else []
        if observer:
            observer(state)

        for k in range(1, self.steps + 1):
            state = self.step(state)
            if k % self.cfg.output_stride == 0 or k == self.steps:
                series.append(self.diagnostics(state))
                if self.cfg.snapshots:
                    snapshots.append((state.t, state.psi.copy()))
                if observer:
                    observer(state)
                logger.debug(f"t={state.t:.4f} L2={series[-1]['L2']:.3e}")
        return RunResult(series=series, snapshots=snapshots, final=state)

    def front_position(self, state: SolverState) -> Optional[float]:
        """Outermost crossing of the detection level in (x0, x0 + L/2], interpolated between nodes"""
        k = FIELD_COMPONENT[self.cfg.perturbation.field]
        x0 = self.cfg.pulse_center
        half = 0.5 * self.grid.length
        dx = self.grid.dx
        offset = np.mod(self.grid.x - x0, self.grid.length)
        window = (offset > 0.0) & (offset <= half)

        deviation = np.abs(state.psi[:, k] - self.background_vars[k])
        level = max(self.cfg.front_threshold, self.cfg.front_fraction * float(np.max(deviation)))
        hits = np.flatnonzero(window & (deviation > level))
        if hits.size == 0:
            return None
        last = int(hits[np.argmax(offset[hits])])
        if offset[last] >= half - 2.0 * dx:
            raise ConfigurationError(
                f"front reached the edge of the tracking window at t={state.t:.4g}; enlarge length")
        inner, outer = deviation[last], deviation[(last + 1) % self.grid.nx]
        return float(x0 + offset[last] + dx * (inner - level) / (inner - outer))


# ========================================
# NAMED OPERATIONS
# ========================================

def initial_state(cfg: RunConfig) -> SolverState:
    return Solver1D(cfg).initial_state()


def semi_discrete_rhs(state: SolverState, cfg: RunConfig) -> np.ndarray:
    return Solver1D(cfg).psi_tt(state)


def step(state: SolverState, cfg: RunConfig) -> SolverState:
    return Solver1D(cfg).step(state)


def run_decay(cfg: RunConfig) -> DecayResult:
    result = Solver1D(cfg).run()
    decay = DecayResult(series=result.series, snapshots=result.snapshots)
    if decay.decayed:
        logger.info(f"✅ perturbation decayed: L2 {decay.initial_l2:.3e} -> {decay.final_l2:.3e}")
    else:
        logger.warning(f"⚠️  perturbation did not decay: L2 {decay.initial_l2:.3e} -> {decay.final_l2:.3e}")
    return decay


def run_front_speed(cfg: RunConfig) -> FrontSpeedResult:
    solver = Solver1D(cfg)
    times, fronts = [], []

    def observe(state: SolverState):
        times.append(state.t)
        fronts.append(solver.front_position(state))

    result = solver.run(observe)
    if all(f is None for f in fronts):
        logger.info("no front detected (zero perturbation)")
        return FrontSpeedResult(False, None, times, fronts, result.series)

    fit_t = [t for t, f in zip(times, fronts) if f is not None and t >= cfg.fit_start]
    fit_x = [f for t, f in zip(times, fronts) if f is not None and t >= cfg.fit_start]
    if len(fit_t) < 2:
        raise ConfigurationError("fewer than two front samples in the fit window")
    speed = float(np.polyfit(fit_t, fit_x, 1)[0])
    logger.info(f"measured front speed {speed:.4f} from {len(fit_t)} samples")
    return FrontSpeedResult(True, speed, times, fronts, result.series)


def ideal_characteristic_speeds(params: GasParams, state: ThermoState, h: float = None) -> np.ndarray:
    """Generalized eigenvalues of the ideal x-flux Jacobian against the time-row Jacobian"""
    h = settings.fd_step if h is None else h
    base = godunov_vars(FluidState(state))

    def rows(psi):
        f = godunov_fields(params, psi)
        return ideal_flux_arrays(f.thermo.rho, f.thermo.p, f.thermo.n, f.u4)

    a0 = np.empty((5, 5))
    a1 = np.empty((5, 5))
    for c in range(5):
        step_ = np.zeros(5)
        step_[c] = h
        diff = (rows(base + step_) - rows(base - step_)) / (2.0 * h)
        a0[:, c] = diff[:, 0]
        a1[:, c] = diff[:, 1]
    eigenvalues = linalg.eig(a1, a0, right=False)
    return np.sort(eigenvalues.real)


def self_convergence_order(cfg: RunConfig, nx_list: Sequence[int] = None) -> ConvergenceResult:
    """Three nested grids, filter off; differences compared on the coarser nodes"""
    nx_list = list(nx_list or (cfg.nx, 2 * cfg.nx, 4 * cfg.nx))
    if len(nx_list) != 3 or nx_list[1] != 2 * nx_list[0] or nx_list[2] != 2 * nx_list[1]:
        raise ConfigurationError("self-convergence needs three grids with nx doubling")

    finals = []
    for nx in nx_list:
        run_cfg = cfg.model_copy(update={"nx": nx, "filter_strength": 0.0, "snapshots": False})
        finals.append(Solver1D(run_cfg).run().final.psi)

    def rms(a):
        return float(np.sqrt(np.mean(a ** 2)))

    errors = [rms(finals[0] - finals[1][::2]), rms(finals[1] - finals[2][::2])]
    order = math.log2(errors[0] / errors[1]) if errors[1] > 0 else float("inf")
    logger.info(f"self-convergence: errors {errors[0]:.3e}, {errors[1]:.3e} -> order {order:.2f}")
    return ConvergenceResult(nx=nx_list, errors=errors, order=order)
