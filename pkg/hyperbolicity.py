"""
Symmetric Hyperbolicity and Causality
HKM definiteness of B contracted with a timelike and with spacelike covectors,
signal speeds of the principal symbol, and the end-to-end causality certificate.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import numpy.typing as npt
from scipy.optimize import bisect

from coefficients import (
    CausalityStatus, DerivedCoeffs, DissipationCoeffs, causality_status, derive_coefficients,
)
from config import settings
from dissipation import BTensor, assemble_b_tensor, boost_b_tensor
from kinematics import METRIC, FluidState, inverse_boost
from thermo import GasParams, ThermoState

logger = logging.getLogger(__name__)

SECTORS = ("temperature", "longitudinal", "transverse_1", "transverse_2", "diffusion")

# rest-frame spatial directions for the HKM check: a basis plus two rotated spot checks
_HKM_DIRECTIONS = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0),
    np.array([1.0, 2.0, -2.0]) / 3.0,
])


class DegenerateDiffusion(ValueError):
    """The diffusion row of B vanishes (mu <= 0); the five-field HKM structure needs mu > 0"""


class RootFindingError(RuntimeError):
    """Characteristic roots could not be bracketed; carries the sampled symbol values"""

    def __init__(self, message: str, taus: Optional[np.ndarray] = None,
                 values: Optional[np.ndarray] = None):
        self.taus = taus
        self.values = values
        super().__init__(message)


@dataclass(frozen=True)
class HkmReport:
    time_matrix: np.ndarray
    space_matrix: np.ndarray
    time_eigs: np.ndarray
    space_eigs: np.ndarray
    negative_definite: bool
    positive_definite: bool
    min_space_eig: float = 0.0

    @property
    def verdict(self) -> tuple:
        return (self.negative_definite, self.positive_definite)

    @property
    def passed(self) -> bool:
        return self.negative_definite and self.positive_definite

    @property
    def margins(self) -> tuple:
        """(-max time eigenvalue, min space eigenvalue over all tested N)"""
        return (-float(np.max(self.time_eigs)), float(self.min_space_eig))


@dataclass(frozen=True)
class SpeedSpectrum:
    direction: np.ndarray
    speeds: np.ndarray
    sector_speeds: Dict[str, float] = field(default_factory=dict)

    @property
    def max_speed(self) -> float:
        return float(np.max(np.abs(self.speeds)))

    @property
    def min_speed(self) -> float:
        return float(min(self.sector_speeds.values()))


@dataclass(frozen=True)
class CausalityCertificate:
    coefficients: DissipationCoeffs
    derived: DerivedCoeffs
    algebraic_status: CausalityStatus
    spectral_status: Optional[CausalityStatus]
    hkm: HkmReport
    max_speed: float
    min_speed: float
    isotropy_spread: float
    agrees: bool

    @property
    def status(self) -> CausalityStatus:
        return self.spectral_status or CausalityStatus.ACAUSAL


def _check_symmetric(matrix: np.ndarray, label: str):
    scale = 1e-10 * (1.0 + np.max(np.abs(matrix)))
    if np.max(np.abs(matrix - matrix.T)) > scale:
        raise ValueError(f"{label} is not symmetric; B is inconsistent")


def hkm_check(b: BTensor, state: FluidState, threshold: float = None) -> HkmReport:
    """
    Negative definiteness of B H H with H = -U_b, positive definiteness of B N N for
    unit N orthogonal to U (basis plus rotated spot checks).
    """
    threshold = settings.definiteness_threshold if threshold is None else threshold
    u_low = state.u4.lower()
    lam = state.boost_matrix()

    time_matrix = b.contract(-u_low)
    _check_symmetric(time_matrix, "time matrix")

    space_matrices = []
    for direction in _HKM_DIRECTIONS:
        n_up = lam @ np.concatenate([[0.0], direction])
        matrix = b.contract(METRIC @ n_up)
        _check_symmetric(matrix, "space matrix")
        space_matrices.append(matrix)

    mu_estimate = space_matrices[0][4, 4]
    if mu_estimate <= 0.0:
        raise DegenerateDiffusion(
            f"diffusion coefficient mu={mu_estimate} must be positive for the five-field HKM check")

    time_eigs = np.linalg.eigvalsh(time_matrix)
    all_space_eigs = [np.linalg.eigvalsh(m) for m in space_matrices]
    min_space = min(float(np.min(eigs)) for eigs in all_space_eigs)
    return HkmReport(
        time_matrix=time_matrix,
        space_matrix=space_matrices[0],
        time_eigs=time_eigs,
        space_eigs=all_space_eigs[0],
        negative_definite=bool(np.all(time_eigs < -threshold)),
        positive_definite=bool(min_space > threshold),
        min_space_eig=min_space,
    )


def _orthonormal_frame(direction: np.ndarray) -> np.ndarray:
    """(n, t1, t2) as rows"""
    n = direction / np.linalg.norm(direction)
    helper = np.eye(3)[int(np.argmin(np.abs(n)))]
    t1 = np.cross(n, helper)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return np.stack([n, t1, t2])


def _bracketed_roots(factor, taus: np.ndarray, values: np.ndarray, xtol: float) -> List[float]:
    roots = []
    for i in range(len(taus) - 1):
        left, right = values[i], values[i + 1]
        if left == 0.0:
            roots.append(float(taus[i]))
        elif left * right < 0.0:
            roots.append(bisect(factor, taus[i], taus[i + 1], xtol=xtol, maxiter=200))
    if values[-1] == 0.0:
        roots.append(float(taus[-1]))
    return roots


def signal_speeds(b: BTensor, state: FluidState, direction: Sequence[float],
                  samples: int = None, tau_range: float = None,
                  xtol: float = None) -> SpeedSpectrum:
    """
    Real roots tau of det M(tau), M = B xi xi with xi = (-tau, n) in the rest frame.
    The symbol is block diagonal on (U, n, t1, t2, diffusion); each scalar factor is
    bracketed by sign changes on [-tau_range, tau_range] and refined by bisection.
    """
    samples = settings.tau_samples if samples is None else samples
    tau_range = settings.tau_range if tau_range is None else tau_range
    xtol = settings.bisection_xtol if xtol is None else xtol

    direction = np.asarray(direction, dtype=float)
    if np.linalg.norm(direction) == 0.0:
        raise ValueError("direction must be non-zero")
    if not state.is_at_rest:
        b = boost_b_tensor(b, inverse_boost(state.boost_matrix()))

    frame = _orthonormal_frame(direction)
    basis = np.zeros((5, 5))
    basis[0, 0] = 1.0
    basis[1:4, 1:4] = frame.T
    basis[4, 4] = 1.0

    def symbol(taus: np.ndarray) -> np.ndarray:
        xi = np.zeros(taus.shape + (4,))
        xi[..., 0] = -taus
        xi[..., 1:] = frame[0]
        return basis.T @ b.contract(xi) @ basis

    taus = np.linspace(-tau_range, tau_range, samples)
    sampled = symbol(taus)
    scale = np.max(np.abs(sampled))
    off_diagonal = sampled - np.einsum("tk,kl->tkl", np.einsum("tkk->tk", sampled), np.eye(5))
    if np.max(np.abs(off_diagonal)) > 1e-9 * scale:
        raise RootFindingError("principal symbol does not factorize on the rest-frame sectors",
                               taus, np.linalg.det(sampled))

    sector_speeds = {}
    all_roots = []
    for k, sector in enumerate(SECTORS):
        def factor(tau, k=k):
            return float(symbol(np.array([tau]))[0, k, k])

        values = sampled[:, k, k]
        if np.all(values == 0.0):
            if sector == "diffusion":
                raise DegenerateDiffusion("diffusion factor of the symbol vanishes identically (mu = 0)")
            raise RootFindingError(f"{sector} factor vanishes identically", taus, values)

        roots = _bracketed_roots(factor, taus, values, xtol)
        span, grid = tau_range, taus
        while len(roots) < 2 and span < 64.0:
            span *= 2.0
            grid = np.linspace(-span, span, samples)
            values = symbol(grid)[:, k, k]
            roots = _bracketed_roots(factor, grid, values, xtol)
        if len(roots) != 2:
            raise RootFindingError(
                f"{sector} factor: expected 2 real roots, found {len(roots)}", grid, values)

        logger.debug(f"{sector}: roots {roots}")
        sector_speeds[sector] = max(abs(r) for r in roots)
        all_roots.extend(roots)

    return SpeedSpectrum(direction=frame[0], speeds=np.sort(np.array(all_roots)),
                         sector_speeds=sector_speeds)


def _random_directions(count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(max(count - 1, 0), 3))
    dirs = np.vstack([[1.0, 0.0, 0.0], raw])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def spectral_status(max_speed: float, min_speed: float, tol: float = None) -> CausalityStatus:
    tol = settings.spectral_tolerance if tol is None else tol
    if max_speed > 1.0 + tol:
        return CausalityStatus.ACAUSAL
    if min_speed >= 1.0 - tol:
        return CausalityStatus.SHARPLY_CAUSAL
    return CausalityStatus.CAUSAL


def causality_certificate(params: GasParams, state: Union[FluidState, ThermoState],
                          c: DissipationCoeffs, directions: int = None,
                          seed: int = None) -> CausalityCertificate:
    """Algebraic classification, HKM definiteness and sampled signal speeds, cross-checked"""
    directions = settings.speed_directions if directions is None else directions
    seed = settings.default_seed if seed is None else seed
    if isinstance(state, ThermoState):
        state = FluidState(state)

    c_eval = c.evaluate(state.thermo)
    derived = derive_coefficients(params, state.thermo, c_eval)
    algebraic = causality_status(c_eval, derived)
    b = assemble_b_tensor(state, derived, c_eval)
    hkm = hkm_check(b, state)

    if not hkm.passed:
        logger.warning(f"⚠️  HKM definiteness fails (margins {hkm.margins}); system not hyperbolic")
        return CausalityCertificate(c_eval, derived, algebraic, None, hkm, float("nan"),
                                    float("nan"), float("nan"),
                                    agrees=algebraic == CausalityStatus.ACAUSAL)

    spectra = [signal_speeds(b, state, n) for n in _random_directions(directions, seed)]
    max_speed = max(s.max_speed for s in spectra)
    min_speed = min(s.min_speed for s in spectra)
    spread = max(float(np.max(np.abs(s.speeds - spectra[0].speeds))) for s in spectra)
    spectral = spectral_status(max_speed, min_speed)

    boundary = abs(min_speed - 1.0) <= settings.spectral_tolerance
    agrees = spectral == algebraic or boundary
    if not agrees:
        logger.warning(f"⚠️  algebraic {algebraic.value} disagrees with spectral {spectral.value} "
                       f"(speeds {min_speed:.9f}..{max_speed:.9f})")
    return CausalityCertificate(c_eval, derived, algebraic, spectral, hkm, max_speed, min_speed,
                                spread, agrees)
