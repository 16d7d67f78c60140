"""
Five-Field Toolkit Command Line
Subcommands: check, equivalence, entropy, simulate, sweep.
Exit codes: 0 pass, 1 physics / verification failure, 2 usage or validation error.
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from coefficients import (
    CausalityStatus, CoefficientError, DissipationCoeffs, chi_star,
)
from config import ConfigError, RunFile, load_run_file, settings
from entropy import delta_q_order, eckart_quadratic_form, entropy_production, new_model_entropy_sign
from equivalence import (
    ShiftSpec, chain_stages, eckart_ansatz, euler_consistent_ensemble, first_order_residual,
    landau_ansatz, new_theory_ansatz, run_chain, zeta3_conformance,
)
from hyperbolicity import DegenerateDiffusion, causality_certificate
from kinematics import KinematicsError
from solver1d import (
    ConfigurationError, PerturbationSpec, RunConfig, SolverAbort, run_decay,
    run_front_speed,
)
from thermo import DomainError, GasParams, ThermoState, eos_from_n_theta

logger = logging.getLogger(__name__)

VALIDATION_ERRORS = (ConfigError, DomainError, KinematicsError, CoefficientError,
                     DegenerateDiffusion, ConfigurationError)

FRONT_SPEED_LIMIT = 1.02
CONSERVATION_TOLERANCE = 1e-10


# ========================================
# RUN-FILE -> DOMAIN OBJECTS
# ========================================

def build_domain(run: RunFile) -> Tuple[GasParams, ThermoState, DissipationCoeffs]:
    params = GasParams(m=run.gas.m, gamma=run.gas.gamma, s0=run.gas.s0)
    state = eos_from_n_theta(params, run.state.n, run.state.theta)
    section = run.coefficients
    chi = section.chi
    if chi is None:
        chi = section.chi_star_multiple * chi_star(params, state, section.eta, section.zeta, section.mu)
    return params, state, DissipationCoeffs(eta=section.eta, zeta=section.zeta, chi=chi, mu=section.mu)


def build_run_config(run: RunFile) -> RunConfig:
    params, state, coeffs = build_domain(run)
    sim = run.simulation
    return RunConfig(
        params=params, coeffs=coeffs, background=state,
        perturbation=PerturbationSpec(**sim.perturbation.model_dump()),
        nx=sim.nx, length=sim.length, cfl=sim.cfl, t_end=sim.t_end,
        output_stride=sim.output_stride, filter_strength=sim.filter_strength,
        front_threshold=sim.front_threshold, front_fraction=sim.front_fraction,
        fit_start=sim.fit_start, snapshots=sim.snapshots,
    )


# ========================================
# OUTPUT
# ========================================

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, CausalityStatus):
        return value.value
    return str(value)


def _plain(value):
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, CausalityStatus):
        return value.value
    return value


def write_rows(rows: List[Dict], out_dir: Path, name: str, fmt: str) -> Path:
    """CSV (repr floats, header from the first row) or one JSON object per line"""
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "json-lines":
        path = out_dir / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as f:
            for row in rows:
                f.write(json.dumps({k: _plain(v) for k, v in row.items()}) + "\n")
    else:
        path = out_dir / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            if rows:
                writer.writerow(list(rows[0].keys()))
                for row in rows:
                    writer.writerow([_cell(v) for v in row.values()])
    logger.info(f"📁 wrote {path}")
    return path


def _banner(title: str):
    print("\n" + "="*70)
    print(title)
    print("="*70)


# ========================================
# COMMANDS
# ========================================

def cmd_check(run: RunFile, seed: int, out: Path, fmt: str) -> int:
    params, state, coeffs = build_domain(run)
    threshold = chi_star(params, state, coeffs.eta, coeffs.zeta, coeffs.mu)
    cert = causality_certificate(params, state, coeffs, seed=seed)
    d = cert.derived

    row = {
        "chi": coeffs.chi, "chi_star": threshold,
        "sigma": float(d.sigma), "zeta_tilde": float(d.zeta_tilde), "sigma_tilde": float(d.sigma_tilde),
        "zt1": float(d.zt1), "zt2": float(d.zt2), "zt3": float(d.zt3),
        "algebraic_status": cert.algebraic_status,
        "spectral_status": cert.spectral_status,
        "hkm_negative_definite": cert.hkm.negative_definite,
        "hkm_positive_definite": cert.hkm.positive_definite,
        "time_margin": cert.hkm.margins[0], "space_margin": cert.hkm.margins[1],
        "max_speed": cert.max_speed, "min_speed": cert.min_speed,
        "agrees": cert.agrees,
    }
    write_rows([row], out, "check", fmt)

    _banner("CAUSALITY / HYPERBOLICITY CHECK")
    print(f"chi = {coeffs.chi:.12g}  (chi* = {threshold:.12g})")
    print(f"sigma = {float(d.sigma):.12g}, zeta_tilde = {float(d.zeta_tilde):.12g}")
    print(f"HKM: negative definite {cert.hkm.negative_definite}, positive definite {cert.hkm.positive_definite}")
    print(f"signal speeds: min {cert.min_speed:.9f}, max {cert.max_speed:.9f}")
    print(f"status: {cert.status.value}")
    print("="*70 + "\n")

    passed = cert.hkm.passed and cert.status != CausalityStatus.ACAUSAL
    if passed:
        logger.info(f"✅ {cert.status.value}")
    else:
        logger.error(f"❌ check failed: {cert.status.value}")
    return 0 if passed else 1


def cmd_equivalence(run: RunFile, seed: int, out: Path, fmt: str) -> int:
    params, state, coeffs = build_domain(run)
    section = run.equivalence
    eckart = eckart_ansatz(params, state, coeffs)
    landau = landau_ansatz(params, state, coeffs)
    new = new_theory_ansatz(params, state, coeffs, zeta3_factor=section.zeta3_factor)

    chained = run_chain(params, state, coeffs)
    reference = new_theory_ansatz(params, state, coeffs).as_vector()
    mismatch = float(np.max(np.abs(chained.as_vector() - reference)))
    chain_ok = mismatch <= 1e-10 * max(1.0, float(np.max(np.abs(reference))))

    pairs = [("eckart", "new", eckart, new), ("landau", "new", landau, new),
             ("eckart", "landau", eckart, landau)]
    residual_rows, slope_rows = [], []
    passed = chain_ok
    for name_a, name_b, a, b in pairs:
        fit = first_order_residual(a, b, params, state, section.scales, section.samples, seed)
        pair = f"{name_a}-{name_b}"
        for eps, res in zip(fit.epsilons, fit.residuals):
            residual_rows.append({"pair": pair, "epsilon": float(eps), "residual": float(res)})
        ok = fit.within()
        passed = passed and ok
        slope_rows.append({"pair": pair, "slope": fit.slope, "exact": fit.exact, "passed": ok})

    note = zeta3_conformance(params, state, coeffs, section.scales, section.samples, seed)
    slope_rows.append({"pair": "zeta3-compatible", "slope": note.compatible.slope,
                       "exact": note.compatible.exact, "passed": note.compatible.within()})
    slope_rows.append({"pair": "zeta3-displayed", "slope": note.displayed.slope,
                       "exact": note.displayed.exact, "passed": note.displayed.within()})
    write_rows(residual_rows, out, "equivalence_residuals", fmt)
    write_rows(slope_rows, out, "equivalence_slopes", fmt)

    _banner("FIRST-ORDER EQUIVALENCE")
    print(f"chain vs. five-field model: max slot difference {mismatch:.3e}")
    for row in slope_rows[:3]:
        status = "exact" if row["exact"] else f"slope {row['slope']:.3f}"
        print(f"  {row['pair']:<14} {status:<16} {'✅' if row['passed'] else '❌'}")
    print(f"\nzeta3 note: {note.message}")
    print("="*70 + "\n")
    return 0 if passed else 1


def cmd_entropy(run: RunFile, seed: int, out: Path, fmt: str) -> int:
    params, state, coeffs = build_domain(run)
    section = run.entropy
    unit = coeffs.evaluate(state)

    rg = euler_consistent_ensemble(params, state, section.epsilon, section.samples, seed)
    eckart_q = entropy_production(state, rg, eckart_ansatz(params, state, unit).rest_frame_tensors(rg)).q
    closed = eckart_quadratic_form(state, rg, unit).q
    eckart_ok = bool(np.min(closed) >= 0.0
                     and np.max(np.abs(eckart_q - closed)) <= 1e-12 * max(1.0, float(np.max(closed))))

    fixture_rows = []
    fixtures_ok = True
    for spec, before in chain_stages(params, state, unit):
        fit = delta_q_order(params, state, spec, section.scales, section.ensemble_samples, seed, base=before)
        ok = fit.within()
        fixtures_ok = fixtures_ok and ok
        fixture_rows.append({"shift": spec.label, "slope": fit.slope, "exact": fit.exact,
                             "expected": 2.0, "passed": ok})

    control = ShiftSpec.sector_increment((0.0, 1.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0),
                                         label="incompatible control")
    control_fit = delta_q_order(params, state, control, section.scales, section.ensemble_samples, seed,
                                base=eckart_ansatz(params, state, unit))
    control_ok = control_fit.within(target=1.0)
    fixture_rows.append({"shift": control.label, "slope": control_fit.slope, "exact": control_fit.exact,
                         "expected": 1.0, "passed": control_ok})

    sign = new_model_entropy_sign(params, state, unit, section.samples, section.epsilon, seed)
    write_rows(fixture_rows, out, "entropy_shifts", fmt)
    write_rows([{
        "epsilon": sign.epsilon, "samples": sign.samples, "min_q": sign.min_q,
        "min_q_over_eps": sign.min_q_over_eps, "min_leading": sign.min_leading,
        "envelope_k": sign.envelope_k, "passed": sign.passed,
        "eckart_min_q": float(np.min(eckart_q)), "eckart_passed": eckart_ok,
    }], out, "entropy_sign", fmt)

    _banner("ENTROPY PRODUCTION")
    print(f"Eckart: min Q = {float(np.min(eckart_q)):.3e} {'✅' if eckart_ok else '❌'}")
    for row in fixture_rows:
        status = "exact" if row["exact"] else f"slope {row['slope']:.3f}"
        print(f"  {row['shift']:<44} {status:<14} {'✅' if row['passed'] else '❌'}")
    print(f"five-field model: min Q/eps = {sign.min_q_over_eps:.3e}, K = {sign.envelope_k:.3e} "
          f"{'✅' if sign.passed else '❌'}")
    print("="*70 + "\n")
    return 0 if (eckart_ok and fixtures_ok and control_ok and sign.passed) else 1


def _conserved(series: Sequence[Dict[str, float]]) -> bool:
    first, last = series[0], series[-1]
    for key in ("total_E", "total_P", "total_N"):
        scale = max(1.0, abs(first[key]))
        if abs(last[key] - first[key]) > CONSERVATION_TOLERANCE * scale:
            logger.warning(f"⚠️  {key} drifted: {first[key]!r} -> {last[key]!r}")
            return False
    return True


def _snapshot_rows(x: np.ndarray, snapshots) -> List[Dict]:
    rows = []
    for t, psi in snapshots:
        for xi, values in zip(x, psi):
            row = {"t": float(t), "x": float(xi)}
            row.update({f"psi{k}": float(v) for k, v in enumerate(values)})
            rows.append(row)
    return rows


def cmd_simulate(run: RunFile, seed: int, out: Path, fmt: str) -> int:
    cfg = build_run_config(run)
    x = np.arange(cfg.nx) * (cfg.length / cfg.nx)
    try:
        if run.simulation.scenario == "decay":
            result = run_decay(cfg)
            write_rows(result.series, out, "simulate_series", fmt)
            if cfg.snapshots:
                write_rows(_snapshot_rows(x, result.snapshots), out, "simulate_snapshots", fmt)
            passed = result.decayed and _conserved(result.series)
            _banner("DECAY RUN")
            print(f"L2: {result.initial_l2:.6e} -> {result.final_l2:.6e} {'✅' if passed else '❌'}")
        else:
            result = run_front_speed(cfg)
            write_rows(result.series, out, "simulate_series", fmt)
            write_rows([{"t": t, "front": f} for t, f in zip(result.times, result.fronts)],
                       out, "simulate_fronts", fmt)
            _banner("FRONT SPEED RUN")
            if not result.detected:
                print("no front detected")
                passed = True
            else:
                passed = result.speed <= FRONT_SPEED_LIMIT and _conserved(result.series)
                print(f"front speed: {result.speed:.5f} {'✅' if passed else '❌'}")
    except SolverAbort as e:
        if e.last_state is not None:
            write_rows(_snapshot_rows(x, [(e.last_state.t, e.last_state.psi)]), out, "simulate_abort", fmt)
        logger.error(f"❌ {e}")
        return 1
    print("="*70 + "\n")
    return 0 if passed else 1


def cmd_sweep(run: RunFile, seed: int, out: Path, fmt: str) -> int:
    params, state, coeffs = build_domain(run)
    section = run.sweep
    threshold = chi_star(params, state, coeffs.eta, coeffs.zeta, coeffs.mu)

    rows = []
    crossed = False
    agree = True
    for chi in np.linspace(section.chi_min, section.chi_max, section.points):
        c = coeffs.with_chi(float(chi))
        try:
            cert = causality_certificate(params, state, c, directions=section.directions, seed=seed)
        except CoefficientError as e:
            logger.warning(f"⚠️  chi={chi:.6g}: {e}")
            continue
        crossing = not crossed and chi >= threshold
        crossed = crossed or crossing
        agree = agree and cert.agrees
        rows.append({
            "chi": float(chi), "zeta_tilde": float(cert.derived.zeta_tilde),
            "sigma": float(cert.derived.sigma), "algebraic_status": cert.algebraic_status,
            "hkm_passed": cert.hkm.passed, "min_speed": cert.min_speed, "max_speed": cert.max_speed,
            "chi_star_crossing": crossing,
        })
    write_rows(rows, out, "sweep", fmt)

    _banner("CHI SWEEP")
    print(f"chi* = {threshold:.12g}; {len(rows)} grid points")
    print("="*70 + "\n")
    return 0 if agree else 1


COMMANDS: Dict[str, Callable[[RunFile, int, Path, str], int]] = {
    "check": cmd_check,
    "equivalence": cmd_equivalence,
    "entropy": cmd_entropy,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=str,
        default=None,
        help="TOML run file (defaults apply to every missing section)"
    )
    common.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Seed for ensemble sampling (overrides the run file)"
    )
    common.add_argument(
        "--out",
        type=str,
        default=None,
        help=f"Output directory (default: {settings.output_dir})"
    )
    common.add_argument(
        "--format",
        choices=["csv", "json-lines"],
        default=None,
        help=f"Table format (default: {settings.output_format})"
    )

    parser = argparse.ArgumentParser(
        description="Verification and simulation toolkit for causal five-field dissipative fluids"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="HKM definiteness and causality certificate")
    sub.add_parser("equivalence", parents=[common], help="first-order equivalence residual slopes")
    sub.add_parser("entropy", parents=[common], help="entropy production checks")
    sub.add_parser("simulate", parents=[common], help="1D decay or front-speed run")
    sub.add_parser("sweep", parents=[common], help="causality table over a chi grid")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = load_run_file(args.config) if args.config else RunFile()
        seed = args.seed if args.seed is not None else (
            run.seed if run.seed is not None else settings.default_seed)
        out = Path(args.out) if args.out else Path(settings.output_dir)
        fmt = args.format or settings.output_format
        logger.info(f"{args.command}: seed={seed}, out={out}, format={fmt}")
        return COMMANDS[args.command](run, seed, out, fmt)
    except VALIDATION_ERRORS as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        print(f"\n❌ {type(e).__name__}: {e}", file=sys.stderr)
        return 2
