"""
Configuration Management
Runtime settings come from the environment / .env file (prefix FIVEFIELD_).
Run files are TOML documents validated section by section; every validation
error is reported with the line number of the offending key.
"""
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Union
import re
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class Settings(BaseSettings):
    # Logging / output
    log_level: str = "INFO"
    output_dir: Path = Path("output")
    output_format: str = "csv"  # "csv" or "json-lines"
    default_seed: int = 0

    # Equivalence / entropy ensembles
    ensemble_samples: int = 200
    residual_scales: List[float] = [1e-1, 1e-2, 1e-3, 1e-4]
    entropy_samples: int = 10_000
    entropy_epsilon: float = 1e-3
    slope_target: float = 2.0
    slope_tolerance: float = 0.1
    slope_fit_points: int = 2           # smallest scales used for the fitted order

    # Classification tolerances
    sharp_tolerance: float = 1e-10      # |zeta_tilde + eta/3| for SHARPLY_CAUSAL
    spectral_tolerance: float = 1e-6    # algebraic vs. spectral agreement
    definiteness_threshold: float = 1e-12

    # Signal-speed root finder
    speed_directions: int = 20
    tau_samples: int = 4001
    tau_range: float = 2.0
    bisection_xtol: float = 1e-12

    # 1D solver
    filter_strength: float = 1e-3
    front_threshold: float = 1e-9      # absolute floor above background
    front_fraction: float = 0.5        # of the current peak perturbation
    fd_step: float = 1e-6

    class Config:
        env_file = ".env"
        env_prefix = "FIVEFIELD_"
        case_sensitive = False


# Initialize settings with helpful error message if the environment is invalid
try:
    settings = Settings()
except Exception as e:
    print("\n" + "="*70)
    print("❌ ERROR: Environment configuration invalid!")
    print("="*70)
    print("\nFIVEFIELD_* variables (or the .env file) could not be parsed.")
    print("\n📋 Quick Setup:")
    print("   1. Copy .env.example to .env")
    print("   2. Fix or remove the offending FIVEFIELD_* entries")
    print("\n" + "="*70)
    print(f"\nOriginal error: {str(e)}")
    print("="*70 + "\n")
    sys.exit(2)


class ConfigError(ValueError):
    """Run-file parse or validation failure, with the offending line when known"""

    def __init__(self, message: str, path: Optional[Path] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        super().__init__(message)


# ========================================
# RUN-FILE SCHEMA
# ========================================

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GasSection(_Section):
    m: float = Field(1.0, gt=0)
    gamma: float = Field(4.0 / 3.0, gt=1.0, lt=2.0)
    s0: float = 0.0


class CoefficientsSection(_Section):
    eta: float = Field(1.0, ge=0)
    zeta: float = Field(0.0, ge=0)
    chi: Optional[float] = Field(None, ge=0)
    chi_star_multiple: Optional[float] = Field(None, gt=0)
    mu: float = Field(0.1, ge=0)

    @model_validator(mode="after")
    def _one_chi_source(self):
        if self.chi is not None and self.chi_star_multiple is not None:
            raise ValueError("give either chi or chi_star_multiple, not both")
        if self.chi is None and self.chi_star_multiple is None:
            self.chi_star_multiple = 1.0
        return self


class StateSection(_Section):
    n: float = Field(1.0, gt=0)
    theta: float = Field(1.0, gt=0)


class EquivalenceSection(_Section):
    samples: int = Field(default_factory=lambda: settings.ensemble_samples, ge=10)
    scales: List[float] = Field(default_factory=lambda: list(settings.residual_scales), min_length=2)
    zeta3_factor: float = 1.0

    @model_validator(mode="after")
    def _decreasing_scales(self):
        _check_scales(self.scales)
        return self


class EntropySection(_Section):
    samples: int = Field(default_factory=lambda: settings.entropy_samples, ge=10)
    epsilon: float = Field(default_factory=lambda: settings.entropy_epsilon, ge=0, le=1e-2)
    scales: List[float] = Field(default_factory=lambda: list(settings.residual_scales), min_length=2)
    ensemble_samples: int = Field(default_factory=lambda: settings.ensemble_samples, ge=10)

    @model_validator(mode="after")
    def _decreasing_scales(self):
        _check_scales(self.scales)
        return self


class SweepSection(_Section):
    chi_min: float = Field(0.1, gt=0)
    chi_max: float = Field(4.0, gt=0)
    points: int = Field(40, ge=2)
    directions: int = Field(3, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.chi_max <= self.chi_min:
            raise ValueError("chi_max must exceed chi_min")
        return self


class PerturbationSection(_Section):
    shape: Literal["mode", "pulse"] = "mode"
    field: Literal["theta", "longitudinal", "transverse", "psi"] = "longitudinal"
    amplitude: float = Field(1e-3, ge=0, le=1e-1)
    mode: int = Field(1, ge=1)
    width: float = Field(1.0, gt=0)
    center: Optional[float] = None


class SimulationSection(_Section):
    scenario: Literal["decay", "front_speed"] = "decay"
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
    perturbation: PerturbationSection = Field(default_factory=PerturbationSection)


class RunFile(_Section):
    seed: Optional[int] = None
    gas: GasSection = Field(default_factory=GasSection)
    coefficients: CoefficientsSection = Field(default_factory=CoefficientsSection)
    state: StateSection = Field(default_factory=StateSection)
    equivalence: EquivalenceSection = Field(default_factory=EquivalenceSection)
    entropy: EntropySection = Field(default_factory=EntropySection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)


def _check_scales(scales: Sequence[float]):
    if any(s <= 0 for s in scales):
        raise ValueError("scales must be positive")
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly decreasing")


# ========================================
# LOADING
# ========================================

_HEADER = re.compile(r"^\s*\[+\s*([^\]]+?)\s*\]+\s*(#.*)?$")


def locate_key(text: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    """Line number (1-based) of the key named by a pydantic error location"""
    lines = text.splitlines()
    names = [str(part) for part in loc]

    for k in range(len(names) - 1, -1, -1):
        if not isinstance(loc[k], str):
            continue
        section, key = ".".join(names[:k]), names[k]
        key_pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
        current = ""
        for lineno, line in enumerate(lines, start=1):
            header = _HEADER.match(line)
            if header:
                current = header.group(1)
                if current == ".".join(names[:k + 1]):
                    return lineno
                continue
            if current == section and key_pattern.match(line):
                return lineno
    return None


def parse_run_text(text: str, path: Optional[Path] = None) -> RunFile:
    label = str(path) if path else "<run file>"
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = re.search(r"line (\d+)", str(e))
        line = int(match.group(1)) if match else None
        raise ConfigError(f"{label}: {e}", path=path, line=line) from e

    try:
        return RunFile.model_validate(raw)
    except ValidationError as e:
        messages = []
        first_line = None
        for err in e.errors():
            line = locate_key(text, err["loc"])
            if first_line is None:
                first_line = line
            where = f"line {line}" if line else "line ?"
            key = ".".join(str(part) for part in err["loc"]) or "<root>"
            messages.append(f"{label}:{where}: {key}: {err['msg']}")
        raise ConfigError("\n".join(messages), path=path, line=first_line) from e


def load_run_file(path: Union[str, Path]) -> RunFile:
    """Read and validate a TOML run file"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read run file ({e})", path=path) from e
    return parse_run_text(text, path)
