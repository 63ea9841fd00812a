"""
Configuration module for the nacdyn pipeline
"""
import json
import math
import os
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from exceptions import ConfigError

load_dotenv()

# Declared grid spacings are quoted to 4 decimals.
SPACING_TOLERANCE = 5e-5

MASS_PRESETS = {"H": 1837.15, "D": 3671.48}

STAGES = ("surfaces", "nac", "interp", "dynamics", "plotdata")
Stage = Literal["surfaces", "nac", "interp", "dynamics", "plotdata"]


class OptimizerConfig(BaseModel):
    """Quasi-Newton settings for the SSVQE optimizer"""
    model_config = ConfigDict(extra="forbid")

    gradient_step: float = Field(default=1e-4, gt=0, description="Central finite-difference step (rad)")
    gtol: float = Field(default=1e-7, gt=0, description="Convergence tolerance on the gradient norm")
    max_iterations: int = Field(default=500, ge=1, description="Maximum BFGS iterations")


class SsvqeConfig(BaseModel):
    """Weighted subspace-search VQE settings"""
    model_config = ConfigDict(extra="forbid")

    weights: tuple[float, ...] = Field(default=(9.0, 4.0, 1.0), description="Strictly decreasing state weights")
    initial_bitstrings: tuple[str, ...] = Field(
        default=("101111", "111011", "111110"),
        description="Reference basis states, highest qubit first",
    )
    depth: int = Field(default=5, ge=1, description="Number of repeated ansatz layers D")
    layout: Literal["brick_wall", "spin_adapted"] = Field(default="brick_wall", description="Givens block placement")
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    warm_start: Optional[list[float]] = Field(default=None, description="Initial parameter vector")
    n_starts: int = Field(default=1, ge=1, description="Independent seeded starts per optimization")
    init_scale: float = Field(default=math.pi, gt=0, description="Cold-start angles drawn from U(-s, s)")
    restart_threshold: float = Field(default=5e-3, ge=0, description="Energy excess over neighbour estimate that triggers restarts (hartree)")
    n_restarts: int = Field(default=3, ge=0, description="Seeded random restarts for suspicious scan points")

    @field_validator("initial_bitstrings")
    @classmethod
    def _binary(cls, value):
        for bits in value:
            if not bits or set(bits) - {"0", "1"}:
                raise ValueError(f"bitstring {bits!r} is not binary")
        if len({len(b) for b in value}) > 1:
            raise ValueError("bitstrings must share one length")
        return value

    @model_validator(mode="after")
    def _ordered_weights(self):
        if len(self.weights) != len(self.initial_bitstrings):
            raise ValueError("weights and initial_bitstrings differ in length")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        if any(a <= b for a, b in zip(self.weights, self.weights[1:])):
            raise ValueError(f"weights must be strictly decreasing, got {self.weights}")
        return self

    @property
    def n_qubits(self) -> int:
        return len(self.initial_bitstrings[0])


class NacConfig(BaseModel):
    """Finite-difference NAC evaluation settings"""
    model_config = ConfigDict(extra="forbid")

    gap_floor: float = Field(default=1e-5, gt=0, description="Minimum |E_q - E_p| (hartree)")
    residual_tolerance: float = Field(default=1e-3, gt=0, description="Atom-1/atom-2 consistency tolerance")
    state_pair: tuple[int, int] = Field(default=(1, 2), description="(p, q) state indices: (A, B)")


class GridSpec(BaseModel):
    """Fine (r, theta) dynamics grid"""
    model_config = ConfigDict(extra="forbid")

    n_r: int = Field(default=64, ge=2, description="Number of r points")
    n_theta: int = Field(default=64, ge=2, description="Number of theta points")
    r_min: float = Field(default=0.9449, gt=0, description="bohr")
    r_max: float = Field(default=3.7352, description="bohr")
    theta_min: float = Field(default=0.5236, description="radian")
    theta_max: float = Field(default=3.1007, description="radian")
    declared_dr: Optional[float] = Field(default=None, description="Quoted r spacing, checked against the range")
    declared_dtheta: Optional[float] = Field(default=None, description="Quoted theta spacing, checked against the range")

    @model_validator(mode="after")
    def _increasing(self):
        if self.r_max <= self.r_min or self.theta_max <= self.theta_min:
            raise ValueError("grid ranges must be increasing")
        return self

    def spacing_issues(self) -> list[str]:
        """Declared spacings that disagree with (max - min) / (N - 1)"""
        issues = []
        for name, declared, derived in (
            ("dr", self.declared_dr, self.dr),
            ("dtheta", self.declared_dtheta, self.dtheta),
        ):
            if declared is not None and abs(declared - derived) > SPACING_TOLERANCE:
                issues.append(f"{name}={declared} inconsistent with range/count; expected {derived:.4f}")
        return issues

    @property
    def dr(self) -> float:
        return (self.r_max - self.r_min) / (self.n_r - 1)

    @property
    def dtheta(self) -> float:
        return (self.theta_max - self.theta_min) / (self.n_theta - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    def r_axis(self):
        return np.linspace(self.r_min, self.r_max, self.n_r)

    def theta_axis(self):
        return np.linspace(self.theta_min, self.theta_max, self.n_theta)


class MassParams(BaseModel):
    """Hydrogen-isotope nuclear mass (electron-mass units)"""
    model_config = ConfigDict(extra="forbid")

    m_h: float = Field(default=MASS_PRESETS["H"], gt=0, description="Nuclear mass M_H")

    @classmethod
    def preset(cls, isotope: Literal["H", "D"]) -> "MassParams":
        return cls(m_h=MASS_PRESETS[isotope])


class CapSpec(BaseModel):
    """Quadratic complex absorbing potential on the theta_max and r_max edges"""
    model_config = ConfigDict(extra="forbid")

    enabled: bool = Field(default=True, description="Switch the absorber on or off")
    eta: float = Field(default=0.05, gt=0, description="Strength (hartree)")
    width: float = Field(default=0.15, gt=0, description="Theta-edge width (radian)")
    r_width: Optional[float] = Field(default=0.15, description="r_max-edge width (bohr); None disables that edge")


class DynamicsConfig(BaseModel):
    """Wavepacket propagation settings"""
    model_config = ConfigDict(extra="forbid")

    isotope: Literal["H", "D"] = Field(default="H", description="Mass preset used for propagation")
    dt: Optional[float] = Field(default=None, gt=0, description="Time step (a.u.); None selects the auto step")
    dt_safety: float = Field(default=0.9, gt=0, lt=1, description="Auto dt = safety / spectral estimate")
    power_iterations: int = Field(default=50, ge=1, description="Power iterations for the spectral estimate")
    t_final_fs: float = Field(default=25.0, gt=0, description="Propagated time (fs)")
    output_interval_fs: float = Field(default=0.1, gt=0, description="Population sampling interval (fs)")
    snapshot_times_fs: list[float] = Field(default_factory=lambda: [0.0, 2.4, 4.8, 8.4], description="Snapshot times (fs)")


class RunConfig(BaseModel):
    """Top-level declarative run configuration"""
    model_config = ConfigDict(extra="forbid")

    manifest: Optional[Path] = Field(default=None, description="Manifest JSON listing FCIDUMP files per geometry")
    surface_bundle: Optional[Path] = Field(default=None, description="Prebuilt fine-surface bundle for dynamics-only runs")
    output_dir: Path = Field(default=Path("run"), description="Directory receiving all stage artifacts")
    stages: list[Stage] = Field(default_factory=lambda: list(STAGES), description="Pipeline stages to execute")
    seed: int = Field(default=0, description="Seed for every random choice in the run")
    ssvqe: SsvqeConfig = Field(default_factory=SsvqeConfig)
    nac: NacConfig = Field(default_factory=NacConfig)
    grid: GridSpec = Field(default_factory=GridSpec)
    cap: CapSpec = Field(default_factory=CapSpec)
    dynamics: DynamicsConfig = Field(default_factory=DynamicsConfig)

    @model_validator(mode="after")
    def _cap_inside_grid(self):
        if self.cap.enabled and self.grid.theta_max - self.cap.width <= self.grid.theta_min:
            raise ValueError("CAP onset theta_max - width must lie above theta_min")
        if self.cap.enabled and self.cap.r_width is not None and self.grid.r_max - self.cap.r_width <= self.grid.r_min:
            raise ValueError("CAP onset r_max - r_width must lie above r_min")
        return self

    @property
    def mass(self) -> MassParams:
        return MassParams.preset(self.dynamics.isotope)

    def ordered_stages(self) -> list[str]:
        return [s for s in STAGES if s in self.stages]

    def resolve(self, base: Path) -> "RunConfig":
        """Return a copy whose relative paths are anchored at `base`."""
        updates = {}
        for name in ("manifest", "surface_bundle", "output_dir"):
            value = getattr(self, name)
            if value is not None and not value.is_absolute():
                updates[name] = base / value
        return self.model_copy(update=updates)


def load_config(path: str | os.PathLike) -> RunConfig:
    """Load and validate a JSON run configuration"""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"config {path} violates the schema:\n{e}") from e
    return config.resolve(path.parent)


def worker_count() -> int:
    """Process-pool size from NACDYN_WORKERS"""
    try:
        return max(1, int(os.getenv("NACDYN_WORKERS", "1")))
    except ValueError:
        return 1


def log_level() -> str:
    return os.getenv("NACDYN_LOG_LEVEL", "INFO").upper()
