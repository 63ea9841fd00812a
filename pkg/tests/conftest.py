from pathlib import Path

import numpy as np
import pytest

from config import CapSpec, DynamicsConfig, GridSpec, RunConfig
from functional.surfaces import FineSurfaces
from functional.synthetic import ConicalModel, model_surfaces

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def fixture_fcidump() -> Path:
    return DATA_DIR / "h2o_cation_fixture.fcidump"


@pytest.fixture
def model() -> ConicalModel:
    return ConicalModel()


@pytest.fixture
def small_grid() -> GridSpec:
    return GridSpec(n_r=24, n_theta=24)


@pytest.fixture
def model_fine(model, small_grid) -> FineSurfaces:
    return model_surfaces(model, small_grid)


def flat_surfaces(n_r: int = 16, n_theta: int = 16, coupled: bool = True, seed: int = 3) -> FineSurfaces:
    """Gently sloped two-surface model on [1.5, 2.5] x [1.5, 2.5] with smooth couplings"""
    r = np.linspace(1.5, 2.5, n_r)
    theta = np.linspace(1.5, 2.5, n_theta)
    R, T = np.meshgrid(r, theta, indexing="ij")
    scale = 1.0 if coupled else 0.0
    return FineSurfaces(
        r=r,
        theta=theta,
        E_X=0.5 * (R - 2.0) ** 2 + 0.1 * (T - 2.0) ** 2,
        E_A=-0.02 * (T - 2.0) + 0.01 * (R - 2.0),
        E_B=0.02 * (T - 2.0) - 0.01 * (R - 2.0),
        F_r=scale * 0.3 * np.cos(T),
        F_theta=scale * (0.5 + 0.2 * np.sin(3.0 * R)),
    )


def gaussian_packet(fs: FineSurfaces, r0: float = 2.0, theta0: float = 2.0, width: float = 0.15) -> np.ndarray:
    R, T = np.meshgrid(fs.r, fs.theta, indexing="ij")
    chi = np.zeros((2,) + R.shape, dtype=complex)
    chi[0] = np.exp(-((R - r0) ** 2 + (T - theta0) ** 2) / (4.0 * width**2))
    dA = (fs.r[1] - fs.r[0]) * (fs.theta[1] - fs.theta[0])
    return chi / np.sqrt(np.sum(np.abs(chi) ** 2) * dA)


@pytest.fixture
def dynamics_config() -> RunConfig:
    """Dynamics-only config on the 24 x 24 grid over the default range; the bundle path is filled in per test"""
    return RunConfig(
        stages=["dynamics"],
        grid=GridSpec(n_r=24, n_theta=24),
        cap=CapSpec(),
        dynamics=DynamicsConfig(t_final_fs=1.0, output_interval_fs=0.25, snapshot_times_fs=[0.0, 0.5]),
    )
