"""
Synthetic conical-intersection model on (r, theta) and the FCIDUMP files that reproduce it.

Two diabatic hole states on the 1b2 and 3a1 orbitals, split by d(r, theta) and mixed by a
constant v0, give the adiabatic pair E_A,B = e(r, theta) -/+ sqrt(d^2 + v0^2). They touch
where d = 0, on the seam theta_seam(r). The ground state X is a separable harmonic well
with the hole on 1b1. The mixing angle alpha = atan2(v0, d) / 2 makes <A|grad B> = grad alpha.

The FCIDUMP encoding is a one-hole Hamiltonian in three orbitals with five electrons:
h1 = -H_hole, no two-electron part, core = 2 tr(H_hole). Every single-hole determinant
then has energy H_hole[k, k] and the hole hops with amplitude H_hole[p, q].
"""
import logging
import math
import os
from pathlib import Path
from typing import Annotated, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import MASS_PRESETS, CapSpec, DynamicsConfig, GridSpec, NacConfig, OptimizerConfig, RunConfig, SsvqeConfig
from functional.hamiltonian import ActiveSpaceIntegrals
from functional.surfaces import FineSurfaces, SurfaceSet

logger = logging.getLogger(__name__)

N_ORBITALS = 3
N_ELECTRONS = 5
# orbital order (1b2, 3a1, 1b1)
ORBITAL_B2, ORBITAL_A1, ORBITAL_B1 = 0, 1, 2


class ConicalModel(BaseModel):
    """Analytic B/A seam and X well; energies in hartree, r in bohr, theta in radian"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    mass: float = Field(default=MASS_PRESETS["H"], gt=0, description="Mass fixing the force constants")
    r0: float = Field(default=1.9, description="Equilibrium OH length")
    theta0: float = Field(default=1.8, description="Equilibrium HOH angle")
    omega_r: float = Field(default=0.03, gt=0, description="X stretch frequency")
    omega_theta: float = Field(default=0.01, gt=0, description="X bend frequency at r0")
    e_ref: float = Field(default=0.7, description="Mean B/A energy at the X minimum")
    slope: float = Field(default=0.05, description="Decrease of the mean B/A energy per radian of opening")
    split: float = Field(default=0.2, gt=0, description="d/dtheta of the diabatic splitting")
    seam_theta: float = Field(default=2.4, description="Seam angle at r0")
    seam_tilt: float = Field(default=0.2, description="d theta_seam / dr")
    coupling: float = Field(default=0.012, gt=0, description="Constant diabatic coupling v0")

    @property
    def k_r(self) -> float:
        return 0.5 * self.mass * self.omega_r**2

    @property
    def k_theta(self) -> float:
        return 0.5 * self.mass * self.r0**2 * self.omega_theta**2

    def ground(self, r, theta):
        r, theta = np.asarray(r, dtype=float), np.asarray(theta, dtype=float)
        return 0.5 * self.k_r * (r - self.r0) ** 2 + 0.5 * self.k_theta * (theta - self.theta0) ** 2

    def mean(self, r, theta):
        r, theta = np.asarray(r, dtype=float), np.asarray(theta, dtype=float)
        return self.e_ref + 0.5 * self.k_r * (r - self.r0) ** 2 - self.slope * (theta - self.theta0)

    def splitting(self, r, theta):
        r, theta = np.asarray(r, dtype=float), np.asarray(theta, dtype=float)
        return self.split * (theta - self.seam_theta - self.seam_tilt * (r - self.r0))

    def energies(self, r, theta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(E_X, E_A, E_B)"""
        gap = np.hypot(self.splitting(r, theta), self.coupling)
        mean = self.mean(r, theta)
        return self.ground(r, theta), mean - gap, mean + gap

    def mixing_angle(self, r, theta):
        return 0.5 * np.arctan2(self.coupling, self.splitting(r, theta))

    def nac(self, r, theta) -> tuple[np.ndarray, np.ndarray]:
        """
        (F_r, F_theta) = <A|d/dR|B>. F_theta is d alpha / d theta; F_r is the derivative along
        one OH bond with the other fixed, half the symmetric-stretch derivative of the model.
        """
        d = self.splitting(r, theta)
        dalpha_dd = -0.5 * self.coupling / (d**2 + self.coupling**2)
        F_theta = dalpha_dd * self.split
        F_r = 0.5 * dalpha_dd * (-self.split * self.seam_tilt)
        return F_r, F_theta

    def hole_hamiltonian(self, r: float, theta: float) -> np.ndarray:
        d = float(self.splitting(r, theta))
        mean = float(self.mean(r, theta))
        H = np.zeros((N_ORBITALS, N_ORBITALS))
        H[ORBITAL_B2, ORBITAL_B2] = mean + d
        H[ORBITAL_A1, ORBITAL_A1] = mean - d
        H[ORBITAL_B2, ORBITAL_A1] = H[ORBITAL_A1, ORBITAL_B2] = self.coupling
        H[ORBITAL_B1, ORBITAL_B1] = float(self.ground(r, theta))
        return H


def cartesian_geometry(r1: float, r2: float, theta: float) -> tuple[float, float, float, float]:
    """(Y1, Z1, Y2, Z2) of the hydrogens with O at the origin and the C2v axis along z"""
    s, c = math.sin(0.5 * theta), math.cos(0.5 * theta)
    return -r1 * s, -r1 * c, r2 * s, -r2 * c


def internal_geometry(Y1: float, Z1: float, Y2: float, Z2: float) -> tuple[float, float, float]:
    """(r1, r2, theta) of a Cartesian geometry"""
    r1, r2 = math.hypot(Y1, Z1), math.hypot(Y2, Z2)
    theta = math.atan2(abs(Y1 * Z2 - Z1 * Y2), Y1 * Y2 + Z1 * Z2)
    return r1, r2, theta


def synthetic_integrals(
    model: Annotated[ConicalModel, "Synthetic model"],
    r1: Annotated[float, "Length of OH bond 1 (bohr)"],
    r2: Annotated[float, "Length of OH bond 2 (bohr)"],
    theta: Annotated[float, "HOH angle (radian)"],
    geometry_tag: Optional[tuple[float, float]] = None,
) -> ActiveSpaceIntegrals:
    """One-hole integrals whose spectrum is the model at the mean bond length"""
    H = model.hole_hamiltonian(0.5 * (r1 + r2), theta)
    return ActiveSpaceIntegrals(
        n_orbitals=N_ORBITALS,
        n_electrons=N_ELECTRONS,
        core_energy=2.0 * float(np.trace(H)),
        h1=-H,
        h2=np.zeros((N_ORBITALS,) * 4),
        geometry_tag=geometry_tag,
        ms2=1,
    )


def model_surfaces(
    model: Annotated[ConicalModel, "Synthetic model"],
    grid: Annotated[GridSpec, "Dynamics grid"],
) -> FineSurfaces:
    """The model evaluated directly on the dynamics grid"""
    r, theta = grid.r_axis(), grid.theta_axis()
    R, T = np.meshgrid(r, theta, indexing="ij")
    E_X, E_A, E_B = model.energies(R, T)
    F_r, F_theta = model.nac(R, T)
    return FineSurfaces(
        r=r, theta=theta, E_X=E_X, E_A=E_A, E_B=E_B, F_r=F_r, F_theta=F_theta,
        metadata={"method": "analytic synthetic model", "model": model.model_dump()},
    )


def model_surface_set(
    model: Annotated[ConicalModel, "Synthetic model"],
    r: Annotated[np.ndarray, "Coarse r axis (bohr)"],
    theta: Annotated[np.ndarray, "Coarse theta axis (radian)"],
) -> SurfaceSet:
    R, T = np.meshgrid(r, theta, indexing="ij")
    E_X, E_A, E_B = model.energies(R, T)
    F_r, F_theta = model.nac(R, T)
    return SurfaceSet(
        r=r, theta=theta, E_X=E_X, E_A=E_A, E_B=E_B, F_r=F_r, F_theta=F_theta,
        mask=np.zeros(R.shape, dtype=bool),
    )


def write_synthetic_manifest(
    model: Annotated[ConicalModel, "Synthetic model"],
    r_axis: Annotated[np.ndarray, "Coarse r axis (bohr)"],
    theta_axis: Annotated[np.ndarray, "Coarse theta axis (radian)"],
    out_dir: Annotated[str | os.PathLike, "Directory receiving the manifest and FCIDUMP files"],
    delta: Annotated[float, "Cartesian displacement (bohr)"] = 0.001,
) -> Path:
    """Write a centre FCIDUMP plus the 8 displaced ones per coarse point, and their manifest"""
    from data_source.fcidump_utils import FCIDumpUtils
    from data_source.manifest_utils import DISPLACEMENT_KEYS, Manifest, ManifestPoint, ManifestUtils

    out_dir = Path(out_dir)
    (out_dir / "fcidump").mkdir(parents=True, exist_ok=True)
    points = []
    for i, r in enumerate(r_axis):
        for j, theta in enumerate(theta_axis):
            r, theta = float(r), float(theta)
            stem = f"fcidump/p{i:02d}_{j:02d}"
            center = f"{stem}_center.fcidump"
            FCIDumpUtils.write_fcidump(synthetic_integrals(model, r, r, theta, (r, theta)), out_dir / center)
            base = cartesian_geometry(r, r, theta)
            displaced = {}
            for key in DISPLACEMENT_KEYS:
                component = ("Y1", "Z1", "Y2", "Z2").index(key[:2])
                coords = list(base)
                coords[component] += delta if key[2] == "+" else -delta
                r1, r2, t = internal_geometry(*coords)
                name = f"{stem}_{key[:2]}{'p' if key[2] == '+' else 'm'}.fcidump"
                FCIDumpUtils.write_fcidump(synthetic_integrals(model, r1, r2, t, (r, theta)), out_dir / name)
                displaced[key] = name
            points.append(ManifestPoint(r=r, theta=theta, center=center, displaced=displaced))
    manifest_path = out_dir / "manifest.json"
    ManifestUtils.write_manifest(Manifest(delta_r=delta, points=points), manifest_path)
    return manifest_path


def write_synthetic_bundle(
    model: Annotated[ConicalModel, "Synthetic model"],
    grid: Annotated[GridSpec, "Dynamics grid"],
    save_path: Annotated[str | os.PathLike, "Destination bundle file"],
) -> Path:
    from data_source.table_utils import TableUtils
    from utils import provenance_header

    save_path = Path(save_path)
    TableUtils.write_surface_bundle(model_surfaces(model, grid), save_path, provenance_header("synth"))
    return save_path


def synthetic_run_config(
    grid: Optional[GridSpec] = None,
    t_final_fs: float = 15.0,
) -> RunConfig:
    """A full-pipeline config for the synthetic manifest"""
    grid = grid or GridSpec(n_r=32, n_theta=32)
    return RunConfig(
        manifest=Path("manifest.json"),
        output_dir=Path("run"),
        seed=0,
        ssvqe=SsvqeConfig(
            layout="spin_adapted",
            optimizer=OptimizerConfig(gtol=1e-6),
            restart_threshold=0.05,
        ),
        nac=NacConfig(),
        grid=grid,
        cap=CapSpec(),
        dynamics=DynamicsConfig(t_final_fs=t_final_fs, snapshot_times_fs=[0.0, 2.4, 4.8, 8.4]),
    )


def write_synthetic_run(
    out_dir: Annotated[str | os.PathLike, "Directory receiving manifest, FCIDUMPs, bundle and config"],
    model: Annotated[Optional[ConicalModel], "Synthetic model"] = None,
    coarse_shape: Annotated[tuple[int, int], "Coarse (n_r, n_theta)"] = (5, 5),
    grid: Annotated[Optional[GridSpec], "Dynamics grid"] = None,
    t_final_fs: Annotated[float, "Propagated time (fs)"] = 15.0,
) -> Path:
    """Synthetic manifest over the dynamics-grid hull, analytic bundle and a matching config.json"""
    model = model or ConicalModel()
    config = synthetic_run_config(grid, t_final_fs)
    out_dir = Path(out_dir)
    g = config.grid
    r_axis = np.linspace(g.r_min, g.r_max, coarse_shape[0])
    theta_axis = np.linspace(g.theta_min, g.theta_max, coarse_shape[1])
    write_synthetic_manifest(model, r_axis, theta_axis, out_dir, 0.001)
    write_synthetic_bundle(model, g, out_dir / "surfaces_model.bin")
    config_path = out_dir / "config.json"
    config_path.write_text(config.model_dump_json(indent=2, exclude_none=True) + "\n")
    logger.info("synthetic run written to %s (%d x %d coarse points)", out_dir, *coarse_shape)
    return config_path
