"""
Coupled two-surface nuclear wavepacket dynamics on the (r, theta) grid.

Surface index 0 is B and 1 is A. The kinetic operator is
T = -(1/M) d2/dr2 - (1/(M r^2)) d2/dtheta2 with three-point stencils and chi = 0
outside the grid. The A/B coupling uses F = <A|d/dR|B>:
C(F) chi = -(1/M)(F_r D_r chi + D_r(F_r chi)) - (1/(M r^2))(F_theta D_theta chi + D_theta(F_theta chi)),
added to the A equation acting on chi_B and subtracted from the B equation acting
on chi_A. C is real antisymmetric, so the coupled operator is hermitian before the
absorbing potential -iW is added.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Annotated, Callable, Optional

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from tqdm import tqdm

from config import MASS_PRESETS, CapSpec, DynamicsConfig, GridSpec, MassParams
from exceptions import DimensionError, EigensolverError, InputError, InstabilityError
from functional.surfaces import FineSurfaces

logger = logging.getLogger(__name__)

FS_TO_AU = 41.341374575751
B, A = 0, 1
EIGENSOLVER_RESIDUAL = 1e-6


@dataclass
class Wavepacket:
    """chi[0] = chi_B, chi[1] = chi_A; absorbed = CAP norm loss per surface (B, A)"""

    chi: np.ndarray
    t: float = 0.0
    absorbed: np.ndarray = field(default_factory=lambda: np.zeros(2))
    dA: float = 1.0

    def __post_init__(self):
        self.chi = np.asarray(self.chi, dtype=complex)
        if self.chi.ndim != 3 or self.chi.shape[0] != 2:
            raise DimensionError(f"wavepacket array must be (2, n_r, n_theta), got {self.chi.shape}")
        self.absorbed = np.asarray(self.absorbed, dtype=float)

    @property
    def chi_B(self) -> np.ndarray:
        return self.chi[B]

    @property
    def chi_A(self) -> np.ndarray:
        return self.chi[A]

    def populations(self) -> np.ndarray:
        return np.sum(np.abs(self.chi) ** 2, axis=(1, 2)) * self.dA


def _neighbour_sum(u: np.ndarray, axis: int) -> np.ndarray:
    """u[i+1] + u[i-1] with zeros outside the grid"""
    out = np.zeros_like(u)
    o, v = np.moveaxis(out, axis, 0), np.moveaxis(u, axis, 0)
    o[:-1] += v[1:]
    o[1:] += v[:-1]
    return out


def _neighbour_difference(u: np.ndarray, axis: int) -> np.ndarray:
    """u[i+1] - u[i-1] with zeros outside the grid"""
    out = np.zeros_like(u)
    o, v = np.moveaxis(out, axis, 0), np.moveaxis(u, axis, 0)
    o[:-1] += v[1:]
    o[1:] -= v[:-1]
    return out


def cap_potential(r: np.ndarray, theta: np.ndarray, cap: Optional[CapSpec]) -> np.ndarray:
    """W >= 0 of the absorber -iW: quadratic ramps inside the theta_max and r_max edges"""
    W = np.zeros((r.size, theta.size))
    if cap is None or not cap.enabled:
        return W
    onset = theta[-1] - cap.width
    ramp = np.where(theta > onset, cap.eta * ((theta - onset) / cap.width) ** 2, 0.0)
    W += ramp[None, :]
    if cap.r_width is not None:
        onset = r[-1] - cap.r_width
        ramp = np.where(r > onset, cap.eta * ((r - onset) / cap.r_width) ** 2, 0.0)
        W += ramp[:, None]
    return W


class CoupledHamiltonian:
    """Matrix-free coupled operator; calling it applies the full operator including -iW."""

    def __init__(
        self,
        fs: FineSurfaces,
        mass: MassParams,
        cap: Optional[CapSpec] = None,
        energy_offset: float = 0.0,
    ):
        if fs.r.size < 2 or fs.theta.size < 2:
            raise DimensionError("the dynamics grid needs at least two points per axis")
        self.r = fs.r
        self.theta = fs.theta
        self.dr = float(fs.r[1] - fs.r[0])
        self.dtheta = float(fs.theta[1] - fs.theta[0])
        self.dA = self.dr * self.dtheta
        self.mass = mass.m_h
        self.inv_r2 = (1.0 / fs.r**2)[:, None]
        self.energy_offset = energy_offset
        self.V = np.stack([fs.E_B, fs.E_A]) - energy_offset
        self.F_r = fs.F_r
        self.F_theta = fs.F_theta
        self.W = cap_potential(fs.r, fs.theta, cap)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.r.size, self.theta.size)

    def kinetic(self, chi: np.ndarray) -> np.ndarray:
        d2r = (_neighbour_sum(chi, -2) - 2.0 * chi) / self.dr**2
        d2t = (_neighbour_sum(chi, -1) - 2.0 * chi) / self.dtheta**2
        return -(d2r + self.inv_r2 * d2t) / self.mass

    def coupling(self, chi: np.ndarray) -> np.ndarray:
        """C(F) acting on one surface component"""
        radial = (self.F_r * _neighbour_difference(chi, -2) + _neighbour_difference(self.F_r * chi, -2)) / (2.0 * self.dr)
        angular = (
            self.F_theta * _neighbour_difference(chi, -1) + _neighbour_difference(self.F_theta * chi, -1)
        ) / (2.0 * self.dtheta)
        return -(radial + self.inv_r2 * angular) / self.mass

    def apply_hermitian(self, chi: np.ndarray) -> np.ndarray:
        out = self.kinetic(chi) + self.V * chi
        out[A] += self.coupling(chi[B])
        out[B] -= self.coupling(chi[A])
        return out

    def apply(self, chi: np.ndarray) -> np.ndarray:
        return self.apply_hermitian(chi) - 1j * self.W * chi

    __call__ = apply

    def spectral_bound(self) -> float:
        """Rigorous upper bound on the spectral radius of the hermitian part"""
        m, inv_r2 = self.mass, float(self.inv_r2.max())
        kinetic = 4.0 / (m * self.dr**2) + 4.0 * inv_r2 / (m * self.dtheta**2)
        coupling = 2.0 * np.abs(self.F_r).max() / (m * self.dr) + 2.0 * np.abs(self.F_theta).max() * inv_r2 / (m * self.dtheta)
        return float(kinetic + coupling + np.abs(self.V).max())

    def power_estimate(self, iterations: int = 50, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((2,) + self.shape).astype(complex)
        v /= np.linalg.norm(v)
        for _ in range(iterations):
            w = self.apply_hermitian(v)
            v = w / np.linalg.norm(w)
        return float(np.linalg.norm(self.apply_hermitian(v)))


def build_hamiltonian_apply(
    fs: Annotated[FineSurfaces, "Surfaces on the dynamics grid"],
    m: Annotated[MassParams, "Nuclear mass"],
    cap: Annotated[Optional[CapSpec], "Absorbing potential"] = None,
    grid: Annotated[Optional[GridSpec], "Dynamics grid the surfaces must match"] = None,
    energy_offset: Annotated[float, "Constant subtracted from both surfaces (hartree)"] = 0.0,
) -> CoupledHamiltonian:
    if grid is not None:
        fs.check_grid(grid)
    return CoupledHamiltonian(fs, m, cap, energy_offset)


def single_surface_operator(r: np.ndarray, theta: np.ndarray, V: np.ndarray, m: MassParams) -> sparse.csr_array:
    """Kinetic + V on one surface as a sparse matrix over row-major (r, theta) indices"""
    n_r, n_t = r.size, theta.size
    dr, dt = r[1] - r[0], theta[1] - theta[0]
    d2r = sparse.diags_array([1.0, -2.0, 1.0], offsets=[-1, 0, 1], shape=(n_r, n_r)) / dr**2
    d2t = sparse.diags_array([1.0, -2.0, 1.0], offsets=[-1, 0, 1], shape=(n_t, n_t)) / dt**2
    kinetic = -(sparse.kron(d2r, sparse.eye_array(n_t)) + sparse.kron(sparse.diags_array(1.0 / r**2), d2t)) / m.m_h
    return (kinetic + sparse.diags_array(np.ravel(V))).tocsr()


def initial_wavepacket(
    ground_pes: Annotated[np.ndarray, "Ground-state (X) PES on the grid (hartree)"],
    grid: Annotated[GridSpec, "Dynamics grid"],
    m: Annotated[MassParams, "Nuclear mass"],
) -> tuple[Wavepacket, float]:
    """
    Vibrational ground state of the X surface placed on B (vertical transition).
    Returns the packet and its zero-point energy E0 - min(V).
    """
    r, theta = grid.r_axis(), grid.theta_axis()
    V = np.asarray(ground_pes, dtype=float)
    if V.shape != grid.shape:
        raise DimensionError(f"ground PES shape {V.shape} differs from grid {grid.shape}")
    H = single_surface_operator(r, theta, V, m)
    v_min = float(V.min())
    try:
        values, vectors = eigsh(H.tocsc(), k=1, sigma=v_min, which="LM")
    except ArpackNoConvergence as e:
        raise EigensolverError("ground vibrational eigensolve did not converge") from e
    energy = float(values[0])
    vector = vectors[:, 0].real
    residual = float(np.linalg.norm(H @ vector - energy * vector))
    if residual > EIGENSOLVER_RESIDUAL:
        raise EigensolverError("ground vibrational eigenvector is inaccurate", residual)
    if vector[np.argmax(np.abs(vector))] < 0:
        vector = -vector
    dA = grid.dr * grid.dtheta
    chi = np.zeros((2,) + grid.shape, dtype=complex)
    chi[B] = vector.reshape(grid.shape) / math.sqrt(np.sum(vector**2) * dA)
    zpe = energy - v_min
    logger.info("initial packet: E0 = %.8f hartree, zero-point energy %.6f hartree (M = %.2f)", energy, zpe, m.m_h)
    return Wavepacket(chi, 0.0, np.zeros(2), dA), zpe


def _hermitian_part(H_apply: Callable) -> Callable:
    return getattr(H_apply, "apply_hermitian", H_apply)


def _check_finite(chi: np.ndarray, step: int, stability_estimate: float, dt: float) -> None:
    if not np.all(np.isfinite(chi)):
        raise InstabilityError(step, stability_estimate, dt)


def _overlap(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Re<x|y> per surface, without the area element"""
    return np.sum((np.conj(x) * y).real, axis=(1, 2))


def _pair_norm(older, newer, h_older, h_newer, dt: float) -> np.ndarray:
    """Per-surface Re<newer|older> + dt^2/2 Re<H newer|H older>; the hermitian leapfrog keeps its sum fixed"""
    return _overlap(newer, older) + 0.5 * dt**2 * _overlap(h_newer, h_older)


def bootstrap_first_step(
    chi0: Annotated[Wavepacket, "Packet at t = 0"],
    dt: Annotated[float, "Time step (a.u.)"],
    H_apply: Annotated[Callable, "Full operator, e.g. a CoupledHamiltonian"],
    stability_estimate: float = float("nan"),
) -> Wavepacket:
    """
    chi(dt) = chi0 - i dt H chi0 - (dt^2/2) H^2 chi0.
    The absorbed norm is what the same step with the hermitian part alone would have kept.
    """
    h1 = H_apply(chi0.chi)
    h2 = H_apply(h1)
    chi1 = chi0.chi - 1j * dt * h1 - 0.5 * dt**2 * h2
    _check_finite(chi1, 1, stability_estimate, dt)
    absorbed = chi0.absorbed.copy()
    W = getattr(H_apply, "W", None)
    if W is not None and W.any():
        hermitian = _hermitian_part(H_apply)
        g1 = hermitian(chi0.chi)
        kept = chi0.chi - 1j * dt * g1 - 0.5 * dt**2 * hermitian(g1)
        absorbed += (_overlap(kept, kept) - _overlap(chi1, chi1)) * chi0.dA
    return Wavepacket(chi1, chi0.t + dt, absorbed, chi0.dA)


def step_leapfrog(
    prev: Annotated[Wavepacket, "Packet at t - dt"],
    curr: Annotated[Wavepacket, "Packet at t"],
    dt: Annotated[float, "Time step (a.u.)"],
    H_apply: Annotated[Callable, "Operator; its hermitian part drives the step, its W damps it"],
    stability_estimate: float = float("nan"),
    step: int = 0,
) -> Wavepacket:
    """
    chi(t+dt) = D (D chi(t-dt) - 2i dt H chi(t)) with D = exp(-W dt); D = 1 without an absorber.

    The hermitian step u = D chi(t-dt) - 2i dt H chi(t) carries the pair norm of
    (D chi(t-dt), chi(t)) over to (chi(t), u) exactly. Damping the new pair to (D chi(t), D u)
    lowers it, and that drop, split per surface, is the absorbed norm of the step. The pair
    norm matches |chi|^2 up to O((E dt)^4), so populations plus absorbed stay at 1.
    """
    hermitian = _hermitian_part(H_apply)
    drive = hermitian(curr.chi)
    W = getattr(H_apply, "W", None)
    absorbed = curr.absorbed.copy()
    if W is None or not W.any():
        new = prev.chi - 2j * dt * drive
    else:
        D = np.exp(-W * dt)
        undamped = D * prev.chi - 2j * dt * drive
        new = D * undamped
        damped = D * curr.chi
        before = _pair_norm(curr.chi, undamped, drive, hermitian(undamped), dt)
        after = _pair_norm(damped, new, hermitian(damped), hermitian(new), dt)
        absorbed += (before - after) * curr.dA
    _check_finite(new, step, stability_estimate, dt)
    return Wavepacket(new, curr.t + dt, absorbed, curr.dA)


def observables(wp: Annotated[Wavepacket, "Current packet"]) -> dict:
    P_B, P_A = wp.populations()
    absorbed_B, absorbed_A = wp.absorbed
    return {
        "P_B": float(P_B),
        "P_A": float(P_A),
        "absorbed_A": float(absorbed_A),
        "absorbed_B": float(absorbed_B),
        "total": float(P_B + P_A + absorbed_A + absorbed_B),
    }


@dataclass
class PropagationResult:
    populations: pd.DataFrame
    snapshots: dict[float, tuple[float, np.ndarray, np.ndarray]]
    zero_point_energy: float
    dt: float
    stability_estimate: float
    power_estimate: float
    energy_offset: float
    final: Wavepacket


def stability_estimate(H: CoupledHamiltonian, iterations: int = 50) -> tuple[float, float]:
    """(E_spec, power-iteration estimate); E_spec never undercuts the rigorous bound"""
    power = H.power_estimate(iterations)
    return max(power, H.spectral_bound()), power


def _step_index(t_fs: float, dt: float) -> int:
    return int(round(t_fs * FS_TO_AU / dt))


def propagate(
    fine_surfaces: Annotated[FineSurfaces, "Surfaces on the dynamics grid"],
    grid: Annotated[GridSpec, "Dynamics grid"],
    mass: Annotated[MassParams, "Nuclear mass"],
    cap: Annotated[CapSpec, "Absorbing potential"],
    config: Annotated[DynamicsConfig, "Time stepping and output settings"],
    progress: Annotated[bool, "Show a progress bar"] = True,
) -> PropagationResult:
    fine_surfaces.check_grid(grid)
    packet, zpe = initial_wavepacket(fine_surfaces.E_X, grid, mass)

    unshifted = CoupledHamiltonian(fine_surfaces, mass, cap)
    offset = float(np.real(np.vdot(packet.chi, unshifted.apply_hermitian(packet.chi)))) * packet.dA
    H = CoupledHamiltonian(fine_surfaces, mass, cap, energy_offset=offset)
    e_spec, power = stability_estimate(H, config.power_iterations)
    limit = 1.0 / e_spec
    if config.dt is None:
        dt = config.dt_safety / e_spec
    elif config.dt >= limit:
        raise InputError(f"dt={config.dt} a.u. exceeds the stability limit {limit:.4g} a.u.")
    else:
        dt = config.dt
    n_steps = max(1, int(round(config.t_final_fs * FS_TO_AU / dt)))
    logger.info(
        "propagating %d steps of dt = %.5f a.u. (E_spec = %.4f, power estimate %.4f, offset %.6f)",
        n_steps, dt, e_spec, power, offset,
    )

    n_samples = int(math.floor(config.t_final_fs / config.output_interval_fs + 1e-9))
    sample_steps = sorted({min(_step_index(k * config.output_interval_fs, dt), n_steps) for k in range(n_samples + 1)})
    snapshot_steps = {}
    for t_fs in config.snapshot_times_fs:
        step = _step_index(t_fs, dt)
        if step > n_steps:
            logger.warning("snapshot at %.3f fs lies beyond the propagated time", t_fs)
            continue
        snapshot_steps.setdefault(step, []).append(t_fs)

    rows = []
    snapshots = {}

    def record(step: int, wp: Wavepacket):
        if step in sample_steps_set:
            rows.append({"t_fs": step * dt / FS_TO_AU, **observables(wp)})
        for t_fs in snapshot_steps.get(step, ()):
            density = np.abs(wp.chi) ** 2
            snapshots[t_fs] = (step * dt / FS_TO_AU, density[B].copy(), density[A].copy())

    sample_steps_set = set(sample_steps)
    prev = packet
    record(0, prev)
    curr = bootstrap_first_step(prev, dt, H, e_spec)
    record(1, curr)
    for step in tqdm(range(2, n_steps + 1), desc="propagate", disable=not progress):
        prev, curr = curr, step_leapfrog(prev, curr, dt, H, e_spec, step)
        record(step, curr)

    populations = pd.DataFrame(rows, columns=["t_fs", "P_B", "P_A", "absorbed_A", "absorbed_B", "total"])
    drift = float(np.abs(populations["total"] - 1.0).max())
    logger.info("norm audit: max |P_B + P_A + absorbed - 1| = %.3e", drift)
    return PropagationResult(
        populations=populations,
        snapshots=dict(sorted(snapshots.items())),
        zero_point_energy=zpe,
        dt=dt,
        stability_estimate=e_spec,
        power_estimate=power,
        energy_offset=offset,
        final=curr,
    )


def zero_point_energies(ground_pes: np.ndarray, grid: GridSpec) -> pd.DataFrame:
    """Zero-point energy of the X surface for each isotope preset"""
    rows = []
    for isotope in MASS_PRESETS:
        mass = MassParams.preset(isotope)
        _, zpe = initial_wavepacket(ground_pes, grid, mass)
        rows.append({"isotope": isotope, "mass": mass.m_h, "zero_point_energy": zpe})
    return pd.DataFrame(rows, columns=["isotope", "mass", "zero_point_energy"])
