"""
First-order non-adiabatic couplings from SSVQE eigenstates.

Cartesian components come from finite-difference Hamiltonian derivatives at the
four displaced hydrogen coordinates (Y1, Z1, Y2, Z2) and are converted to the
symmetric-stretch / bend coordinates (r, theta). Atom 1 sits at
(Y1, Z1) = -r1 (sin(theta/2), cos(theta/2)) and atom 2 at
(Y2, Z2) = r2 (sin(theta/2), -cos(theta/2)), with O at the origin.

F_r is the derivative along one OH bond (the atom average of the radial parts) and
F_theta the derivative with respect to the full bond angle (r times the tangential
average). These are the couplings the dynamics operator pairs with d/dr and d/dtheta of
its kinetic terms; a symmetric-stretch F_r would be twice the value reported here.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass, replace
from multiprocessing import Pool
from typing import Annotated, Optional, Sequence

import numpy as np
from tqdm import tqdm

from config import NacConfig, SsvqeConfig
from exceptions import DegenerateGapError, DimensionError, EmptyFieldError, InputError
from functional.hamiltonian import PauliSum
from functional.qsim import Statevector, transition_amplitude
from functional.ssvqe import hamiltonian_from_fcidump, rebuild_states

logger = logging.getLogger(__name__)

CARTESIAN_COMPONENTS = ("Y1", "Z1", "Y2", "Z2")
SYMMETRY_WARNING_FACTOR = 10.0


def hamiltonian_derivative(
    H_plus: Annotated[PauliSum, "Hamiltonian at R + dR"],
    H_minus: Annotated[PauliSum, "Hamiltonian at R - dR"],
    delta: Annotated[float, "Displacement dR (bohr)"],
) -> PauliSum:
    """Central difference (H+ - H-) / (2 dR)"""
    if H_plus.n_qubits != H_minus.n_qubits:
        raise DimensionError(f"displaced Hamiltonians on {H_plus.n_qubits} and {H_minus.n_qubits} qubits")
    if not delta > 0:
        raise InputError(f"displacement must be positive, got {delta}")
    return ((H_plus - H_minus) / (2.0 * delta)).canonicalize()


def nac_component(
    psi_p: Annotated[Statevector, "Bra eigenstate"],
    psi_q: Annotated[Statevector, "Ket eigenstate"],
    dH: Annotated[PauliSum, "Hamiltonian derivative along one coordinate"],
    E_p: Annotated[float, "Energy of psi_p (hartree)"],
    E_q: Annotated[float, "Energy of psi_q (hartree)"],
    gap_floor: Annotated[float, "Smallest admissible |E_q - E_p|"] = 1e-5,
    geometry_tag=None,
) -> float:
    """<psi_p|dH|psi_q> / (E_q - E_p)"""
    if psi_p is psi_q:
        raise InputError("NAC needs two distinct states (p != q)")
    gap = E_q - E_p
    if abs(gap) <= gap_floor:
        raise DegenerateGapError(abs(gap), gap_floor, geometry_tag)
    amplitude = transition_amplitude(psi_p, dH, psi_q)
    if abs(amplitude.imag) > 1e-8:
        logger.debug("transition amplitude has imaginary part %.3e", amplitude.imag)
    return amplitude.real / gap


@dataclass(frozen=True)
class CartesianNac:
    """<p|d/dX|q> for X in (Y1, Z1, Y2, Z2), bohr^-1"""

    dY1: float
    dZ1: float
    dY2: float
    dZ2: float

    def __neg__(self) -> "CartesianNac":
        return CartesianNac(-self.dY1, -self.dZ1, -self.dY2, -self.dZ2)


@dataclass(frozen=True)
class InternalNac:
    F_r: float
    F_theta: float
    residual_r: float = 0.0
    residual_theta: float = 0.0
    geometry_tag: Optional[tuple[float, float]] = None
    symmetry_warning: bool = False


def atom_components(cn: CartesianNac, theta: float) -> tuple[float, float, float, float]:
    """(d/dr1, d/dr2, theta1, theta2) with the angular parts per unit arc length"""
    s, c = math.sin(0.5 * theta), math.cos(0.5 * theta)
    r1 = -cn.dY1 * s - cn.dZ1 * c
    r2 = cn.dY2 * s - cn.dZ2 * c
    t1 = -cn.dY1 * c + cn.dZ1 * s
    t2 = cn.dY2 * c + cn.dZ2 * s
    return r1, r2, t1, t2


def cartesian_to_internal(
    cn: Annotated[CartesianNac, "Cartesian NAC components"],
    theta: Annotated[float, "Bond angle (radian), inside (0, pi)"],
    r: Annotated[float, "OH length (bohr); scales the angular part to radian^-1"] = 1.0,
    tolerance: Annotated[float, "Atom-1 / atom-2 consistency tolerance"] = 1e-3,
    geometry_tag=None,
) -> InternalNac:
    """Average of the atom-1 and atom-2 conversions; their disagreement is kept as the residual."""
    if not 0.0 < theta < math.pi:
        raise InputError(f"theta={theta} outside (0, pi)")
    r1, r2, t1, t2 = atom_components(cn, theta)
    t1, t2 = r * t1, r * t2
    residual_r, residual_theta = abs(r1 - r2), abs(t1 - t2)
    warning = max(residual_r, residual_theta) > SYMMETRY_WARNING_FACTOR * tolerance
    if warning:
        logger.warning(
            "atom-1/atom-2 NAC mismatch at %s: |dr| = %.3e, |dtheta| = %.3e", geometry_tag, residual_r, residual_theta
        )
    return InternalNac(
        F_r=0.5 * (r1 + r2),
        F_theta=0.5 * (t1 + t2),
        residual_r=residual_r,
        residual_theta=residual_theta,
        geometry_tag=geometry_tag,
        symmetry_warning=warning,
    )


@dataclass
class NacField:
    """Internal-coordinate NAC over the coarse (r, theta) grid; masked points carry NaN"""

    r: np.ndarray
    theta: np.ndarray
    F_r: np.ndarray
    F_theta: np.ndarray
    mask: np.ndarray
    residual_r: np.ndarray = None
    residual_theta: np.ndarray = None
    warning: np.ndarray = None
    flipped: np.ndarray = None

    def __post_init__(self):
        shape = (len(self.r), len(self.theta))
        for name in ("residual_r", "residual_theta"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(shape))
        for name in ("warning", "flipped"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(shape, dtype=bool))
        for name in ("F_r", "F_theta", "mask", "residual_r", "residual_theta", "warning", "flipped"):
            if np.shape(getattr(self, name)) != shape:
                raise DimensionError(f"{name} has shape {np.shape(getattr(self, name))}, axes give {shape}")
        self.mask = np.asarray(self.mask, dtype=bool)

    @property
    def shape(self) -> tuple[int, int]:
        return self.F_r.shape

    def negated(self) -> "NacField":
        return replace(self, F_r=-self.F_r, F_theta=-self.F_theta)


def fix_sign_continuity(
    field: Annotated[NacField, "Coarse NAC field with masked points"],
    reference: Annotated[Optional[tuple[int, int]], "Grid index whose sign is kept"] = None,
) -> NacField:
    """
    Choose per-point signs by a breadth-first sweep from `reference`, flipping a
    neighbour when |F_n - F_c| > |F_n + F_c|. Components not connected to the
    reference start their own sweep from their first point in row-major order.
    """
    mask = field.mask
    if mask.all():
        raise EmptyFieldError("every NAC point is masked")
    n_r, n_theta = field.shape
    vectors = np.stack([field.F_r, field.F_theta], axis=-1).astype(float)
    flipped = np.zeros(field.shape, dtype=bool)
    visited = mask.copy()

    seeds = []
    if reference is not None:
        if mask[reference]:
            raise InputError(f"reference point {reference} is masked")
        seeds.append(tuple(reference))
    seeds.extend((i, j) for i in range(n_r) for j in range(n_theta))

    for seed in seeds:
        if visited[seed]:
            continue
        visited[seed] = True
        queue = deque([seed])
        while queue:
            i, j = queue.popleft()
            current = vectors[i, j]
            for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                if not (0 <= ni < n_r and 0 <= nj < n_theta) or visited[ni, nj]:
                    continue
                visited[ni, nj] = True
                neighbour = vectors[ni, nj]
                if np.linalg.norm(neighbour - current) > np.linalg.norm(neighbour + current):
                    vectors[ni, nj] = -neighbour
                    flipped[ni, nj] = True
                queue.append((ni, nj))

    n_flipped = int(flipped.sum())
    if n_flipped:
        logger.info("sign continuity flipped %d of %d NAC points", n_flipped, int((~mask).sum()))
    return replace(field, F_r=vectors[..., 0], F_theta=vectors[..., 1], flipped=field.flipped ^ flipped)


@dataclass
class PointNac:
    grid_index: tuple[int, int]
    geometry_tag: tuple[float, float]
    cartesian: Optional[CartesianNac]
    internal: Optional[InternalNac]
    masked: bool
    reason: str = ""


@dataclass
class _PointTask:
    grid_index: tuple[int, int]
    geometry_tag: tuple[float, float]
    center: str
    displaced: dict[str, str]
    delta: float
    params: np.ndarray
    permutation: tuple[int, ...]
    energies: np.ndarray
    ssvqe: SsvqeConfig
    nac: NacConfig


def evaluate_point(task: _PointTask) -> PointNac:
    """NAC between the configured state pair at one coarse point"""
    cfg = task.ssvqe
    p, q = task.nac.state_pair
    tag = task.geometry_tag
    H = hamiltonian_from_fcidump(task.center, cfg.n_qubits, tag)
    states = rebuild_states(task.params, task.permutation, H, cfg).states
    components = {}
    try:
        for name in CARTESIAN_COMPONENTS:
            H_plus = hamiltonian_from_fcidump(task.displaced[f"{name}+"], cfg.n_qubits, tag)
            H_minus = hamiltonian_from_fcidump(task.displaced[f"{name}-"], cfg.n_qubits, tag)
            dH = hamiltonian_derivative(H_plus, H_minus, task.delta)
            components[name] = nac_component(
                states[p], states[q], dH, task.energies[p], task.energies[q], task.nac.gap_floor, tag
            )
    except DegenerateGapError as e:
        logger.warning("masking NAC point: %s", e)
        return PointNac(task.grid_index, tag, None, None, True, "degenerate")
    cartesian = CartesianNac(components["Y1"], components["Z1"], components["Y2"], components["Z2"])
    internal = cartesian_to_internal(cartesian, tag[1], tag[0], task.nac.residual_tolerance, tag)
    return PointNac(task.grid_index, tag, cartesian, internal, False)


def compute_nac_field(
    manifest,
    energies: Annotated[dict, "Grid index -> (energies, params, permutation)"],
    ssvqe_cfg: SsvqeConfig,
    nac_cfg: NacConfig,
    workers: Annotated[int, "Process-pool size"] = 1,
    progress: Annotated[bool, "Show a progress bar"] = True,
) -> tuple[NacField, list[PointNac]]:
    """Evaluate every point in parallel, then fix the global sign pattern."""
    n_r, n_theta = manifest.shape
    tasks = []
    for (i, j), (point_energies, params, permutation) in sorted(energies.items()):
        entry = manifest.point(i, j)
        tasks.append(
            _PointTask(
                grid_index=(i, j),
                geometry_tag=(entry.r, entry.theta),
                center=str(manifest.resolve(entry.center)),
                displaced={k: str(manifest.resolve(v)) for k, v in entry.displaced.items()},
                delta=manifest.delta_r,
                params=np.asarray(params),
                permutation=tuple(permutation),
                energies=np.asarray(point_energies),
                ssvqe=ssvqe_cfg,
                nac=nac_cfg,
            )
        )
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=min(workers, len(tasks))) as pool:
            points = list(tqdm(pool.imap(evaluate_point, tasks), total=len(tasks), desc="NAC", disable=not progress))
    else:
        points = [evaluate_point(t) for t in tqdm(tasks, desc="NAC", disable=not progress)]

    shape = (n_r, n_theta)
    F_r = np.full(shape, np.nan)
    F_theta = np.full(shape, np.nan)
    residual_r = np.zeros(shape)
    residual_theta = np.zeros(shape)
    warning = np.zeros(shape, dtype=bool)
    mask = np.ones(shape, dtype=bool)
    for point in points:
        if point.masked:
            continue
        i, j = point.grid_index
        F_r[i, j] = point.internal.F_r
        F_theta[i, j] = point.internal.F_theta
        residual_r[i, j] = point.internal.residual_r
        residual_theta[i, j] = point.internal.residual_theta
        warning[i, j] = point.internal.symmetry_warning
        mask[i, j] = False
    raw = NacField(manifest.r_axis, manifest.theta_axis, F_r, F_theta, mask, residual_r, residual_theta, warning)
    return fix_sign_continuity(raw), points
