"""
Weighted subspace-search VQE over the symmetry-preserving real ansatz.

One parameterised unitary rotates k orthogonal reference states; minimising the
strictly weighted energy sum sends the k-th reference to the k-th eigenstate.
"""
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Annotated, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from tqdm import tqdm

from config import SsvqeConfig
from exceptions import DimensionError
from functional.hamiltonian import (
    MAX_DENSE_QUBITS,
    PauliSum,
    build_fermionic_hamiltonian,
    jordan_wigner,
    sector_eigenvalues,
)
from functional.qsim import AnsatzCircuit, Statevector, basis_state

logger = logging.getLogger(__name__)

LOCAL_MINIMUM_TOLERANCE = 1e-6


@dataclass
class GeometryResult:
    geometry_tag: tuple[float, float]
    energies: np.ndarray
    params: np.ndarray
    objective: float
    converged: bool
    n_iterations: int
    gradient_norm: float
    permutation: tuple[int, ...]
    restarted: bool = False
    local_minimum: bool = False
    grid_index: Optional[tuple[int, int]] = None


@dataclass
class EigenstateSet:
    """Rotated reference states in ascending energy order"""

    states: list[Statevector]
    energies: np.ndarray
    params: np.ndarray
    permutation: tuple[int, ...] = field(default=())

    def max_overlap(self) -> float:
        worst = 0.0
        for p in range(len(self.states)):
            for q in range(p + 1, len(self.states)):
                worst = max(worst, abs(self.states[p].inner(self.states[q])))
        return worst


class SsvqeProblem:
    """Objective, finite-difference gradient and state reconstruction for one Hamiltonian"""

    def __init__(self, hamiltonian: PauliSum, cfg: SsvqeConfig):
        n = cfg.n_qubits
        if hamiltonian.n_qubits != n:
            raise DimensionError(f"Hamiltonian on {hamiltonian.n_qubits} qubits, references on {n}")
        self.cfg = cfg
        self.hamiltonian = hamiltonian
        matrix = hamiltonian.to_matrix() if n <= MAX_DENSE_QUBITS else hamiltonian.to_sparse()
        if n <= MAX_DENSE_QUBITS and np.abs(matrix.imag).max(initial=0.0) < 1e-14:
            matrix = matrix.real
        self.matrix = matrix
        self.circuit = AnsatzCircuit.build(n, cfg.depth, cfg.layout)
        self.references = np.column_stack([basis_state(b).amplitudes.real for b in cfg.initial_bitstrings])
        self.weights = np.asarray(cfg.weights, dtype=float)

    @property
    def n_parameters(self) -> int:
        return self.circuit.n_parameters

    def rotated(self, params: np.ndarray) -> np.ndarray:
        return self.circuit.bind(params).apply_block(self.references)

    def energies(self, params: np.ndarray) -> np.ndarray:
        """E_k = <ref_k|U+ H U|ref_k> in reference order"""
        psi = self.rotated(params)
        return np.real(np.sum(np.conj(psi) * (self.matrix @ psi), axis=0))

    def objective(self, params: np.ndarray) -> float:
        return float(self.weights @ self.energies(params))

    def gradient(self, params: np.ndarray) -> np.ndarray:
        step = self.cfg.optimizer.gradient_step
        params = np.asarray(params, dtype=float)
        grad = np.empty_like(params)
        for i in range(params.size):
            shifted = params.copy()
            shifted[i] += step
            forward = self.objective(shifted)
            shifted[i] -= 2.0 * step
            backward = self.objective(shifted)
            grad[i] = (forward - backward) / (2.0 * step)
        return grad

    def minimize(self, x0: np.ndarray):
        opts = self.cfg.optimizer
        return minimize(
            self.objective,
            np.asarray(x0, dtype=float),
            jac=self.gradient,
            method="BFGS",
            options={"gtol": opts.gtol, "maxiter": opts.max_iterations},
        )

    def cold_start(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.cfg.init_scale, self.cfg.init_scale, self.n_parameters)

    def sector_targets(self) -> Optional[np.ndarray]:
        """Exact lowest sector eigenvalues the references can reach, or None when not dense-diagonalisable"""
        n = self.cfg.n_qubits
        if n > MAX_DENSE_QUBITS:
            return None
        weights = {b.count("1") for b in self.cfg.initial_bitstrings}
        if len(weights) != 1:
            return None
        spin_z = None
        if self.cfg.layout == "spin_adapted":
            sz = {_spin_z(b) for b in self.cfg.initial_bitstrings}
            if len(sz) != 1:
                return None
            spin_z = sz.pop()
        values = sector_eigenvalues(self.hamiltonian, weights.pop(), spin_z)
        k = len(self.cfg.initial_bitstrings)
        return values[:k] if values.size >= k else None

    def result(self, optimum, geometry_tag, restarted: bool = False) -> tuple[GeometryResult, EigenstateSet]:
        params = np.asarray(optimum.x, dtype=float)
        raw = self.energies(params)
        permutation = tuple(int(i) for i in np.argsort(raw, kind="stable"))
        energies = raw[list(permutation)]
        gradient_norm = float(np.linalg.norm(self.gradient(params)))
        converged = bool(optimum.success) or gradient_norm <= self.cfg.optimizer.gtol
        targets = self.sector_targets()
        local_minimum = bool(targets is not None and np.any(energies - targets > LOCAL_MINIMUM_TOLERANCE))
        if not converged:
            logger.warning("SSVQE at %s stopped unconverged: %s (|g| = %.2e)", geometry_tag, optimum.message, gradient_norm)
        if local_minimum:
            logger.warning("SSVQE at %s sits above the exact sector energies %s", geometry_tag, targets)
        result = GeometryResult(
            geometry_tag=geometry_tag,
            energies=energies,
            params=params,
            objective=float(optimum.fun),
            converged=converged,
            n_iterations=int(optimum.nit),
            gradient_norm=gradient_norm,
            permutation=permutation,
            restarted=restarted,
            local_minimum=local_minimum,
        )
        return result, self.eigenstates(params, permutation)

    def eigenstates(self, params: np.ndarray, permutation: Sequence[int]) -> EigenstateSet:
        psi = self.rotated(params)
        raw = self.energies(params)
        states = [Statevector(psi[:, k], self.cfg.n_qubits) for k in permutation]
        return EigenstateSet(states, raw[list(permutation)], np.asarray(params), tuple(permutation))


def _spin_z(bitstring: str) -> float:
    bits = bitstring[::-1]
    up = sum(int(b) for b in bits[0::2])
    down = sum(int(b) for b in bits[1::2])
    return 0.5 * (up - down)


def ssvqe_objective(
    params: Annotated[Sequence[float], "Ansatz angles (radian)"],
    H: Annotated[PauliSum, "Qubit Hamiltonian"],
    cfg: Annotated[SsvqeConfig, "SSVQE settings"],
) -> float:
    """w0*E0 + w1*E1 + ... with E_k the energy of the k-th rotated reference"""
    return SsvqeProblem(H, cfg).objective(np.asarray(params, dtype=float))


def optimize(
    H: Annotated[PauliSum, "Hermitian qubit Hamiltonian"],
    cfg: Annotated[SsvqeConfig, "SSVQE settings"],
    seed: Annotated[int | Sequence[int], "Seed for cold-start angles"] = 0,
    warm_start: Annotated[Optional[Sequence[float]], "Initial angles; overrides cfg.warm_start"] = None,
    geometry_tag: Annotated[tuple[float, float], "(r, theta) of the geometry"] = (float("nan"), float("nan")),
) -> tuple[GeometryResult, EigenstateSet]:
    """BFGS minimisation of the weighted objective; unconverged results are flagged, not raised."""
    problem = SsvqeProblem(H, cfg)
    initial = warm_start if warm_start is not None else cfg.warm_start
    if initial is not None:
        starts = [np.asarray(initial, dtype=float)]
    else:
        rng = np.random.default_rng(seed)
        starts = [problem.cold_start(rng) for _ in range(cfg.n_starts)]
    best = None
    for x0 in starts:
        candidate = problem.minimize(x0)
        if best is None or candidate.fun < best.fun:
            best = candidate
    return problem.result(best, geometry_tag)


def hamiltonian_from_fcidump(path, n_qubits: int, geometry_tag=None) -> PauliSum:
    from data_source.fcidump_utils import FCIDumpUtils

    ints = FCIDumpUtils.read_fcidump(path, geometry_tag)
    if ints.n_qubits != n_qubits:
        raise DimensionError(f"{path}: {ints.n_orbitals} orbitals need {ints.n_qubits} qubits, references have {n_qubits}")
    return jordan_wigner(build_fermionic_hamiltonian(ints), n_qubits)


def _extrapolate(history: list[np.ndarray]) -> Optional[np.ndarray]:
    if not history:
        return None
    if len(history) == 1:
        return history[-1]
    return 2.0 * history[-1] - history[-2]


@dataclass
class _ChainTask:
    points: list[tuple[tuple[int, int], str, tuple[float, float]]]
    cfg: SsvqeConfig
    seed: int
    initial: Optional[np.ndarray]
    history: list[np.ndarray]


def _run_chain(task: _ChainTask) -> list[GeometryResult]:
    """Optimise points in order, each warm-started from the previous one"""
    cfg = task.cfg
    params = task.initial
    history = list(task.history)
    results = []
    for (i, j), path, tag in task.points:
        H = hamiltonian_from_fcidump(path, cfg.n_qubits, tag)
        result, _ = optimize(H, cfg, seed=[task.seed, i, j], warm_start=params, geometry_tag=tag)
        estimate = _extrapolate(history)
        if (
            cfg.n_restarts
            and estimate is not None
            and np.any(result.energies > estimate + cfg.restart_threshold)
        ):
            logger.info("point %s exceeds the neighbour estimate; %d restarts", tag, cfg.n_restarts)
            problem = SsvqeProblem(H, cfg)
            best = None
            for attempt in range(cfg.n_restarts):
                rng = np.random.default_rng([task.seed, i, j, attempt + 1])
                candidate = problem.minimize(problem.cold_start(rng))
                if best is None or candidate.fun < best.fun:
                    best = candidate
            if best.fun < result.objective:
                result, _ = problem.result(best, tag, restarted=True)
            else:
                result.restarted = True
        result.grid_index = (i, j)
        results.append(result)
        params = result.params
        history.append(result.energies)
    return results


def scan_grid(
    manifest,
    cfg: Annotated[SsvqeConfig, "SSVQE settings"],
    seed: Annotated[int, "Run seed"] = 0,
    workers: Annotated[int, "Process-pool size"] = 1,
    progress: Annotated[bool, "Show a progress bar"] = True,
) -> dict[tuple[int, int], GeometryResult]:
    """
    Optimise every coarse point of the manifest.

    The theta_min column is solved first as one warm-started chain along r; each r row
    then runs as its own chain along theta, warm-started from its column-0 point. Rows
    are independent, so they run in parallel and the result does not depend on `workers`.
    """
    n_r, n_theta = manifest.shape

    def point(i, j):
        entry = manifest.point(i, j)
        return (i, j), str(manifest.resolve(entry.center)), (entry.r, entry.theta)

    bar = tqdm(total=n_r * n_theta, desc="SSVQE scan", disable=not progress)
    spine = _run_chain(_ChainTask([point(i, 0) for i in range(n_r)], cfg, seed, None, []))
    bar.update(len(spine))
    results = {r.grid_index: r for r in spine}

    tasks = [
        _ChainTask([point(i, j) for j in range(1, n_theta)], cfg, seed, spine[i].params, [spine[i].energies])
        for i in range(n_r)
        if n_theta > 1
    ]
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=min(workers, len(tasks))) as pool:
            for row in pool.imap(_run_chain, tasks):
                results.update({r.grid_index: r for r in row})
                bar.update(len(row))
    else:
        for task in tasks:
            row = _run_chain(task)
            results.update({r.grid_index: r for r in row})
            bar.update(len(row))
    bar.close()

    unconverged = [r.geometry_tag for r in results.values() if not r.converged]
    if unconverged:
        logger.warning("%d unconverged SSVQE points: %s", len(unconverged), unconverged)
    return results


def rebuild_states(
    params: Annotated[Sequence[float], "Optimised angles"],
    permutation: Annotated[Sequence[int], "Reference index of each sorted state"],
    H: Annotated[PauliSum, "Hamiltonian at the centre geometry"],
    cfg: Annotated[SsvqeConfig, "SSVQE settings"],
) -> EigenstateSet:
    return SsvqeProblem(H, cfg).eigenstates(np.asarray(params, dtype=float), permutation)
