"""
Dense statevector simulation of the symmetry-preserving real ansatz.

Every two-qubit block is a real Givens rotation on the {|01>, |10>} subspace of its
qubit pair (a, b) and the identity on |00> and |11>. With c = cos(phi/2) and
s = sin(phi/2), the state with qubit a occupied and qubit b empty maps to
c|a> + s|b>, and the state with b occupied maps to -s|a> + c|b>. At phi = pi an
electron on qubit a moves to qubit b with sign +1.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Annotated, Literal, Optional, Sequence

import numpy as np

from exceptions import ArityError, DimensionError, FormatError
from functional.hamiltonian import PauliSum

logger = logging.getLogger(__name__)

Layout = Literal["brick_wall", "spin_adapted"]


@dataclass
class Statevector:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise DimensionError(f"{self.amplitudes.shape[0]} amplitudes for {self.n_qubits} qubits")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "Statevector") -> complex:
        """<self|other>"""
        if other.n_qubits != self.n_qubits:
            raise DimensionError(f"states on {self.n_qubits} and {other.n_qubits} qubits")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def weight_leakage(self, weight: int) -> float:
        """Probability outside the Hamming-weight-`weight` subspace"""
        index = np.arange(self.amplitudes.size)
        outside = np.bitwise_count(index) != weight
        return float(np.sum(np.abs(self.amplitudes[outside]) ** 2))

    def copy(self) -> "Statevector":
        return Statevector(self.amplitudes.copy(), self.n_qubits)


def basis_state(
    bitstring: Annotated[str, "Occupations, highest-index qubit first"],
    n_qubits: Annotated[Optional[int], "Register size; defaults to the bitstring length"] = None,
) -> Statevector:
    if not bitstring or set(bitstring) - {"0", "1"}:
        raise FormatError(f"bitstring {bitstring!r} is not binary")
    n = len(bitstring) if n_qubits is None else n_qubits
    if len(bitstring) != n:
        raise DimensionError(f"bitstring {bitstring!r} does not have {n} characters")
    amplitudes = np.zeros(1 << n, dtype=complex)
    amplitudes[int(bitstring, 2)] = 1.0
    return Statevector(amplitudes, n)


def brick_wall_layer(n_qubits: int) -> list[tuple[int, int]]:
    even = [(q, q + 1) for q in range(0, n_qubits - 1, 2)]
    odd = [(q, q + 1) for q in range(1, n_qubits - 1, 2)]
    return even + odd


def spin_adapted_layer(n_qubits: int) -> list[tuple[int, int]]:
    # neighbouring orbitals of the same spin: qubits q and q + 2
    first = [(q, q + 2) for q in range(n_qubits - 2) if (q // 2) % 2 == 0]
    second = [(q, q + 2) for q in range(n_qubits - 2) if (q // 2) % 2 == 1]
    return first + second


_LAYERS = {"brick_wall": brick_wall_layer, "spin_adapted": spin_adapted_layer}


@dataclass
class AnsatzCircuit:
    """Repeated layer of Givens blocks with one angle (radian) per block"""

    n_qubits: int
    depth: int
    layout: list[tuple[int, int]]
    parameters: np.ndarray = field(default_factory=lambda: np.zeros(0))
    _pairs: list = field(default=None, init=False, repr=False, compare=False)

    @classmethod
    def build(cls, n_qubits: int, depth: int, layout: Layout = "brick_wall", parameters=None) -> "AnsatzCircuit":
        blocks = _LAYERS[layout](n_qubits) * depth
        circuit = cls(n_qubits, depth, blocks)
        return circuit.bind(np.zeros(len(blocks)) if parameters is None else parameters)

    @property
    def n_parameters(self) -> int:
        return len(self.layout)

    def bind(self, parameters: Sequence[float]) -> "AnsatzCircuit":
        parameters = np.asarray(parameters, dtype=float).ravel()
        if parameters.size != self.n_parameters:
            raise ArityError(f"{parameters.size} angles for {self.n_parameters} blocks")
        bound = replace(self, parameters=parameters)
        bound._pairs = self._pairs
        return bound

    def index_pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Basis indices (a occupied, b empty) and their partners (b occupied, a empty) per block"""
        if self._pairs is None:
            index = np.arange(1 << self.n_qubits)
            pairs = []
            for a, b in self.layout:
                source = index[((index >> a) & 1 == 1) & ((index >> b) & 1 == 0)]
                pairs.append((source, source ^ ((1 << a) | (1 << b))))
            self._pairs = pairs
        return self._pairs

    def apply_block(self, amplitudes: np.ndarray) -> np.ndarray:
        """Apply the bound circuit to a (2^n,) vector or a (2^n, k) block of columns"""
        out = np.array(amplitudes, copy=True)
        for (source, partner), phi in zip(self.index_pairs(), self.parameters):
            c, s = np.cos(0.5 * phi), np.sin(0.5 * phi)
            va = out[source]
            vb = out[partner]
            out[source] = c * va - s * vb
            out[partner] = s * va + c * vb
        return out


def apply_ansatz(
    circuit: Annotated[AnsatzCircuit, "Bound ansatz circuit"],
    input_state: Annotated[Statevector, "State to rotate"],
) -> Statevector:
    if input_state.n_qubits != circuit.n_qubits:
        raise DimensionError(f"circuit on {circuit.n_qubits} qubits, state on {input_state.n_qubits}")
    if circuit.parameters.size != circuit.n_parameters:
        raise ArityError(f"{circuit.parameters.size} angles for {circuit.n_parameters} blocks")
    return Statevector(circuit.apply_block(input_state.amplitudes), circuit.n_qubits)


def expectation(
    state: Annotated[Statevector, "Normalised state"],
    op: Annotated[PauliSum, "Observable"],
) -> float:
    if op.n_qubits != state.n_qubits:
        raise DimensionError(f"operator on {op.n_qubits} qubits, state on {state.n_qubits}")
    value = np.vdot(state.amplitudes, op.apply(state.amplitudes))
    if abs(value.imag) > 1e-10:
        logger.debug("expectation has imaginary residue %.3e", value.imag)
    return float(value.real)


def transition_amplitude(
    state_p: Annotated[Statevector, "Bra state"],
    op: Annotated[PauliSum, "Operator"],
    state_q: Annotated[Statevector, "Ket state"],
) -> complex:
    """Exact <psi_p|O|psi_q>"""
    for state in (state_p, state_q):
        if op.n_qubits != state.n_qubits:
            raise DimensionError(f"operator on {op.n_qubits} qubits, state on {state.n_qubits}")
    return complex(np.vdot(state_p.amplitudes, op.apply(state_q.amplitudes)))
