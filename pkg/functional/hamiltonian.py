"""
Active-space Hamiltonians in second quantization and their Jordan-Wigner qubit images.

Spin orbital 2p is orbital p spin-up and 2p+1 is orbital p spin-down. Qubit q is
bit q of a computational basis index, so qubit 0 is the least significant bit.
"""
import logging
from dataclasses import dataclass
from typing import Annotated, Iterable, Iterator, Mapping, Optional

import numpy as np
from scipy import linalg, sparse

from exceptions import CapacityError, DimensionError, IndexRangeError, InputError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
COEFFICIENT_CUTOFF = 1e-12
MAX_DENSE_QUBITS = 14

# (p, q, r, s) index permutations generating the 8-fold symmetry of (pq|rs)
_EIGHTFOLD_GENERATORS = ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1))

Ladder = tuple[int, int]
FermionTerm = tuple[Ladder, ...]


def spin_orbital(orbital: int, spin: int) -> int:
    return 2 * orbital + spin


@dataclass(frozen=True)
class ActiveSpaceIntegrals:
    """One- and two-electron integrals (chemists' notation) plus core energy at one geometry"""

    n_orbitals: int
    n_electrons: int
    core_energy: float
    h1: np.ndarray
    h2: np.ndarray
    geometry_tag: Optional[tuple[float, float]] = None
    ms2: int = 0

    def __post_init__(self):
        n = self.n_orbitals
        h1 = np.asarray(self.h1, dtype=float)
        h2 = np.asarray(self.h2, dtype=float)
        if h1.shape != (n, n) or h2.shape != (n, n, n, n):
            raise DimensionError(f"integral shapes {h1.shape}, {h2.shape} do not match NORB={n}")
        if not np.allclose(h1, h1.T, rtol=0.0, atol=SYMMETRY_TOLERANCE):
            raise InputError("one-electron integrals are not symmetric")
        for perm in _EIGHTFOLD_GENERATORS:
            if not np.allclose(h2, h2.transpose(perm), rtol=0.0, atol=SYMMETRY_TOLERANCE):
                raise InputError("two-electron integrals break 8-fold permutational symmetry")
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2", h2)

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_orbitals


class FermionOperator:
    """Sum of products of ladder operators; a ladder is (spin-orbital index, 1 for a† / 0 for a)."""

    def __init__(self, terms: Optional[Mapping[FermionTerm, complex]] = None):
        self.terms: dict[FermionTerm, complex] = {}
        for term, coefficient in (terms or {}).items():
            self._accumulate(tuple(term), coefficient)

    @classmethod
    def constant(cls, value: float) -> "FermionOperator":
        return cls({(): value})

    @classmethod
    def product(cls, ladders: Iterable[Ladder], coefficient: complex = 1.0) -> "FermionOperator":
        return cls({tuple((int(i), int(a)) for i, a in ladders): coefficient})

    def _accumulate(self, term: FermionTerm, coefficient: complex) -> None:
        self.terms[term] = self.terms.get(term, 0.0) + coefficient

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        result = FermionOperator(self.terms)
        for term, coefficient in other.terms.items():
            result._accumulate(term, coefficient)
        return result

    def __mul__(self, scalar: complex) -> "FermionOperator":
        return FermionOperator({t: c * scalar for t, c in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "FermionOperator":
        return self * -1.0

    def __sub__(self, other: "FermionOperator") -> "FermionOperator":
        return self + (-other)

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def n_modes(self) -> int:
        indices = [i for term in self.terms for i, _ in term]
        return max(indices) + 1 if indices else 0

    def hermitian_conjugate(self) -> "FermionOperator":
        return FermionOperator(
            {tuple((i, 1 - a) for i, a in reversed(term)): np.conj(c) for term, c in self.terms.items()}
        )

    def is_hermitian(self, tolerance: float = SYMMETRY_TOLERANCE) -> bool:
        conjugate = self.hermitian_conjugate().terms
        for term in set(self.terms) | set(conjugate):
            if abs(self.terms.get(term, 0.0) - conjugate.get(term, 0.0)) > tolerance:
                return False
        return True


def build_fermionic_hamiltonian(
    ints: Annotated[ActiveSpaceIntegrals, "Active-space integrals at one geometry"],
) -> FermionOperator:
    """
    H = E_core + sum h1[p,q] a+_{p s} a_{q s} + 1/2 sum (pq|rs) a+_{p s} a+_{r t} a_{s t} a_{q s}
    """
    op = FermionOperator.constant(ints.core_energy)
    for p, q in np.argwhere(ints.h1 != 0.0).tolist():
        for spin in (0, 1):
            op._accumulate(((spin_orbital(p, spin), 1), (spin_orbital(q, spin), 0)), ints.h1[p, q])
    for p, q, r, s in np.argwhere(ints.h2 != 0.0).tolist():
        value = 0.5 * ints.h2[p, q, r, s]
        for sigma in (0, 1):
            for tau in (0, 1):
                i, j = spin_orbital(p, sigma), spin_orbital(q, sigma)
                k, l = spin_orbital(r, tau), spin_orbital(s, tau)
                if i == k or j == l:
                    continue
                op._accumulate(((i, 1), (k, 1), (l, 0), (j, 0)), value)
    op.terms = {t: c for t, c in op.terms.items() if t == () or c != 0.0}
    return op


def _pauli_product(x1: int, z1: int, x2: int, z2: int) -> tuple[int, int, complex]:
    # P(x, z) = i^{|x & z|} X^x Z^z, and Z^z1 X^x2 = (-1)^{|z1 & x2|} X^x2 Z^z1
    x, z = x1 ^ x2, z1 ^ z2
    k = (x1 & z1).bit_count() + (x2 & z2).bit_count() + 2 * (z1 & x2).bit_count() - (x & z).bit_count()
    return x, z, 1j ** (k % 4)


class PauliSum:
    """
    Weighted sum of Pauli strings over n qubits.

    A string is keyed by its (x, z) bitmasks: X on qubit q sets bit q of x, Z sets bit q
    of z, and Y sets both. Acting on a basis state,
    P|b> = i^{|x & z|} (-1)^{|z & b|} |b ^ x>.
    """

    def __init__(self, n_qubits: int, terms: Optional[Mapping[tuple[int, int], complex]] = None):
        self.n_qubits = int(n_qubits)
        self.terms: dict[tuple[int, int], complex] = {}
        for (x, z), coefficient in (terms or {}).items():
            self._accumulate(x, z, coefficient)

    @classmethod
    def identity(cls, n_qubits: int, coefficient: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, {(0, 0): coefficient})

    @classmethod
    def from_label(cls, label: str, coefficient: complex = 1.0, n_qubits: Optional[int] = None) -> "PauliSum":
        """Build one term from a sparse label such as "X0 Y1 Z3" ("" is the identity)."""
        x = z = 0
        highest = -1
        for token in label.split():
            kind, qubit = token[0].upper(), token[1:]
            if kind not in "IXYZ" or not qubit.isdigit():
                raise InputError(f"bad Pauli token {token!r}")
            q = int(qubit)
            highest = max(highest, q)
            if kind in "XY":
                x |= 1 << q
            if kind in "YZ":
                z |= 1 << q
        n = highest + 1 if n_qubits is None else n_qubits
        if highest >= n:
            raise IndexRangeError(f"label {label!r} acts beyond {n} qubits")
        return cls(max(n, 1), {(x, z): coefficient})

    @classmethod
    def from_list(cls, items: Iterable[tuple[str, complex]], n_qubits: int) -> "PauliSum":
        total = cls(n_qubits)
        for label, coefficient in items:
            total = total + cls.from_label(label, coefficient, n_qubits)
        return total

    def _accumulate(self, x: int, z: int, coefficient: complex) -> None:
        self.terms[(x, z)] = self.terms.get((x, z), 0.0) + coefficient

    def _check_compatible(self, other: "PauliSum") -> None:
        if other.n_qubits != self.n_qubits:
            raise DimensionError(f"operators act on {self.n_qubits} and {other.n_qubits} qubits")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check_compatible(other)
        result = PauliSum(self.n_qubits, self.terms)
        for (x, z), coefficient in other.terms.items():
            result._accumulate(x, z, coefficient)
        return result

    def __neg__(self) -> "PauliSum":
        return self * -1.0

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-other)

    def __mul__(self, other) -> "PauliSum":
        if isinstance(other, PauliSum):
            self._check_compatible(other)
            result = PauliSum(self.n_qubits)
            for (x1, z1), c1 in self.terms.items():
                for (x2, z2), c2 in other.terms.items():
                    x, z, phase = _pauli_product(x1, z1, x2, z2)
                    result._accumulate(x, z, phase * c1 * c2)
            return result
        return PauliSum(self.n_qubits, {k: c * other for k, c in self.terms.items()})

    def __rmul__(self, scalar) -> "PauliSum":
        return self * scalar

    def __truediv__(self, scalar) -> "PauliSum":
        return self * (1.0 / scalar)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[str, complex]]:
        for (x, z), coefficient in sorted(self.terms.items()):
            yield self.label(x, z), coefficient

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g}) {label or 'I'}" for label, c in self)
        return f"PauliSum(n_qubits={self.n_qubits}, {body or '0'})"

    @staticmethod
    def label(x: int, z: int) -> str:
        tokens = []
        q = 0
        while (x | z) >> q:
            bit_x, bit_z = (x >> q) & 1, (z >> q) & 1
            if bit_x or bit_z:
                tokens.append(f"{'Y' if bit_x and bit_z else 'X' if bit_x else 'Z'}{q}")
            q += 1
        return " ".join(tokens)

    def coefficient(self, label: str) -> complex:
        key = next(iter(PauliSum.from_label(label, n_qubits=self.n_qubits).terms))
        return self.terms.get(key, 0.0)

    def canonicalize(self, cutoff: float = COEFFICIENT_CUTOFF) -> "PauliSum":
        """Merged copy with coefficients below `cutoff` dropped and sub-cutoff real/imaginary parts zeroed"""
        result = PauliSum(self.n_qubits)
        for key, c in self.terms.items():
            c = complex(c)
            if abs(c) < cutoff:
                continue
            re = c.real if abs(c.real) >= cutoff else 0.0
            im = c.imag if abs(c.imag) >= cutoff else 0.0
            result.terms[key] = complex(re, im)
        return result

    def max_imaginary(self) -> float:
        return max((abs(complex(c).imag) for c in self.terms.values()), default=0.0)

    def constant(self) -> complex:
        return self.terms.get((0, 0), 0.0)

    def allclose(self, other: "PauliSum", atol: float = 1e-10) -> bool:
        self._check_compatible(other)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) <= atol for k in keys)

    def _phases(self, x: int, z: int, coefficient: complex, index: np.ndarray) -> np.ndarray:
        parity = np.bitwise_count(index & z) & 1
        return coefficient * (1j ** ((x & z).bit_count() % 4)) * (1 - 2 * parity.astype(float))

    def apply(self, vector: np.ndarray) -> np.ndarray:
        """Act on a state vector, or on the columns of a (2^n, k) block of states"""
        vector = np.asarray(vector)
        dim = 1 << self.n_qubits
        if vector.shape[0] != dim:
            raise DimensionError(f"vector of length {vector.shape[0]} on {self.n_qubits} qubits")
        index = np.arange(dim)
        out = np.zeros(vector.shape, dtype=complex)
        for (x, z), coefficient in self.terms.items():
            source = index ^ x
            phase = self._phases(x, z, coefficient, source)
            out += phase.reshape((dim,) + (1,) * (vector.ndim - 1)) * vector[source]
        return out

    def to_matrix(self) -> np.ndarray:
        if self.n_qubits > MAX_DENSE_QUBITS:
            raise CapacityError(f"{self.n_qubits} qubits exceed the dense limit of {MAX_DENSE_QUBITS}")
        dim = 1 << self.n_qubits
        index = np.arange(dim)
        matrix = np.zeros((dim, dim), dtype=complex)
        for (x, z), coefficient in self.terms.items():
            matrix[index ^ x, index] += self._phases(x, z, coefficient, index)
        return matrix

    def to_sparse(self) -> sparse.csr_array:
        dim = 1 << self.n_qubits
        index = np.arange(dim)
        rows, cols, values = [], [], []
        for (x, z), coefficient in self.terms.items():
            rows.append(index ^ x)
            cols.append(index)
            values.append(self._phases(x, z, coefficient, index))
        if not values:
            return sparse.csr_array((dim, dim), dtype=complex)
        return sparse.coo_array(
            (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        ).tocsr()


def _ladder_operator(index: int, action: int, n_qubits: int) -> PauliSum:
    # a+_j = Z..Z (X_j - iY_j)/2, a_j = Z..Z (X_j + iY_j)/2
    tail = (1 << index) - 1
    bit = 1 << index
    sign = -1.0 if action else 1.0
    return PauliSum(n_qubits, {(bit, tail): 0.5, (bit, tail | bit): sign * 0.5j})


def jordan_wigner(
    op: Annotated[FermionOperator, "Fermionic operator on spin orbitals"],
    n_qubits: Annotated[Optional[int], "Declared qubit count; defaults to the highest mode used"] = None,
) -> PauliSum:
    n = op.n_modes if n_qubits is None else n_qubits
    n = max(n, 1)
    total = PauliSum(n)
    for term, coefficient in op.terms.items():
        product = PauliSum.identity(n, coefficient)
        for index, action in term:
            if not 0 <= index < n:
                raise IndexRangeError(f"spin orbital {index} outside the {n}-qubit register")
            product = product * _ladder_operator(index, action, n)
        total = total + product
    return total.canonicalize()


def pauli_sum_to_matrix(op: Annotated[PauliSum, "Qubit operator, at most 14 qubits"]) -> np.ndarray:
    return op.to_matrix()


def number_operator(n_qubits: int) -> PauliSum:
    op = PauliSum.identity(n_qubits, 0.5 * n_qubits)
    for q in range(n_qubits):
        op._accumulate(0, 1 << q, -0.5)
    return op


def spin_z_operator(n_qubits: int) -> PauliSum:
    op = PauliSum(n_qubits)
    for q in range(n_qubits):
        s = 0.5 if q % 2 == 0 else -0.5
        op._accumulate(0, 0, 0.5 * s)
        op._accumulate(0, 1 << q, -0.5 * s)
    return op.canonicalize()


def sector_indices(n_qubits: int, weight: int, spin_z: Optional[float] = None) -> np.ndarray:
    """Basis indices with the given Hamming weight (and, optionally, S_z)"""
    index = np.arange(1 << n_qubits)
    keep = np.bitwise_count(index) == weight
    if spin_z is not None:
        up_mask = sum(1 << q for q in range(0, n_qubits, 2))
        down_mask = sum(1 << q for q in range(1, n_qubits, 2))
        sz = 0.5 * (np.bitwise_count(index & up_mask).astype(int) - np.bitwise_count(index & down_mask).astype(int))
        keep &= np.isclose(sz, spin_z)
    return index[keep]


def sector_eigh(op: PauliSum, weight: int, spin_z: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of `op` restricted to a symmetry sector; vectors embedded in the full space"""
    basis = sector_indices(op.n_qubits, weight, spin_z)
    if basis.size == 0:
        raise InputError(f"empty sector: weight {weight}, S_z {spin_z}")
    block = op.to_matrix()[np.ix_(basis, basis)]
    values, vectors = linalg.eigh(block)
    full = np.zeros((1 << op.n_qubits, basis.size), dtype=complex)
    full[basis, :] = vectors
    return values, full


def sector_eigenvalues(op: PauliSum, weight: int, spin_z: Optional[float] = None) -> np.ndarray:
    return sector_eigh(op, weight, spin_z)[0]
