import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exceptions import CapacityError, DimensionError, IndexRangeError, InputError
from functional.hamiltonian import (
    ActiveSpaceIntegrals,
    FermionOperator,
    PauliSum,
    build_fermionic_hamiltonian,
    jordan_wigner,
    number_operator,
    pauli_sum_to_matrix,
    sector_eigenvalues,
    spin_z_operator,
)

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def ladder_matrix(mode: int, creation: bool, n_modes: int) -> np.ndarray:
    """a or a+ on the occupation-number basis, sign from the occupied modes below `mode`"""
    dim = 1 << n_modes
    matrix = np.zeros((dim, dim))
    for b in range(dim):
        occupied = (b >> mode) & 1
        if occupied == creation:
            continue
        sign = (-1) ** bin(b & ((1 << mode) - 1)).count("1")
        matrix[b ^ (1 << mode), b] = sign
    return matrix


def dense_fermionic(op: FermionOperator, n_modes: int) -> np.ndarray:
    dim = 1 << n_modes
    total = np.zeros((dim, dim), dtype=complex)
    for term, coefficient in op.terms.items():
        product = np.eye(dim)
        for mode, action in term:
            product = product @ ladder_matrix(mode, bool(action), n_modes)
        total += coefficient * product
    return total


def dense_from_integrals(ints: ActiveSpaceIntegrals) -> np.ndarray:
    """Second-quantized Hamiltonian assembled directly from the integrals"""
    n = ints.n_qubits
    a = [ladder_matrix(k, False, n) for k in range(n)]
    ad = [ladder_matrix(k, True, n) for k in range(n)]
    H = ints.core_energy * np.eye(1 << n)
    norb = ints.n_orbitals
    for p, q in itertools.product(range(norb), repeat=2):
        for s in (0, 1):
            H = H + ints.h1[p, q] * ad[2 * p + s] @ a[2 * q + s]
    for p, q, r, s in itertools.product(range(norb), repeat=4):
        if ints.h2[p, q, r, s] == 0.0:
            continue
        for sigma, tau in itertools.product((0, 1), repeat=2):
            H = H + 0.5 * ints.h2[p, q, r, s] * (
                ad[2 * p + sigma] @ ad[2 * r + tau] @ a[2 * s + tau] @ a[2 * q + sigma]
            )
    return H


def random_integrals(n_orbitals: int, seed: int) -> ActiveSpaceIntegrals:
    rng = np.random.default_rng(seed)
    h1 = rng.normal(size=(n_orbitals, n_orbitals))
    h1 = 0.5 * (h1 + h1.T)
    raw = rng.normal(scale=0.3, size=(n_orbitals,) * 4)
    perms = [(0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2), (2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0)]
    h2 = sum(raw.transpose(p) for p in perms) / len(perms)
    return ActiveSpaceIntegrals(n_orbitals, 2, float(rng.normal()), h1, h2)


def naive_matrix(op: PauliSum) -> np.ndarray:
    dim = 1 << op.n_qubits
    total = np.zeros((dim, dim), dtype=complex)
    for label, coefficient in op:
        letters = ["I"] * op.n_qubits
        for token in label.split():
            letters[int(token[1:])] = token[0]
        term = np.array([[1.0]])
        for letter in reversed(letters):
            term = np.kron(term, PAULI[letter])
        total += coefficient * term
    return total


def test_single_orbital_hamiltonian():
    ints = ActiveSpaceIntegrals(1, 1, 0.7, np.array([[-0.4]]), np.zeros((1, 1, 1, 1)))
    op = build_fermionic_hamiltonian(ints)
    assert op.terms == {(): 0.7, ((0, 1), (0, 0)): -0.4, ((1, 1), (1, 0)): -0.4}


def test_zero_integrals_give_constant():
    ints = ActiveSpaceIntegrals(2, 2, 1.25, np.zeros((2, 2)), np.zeros((2, 2, 2, 2)))
    assert build_fermionic_hamiltonian(ints).terms == {(): 1.25}


def test_asymmetric_integrals_rejected():
    with pytest.raises(InputError):
        ActiveSpaceIntegrals(2, 2, 0.0, np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((2, 2, 2, 2)))
    h2 = np.zeros((2, 2, 2, 2))
    h2[0, 1, 0, 0] = 0.3
    with pytest.raises(InputError):
        ActiveSpaceIntegrals(2, 2, 0.0, np.zeros((2, 2)), h2)
    with pytest.raises(DimensionError):
        ActiveSpaceIntegrals(3, 2, 0.0, np.zeros((2, 2)), np.zeros((2, 2, 2, 2)))


def test_two_orbital_hamiltonian_matches_occupation_algebra():
    ints = random_integrals(2, seed=11)
    op = build_fermionic_hamiltonian(ints)
    assert op.is_hermitian()
    expected = dense_from_integrals(ints)
    np.testing.assert_allclose(dense_fermionic(op, 4), expected, atol=1e-12)
    np.testing.assert_allclose(jordan_wigner(op, 4).to_matrix(), expected, atol=1e-12)


def test_number_operator_image():
    op = jordan_wigner(FermionOperator.product([(0, 1), (0, 0)]))
    assert op.allclose(PauliSum.from_list([("", 0.5), ("Z0", -0.5)], 1))


def test_hopping_image():
    hop = FermionOperator.product([(0, 1), (1, 0)]) + FermionOperator.product([(1, 1), (0, 0)])
    expected = PauliSum.from_list([("X0 X1", 0.5), ("Y0 Y1", 0.5)], 2)
    assert jordan_wigner(hop).allclose(expected)


def test_ladder_images_match_dense_ladders():
    for mode in range(3):
        for action in (0, 1):
            image = jordan_wigner(FermionOperator.product([(mode, action)]), 3)
            np.testing.assert_allclose(image.to_matrix(), ladder_matrix(mode, bool(action), 3), atol=1e-14)


def test_index_beyond_register():
    with pytest.raises(IndexRangeError):
        jordan_wigner(FermionOperator.product([(4, 1), (0, 0)]), 4)


@settings(max_examples=15, deadline=None)
@given(n_orbitals=st.integers(min_value=2, max_value=3), seed=st.integers(min_value=0, max_value=10_000))
def test_spectrum_and_particle_number(n_orbitals, seed):
    ints = random_integrals(n_orbitals, seed)
    op = build_fermionic_hamiltonian(ints)
    qubit = jordan_wigner(op, ints.n_qubits)
    assert qubit.max_imaginary() <= 1e-12
    matrix = pauli_sum_to_matrix(qubit)
    np.testing.assert_allclose(
        np.linalg.eigvalsh(matrix), np.linalg.eigvalsh(dense_from_integrals(ints)), atol=1e-10
    )
    number = number_operator(ints.n_qubits).to_matrix()
    np.testing.assert_allclose(matrix @ number - number @ matrix, 0.0, atol=1e-10)
    sz = spin_z_operator(ints.n_qubits).to_matrix()
    np.testing.assert_allclose(matrix @ sz - sz @ matrix, 0.0, atol=1e-10)


def test_fixture_spectrum(fixture_fcidump):
    from data_source.fcidump_utils import FCIDumpUtils

    ints = FCIDumpUtils.read_fcidump(fixture_fcidump)
    qubit = jordan_wigner(build_fermionic_hamiltonian(ints), 6)
    np.testing.assert_allclose(
        np.linalg.eigvalsh(qubit.to_matrix()), np.linalg.eigvalsh(dense_from_integrals(ints)), atol=1e-10
    )
    # Kramers pairs: the weight-5 sector is the S_z = -1/2 sector doubled
    full = sector_eigenvalues(qubit, 5)
    np.testing.assert_allclose(full[::2], sector_eigenvalues(qubit, 5, -0.5), atol=1e-10)
    np.testing.assert_allclose(full[1::2], sector_eigenvalues(qubit, 5, 0.5), atol=1e-10)


def test_pauli_matrices():
    np.testing.assert_array_equal(pauli_sum_to_matrix(PauliSum.from_label("Z0")), np.diag([1.0, -1.0]))
    x0 = pauli_sum_to_matrix(PauliSum.from_label("X0", n_qubits=2))
    index = np.arange(4)
    np.testing.assert_array_equal(x0, (index[:, None] ^ index[None, :]) == 1)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.lists(st.sampled_from("IXYZ"), min_size=3, max_size=3),
            st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False),
        ),
        min_size=1,
        max_size=6,
    )
)
def test_matrix_matches_kronecker_products(items):
    labels = [(" ".join(f"{p}{q}" for q, p in enumerate(letters) if p != "I"), c) for letters, c in items]
    op = PauliSum.from_list(labels, 3)
    np.testing.assert_allclose(op.to_matrix(), naive_matrix(op), atol=1e-12)
    np.testing.assert_allclose(op.to_sparse().toarray(), op.to_matrix(), atol=1e-12)
    vector = np.arange(8, dtype=complex) + 1j
    np.testing.assert_allclose(op.apply(vector), op.to_matrix() @ vector, atol=1e-12)


def test_pauli_product_and_canonicalize():
    x = PauliSum.from_label("X0")
    y = PauliSum.from_label("Y0")
    assert (x * y).allclose(PauliSum.from_label("Z0", 1j))
    cancelled = (x + PauliSum.from_label("X0", -1.0 + 1e-14)).canonicalize()
    assert len(cancelled) == 0


def test_dense_capacity():
    with pytest.raises(CapacityError):
        PauliSum.identity(15).to_matrix()


def test_bad_label():
    with pytest.raises(InputError):
        PauliSum.from_label("Q0")
    with pytest.raises(IndexRangeError):
        PauliSum.from_label("X3", n_qubits=2)
