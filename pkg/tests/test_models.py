from functools import reduce

import numpy as np
import pytest

from holomera.models import (
    SpinChainModel,
    build_hamiltonian_mpo,
    exact_ground_state,
    sparse_hamiltonian,
    statevector_observables,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)

# frozen dense-eigensolver value, L=12, V=4, open chain
E_L12_V4 = -51.474082743123724


def kron_string(L, ops):
    """Site 0 is the leftmost kron factor."""
    return reduce(np.kron, [ops.get(k, I2) for k in range(L)])


def kron_hamiltonian(L, V):
    """Independent dense build of the Hamiltonian from explicit Pauli strings."""
    h = np.zeros((2**L, 2**L), dtype=complex)
    for i in range(L):
        h -= kron_string(L, {i: Z})
    for i in range(L - 1):
        h -= kron_string(L, {i: X, i + 1: X})
        h += V * kron_string(L, {i: Z, i + 1: Z})
    for i in range(L - 2):
        h += V * kron_string(L, {i: X, i + 2: X})
    return h


def test_two_site_hamiltonian():
    mpo = build_hamiltonian_mpo(SpinChainModel(2, 0.0))
    expect = -np.kron(X, X) - np.kron(Z, I2) - np.kron(I2, Z)
    np.testing.assert_allclose(mpo.to_dense(), expect, atol=1e-14)


@pytest.mark.parametrize("L,V", [(3, 1.0), (4, 4.0), (5, -0.28)])
def test_mpo_matches_pauli_strings(L, V):
    mpo = build_hamiltonian_mpo(SpinChainModel(L, V))
    np.testing.assert_allclose(mpo.to_dense(), kron_hamiltonian(L, V), atol=1e-12)


@pytest.mark.parametrize("L", range(2, 11))
def test_mpo_equals_sparse_for_all_small_lengths(L):
    m = SpinChainModel(L, 0.7)
    np.testing.assert_allclose(build_hamiltonian_mpo(m).to_dense(), sparse_hamiltonian(m).toarray(), atol=1e-12)


def test_mpo_bond_dimension():
    assert build_hamiltonian_mpo(SpinChainModel(10, 4.0)).bond_dim <= 6


@pytest.mark.parametrize("V", [-0.28, 0.0, 4.0])
def test_hermitian(V):
    h = sparse_hamiltonian(SpinChainModel(12, V))
    assert abs(h - h.getH()).max() < 1e-12


def test_two_site_energy():
    # even-parity block {|00>, |11>} is [[-2, -1], [-1, 2]], so E0 = -sqrt(5)
    e, psi = exact_ground_state(SpinChainModel(2, 0.0))
    assert abs(e + np.sqrt(5)) < 1e-12
    assert abs(e - np.linalg.eigvalsh(kron_hamiltonian(2, 0.0))[0]) < 1e-12


def test_l4_v4_energy_matches_dense_oracle():
    e, _ = exact_ground_state(SpinChainModel(4, 4.0))
    assert abs(e - np.linalg.eigvalsh(kron_hamiltonian(4, 4.0))[0]) < 1e-10


@pytest.mark.parametrize("L,V", [(6, 0.0), (9, 4.0), (12, 4.0), (14, 0.0)])
def test_eigenpair_residual_and_phase(L, V):
    m = SpinChainModel(L, V)
    e, psi = exact_ground_state(m)
    h = sparse_hamiltonian(m)
    assert np.linalg.norm(h @ psi - e * psi) <= 1e-9
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    k = np.argmax(np.abs(psi))
    assert abs(psi[k].imag) < 1e-12 and psi[k].real > 0


def test_l12_v4_frozen_energy():
    e, _ = exact_ground_state(SpinChainModel(12, 4.0))
    assert abs(e - E_L12_V4) < 1e-8


def test_length_limits():
    with pytest.raises(ValueError):
        SpinChainModel(1)
    with pytest.raises(ValueError):
        exact_ground_state(SpinChainModel(17))


def test_observables_on_product_states():
    L = 5
    zero = np.zeros(2**L, dtype=complex)
    zero[0] = 1
    on, conn = statevector_observables(zero, 2, "X")
    assert np.allclose(on, 0) and np.allclose(conn, 0) and len(conn) == L - 2
    plus = np.full(2**L, 2 ** (-L / 2), dtype=complex)
    on, conn = statevector_observables(plus, 1, "X")
    assert np.allclose(on, 1) and np.allclose(conn, 0)
    on, _ = statevector_observables(zero, 1, "Z")
    assert np.allclose(on, 1)


def test_observables_double_sum_oracle():
    L = 8
    _, psi = exact_ground_state(SpinChainModel(L, 0.0))
    on, conn = statevector_observables(psi, 3, "X")
    idx = np.arange(2**L)
    bit = lambda j: (idx >> (L - 1 - j)) & 1  # noqa: E731  site 0 is the MSB

    def x_expect(sites):
        # <psi| prod X |psi> = sum_s conj(psi[s ^ mask]) psi[s]
        mask = sum(1 << (L - 1 - j) for j in sites)
        return float(np.real(np.sum(np.conj(psi[idx ^ mask]) * psi)))

    assert bit(0)[2**(L - 1)] == 1
    ref_on = np.array([x_expect([j]) for j in range(L)])
    np.testing.assert_allclose(on, ref_on, atol=1e-12)
    for r in range(1, L - 2):
        ref = x_expect([2, 2 + r]) - ref_on[2] * ref_on[2 + r]
        assert abs(conn[r - 1] - ref) < 1e-12


def test_observables_reject_unnormalized():
    with pytest.raises(ValueError):
        statevector_observables(np.ones(8), 1)
