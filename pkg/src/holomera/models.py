"""Transverse-field Ising chain with the self-dual perturbation, open boundaries.

    H = sum_i -(X_i X_{i+1} + Z_i) + V (Z_i Z_{i+1} + X_i X_{i+2})

Sums are truncated so every term fits inside the chain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as sla

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

MAX_ED_LENGTH = 16
DENSE_ED_LENGTH = 10


@dataclass(frozen=True)
class SpinChainModel:
    length: int
    coupling: float = 0.0

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("chain length must be >= 2")

    def pauli_terms(self) -> list[tuple[float, dict[int, str]]]:
        """(coefficient, {site: pauli}) for every term, sites 0-based."""
        L, V = self.length, self.coupling
        terms = []
        for i in range(L):
            terms.append((-1.0, {i: "Z"}))
            if i + 1 < L:
                terms.append((-1.0, {i: "X", i + 1: "X"}))
                if V:
                    terms.append((V, {i: "Z", i + 1: "Z"}))
            if i + 2 < L and V:
                terms.append((V, {i: "X", i + 2: "X"}))
        return terms


@dataclass(frozen=True)
class Mpo:
    """Site tensors W[left, right, out, in]."""

    tensors: tuple

    @property
    def length(self) -> int:
        return len(self.tensors)

    @property
    def bond_dim(self) -> int:
        return max(max(w.shape[0], w.shape[1]) for w in self.tensors)

    def to_dense(self) -> np.ndarray:
        op = self.tensors[0][0]  # (right, out, in)
        for w in self.tensors[1:]:
            # op: (b, O, I) with O,I grouped; w: (b, c, o, i)
            op = np.einsum("bOI,bcoi->cOoIi", op, w)
            c, o1, o2, i1, i2 = op.shape
            op = op.reshape(c, o1 * o2, i1 * i2)
        return op[0]


def build_hamiltonian_mpo(model: SpinChainModel) -> Mpo:
    """Finite-state-machine MPO with bond dimension 5."""
    V = model.coupling
    D = 5
    w = np.zeros((D, D, 2, 2), dtype=complex)
    # 0: nothing placed yet, 1: X placed, 2: Z placed, 3: X placed one site back, 4: done
    w[0, 0] = I2
    w[0, 1] = X
    w[0, 2] = Z
    w[0, 4] = -Z
    w[1, 3] = I2
    w[1, 4] = -X
    w[2, 4] = V * Z
    w[3, 4] = V * X
    w[4, 4] = I2
    L = model.length
    tensors = [w[0:1]] + [w] * (L - 2) + [w[:, 4:5]]
    return Mpo(tuple(np.array(t) for t in tensors))


def pauli_string_matrix(length: int, paulis: dict[int, str]) -> sparse.csr_matrix:
    mat = sparse.identity(1, dtype=complex, format="csr")
    for site in range(length):
        mat = sparse.kron(mat, sparse.csr_matrix(PAULI[paulis.get(site, "I")]), format="csr")
    return mat


def sparse_hamiltonian(model: SpinChainModel) -> sparse.csr_matrix:
    """H in the computational basis; site 0 is the most significant bit.

    Every term is either diagonal (Z strings) or a pure bit flip (X strings),
    so the matrix is assembled from bit masks directly.
    """
    L = model.length
    n = 1 << L
    idx = np.arange(n, dtype=np.int64)
    bits = [(idx >> (L - 1 - s)) & 1 for s in range(L)]
    zval = [1 - 2 * b for b in bits]
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    for coeff, paulis in model.pauli_terms():
        kinds = set(paulis.values())
        if kinds == {"Z"}:
            term = np.ones(n)
            for s in paulis:
                term = term * zval[s]
            diag += coeff * term
        else:
            mask = 0
            for s in paulis:
                mask |= 1 << (L - 1 - s)
            rows.append(idx ^ mask)
            cols.append(idx)
            vals.append(np.full(n, coeff))
    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def fix_phase(state: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude amplitude real and positive."""
    k = int(np.argmax(np.abs(state)))
    return state * (abs(state[k]) / state[k])


def exact_ground_state(model: SpinChainModel) -> tuple[float, np.ndarray]:
    if model.length > MAX_ED_LENGTH:
        raise ValueError(f"exact diagonalization limited to L <= {MAX_ED_LENGTH}")
    h = sparse_hamiltonian(model)
    if model.length <= DENSE_ED_LENGTH:
        evals, evecs = scipy.linalg.eigh(h.real.toarray(), subset_by_index=[0, 0])
        e, psi = evals[0], evecs[:, 0].astype(complex)
    else:
        v0 = np.ones(h.shape[0]) / np.sqrt(h.shape[0])
        evals, evecs = sla.eigsh(h.real, k=1, which="SA", v0=v0, tol=1e-14, ncv=40)
        e, psi = evals[0], evecs[:, 0].astype(complex)
    psi = fix_phase(psi / np.linalg.norm(psi))
    return float(np.real(e)), psi


def statevector_observables(state: np.ndarray, anchor: int, basis: str = "X"):
    """On-site <O_j> for every site and connected C_O(anchor, r) for r >= 1.

    ``anchor`` is 1-based, matching the site labels used throughout.
    Returns ``(onsite[L], connected[L - anchor])`` with ``connected[r - 1]``
    holding distance r.
    """
    state = np.asarray(state, dtype=complex)
    L = int(round(np.log2(state.size)))
    if 1 << L != state.size:
        raise ValueError("state size is not a power of two")
    if abs(np.vdot(state, state) - 1) > 1e-8:
        raise ValueError("state is not normalized")
    if not 1 <= anchor <= L:
        raise ValueError("anchor out of range")
    op = PAULI[basis.upper()]
    psi = state.reshape([2] * L)

    def apply(vec, site):
        return np.moveaxis(np.tensordot(op, vec, axes=([1], [site])), 0, site)

    onsite = np.array([np.vdot(psi, apply(psi, j)).real for j in range(L)])
    oi = apply(psi, anchor - 1)
    conn = []
    for j in range(anchor, L):
        two = np.vdot(psi, apply(oi, j)).real
        conn.append(two - onsite[anchor - 1] * onsite[j])
    return onsite, np.array(conn)
