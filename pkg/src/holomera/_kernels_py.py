"""Pure-numpy trajectory kernel, vectorized over shots.

Mirrors ``_kernels.pyx`` op for op. Random numbers come from a counter-based
generator keyed on ``(seed, shot, draw)`` so both backends see the same
uniforms for the same op, independent of execution order.
"""
from __future__ import annotations

import numpy as np

U1, U2, MEASURE, RESET, DEPOL1, DEPOL2 = range(6)

_MASK = (1 << 64) - 1
_M1 = 0x9E3779B97F4A7C15
_M2 = 0xD1B54A32D192ED03
_M3 = 0x8CB92BA72F3D8DD7
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)


def uniforms(seed: int, shots: np.ndarray, draw: int) -> np.ndarray:
    """Uniform doubles in [0, 1) for each shot at a given draw index."""
    base = np.uint64((seed * _M1 + (draw + 1) * _M3) & _MASK)
    with np.errstate(over="ignore"):
        z = shots.astype(np.uint64) * np.uint64(_M2) + base
        z = (z ^ (z >> np.uint64(30))) * _C1
        z = (z ^ (z >> np.uint64(27))) * _C2
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def uniform_scalar(seed: int, shot: int, draw: int) -> float:
    z = (seed * _M1 + shot * _M2 + (draw + 1) * _M3) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    z ^= z >> 31
    return (z >> 11) * (1.0 / 9007199254740992.0)


_PAULI = np.array(
    [[[1, 0], [0, 1]], [[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)


def _axis(n, q):
    return 1 + (n - 1 - q)


def _apply1(psi, n, q, m):
    ax = _axis(n, q)
    out = np.tensordot(psi, m, axes=([ax], [1]))
    return np.moveaxis(out, -1, ax)


def _apply2(psi, n, qa, qb, m):
    aa, ab = _axis(n, qa), _axis(n, qb)
    out = np.tensordot(psi, m.reshape(2, 2, 2, 2), axes=([aa, ab], [2, 3]))
    return np.moveaxis(out, [-2, -1], [aa, ab])


def _pauli_subset(psi, n, q, idx):
    for p in (1, 2, 3):
        sel = np.nonzero(idx == p)[0]
        if sel.size:
            psi[sel] = _apply1(psi[sel], n, q, _PAULI[p])
    return psi


def _measure(psi, n, q, u):
    ax = _axis(n, q)
    one = np.take(psi, 1, axis=ax)
    p1 = np.sum(np.abs(one.reshape(one.shape[0], -1)) ** 2, axis=1)
    out = (u < p1).astype(np.uint8)
    keep = np.where(out == 1, p1, 1.0 - p1)
    norm = np.sqrt(np.maximum(keep, 1e-300))
    sl0 = [slice(None)] * psi.ndim
    sl1 = [slice(None)] * psi.ndim
    sl0[ax], sl1[ax] = 0, 1
    zero_mask = (out == 1).reshape((-1,) + (1,) * (psi.ndim - 2))
    psi[tuple(sl0)] = np.where(zero_mask, 0.0, psi[tuple(sl0)])
    psi[tuple(sl1)] = np.where(zero_mask, psi[tuple(sl1)], 0.0)
    psi /= norm.reshape((-1,) + (1,) * (psi.ndim - 1))
    return psi, out


def run_trajectories(kind, q0, q1, mats, prob, draw, slot, n_qubits, n_slots, n_shots, seed,
                     shot_offset=0):
    """Sample ``n_shots`` trajectories; returns outcome bits of shape (n_shots, n_slots)."""
    n = int(n_qubits)
    shots = np.arange(shot_offset, shot_offset + n_shots, dtype=np.int64)
    psi = np.zeros((n_shots,) + (2,) * n, dtype=complex)
    psi[(slice(None),) + (0,) * n] = 1.0
    outcomes = np.zeros((n_shots, n_slots), dtype=np.uint8)
    for k in range(len(kind)):
        op = kind[k]
        if op == U1:
            psi = _apply1(psi, n, q0[k], mats[k][:2, :2])
        elif op == U2:
            psi = _apply2(psi, n, q0[k], q1[k], mats[k])
        elif op == MEASURE or op == RESET:
            u = uniforms(seed, shots, int(draw[k]))
            psi, out = _measure(psi, n, q0[k], u)
            if op == MEASURE:
                outcomes[:, slot[k]] = out
            else:
                idx = np.where(out == 1, 1, 0)
                psi = _pauli_subset(psi, n, q0[k], idx)
        elif op == DEPOL1 or op == DEPOL2:
            p = float(prob[k])
            if p <= 0:
                continue
            dim = 4 if op == DEPOL1 else 16
            u = uniforms(seed, shots, int(draw[k]))
            idx = np.where(u < p * (dim - 1) / dim, np.minimum((u / (p / dim)).astype(np.int64) + 1, dim - 1), 0)
            if op == DEPOL1:
                psi = _pauli_subset(psi, n, q0[k], idx)
            else:
                psi = _pauli_subset(psi, n, q0[k], idx // 4)
                psi = _pauli_subset(psi, n, q1[k], idx % 4)
        else:
            raise ValueError(f"unknown op kind {op}")
    return outcomes
