"""Open-boundary matrix product states and two-site DMRG.

Site tensors are ``A[left, phys, right]``. An :class:`Mps` records which site
is the orthogonality center; tensors to its left are left-isometric and to its
right right-isometric. Operations return new objects and never mutate inputs.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as sla

from .models import PAULI, Mpo
from .tensor import truncated_svd

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Mps:
    tensors: tuple
    center: int | None = None
    schmidt: tuple = field(default=())

    @property
    def length(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def chi(self) -> int:
        return max(self.bond_dims, default=1)

    def norm(self) -> float:
        return float(np.sqrt(abs(overlap(self, self))))

    def to_dense(self) -> np.ndarray:
        psi = self.tensors[0]
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=([-1], [0]))
        return psi.reshape(-1)


def product_state(local_states) -> Mps:
    """MPS of a product of single-site vectors."""
    tensors = tuple(np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in local_states)
    tensors = tuple(t / np.linalg.norm(t) for t in tensors)
    schmidt = tuple(np.ones(1) for _ in range(len(tensors) - 1))
    return Mps(tensors, 0, schmidt)


def zero_state(length: int) -> Mps:
    return product_state([np.array([1.0, 0.0])] * length)


def from_dense(psi: np.ndarray, chi_max: int | None = None, cutoff: float = 0.0) -> Mps:
    """Left-to-right SVD sweep; the returned MPS has its center at the last site."""
    psi = np.asarray(psi, dtype=complex)
    L = int(round(np.log2(psi.size)))
    tensors, schmidt = [], []
    rest = psi.reshape(1, -1)
    for _ in range(L - 1):
        chi_l = rest.shape[0]
        m = rest.reshape(chi_l * 2, -1)
        u, s, vh, _ = truncated_svd(m, chi_max, cutoff)
        tensors.append(u.reshape(chi_l, 2, -1))
        schmidt.append(s / np.linalg.norm(s))
        rest = s[:, None] * vh
    tensors.append(rest.reshape(rest.shape[0], 2, 1))
    return Mps(tuple(tensors), L - 1, tuple(schmidt))


def random_mps(length: int, chi: int, rng: np.random.Generator) -> Mps:
    dims = [1] + [min(chi, 2 ** min(k, length - k)) for k in range(1, length)] + [1]
    tensors = []
    for k in range(length):
        t = rng.standard_normal((dims[k], 2, dims[k + 1])) + 1j * rng.standard_normal(
            (dims[k], 2, dims[k + 1])
        )
        tensors.append(t)
    mps = canonicalize(Mps(tuple(tensors)), 0)
    return normalize(mps)


def _left_qr(t):
    chi_l, d, chi_r = t.shape
    q, r = np.linalg.qr(t.reshape(chi_l * d, chi_r))
    return q.reshape(chi_l, d, -1), r


def _right_qr(t):
    chi_l, d, chi_r = t.shape
    q, r = np.linalg.qr(t.reshape(chi_l, d * chi_r).T)
    return q.T.reshape(-1, d, chi_r), r.T


def canonicalize(mps: Mps, center: int = 0, compute_schmidt: bool = True) -> Mps:
    """Bring ``mps`` to mixed canonical form around ``center``.

    Schmidt values are filled in by an SVD sweep when requested; they are only
    meaningful for a normalized state.
    """
    ts = [np.array(t, dtype=complex) for t in mps.tensors]
    L = len(ts)
    for k in range(center):
        q, r = _left_qr(ts[k])
        ts[k] = q
        ts[k + 1] = np.tensordot(r, ts[k + 1], axes=([1], [0]))
    for k in range(L - 1, center, -1):
        q, r = _right_qr(ts[k])
        ts[k] = q
        ts[k - 1] = np.tensordot(ts[k - 1], r, axes=([2], [0]))
    out = Mps(tuple(ts), center, ())
    if compute_schmidt:
        out = replace(out, schmidt=tuple(_schmidt_values(out)))
    return out


def _schmidt_values(mps: Mps) -> list[np.ndarray]:
    """Schmidt spectra of every bond via a gauge sweep from the center."""
    L = mps.length
    c = mps.center
    values: list = [None] * (L - 1)
    ts = list(mps.tensors)
    cur = ts[c]
    for k in range(c, L - 1):
        chi_l, d, chi_r = cur.shape
        u, s, vh = np.linalg.svd(cur.reshape(chi_l * d, chi_r), full_matrices=False)
        values[k] = s / np.linalg.norm(s)
        cur = np.tensordot(s[:, None] * vh, ts[k + 1], axes=([1], [0]))
    cur = ts[c]
    for k in range(c, 0, -1):
        chi_l, d, chi_r = cur.shape
        u, s, vh = np.linalg.svd(cur.reshape(chi_l, d * chi_r), full_matrices=False)
        values[k - 1] = s / np.linalg.norm(s)
        cur = np.tensordot(ts[k - 1], u * s[None, :], axes=([2], [0]))
    return values


def normalize(mps: Mps) -> Mps:
    if mps.center is None:
        mps = canonicalize(mps, 0, compute_schmidt=False)
    ts = list(mps.tensors)
    ts[mps.center] = ts[mps.center] / np.linalg.norm(ts[mps.center])
    out = replace(mps, tensors=tuple(ts))
    if not mps.schmidt:
        out = replace(out, schmidt=tuple(_schmidt_values(out)))
    return out


def move_center(mps: Mps, site: int) -> Mps:
    """Shift the orthogonality center by QR steps, keeping Schmidt data."""
    if mps.center is None:
        return canonicalize(mps, site)
    ts = list(mps.tensors)
    c = mps.center
    while c < site:
        q, r = _left_qr(ts[c])
        ts[c] = q
        ts[c + 1] = np.tensordot(r, ts[c + 1], axes=([1], [0]))
        c += 1
    while c > site:
        q, r = _right_qr(ts[c])
        ts[c] = q
        ts[c - 1] = np.tensordot(ts[c - 1], r, axes=([2], [0]))
        c -= 1
    return Mps(tuple(ts), c, mps.schmidt)


def truncate(mps: Mps, chi_max: int, cutoff: float = 0.0) -> tuple[Mps, float]:
    """Compress by an SVD sweep from the right; returns (normalized mps, discarded weight)."""
    cur = move_center(mps, mps.length - 1) if mps.center is not None else canonicalize(mps, mps.length - 1, False)
    ts = list(cur.tensors)
    ts[-1] = ts[-1] / np.linalg.norm(ts[-1])
    total = 0.0
    for k in range(len(ts) - 1, 0, -1):
        chi_l, d, chi_r = ts[k].shape
        u, s, vh, err = truncated_svd(ts[k].reshape(chi_l, d * chi_r), chi_max, cutoff)
        total += err
        s = s / np.linalg.norm(s)
        ts[k] = vh.reshape(-1, d, chi_r)
        ts[k - 1] = np.tensordot(ts[k - 1], u * s[None, :], axes=([2], [0]))
    out = Mps(tuple(ts), 0, ())
    return normalize(out), total


def check_canonical(mps: Mps, atol: float = 1e-10) -> bool:
    for k, t in enumerate(mps.tensors):
        chi_l, d, chi_r = t.shape
        if k < mps.center:
            m = t.reshape(chi_l * d, chi_r)
            if not np.allclose(m.conj().T @ m, np.eye(chi_r), atol=atol):
                return False
        elif k > mps.center:
            m = t.reshape(chi_l, d * chi_r)
            if not np.allclose(m @ m.conj().T, np.eye(chi_l), atol=atol):
                return False
    return True


# ----------------------------------------------------------------------------
# contractions


def overlap(a: Mps, b: Mps) -> complex:
    """<a|b> by left-to-right transfer contraction."""
    if a.length != b.length:
        raise ValueError("length mismatch")
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a.tensors, b.tensors):
        if ta.shape[1] != tb.shape[1]:
            raise ValueError("physical dimension mismatch")
        env = np.tensordot(env, ta.conj(), axes=([0], [0]))  # (b_ket, s, a_bra')
        env = np.tensordot(env, tb, axes=([0, 1], [0, 1]))  # (a_bra', b_ket')
    return complex(env[0, 0])


def apply_two_site_gate(
    mps: Mps,
    site: int,
    gate: np.ndarray,
    chi_max: int | None = None,
    cutoff: float = 1e-14,
    direction: str = "right",
    check_unitary: bool = True,
    normalize_state: bool = True,
) -> tuple[Mps, float]:
    """Apply a two-site gate on (site, site+1); returns (new mps, discarded weight).

    ``gate`` is a 4x4 matrix (or 2x2x2x2 tensor) acting on the basis
    ``2*s_left + s_right``. The center ends on ``site+1`` for
    ``direction='right'`` and on ``site`` otherwise.
    """
    g = np.asarray(gate, dtype=complex).reshape(4, 4)
    if check_unitary and not np.allclose(g.conj().T @ g, np.eye(4), atol=1e-10):
        raise ValueError("gate is not unitary")
    if mps.center not in (site, site + 1):
        mps = move_center(mps, site)
    ts = list(mps.tensors)
    theta = np.tensordot(ts[site], ts[site + 1], axes=([2], [0]))  # (a, s1, s2, b)
    chi_l, _, _, chi_r = theta.shape
    theta = np.einsum("ij,ajb->aib", g, theta.reshape(chi_l, 4, chi_r))
    u, s, vh, err = truncated_svd(theta.reshape(chi_l * 2, 2 * chi_r), chi_max, cutoff)
    if normalize_state:
        s = s / np.linalg.norm(s)
    schmidt = list(mps.schmidt) if mps.schmidt else [None] * (mps.length - 1)
    schmidt[site] = s / np.linalg.norm(s)
    if direction == "right":
        ts[site] = u.reshape(chi_l, 2, -1)
        ts[site + 1] = (s[:, None] * vh).reshape(-1, 2, chi_r)
        center = site + 1
    else:
        ts[site] = (u * s[None, :]).reshape(chi_l, 2, -1)
        ts[site + 1] = vh.reshape(-1, 2, chi_r)
        center = site
    return Mps(tuple(ts), center, tuple(schmidt)), err


SWAP = np.eye(4)[[0, 2, 1, 3]].astype(complex)


def apply_gate_long_range(
    mps: Mps, i: int, j: int, gate: np.ndarray, chi_max: int | None = None, cutoff: float = 1e-14
) -> tuple[Mps, float]:
    """Apply a gate on sites i < j (basis 2*s_i + s_j) using swaps to route site j."""
    if not i < j:
        raise ValueError("need i < j")
    err = 0.0
    for k in range(j - 1, i, -1):
        mps, e = apply_two_site_gate(mps, k, SWAP, chi_max, cutoff, direction="left")
        err += e
    mps, e = apply_two_site_gate(mps, i, gate, chi_max, cutoff, direction="right")
    err += e
    for k in range(i + 1, j):
        mps, e = apply_two_site_gate(mps, k, SWAP, chi_max, cutoff, direction="right")
        err += e
    return mps, err


def renyi2_across_bond(mps: Mps, bond: int) -> float:
    """-log sum(lambda^4) for the bond between sites ``bond`` and ``bond+1``."""
    if mps.center is None or mps.center not in (bond, bond + 1):
        raise ValueError("canonical center must be adjacent to the bond")
    t = mps.tensors[mps.center]
    chi_l, d, chi_r = t.shape
    if mps.center == bond:
        s = np.linalg.svd(t.reshape(chi_l * d, chi_r), compute_uv=False)
    else:
        s = np.linalg.svd(t.reshape(chi_l, d * chi_r), compute_uv=False)
    p = s**2 / np.sum(s**2)
    return float(max(0.0, -np.log(np.sum(p**2))))


def _transfer(env, t, op=None):
    """env[a_bra, a_ket] -> env[b_bra, b_ket] through one site, optionally with op."""
    tk = t if op is None else np.einsum("ij,ajb->aib", op, t)
    x = np.tensordot(env, tk, axes=([1], [0]))  # (a_bra, s, b_ket)
    return np.tensordot(t.conj(), x, axes=([0, 1], [0, 1]))  # (b_bra, b_ket)


def _right_envs(mps: Mps):
    """right[k][a_bra, a_ket]: contraction of sites k..L-1 (right[L] = 1)."""
    L = mps.length
    envs = [None] * (L + 1)
    envs[L] = np.ones((1, 1), dtype=complex)
    for k in range(L - 1, -1, -1):
        t = mps.tensors[k]
        x = np.tensordot(t, envs[k + 1], axes=([2], [1]))  # (a_ket, s, b_bra)
        envs[k] = np.tensordot(t.conj(), x, axes=([1, 2], [1, 2]))  # (a_bra, a_ket)
    return envs


def mps_observables(mps: Mps, anchor: int, basis: str = "X"):
    """Same contract as :func:`holomera.models.statevector_observables`."""
    L = mps.length
    if not 1 <= anchor <= L:
        raise ValueError("anchor out of range")
    op = PAULI[basis.upper()]
    right = _right_envs(mps)
    nrm = right[0][0, 0].real
    left = np.ones((1, 1), dtype=complex)
    onsite = np.zeros(L)
    lefts = []
    for k, t in enumerate(mps.tensors):
        lefts.append(left)
        e = _transfer(left, t, op)
        onsite[k] = np.sum(e * right[k + 1]).real / nrm
        left = _transfer(left, t)
    i = anchor - 1
    f = _transfer(lefts[i], mps.tensors[i], op)
    conn = []
    for j in range(i + 1, L):
        t = mps.tensors[j]
        two = np.sum(_transfer(f, t, op) * right[j + 1]).real / nrm
        conn.append(two - onsite[i] * onsite[j])
        f = _transfer(f, t)
    return onsite, np.array(conn)


def mps_correlation_matrix(mps: Mps, basis: str = "X"):
    """(onsite[L], connected[L, L]) for every pair of sites."""
    L = mps.length
    op = PAULI[basis.upper()]
    right = _right_envs(mps)
    nrm = right[0][0, 0].real
    lefts, left = [], np.ones((1, 1), dtype=complex)
    onsite = np.zeros(L)
    for k, t in enumerate(mps.tensors):
        lefts.append(left)
        onsite[k] = np.sum(_transfer(left, t, op) * right[k + 1]).real / nrm
        left = _transfer(left, t)
    conn = np.zeros((L, L))
    for i in range(L):
        conn[i, i] = 1.0 - onsite[i] ** 2
        f = _transfer(lefts[i], mps.tensors[i], op)
        for j in range(i + 1, L):
            t = mps.tensors[j]
            two = np.sum(_transfer(f, t, op) * right[j + 1]).real / nrm
            conn[i, j] = conn[j, i] = two - onsite[i] * onsite[j]
            f = _transfer(f, t)
    return onsite, conn


def reduced_density_matrix(mps: Mps, site: int) -> np.ndarray:
    """Single-site reduced density matrix rho[s, s']."""
    right = _right_envs(mps)
    left = np.ones((1, 1), dtype=complex)
    for t in mps.tensors[:site]:
        left = _transfer(left, t)
    t = mps.tensors[site]
    x = np.tensordot(left, t, axes=([1], [0]))  # (a_bra, s, b_ket)
    x = np.tensordot(x, right[site + 1], axes=([2], [1]))  # (a_bra, s, b_bra)
    rho = np.tensordot(x, t.conj(), axes=([0, 2], [0, 2]))  # (s, s')
    return rho / np.trace(rho)


# ----------------------------------------------------------------------------
# DMRG


def _mpo_left(env, t, w):
    # env[a_bra, w, a_ket]
    x = np.tensordot(env, t, axes=([2], [0]))  # (a_bra, w, s, b_ket)
    x = np.tensordot(x, w, axes=([1, 2], [0, 3]))  # (a_bra, b_ket, w', s')
    return np.tensordot(t.conj(), x, axes=([0, 1], [0, 3]))  # (b_bra, b_ket, w')


def _left_env_update(env, t, w):
    return _mpo_left(env, t, w).transpose(0, 2, 1)


def _right_env_update(env, t, w):
    # env[b_bra, w, b_ket]
    x = np.tensordot(t, env, axes=([2], [2]))  # (a_ket, s, b_bra, w)
    x = np.tensordot(x, w, axes=([1, 3], [3, 1]))  # (a_ket, b_bra, wl, s')
    return np.tensordot(t.conj(), x, axes=([1, 2], [3, 1])).transpose(0, 2, 1)  # (a_bra, wl, a_ket)


def _heff_apply(le, w1, w2, re, theta):
    # theta[a, s1, s2, b]
    x = np.tensordot(le, theta, axes=([2], [0]))  # (a', w, s1, s2, b)
    x = np.tensordot(x, w1, axes=([1, 2], [0, 3]))  # (a', s2, b, u, s1')
    x = np.tensordot(x, w2, axes=([3, 1], [0, 3]))  # (a', b, s1', v, s2')
    x = np.tensordot(x, re, axes=([1, 3], [2, 1]))  # (a', s1', s2', b')
    return x


@dataclass
class DmrgResult:
    mps: Mps
    energy: float
    sweep_energies: list
    step_energies: list
    variance: float | None = None
    converged: bool = True


class DmrgConvergenceError(RuntimeError):
    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


def dmrg_ground_state(
    h: Mpo,
    chi_max: int = 64,
    sweeps: int = 10,
    seed: int = 0,
    cutoff: float = 1e-8,
    tol: float = 1e-12,
    raise_on_failure: bool = False,
    variance_tol: float | None = None,
    chi_start: int = 16,
) -> DmrgResult:
    """Two-site DMRG from a random product state.

    Each sweep runs left-to-right then right-to-left. The bond dimension cap
    doubles every sweep from ``chi_start`` up to ``chi_max``; the loop stops
    early once the cap is reached and the sweep energy changes by less than
    ``tol``. A real MPO gives a real calculation. The result is right
    canonical (center at site 0).
    """
    if chi_max < 2:
        raise ValueError("chi_max must be >= 2")
    L = h.length
    rng = np.random.default_rng(seed)
    real = all(np.allclose(w.imag, 0) for w in h.tensors)
    dtype = float if real else complex
    W = [np.ascontiguousarray(w.real if real else w) for w in h.tensors]
    states = []
    for _ in range(L):
        v = rng.standard_normal(2) + (0 if real else 1j * rng.standard_normal(2))
        states.append(v / np.linalg.norm(v))
    mps = canonicalize(product_state(states), 0, compute_schmidt=False)
    ts = [t.real.copy() if real else t for t in mps.tensors]
    if L == 1:
        raise ValueError("need at least two sites")
    left = [None] * (L + 1)
    right = [None] * (L + 1)
    left[0] = np.ones((1, 1, 1), dtype=dtype)
    right[L - 1] = np.ones((1, 1, 1), dtype=dtype)
    # right[k] holds the environment of sites k+1..L-1
    for k in range(L - 1, 0, -1):
        right[k - 1] = _right_env_update(right[k], ts[k], W[k])
    schmidt: list = [None] * (L - 1)
    step_energies, sweep_energies = [], []
    energy = np.inf
    done = False

    lanczos_tol = 1e-6

    def solve(i):
        theta = np.tensordot(ts[i], ts[i + 1], axes=([2], [0]))
        shape = theta.shape
        n = theta.size
        le, re = left[i], right[i + 1]
        if n <= 64:
            basis = np.eye(n, dtype=dtype).reshape((n,) + shape)
            hm = np.stack(
                [_heff_apply(le, W[i], W[i + 1], re, b).reshape(-1) for b in basis], axis=1
            )
            hm = 0.5 * (hm + hm.conj().T)
            evals, evecs = np.linalg.eigh(hm)
            return evals[0], evecs[:, 0].reshape(shape)
        op = sla.LinearOperator(
            (n, n),
            matvec=lambda v: _heff_apply(le, W[i], W[i + 1], re, v.reshape(shape)).reshape(-1),
            dtype=dtype,
        )
        v0 = theta.reshape(-1)
        evals, evecs = sla.eigsh(op, k=1, which="SA", v0=v0, tol=lanczos_tol, ncv=min(n, 20), maxiter=2000)
        return evals[0], evecs[:, 0].reshape(shape)

    chi = min(chi_start, chi_max)
    for sweep in range(sweeps):
        for i in range(L - 1):
            e, theta = solve(i)
            chi_l, _, _, chi_r = theta.shape
            u, s, vh, _ = truncated_svd(theta.reshape(chi_l * 2, 2 * chi_r), chi, cutoff)
            s = s / np.linalg.norm(s)
            schmidt[i] = s
            ts[i] = u.reshape(chi_l, 2, -1)
            ts[i + 1] = (s[:, None] * vh).reshape(-1, 2, chi_r)
            left[i + 1] = _left_env_update(left[i], ts[i], W[i])
            step_energies.append(float(e))
        for i in range(L - 2, -1, -1):
            e, theta = solve(i)
            chi_l, _, _, chi_r = theta.shape
            u, s, vh, _ = truncated_svd(theta.reshape(chi_l * 2, 2 * chi_r), chi, cutoff)
            s = s / np.linalg.norm(s)
            schmidt[i] = s
            ts[i] = (u * s[None, :]).reshape(chi_l, 2, -1)
            ts[i + 1] = vh.reshape(-1, 2, chi_r)
            right[i] = _right_env_update(right[i + 1], ts[i + 1], W[i + 1])
            step_energies.append(float(e))
        new_energy = float(e)
        sweep_energies.append(new_energy)
        done = abs(energy - new_energy) < tol and chi == chi_max
        energy = new_energy
        if done:
            break
        chi = min(2 * chi, chi_max)
        lanczos_tol = max(1e-14, lanczos_tol * 1e-3)
    out = Mps(tuple(np.asarray(t, dtype=complex) for t in ts), 0, tuple(schmidt))
    result = DmrgResult(out, energy, sweep_energies, step_energies, converged=done)
    if not done and raise_on_failure:
        raise DmrgConvergenceError(f"DMRG energy not converged to {tol:g} after {sweeps} sweeps", result)
    if variance_tol is not None:
        result.variance = energy_variance(out, h)
        if result.variance > variance_tol:
            result.converged = False
            if raise_on_failure:
                raise DmrgConvergenceError(
                    f"DMRG did not converge: variance {result.variance:.3e}", result
                )
    return result


def mpo_expectation(mps: Mps, h: Mpo) -> complex:
    env = np.ones((1, 1, 1), dtype=complex)
    for t, w in zip(mps.tensors, h.tensors):
        env = _left_env_update(env, t, w)
    return complex(env[0, 0, 0])


def energy_variance(mps: Mps, h: Mpo) -> float:
    """<H^2> - <H>^2 for a normalized MPS."""
    env = np.ones((1, 1, 1, 1), dtype=complex)  # (a_bra, w_top, w_bottom, a_ket)
    for t, w in zip(mps.tensors, h.tensors):
        x = np.tensordot(env, t, axes=([3], [0]))  # (a_bra, wt, wb, s, b_ket)
        x = np.tensordot(x, w, axes=([2, 3], [0, 3]))  # (a_bra, wt, b_ket, wb', m)
        x = np.tensordot(x, w, axes=([1, 4], [0, 3]))  # (a_bra, b_ket, wb', wt', s')
        env = np.tensordot(t.conj(), x, axes=([0, 1], [0, 4]))  # (b_bra, b_ket, wb', wt')
        env = env.transpose(0, 3, 2, 1)
    h2 = env[0, 0, 0, 0].real
    e = mpo_expectation(mps, h).real
    return float(h2 - e * e)


# ----------------------------------------------------------------------------
# serialization


def save_mps(mps: Mps, path: str | Path, manifest: dict | None = None) -> Path:
    """Write ``<path>.npz`` (arrays) and ``<path>.json`` (manifest)."""
    path = Path(path)
    arrays = {f"t{k}": t for k, t in enumerate(mps.tensors)}
    for k, s in enumerate(mps.schmidt):
        if s is not None:
            arrays[f"s{k}"] = np.asarray(s)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    path.with_suffix(".npz").write_bytes(buf.getvalue())
    meta = {
        "format": "holomera-mps",
        "version": FORMAT_VERSION,
        "length": mps.length,
        "chi": mps.chi,
        "center": mps.center,
    }
    meta.update(manifest or {})
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path.with_suffix(".npz")


def load_mps(path: str | Path) -> tuple[Mps, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta.get("format") != "holomera-mps" or meta.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported MPS container: {meta.get('format')} v{meta.get('version')}")
    with np.load(path.with_suffix(".npz")) as data:
        L = meta["length"]
        tensors = tuple(data[f"t{k}"] for k in range(L))
        schmidt = tuple(data[f"s{k}"] if f"s{k}" in data else None for k in range(L - 1))
    if all(s is None for s in schmidt):
        schmidt = ()
    return Mps(tensors, meta["center"], schmidt), meta
