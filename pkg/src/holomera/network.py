"""Finite-depth MERA, gMERA and QC-l networks carved out of a reference MPS.

A network is stored as a time-ordered list of two-qubit gates acting on ``L``
wires, one wire per physical site. Time runs from the top of the network (the
coarsest layer) down to the physical sites, every wire starts in ``|0>`` and
the top boundary is a fixed ``|0...0>`` product. A gate input whose wire has
not been touched by any earlier gate is therefore fixed to ``|0>`` and is
dropped from the stored matrix: a gate matrix has shape ``(4, 2**n_live)``,
rows indexed by ``2*s_a + s_b`` and columns by the live inputs in wire order.

Layer geometry, with layer-local wires ``0..L'-1`` (global wires are every
``2**(j-1)``-th site for layer ``j``) and coarse sites on the odd local wires:

* MERA: isometries on ``(2n, 2n+1)`` (left wire fresh), then disentanglers on
  ``(2n+1, 2n+2)``.
* gMERA: an isometric ladder ``A_I`` on local wires ``1..L'-1`` followed by a
  unitary ladder ``A_U`` on ``0..L'-1``; both ladders run left to right.
* QC-l: ``d`` unitary ladders, layer ``j`` (from the bottom) on wires
  ``j-1..L-1``.

A MERA is a gMERA with selected gates set to the identity
(:func:`mera_as_gmera`), and a depth-1 gMERA is a depth-2 QC-l.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .mps import (
    Mps,
    apply_gate_long_range,
    apply_two_site_gate,
    canonicalize,
    move_center,
    normalize,
    zero_state,
)
from .tensor import complete_isometry, polar, truncated_svd

KINDS = ("MERA", "GMERA", "QCL")
FORMAT_VERSION = 1


@dataclass
class PlacedGate:
    wires: tuple[int, int]
    matrix: np.ndarray
    fixed: tuple[bool, bool]
    layer: int
    sublayer: str
    column: int = 0
    row: int = 0

    @property
    def n_live(self) -> int:
        return 2 - sum(self.fixed)

    @property
    def tag(self) -> str:
        return "unitary" if self.n_live == 2 else "isometry"

    def unitary(self) -> np.ndarray:
        """Full 4x4 unitary whose action on the fixed-|0> inputs is ``matrix``."""
        return embed_unitary(self.matrix, self.fixed)


def live_columns(fixed: tuple[bool, bool]) -> list[int]:
    return [2 * a + b for a in (0, 1) for b in (0, 1) if not (fixed[0] and a) and not (fixed[1] and b)]


def embed_unitary(matrix: np.ndarray, fixed: tuple[bool, bool]) -> np.ndarray:
    cols = live_columns(fixed)
    full = complete_isometry(matrix)
    u = np.empty((4, 4), dtype=complex)
    rest = [c for c in range(4) if c not in cols]
    u[:, cols] = full[:, : len(cols)]
    u[:, rest] = full[:, len(cols) :]
    return u


def restrict(unitary: np.ndarray, fixed: tuple[bool, bool]) -> np.ndarray:
    return np.ascontiguousarray(unitary[:, live_columns(fixed)])


@dataclass
class IsometricNetwork:
    kind: str
    depth: int
    length: int
    gates: list
    fidelity_log: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown network kind {self.kind!r}")

    def copy(self) -> "IsometricNetwork":
        gates = [replace(g, matrix=g.matrix.copy()) for g in self.gates]
        return IsometricNetwork(self.kind, self.depth, self.length, gates, dict(self.fidelity_log))

    def check(self, atol: float = 1e-10) -> None:
        """Raise if any gate violates its isometry condition or fixed-input rule."""
        touched = set()
        for k, g in enumerate(self.gates):
            a, b = g.wires
            if not 0 <= a < b < self.length:
                raise ValueError(f"gate {k} has invalid wires {g.wires}")
            expect = (a not in touched, b not in touched)
            if tuple(g.fixed) != expect:
                raise ValueError(f"gate {k} fixed flags {g.fixed} != {expect}")
            if g.matrix.shape != (4, 2**g.n_live):
                raise ValueError(f"gate {k} has shape {g.matrix.shape}")
            m = g.matrix
            if not np.allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=atol):
                raise ValueError(f"gate {k} is not isometric")
            touched.update(g.wires)


# ----------------------------------------------------------------------------
# geometry


def layer_wires(length: int, layer: int) -> list[int]:
    wires = list(range(length))
    for _ in range(layer - 1):
        wires = wires[1::2]
    return wires


def mera_layer_slots(n: int) -> list[tuple[str, int, int]]:
    """(sublayer, a, b) in time order for a MERA layer on ``n`` local wires."""
    slots = [("W", 2 * m, 2 * m + 1) for m in range(n // 2)]
    slots += [("D", 2 * m + 1, 2 * m + 2) for m in range(n // 2 - 1)]
    return slots


def unitary_ladder_slots(n: int, offset: int = 0) -> list[tuple[int, int]]:
    return [(k + offset, k + offset + 1) for k in range(n - 1)]


def gmera_layer_slots(n: int) -> list[tuple[str, int, int]]:
    slots = [("I", a, b) for a, b in unitary_ladder_slots(n - 1, offset=1)]
    slots += [("U", a, b) for a, b in unitary_ladder_slots(n)]
    return slots


def network_slots(kind: str, depth: int, length: int) -> list[tuple[int, str, int, int]]:
    """(layer, sublayer, a, b) in global wires, in time order (top layer first)."""
    out = []
    if kind == "QCL":
        for j in range(depth, 0, -1):
            out += [(j, "U", a, b) for a, b in unitary_ladder_slots(length - j + 1, offset=j - 1)]
        return out
    for j in range(depth, 0, -1):
        w = layer_wires(length, j)
        slots = mera_layer_slots(len(w)) if kind == "MERA" else gmera_layer_slots(len(w))
        out += [(j, s, w[a], w[b]) for s, a, b in slots]
    return out


def fixed_flags(slots) -> list[tuple[bool, bool]]:
    touched, flags = set(), []
    for _, _, a, b in slots:
        flags.append((a not in touched, b not in touched))
        touched.update((a, b))
    return flags


_ROW = {"W": 1, "D": 0, "I": 1, "U": 0}


def assemble(kind: str, depth: int, length: int, unitaries: list[np.ndarray], log=None) -> IsometricNetwork:
    """Build a network from full 4x4 unitaries given in slot order."""
    slots = network_slots(kind, depth, length)
    if len(unitaries) != len(slots):
        raise ValueError(f"expected {len(slots)} gates, got {len(unitaries)}")
    gates = []
    for (j, sub, a, b), fx, u in zip(slots, fixed_flags(slots), unitaries):
        row = j - 1 if kind == "QCL" else 2 * (j - 1) + _ROW[sub]
        gates.append(PlacedGate((a, b), restrict(u, fx), fx, j, sub, column=a, row=row))
    return IsometricNetwork(kind, depth, length, gates, dict(log or {}))


def check_depth(kind: str, depth: int, length: int) -> None:
    if kind not in KINDS:
        raise ValueError(f"unknown network kind {kind!r}")
    if length < 2 or length & (length - 1):
        raise ValueError("chain length must be a power of two")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if kind in ("MERA", "GMERA") and 2**depth > length:
        raise ValueError(f"depth {depth} exceeds log2(L) for L={length}")
    if kind == "QCL" and depth >= length:
        raise ValueError("QC-l depth must be < L")


def mera_range(depth: int) -> int:
    """Bulk correlation range of a depth-d binary MERA: r_d = 2 r_{d-1} + 2, r_0 = 1."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    r = 1
    for _ in range(depth):
        r = 2 * r + 2
    return r


def gate_count_formula(kind: str, depth: int, length: int) -> int:
    if kind == "MERA":
        return sum(length // 2 ** (j - 1) - 1 for j in range(1, depth + 1))
    if kind == "GMERA":
        return sum(length * 2 // 2 ** (j - 1) - 3 for j in range(1, depth + 1))
    return sum(length - j for j in range(1, depth + 1))


def qubit_formula(kind: str, depth: int) -> int:
    return depth + 1 if kind == "QCL" else 2 * depth + 1


# ----------------------------------------------------------------------------
# sideways (holographic) schedule


@dataclass(frozen=True)
class Schedule:
    """Column-by-column execution order with qubit reuse.

    ``events`` holds ``("gate", index)`` and ``("emit", site)`` entries;
    ``qubit_of`` maps (event position) to the qubit(s) involved.
    """

    events: tuple
    qubits: tuple
    n_qubits: int


def sideways_schedule(net: IsometricNetwork) -> Schedule:
    L = net.length
    on_wire: list[list[int]] = [[] for _ in range(L)]
    for k, g in enumerate(net.gates):
        for w in g.wires:
            on_wire[w].append(k)
    prev = {}
    for w in range(L):
        for i, k in enumerate(on_wire[w]):
            prev[(k, w)] = on_wire[w][i - 1] if i else None
    done = [False] * len(net.gates)
    events, qubits = [], []
    free: list[int] = []
    n_qubits = 0
    slot: dict[int, int] = {}

    def alloc(w):
        nonlocal n_qubits
        if free:
            free.sort()
            q = free.pop(0)
        else:
            q = n_qubits
            n_qubits += 1
        slot[w] = q

    def run(k):
        stack = [k]
        while stack:
            g = stack[-1]
            if done[g]:
                stack.pop()
                continue
            deps = [prev[(g, w)] for w in net.gates[g].wires]
            pending = [d for d in deps if d is not None and not done[d]]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            for w in net.gates[g].wires:
                if w not in slot:
                    alloc(w)
            done[g] = True
            a, b = net.gates[g].wires
            events.append(("gate", g))
            qubits.append((slot[a], slot[b]))

    for s in range(L):
        if on_wire[s]:
            run(on_wire[s][-1])
        if s not in slot:
            alloc(s)
        events.append(("emit", s))
        qubits.append((slot[s],))
        free.append(slot.pop(s))
    return Schedule(tuple(events), tuple(qubits), n_qubits)


# ----------------------------------------------------------------------------
# sideways contraction: a tensor with a leading bond axis plus one axis per
# live wire, in the order given by ``alive``


def _apply_gate(t, alive, gate: PlacedGate, matrix=None):
    m = gate.matrix if matrix is None else matrix
    a, b = gate.wires
    live = [w for w, f in zip((a, b), gate.fixed) if not f]
    g = m.reshape([2, 2] + [2] * len(live))
    axes_t = [1 + alive.index(w) for w in live]
    out = np.tensordot(t, g, axes=(axes_t, list(range(2, 2 + len(live)))))
    rest = [w for w in alive if w not in live]
    return out, rest + [a, b]


def _emit_overlap(t, alive, wire, ref_tensor):
    ax = 1 + alive.index(wire)
    out = np.tensordot(t, ref_tensor.conj(), axes=([0, ax], [0, 1]))
    out = np.moveaxis(out, -1, 0)
    return out, [w for w in alive if w != wire]


def network_overlap(net: IsometricNetwork, ref: Mps, schedule: Schedule | None = None) -> complex:
    """<ref|net> by a single sideways sweep."""
    if ref.length != net.length:
        raise ValueError("length mismatch")
    schedule = schedule or sideways_schedule(net)
    t = np.ones((1,), dtype=complex)
    alive: list[int] = []
    for kind, idx in schedule.events:
        if kind == "gate":
            t, alive = _apply_gate(t, alive, net.gates[idx])
        else:
            t, alive = _emit_overlap(t, alive, idx, ref.tensors[idx])
    return complex(t.reshape(-1)[0])


def collapse_to_mps(net: IsometricNetwork, schedule: Schedule | None = None) -> Mps:
    """Collapse columns into MPS tensors; bond dimension <= 2**(live wires)."""
    schedule = schedule or sideways_schedule(net)
    t = np.ones((1,), dtype=complex)
    alive: list[int] = []
    tensors = []
    for kind, idx in schedule.events:
        if kind == "gate":
            t, alive = _apply_gate(t, alive, net.gates[idx])
            continue
        ax = 1 + alive.index(idx)
        rest = [w for w in alive if w != idx]
        perm = [0, ax] + [1 + alive.index(w) for w in rest]
        chi = t.shape[0]
        m = t.transpose(perm).reshape(chi * 2, -1)
        q, r = np.linalg.qr(m)
        tensors.append(q.reshape(chi, 2, -1))
        t = r.reshape([r.shape[0]] + [2] * len(rest))
        alive = rest
    tensors[-1] = tensors[-1] * t.reshape(-1)[0]
    return canonicalize(Mps(tuple(tensors)), 0)


def network_dense_state(net: IsometricNetwork) -> np.ndarray:
    """Apply the gates in time order to |0...0>; practical for L <= 20."""
    L = net.length
    psi = np.zeros([2] * L, dtype=complex)
    psi[(0,) * L] = 1.0
    for g in net.gates:
        a, b = g.wires
        u = g.unitary().reshape(2, 2, 2, 2)
        psi = np.tensordot(u, psi, axes=([2, 3], [a, b]))
        psi = np.moveaxis(psi, [0, 1], [a, b])
    return psi.reshape(-1)


def network_to_mps(net: IsometricNetwork, chi_max: int | None = None, cutoff: float = 1e-14) -> Mps:
    """Apply the gates in time order to a product MPS, routing with swaps."""
    mps = zero_state(net.length)
    for g in net.gates:
        a, b = g.wires
        u = g.unitary()
        if b == a + 1:
            mps, _ = apply_two_site_gate(mps, a, u, chi_max, cutoff)
        else:
            mps, _ = apply_gate_long_range(mps, a, b, u, chi_max, cutoff)
    return normalize(canonicalize(mps, 0, compute_schmidt=False))


# ----------------------------------------------------------------------------
# layer splitting


def _renyi2_purity(m):
    # m: (chi_l*2, 2*chi_r) matrix of the two-site wavefunction
    rho = m @ m.conj().T
    return float(np.real(np.vdot(rho, rho)))


def disentangle(theta: np.ndarray, max_iter: int = 100, tol: float = 1e-10) -> np.ndarray:
    """Two-site unitary maximizing the purity across the middle cut of ``theta``.

    ``theta[a, s1, s2, b]``; returns ``u`` (4x4) so that ``u @ theta`` has lower
    second Renyi entropy. Iterates polar decompositions of the purity gradient
    and only accepts improving steps, starting from the identity.
    """
    chi_l, _, _, chi_r = theta.shape
    t = theta.transpose(1, 2, 0, 3).reshape(4, chi_l, chi_r)
    nrm = np.linalg.norm(t)
    if nrm == 0:
        return np.eye(4, dtype=complex)
    t = t / nrm
    use_right = chi_l > chi_r

    def rotated(u):
        tp = np.tensordot(u, t, axes=([1], [0])).reshape(2, 2, chi_l, chi_r)
        if use_right:
            return tp.transpose(1, 3, 0, 2).reshape(2 * chi_r, 2 * chi_l)  # (s2 b, s1 a)
        return tp.transpose(2, 0, 1, 3).reshape(chi_l * 2, 2 * chi_r)  # (a s1, s2 b)

    u = np.eye(4, dtype=complex)
    best = _renyi2_purity(rotated(u))
    for _ in range(max_iter):
        m = rotated(u)
        d = 2 * (m @ m.conj().T) @ m
        if use_right:
            d4 = d.reshape(2, chi_r, 2, chi_l).transpose(2, 0, 3, 1)  # (s1, s2, a, b)
        else:
            d4 = d.reshape(chi_l, 2, 2, chi_r).transpose(1, 2, 0, 3)
        grad = np.tensordot(d4.reshape(4, chi_l, chi_r), t.conj(), axes=([1, 2], [1, 2]))
        cand = polar(grad)
        p = _renyi2_purity(rotated(cand))
        if p <= best + 1e-15:
            break
        gain = p - best
        u, best = cand, p
        if gain < tol:
            break
    return u


def _theta(ts, k):
    return np.tensordot(ts[k], ts[k + 1], axes=([2], [0]))


def _split_pair(theta):
    """Rank-2 split separating the two physical legs from the virtual legs.

    Returns (isometry 4x2, remainder[a, s, b], kept weight fraction).
    """
    chi_l, _, _, chi_r = theta.shape
    m = theta.transpose(1, 2, 0, 3).reshape(4, chi_l * chi_r)
    u, s, vh, _ = truncated_svd(m, 2)
    total = np.linalg.norm(theta) ** 2
    kept = float(np.sum(s**2) / total) if total > 0 else 1.0
    if u.shape[1] < 2:
        u = complete_isometry(u)[:, :2]
        s = np.concatenate([s, [0.0]])
        vh = np.concatenate([vh, np.zeros_like(vh)], axis=0)
    rem = (s[:, None] * vh).reshape(2, chi_l, chi_r).transpose(1, 0, 2)
    return u, rem, kept


@dataclass
class LayerSplit:
    """Gates of one split layer as full 4x4 unitaries in slot order (local wires)."""

    unitaries: list
    coarse: Mps
    fidelity: float
    renyi_before: list = field(default_factory=list)
    renyi_after: list = field(default_factory=list)


def _purity_renyi(theta):
    chi_l, _, _, chi_r = theta.shape
    m = theta.reshape(chi_l * 2, 2 * chi_r)
    m = m / np.linalg.norm(m)
    return -np.log(_renyi2_purity(m))


def split_mera_layer(psi: Mps, chi_max: int | None = None, cutoff: float = 1e-14,
                     disentangler_iters: int = 100) -> LayerSplit:
    n = psi.length
    if n % 2:
        raise ValueError("MERA layer needs an even number of sites")
    mps = move_center(normalize(psi), 0)
    dis, rb, ra = [], [], []
    # left-to-right: disentangle the cuts (2m+1 | 2m+2)
    for m in range(n // 2 - 1):
        k = 2 * m + 1
        mps = move_center(mps, k)
        theta = _theta(mps.tensors, k)
        u = disentangle(theta, disentangler_iters)
        rb.append(_purity_renyi(theta))
        mps, _ = apply_two_site_gate(mps, k, u, chi_max, cutoff)
        ra.append(_purity_renyi(_theta(mps.tensors, k)))
        dis.append(u.conj().T)
    # right-to-left: project pairs (2m, 2m+1) onto rank 2
    mps = move_center(mps, n - 1)
    ts = list(mps.tensors)
    coarse = [None] * (n // 2)
    iso = [None] * (n // 2)
    fidelity = 1.0
    for m in range(n // 2 - 1, -1, -1):
        w, rem, kept = _split_pair(_theta(ts, 2 * m))
        fidelity *= kept
        rem = rem / np.linalg.norm(rem)
        iso[m] = w
        if m > 0:
            chi_l, d, chi_r = rem.shape
            q, r = np.linalg.qr(rem.reshape(chi_l, d * chi_r).T)
            coarse[m] = q.T.reshape(-1, d, chi_r)
            ts[2 * m - 1] = np.tensordot(ts[2 * m - 1], r.T, axes=([2], [0]))
        else:
            coarse[m] = rem
    fixed_w = (True, False)
    unitaries = [embed_unitary(w, fixed_w) for w in iso] + dis
    coarse_mps = Mps(tuple(coarse), 0, ())
    coarse_mps = canonicalize(coarse_mps, 0)
    return LayerSplit(unitaries, coarse_mps, fidelity, rb, ra)


@dataclass
class MosesSplit:
    """``psi ~ A phi`` with ``A`` a ladder of two-qubit gates.

    ``unitaries`` are full 4x4 gates in ladder order on local wires
    ``(k, k+1)``; ``fixed`` lists which inputs of each gate are fresh ``|0>``
    ancillas within the column.
    """

    unitaries: list
    fixed: list
    phi: Mps
    fidelity: float
    mode: str


def moses_move(psi: Mps, column_mode: str = "unitary", chi_max: int | None = None,
               cutoff: float = 1e-14, disentangler_iters: int = 100) -> MosesSplit:
    """Split ``psi`` into an isometric ladder column and a remainder MPS.

    ``column_mode='unitary'``: ladder on wires 0..n-1 whose first gate takes a
    fresh ancilla on wire 0; the remainder lives on wires 1..n-1.
    ``column_mode='isometry'``: ladder alternating isometries (fresh ancilla on
    the odd wire to their right) and unitaries; the remainder lives on the even
    wires. The ladder is undone right to left: unitaries are chosen as
    Renyi-2 disentanglers of the cut they straddle, isometries as rank-2
    projections of the two-site center.
    """
    n = psi.length
    if column_mode not in ("unitary", "isometry"):
        raise ValueError(f"unknown column mode {column_mode!r}")
    if n < 2 or (column_mode == "isometry" and n < 3):
        raise ValueError(f"length {n} too short for a {column_mode} column")
    mps = move_center(normalize(psi), n - 1)
    gates: list = [None] * (n - 1)
    fixed: list = [None] * (n - 1)
    fidelity = 1.0

    def is_iso(k):
        return k == 0 if column_mode == "unitary" else k % 2 == 0

    ts = list(mps.tensors)
    center = n - 1
    for k in range(n - 2, -1, -1):
        cur = move_center(Mps(tuple(ts), center, ()), k + 1)
        if not is_iso(k):
            u = disentangle(_theta(cur.tensors, k), disentangler_iters)
            cur, _ = apply_two_site_gate(cur, k, u, chi_max, cutoff, direction="left")
            ts, center = list(cur.tensors), cur.center
            gates[k] = u.conj().T
            fixed[k] = (False, False)
            continue
        ts = list(cur.tensors)
        w, rem, kept = _split_pair(_theta(ts, k))
        fidelity *= kept
        rem = rem / np.linalg.norm(rem)
        fx = (True, False) if column_mode == "unitary" else (False, True)
        gates[k] = embed_unitary(w, fx)
        fixed[k] = fx
        ts = ts[:k] + [rem] + ts[k + 2 :]
        center = k
    phi = normalize(canonicalize(Mps(tuple(ts)), 0, compute_schmidt=False))
    return MosesSplit(gates, fixed, phi, fidelity, column_mode)


@dataclass
class GmeraLayerSplit:
    unitaries: list  # A_I then A_U, each in ladder order
    coarse: Mps
    fidelity: float
    fidelity_unitary: float
    fidelity_isometry: float


def split_gmera_layer(psi: Mps, chi_max: int | None = None, cutoff: float = 1e-14,
                      disentangler_iters: int = 100) -> GmeraLayerSplit:
    n = psi.length
    if n % 2:
        raise ValueError("gMERA layer needs an even number of sites")
    col_u = moses_move(psi, "unitary", chi_max, cutoff, disentangler_iters)
    if col_u.phi.length >= 3:
        col_i = moses_move(col_u.phi, "isometry", chi_max, cutoff, disentangler_iters)
        gates_i, f_i, coarse = col_i.unitaries, col_i.fidelity, col_i.phi
    else:
        gates_i, f_i, coarse = [], 1.0, col_u.phi
    return GmeraLayerSplit(gates_i + col_u.unitaries, coarse, col_u.fidelity * f_i,
                           col_u.fidelity, f_i)


# ----------------------------------------------------------------------------
# top boundary


def best_product_approximation(mps: Mps, sweeps: int = 20, tol: float = 1e-13):
    """Product state maximizing |<e_1 ... e_m|mps>|; returns (vectors, fidelity)."""
    from .mps import reduced_density_matrix

    mps = normalize(mps)
    L = mps.length
    vecs = []
    for k in range(L):
        rho = reduced_density_matrix(mps, k)
        evals, evecs = np.linalg.eigh(rho)
        vecs.append(evecs[:, -1])
    prev = -1.0
    fid = 0.0
    for _ in range(sweeps):
        rights = [None] * (L + 1)
        rights[L] = np.ones(1, dtype=complex)
        for k in range(L - 1, -1, -1):
            rights[k] = np.tensordot(mps.tensors[k], rights[k + 1], axes=([2], [0])) @ vecs[k].conj()
        left = np.ones(1, dtype=complex)
        for k in range(L):
            x = np.tensordot(left, mps.tensors[k], axes=([0], [0]))  # (s, b)
            x = x @ rights[k + 1]
            nx = np.linalg.norm(x)
            vecs[k] = x / nx if nx > 0 else vecs[k]
            left = np.tensordot(left, mps.tensors[k], axes=([0], [0])).T @ vecs[k].conj()
        fid = float(abs(left[0]) ** 2)
        if abs(fid - prev) < tol:
            break
        prev = fid
    return vecs, fid


def absorb_top(unitaries_by_slot: list, slots, top_vectors: dict) -> list:
    """Fold fixed top-boundary vectors into the first gate touching each top wire.

    The top wire then starts in |0>, so the gate's action on |0> equals its old
    action on the vector.
    """
    out = list(unitaries_by_slot)
    remaining = dict(top_vectors)
    for k, (_, _, a, b) in enumerate(slots):
        for pos, w in enumerate((a, b)):
            if w in remaining:
                e = remaining.pop(w)
                basis = complete_isometry(e.reshape(2, 1))  # column 0 = e
                rot = np.kron(basis, np.eye(2)) if pos == 0 else np.kron(np.eye(2), basis)
                out[k] = out[k] @ rot
        if not remaining:
            break
    return out


# ----------------------------------------------------------------------------
# building


def build_network(kind: str, depth: int, reference: Mps, chi_max: int | None = None,
                  cutoff: float = 1e-14, disentangler_iters: int = 100) -> IsometricNetwork:
    """Carve a depth-``depth`` network of the given kind out of ``reference``."""
    L = reference.length
    check_depth(kind, depth, L)
    psi = normalize(canonicalize(reference, 0))
    log: dict = {"layers": []}
    fidelity = 1.0
    per_layer: list[list] = []
    if kind == "QCL":
        top_wires = list(range(depth, L))
        for j in range(1, depth + 1):
            col = moses_move(psi, "unitary", chi_max, cutoff, disentangler_iters)
            per_layer.append(col.unitaries)
            fidelity *= col.fidelity
            log["layers"].append({"layer": j, "fidelity": col.fidelity})
            psi = col.phi
    else:
        for j in range(1, depth + 1):
            if kind == "MERA":
                sp = split_mera_layer(psi, chi_max, cutoff, disentangler_iters)
                per_layer.append(sp.unitaries)
                log["layers"].append({"layer": j, "fidelity": sp.fidelity})
            else:
                sp = split_gmera_layer(psi, chi_max, cutoff, disentangler_iters)
                per_layer.append(sp.unitaries)
                log["layers"].append({"layer": j, "fidelity": sp.fidelity,
                                      "unitary_column": sp.fidelity_unitary,
                                      "isometry_column": sp.fidelity_isometry})
            fidelity *= sp.fidelity
            psi = sp.coarse
        top_wires = layer_wires(L, depth + 1) if 2**depth < L else [layer_wires(L, depth)[1]]
        if 2**depth == L:
            top_wires = [layer_wires(L, depth)[1]]
    vecs, top_fid = best_product_approximation(psi)
    fidelity *= top_fid
    log["top_product_fidelity"] = top_fid
    log["split_fidelity_estimate"] = fidelity
    unitaries = [u for layer in reversed(per_layer) for u in layer]
    slots = network_slots(kind, depth, L)
    unitaries = absorb_top(unitaries, slots, dict(zip(top_wires, vecs)))
    net = assemble(kind, depth, L, unitaries, log)
    net.check()
    ov = network_overlap(net, reference)
    net.fidelity_log["split_fidelity"] = abs(ov) ** 2
    return net


# ----------------------------------------------------------------------------
# conversions between kinds


def mera_as_gmera(net: IsometricNetwork) -> IsometricNetwork:
    """Express a MERA as a gMERA whose extra gates are identities.

    Per layer on local wires: W_0 becomes the leading isometry of the A_U
    ladder, the other W_m sit on the A_I unitaries at (2m, 2m+1) (their
    left input is still |0> because the A_I isometry before them is the
    identity), and each D lands on the A_U gate at (2m+1, 2m+2).
    """
    if net.kind != "MERA":
        raise ValueError("expected a MERA network")
    L, d = net.length, net.depth
    by_pos = {(g.layer, g.sublayer, g.wires): g.unitary() for g in net.gates}
    unitaries = []
    for j, sub, a, b in network_slots("GMERA", d, L):
        la = layer_wires(L, j).index(a)
        if sub == "I":
            key = (j, "W", (a, b)) if la % 2 == 0 else None
        else:
            key = (j, "W", (a, b)) if la == 0 else (j, "D", (a, b)) if la % 2 == 1 else None
        unitaries.append(by_pos[key] if key is not None else np.eye(4, dtype=complex))
    return assemble("GMERA", d, L, unitaries, {"embedded_from": "MERA"})


def relabel_gmera_qcl(net: IsometricNetwork) -> IsometricNetwork:
    """Depth-1 gMERA <-> depth-2 QC-l: the gate lists coincide."""
    if net.kind == "GMERA" and net.depth == 1:
        kind, depth = "QCL", 2
    elif net.kind == "QCL" and net.depth == 2:
        kind, depth = "GMERA", 1
    else:
        raise ValueError("only depth-1 gMERA and depth-2 QC-l are equivalent")
    if [s[2:] for s in network_slots(kind, depth, net.length)] != [g.wires for g in net.gates]:
        raise AssertionError("slot geometry mismatch")
    return assemble(kind, depth, net.length, [g.unitary() for g in net.gates],
                    {"relabeled_from": net.kind})


def count_resources(net: IsometricNetwork) -> tuple[int, int]:
    """(two-qubit gates, qubits for sideways execution)."""
    return len(net.gates), sideways_schedule(net).n_qubits


# ----------------------------------------------------------------------------
# serialization


def save_network(net: IsometricNetwork, path: str | Path) -> Path:
    path = Path(path)
    arrays = {f"g{k}": g.matrix for k, g in enumerate(net.gates)}
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    path.with_suffix(".npz").write_bytes(buf.getvalue())
    manifest = {
        "format": "holomera-network",
        "version": FORMAT_VERSION,
        "kind": net.kind,
        "depth": net.depth,
        "length": net.length,
        "gates": [
            {"wires": list(g.wires), "fixed": list(g.fixed), "layer": g.layer,
             "sublayer": g.sublayer, "column": g.column, "row": g.row, "tag": g.tag}
            for g in net.gates
        ],
        "fidelity_log": net.fidelity_log,
    }
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=1, sort_keys=True, default=float))
    return path.with_suffix(".json")


def load_network(path: str | Path) -> IsometricNetwork:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta.get("format") != "holomera-network" or meta.get("version") != FORMAT_VERSION:
        raise ValueError("unsupported network container")
    gates = []
    with np.load(path.with_suffix(".npz")) as data:
        for k, gm in enumerate(meta["gates"]):
            gates.append(PlacedGate(tuple(gm["wires"]), data[f"g{k}"], tuple(gm["fixed"]),
                                    gm["layer"], gm["sublayer"], gm["column"], gm["row"]))
    return IsometricNetwork(meta["kind"], meta["depth"], meta["length"], gates, meta["fidelity_log"])
