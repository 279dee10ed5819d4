"""Exact and noisy execution of holographic circuits.

Both engines run the same lowered op table:

* ``U1``/``U2`` gates (generic rotation blocks are fused into one ``U1``),
* ``DEPOL1``/``DEPOL2`` after every noisy gate,
* ``MEASURE`` in the Z basis (an X-basis measurement is lowered to ``H``,
  its depolarizing op, then ``MEASURE``),
* ``RESET``.

The density-matrix engine gives exact expectation values, with or without
the depolarizing channel. Correlators ``<O_i O_j>`` come from a second
density matrix in which ``O_i`` was inserted when site ``i`` was measured.
The trajectory engine samples shots with the kernel backend.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .circuit import (
    H_GATE,
    Cnot,
    CX_AB,
    GateCircuit,
    Measure,
    Reset,
    Rotation,
    TwoQubitUnitary,
    rotation,
)

MAX_DENSITY_QUBITS = 12
MAX_TRAJECTORY_QUBITS = 24


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def from_ratio(cls, p1: float, ratio: float = 10.0) -> "NoiseModel":
        return cls(p1, min(1.0, ratio * p1))

    @property
    def noiseless(self) -> bool:
        return self.p1 == 0.0 and self.p2 == 0.0


@dataclass
class LoweredCircuit:
    n_qubits: int
    kind: np.ndarray
    q0: np.ndarray
    q1: np.ndarray
    mats: np.ndarray
    prob: np.ndarray
    draw: np.ndarray
    slot: np.ndarray
    sites: list  # site label for each measurement slot

    @property
    def n_ops(self) -> int:
        return len(self.kind)

    def noisy_gate_counts(self) -> tuple[int, int]:
        return int(np.sum(self.kind == kernels.DEPOL1)), int(np.sum(self.kind == kernels.DEPOL2))


def lower(circuit: GateCircuit, noise: NoiseModel | None = None) -> LoweredCircuit:
    """Flatten a circuit into the kernel op table."""
    noise = noise or NoiseModel()
    circuit.validate()
    rows = []
    draws = 0
    sites: list = []

    def add(kind, q0, q1=0, mat=None, p=0.0, slot=-1):
        nonlocal draws
        d = -1
        if kind in (kernels.MEASURE, kernels.RESET, kernels.DEPOL1, kernels.DEPOL2):
            d = draws
            draws += 1
        m = np.zeros((4, 4), dtype=complex)
        if mat is not None:
            m[: mat.shape[0], : mat.shape[1]] = mat
        rows.append((kind, q0, q1, m, p, d, slot))

    ops = circuit.ops
    i = 0
    while i < len(ops):
        op = ops[i]
        if isinstance(op, Rotation):
            m = rotation(op.axis, op.angle)
            j = i + 1
            if op.block >= 0:
                while j < len(ops) and isinstance(ops[j], Rotation) and ops[j].block == op.block:
                    if ops[j].q != op.q:
                        raise ValueError("rotation block spans several qubits")
                    m = rotation(ops[j].axis, ops[j].angle) @ m
                    j += 1
            add(kernels.U1, op.q, mat=m)
            add(kernels.DEPOL1, op.q, p=noise.p1)
            i = j
            continue
        if isinstance(op, TwoQubitUnitary):
            add(kernels.U2, op.qa, op.qb, mat=op.matrix)
            add(kernels.DEPOL2, op.qa, op.qb, p=noise.p2)
        elif isinstance(op, Cnot):
            add(kernels.U2, op.control, op.target, mat=CX_AB)
            add(kernels.DEPOL2, op.control, op.target, p=noise.p2)
        elif isinstance(op, Measure):
            if op.basis == "X":
                add(kernels.U1, op.q, mat=H_GATE)
                add(kernels.DEPOL1, op.q, p=noise.p1)
            add(kernels.MEASURE, op.q, slot=len(sites))
            sites.append(op.site)
        elif isinstance(op, Reset):
            add(kernels.RESET, op.q)
        i += 1
    n = len(rows)
    return LoweredCircuit(
        circuit.n_qubits,
        np.array([r[0] for r in rows], dtype=np.int32),
        np.array([r[1] for r in rows], dtype=np.int32),
        np.array([r[2] for r in rows], dtype=np.int32),
        np.array([r[3] for r in rows], dtype=complex).reshape(n, 4, 4),
        np.array([r[4] for r in rows], dtype=float),
        np.array([r[5] for r in rows], dtype=np.int64),
        np.array([r[6] for r in rows], dtype=np.int32),
        sites,
    )


# ----------------------------------------------------------------------------
# density-matrix engine


@dataclass
class ExactResult:
    """Exact site expectations ``<O_j>`` and anchored correlators.

    ``two_point[a][j] = <O_a O_j>`` for sites ``j > a`` (NaN elsewhere), with
    0-based site labels.
    """

    onsite: np.ndarray
    two_point: dict = field(default_factory=dict)

    def connected(self, anchor: int) -> np.ndarray:
        """C(anchor, r) for r = 1 .. L-1-anchor (0-based anchor), index r-1."""
        tp = self.two_point[anchor]
        j = np.arange(anchor + 1, len(self.onsite))
        return tp[j] - self.onsite[anchor] * self.onsite[j]


class _Density:
    def __init__(self, n, batch=1):
        self.n = n
        self.rho = np.zeros((batch,) + (2,) * (2 * n), dtype=complex)
        self.rho[(slice(None),) + (0,) * (2 * n)] = 1.0

    def row(self, q):
        return 1 + (self.n - 1 - q)

    def col(self, q):
        return 1 + self.n + (self.n - 1 - q)

    def apply(self, qs, m):
        k = len(qs)
        t = m.reshape((2,) * (2 * k))
        rows = [self.row(q) for q in qs]
        cols = [self.col(q) for q in qs]
        r = np.tensordot(self.rho, t, axes=(rows, list(range(k, 2 * k))))
        r = np.moveaxis(r, list(range(-k, 0)), rows)
        r = np.tensordot(r, t.conj(), axes=(cols, list(range(k, 2 * k))))
        self.rho = np.moveaxis(r, list(range(-k, 0)), cols)

    def trace_out(self, q, weight=None):
        """tr_q(W rho) with W diagonal weights (Z for +-1 outcomes), re-prepared in |0>."""
        r, c = self.row(q), self.col(q)
        diag = np.diagonal(self.rho, axis1=r, axis2=c)  # moves q to the last axis
        w = np.ones(2) if weight is None else np.asarray(weight, dtype=float)
        red = diag @ w
        new = np.zeros_like(self.rho)
        idx = [slice(None)] * self.rho.ndim
        idx[r], idx[c] = 0, 0
        new[tuple(idx)] = red
        return new

    def depolarize(self, qs, p):
        if p <= 0:
            return
        rho = self.rho
        mixed = rho
        for q in qs:
            r, c = self.row(q), self.col(q)
            diag = np.diagonal(mixed, axis1=r, axis2=c).sum(-1)
            eye = np.eye(2) / 2
            mixed = np.multiply.outer(diag, eye)
            mixed = np.moveaxis(mixed, [-2, -1], [r, c])
        self.rho = (1 - p) * rho + p * mixed

    def expect_z(self, q):
        dim = 1 << self.n
        diag = np.diagonal(self.rho.reshape(-1, dim, dim), axis1=1, axis2=2).real
        sign = 1.0 - 2.0 * ((np.arange(dim) >> q) & 1)
        return diag @ sign


def run_density(circuit: GateCircuit, noise: NoiseModel | None = None, anchors=()) -> ExactResult:
    """Exact expectations of measured +-1 outcomes, optionally under depolarizing noise."""
    if circuit.n_qubits > MAX_DENSITY_QUBITS:
        raise ValueError(f"density engine limited to {MAX_DENSITY_QUBITS} qubits")
    low = lower(circuit, noise)
    n_sites = len(low.sites)
    anchors = [int(a) for a in anchors]
    for a in anchors:
        if not 0 <= a < n_sites:
            raise ValueError(f"anchor {a} out of range")
    dm = _Density(circuit.n_qubits, 1 + len(anchors))
    active = np.zeros(1 + len(anchors), dtype=bool)
    active[0] = True
    onsite = np.full(n_sites, np.nan)
    two = {a: np.full(n_sites, np.nan) for a in anchors}
    z = np.array([1.0, -1.0])
    for k in range(low.n_ops):
        op = low.kind[k]
        q = int(low.q0[k])
        if op == kernels.U1:
            dm.apply([q], low.mats[k][:2, :2])
        elif op == kernels.U2:
            dm.apply([q, int(low.q1[k])], low.mats[k])
        elif op == kernels.DEPOL1:
            dm.depolarize([q], low.prob[k])
        elif op == kernels.DEPOL2:
            dm.depolarize([q, int(low.q1[k])], low.prob[k])
        elif op == kernels.RESET:
            dm.rho = dm.trace_out(q)
        elif op == kernels.MEASURE:
            site = low.sites[low.slot[k]]
            ez = dm.expect_z(q)
            onsite[site] = ez[0]
            for b, a in enumerate(anchors, start=1):
                if active[b]:
                    two[a][site] = ez[b]
            plain = dm.trace_out(q)
            weighted = dm.trace_out(q, z)
            for b, a in enumerate(anchors, start=1):
                if a == site:
                    plain[b] = weighted[0]
                    active[b] = True
            dm.rho = plain
    return ExactResult(onsite, two)


def run_exact(circuit: GateCircuit, anchors=()) -> ExactResult:
    return run_density(circuit, None, anchors)


# ----------------------------------------------------------------------------
# trajectories


@dataclass
class ShotRecord:
    """Measured +-1 values, one row per shot and one column per site."""

    values: np.ndarray
    seed: int
    noise: NoiseModel
    backend: str
    basis: str = "Z"

    @property
    def n_shots(self) -> int:
        return self.values.shape[0]


def sample_shots(circuit: GateCircuit, noise: NoiseModel | None, n_shots: int, seed: int = 0,
                 backend: str | None = None, chunk: int = 4096, shot_offset: int = 0) -> ShotRecord:
    """Sample Pauli-unraveled depolarizing trajectories."""
    if n_shots < 0:
        raise ValueError("n_shots must be >= 0")
    if circuit.n_qubits > MAX_TRAJECTORY_QUBITS:
        raise ValueError(f"trajectory engine limited to {MAX_TRAJECTORY_QUBITS} qubits")
    noise = noise or NoiseModel()
    low = lower(circuit, noise)
    mod = kernels.get_backend(backend)
    n_slots = len(low.sites)
    bits = np.zeros((n_shots, n_slots), dtype=np.uint8)
    step = chunk if mod is kernels._kernels_py else max(chunk, n_shots)
    for start in range(0, n_shots, max(step, 1)):
        m = min(step, n_shots - start)
        bits[start : start + m] = mod.run_trajectories(
            low.kind, low.q0, low.q1, low.mats, low.prob, low.draw, low.slot,
            low.n_qubits, n_slots, m, int(seed), shot_offset + start,
        )
    values = np.empty((n_shots, n_slots), dtype=np.int8)
    values[:, low.sites] = 1 - 2 * bits.astype(np.int8)
    bases = {op.basis for op in circuit.ops if isinstance(op, Measure)}
    basis = bases.pop() if len(bases) == 1 else "mixed"
    return ShotRecord(values, int(seed), noise, backend or kernels.BACKEND, basis)


def run_shot(circuit: GateCircuit, noise: NoiseModel | None, seed: int, shot: int = 0,
             backend: str | None = None) -> np.ndarray:
    """+-1 outcomes of a single trajectory (shot index ``shot``)."""
    return sample_shots(circuit, noise, 1, seed, backend, shot_offset=shot).values[0]
