"""Holographic gate circuits: scheduling, two-qubit synthesis and serialization.

Rotations follow ``R_P(theta) = exp(-i theta P / 2)``. Two-qubit matrices use
the basis ``2*s_a + s_b`` for ``(q_a, q_b)``.

Synthesis template for a two-qubit unitary on ``(a, b)``, in time order::

    G(a), G(b)            generic blocks Rz.Ry.Rz, 3 angles each
    CX(b -> a)
    Rz(a), Ry(b)
    CX(a -> b)
    Ry(b)
    CX(b -> a)
    G(a), G(b)

Seven rotation blocks, fifteen angles, three CNOTs. The three-CNOT core is
universal for SU(4) up to local rotations, so every target is reachable.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy.optimize import least_squares

from .network import IsometricNetwork, embed_unitary, qubit_formula, sideways_schedule
from .tensor import complete_isometry

FORMAT_VERSION = 1
SYNTHESIS_TOL = 1e-6

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CX_AB = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CX_BA = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)


def rotation(axis: str, angle: float) -> np.ndarray:
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * PAULI[axis]


# ----------------------------------------------------------------------------
# ops


@dataclass(frozen=True)
class TwoQubitUnitary:
    qa: int
    qb: int
    matrix: np.ndarray
    source: int = -1


@dataclass(frozen=True)
class Rotation:
    """Single-axis rotation; rotations sharing ``block >= 0`` form one generic gate."""

    q: int
    axis: str
    angle: float
    block: int = -1


@dataclass(frozen=True)
class Cnot:
    control: int
    target: int


@dataclass(frozen=True)
class Measure:
    q: int
    basis: str
    site: int


@dataclass(frozen=True)
class Reset:
    q: int


Op = Union[TwoQubitUnitary, Rotation, Cnot, Measure, Reset]


def op_qubits(op) -> tuple[int, ...]:
    if isinstance(op, TwoQubitUnitary):
        return (op.qa, op.qb)
    if isinstance(op, Cnot):
        return (op.control, op.target)
    return (op.q,)


@dataclass
class GateCircuit:
    n_qubits: int
    ops: list
    meta: dict = field(default_factory=dict)

    @property
    def n_sites(self) -> int:
        return sum(isinstance(op, Measure) for op in self.ops)

    @property
    def is_decomposed(self) -> bool:
        return not any(isinstance(op, TwoQubitUnitary) for op in self.ops)

    def count(self, kind) -> int:
        return sum(isinstance(op, kind) for op in self.ops)

    def validate(self) -> None:
        sites = []
        for op in self.ops:
            for q in op_qubits(op):
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"qubit {q} out of range in {op}")
            if isinstance(op, Measure):
                if op.basis not in ("X", "Z"):
                    raise ValueError(f"invalid basis {op.basis!r}")
                sites.append(op.site)
            if isinstance(op, Rotation) and op.axis not in PAULI:
                raise ValueError(f"invalid axis {op.axis!r}")
        if sorted(sites) != list(range(len(sites))):
            raise ValueError("every site must be measured exactly once")


# ----------------------------------------------------------------------------
# compilation from a network


def extend_isometry(t: np.ndarray, fixed: tuple[bool, bool] | None = None) -> np.ndarray:
    """Square unitary acting as ``t`` on inputs whose fixed legs are |0>.

    ``t`` is ``4x4``, ``4x2`` or ``4x1``. For ``4x2`` the fixed leg defaults to
    the first qubit, i.e. columns 0 and 1 of the result equal ``t``.
    """
    t = np.asarray(t, dtype=complex)
    if t.ndim != 2 or t.shape[0] != 4 or t.shape[1] not in (1, 2, 4):
        raise ValueError(f"bad isometry shape {t.shape}")
    if not np.allclose(t.conj().T @ t, np.eye(t.shape[1]), atol=1e-10):
        raise ValueError("input is not an isometry")
    if t.shape[1] == 4:
        return t.copy()
    if fixed is None:
        fixed = (True, False) if t.shape[1] == 2 else (True, True)
    return embed_unitary(t, fixed)


def schedule(net: IsometricNetwork, basis: str = "X") -> GateCircuit:
    """Compile ``net`` into a sideways circuit with measurement and qubit reuse."""
    if basis not in ("X", "Z"):
        raise ValueError("basis must be X or Z")
    sched = sideways_schedule(net)
    n_qubits = max(sched.n_qubits, qubit_formula(net.kind, net.depth))
    last_use = {}
    for pos, qs in enumerate(sched.qubits):
        for q in qs:
            last_use[q] = pos
    ops: list = []
    for pos, ((kind, idx), qs) in enumerate(zip(sched.events, sched.qubits)):
        if kind == "gate":
            g = net.gates[idx]
            ops.append(TwoQubitUnitary(qs[0], qs[1], g.unitary(), idx))
        else:
            ops.append(Measure(qs[0], basis, idx))
            if last_use[qs[0]] > pos:
                ops.append(Reset(qs[0]))
    meta = {"kind": net.kind, "depth": net.depth, "length": net.length}
    return GateCircuit(n_qubits, ops, meta)


def with_basis(circuit: GateCircuit, basis: str) -> GateCircuit:
    ops = [replace(op, basis=basis) if isinstance(op, Measure) else op for op in circuit.ops]
    return GateCircuit(circuit.n_qubits, ops, dict(circuit.meta))


# ----------------------------------------------------------------------------
# two-qubit synthesis

# template: (target, axis) per angle, in time order; "a"/"b" are the two qubits.
# Generic blocks are Rz, Ry, Rz in time order.
_TEMPLATE = (
    [("a", "z"), ("a", "y"), ("a", "z"), ("b", "z"), ("b", "y"), ("b", "z"), ("cx", "ba"),
     ("a", "z"), ("b", "y"), ("cx", "ab"), ("b", "y"), ("cx", "ba"),
     ("a", "z"), ("a", "y"), ("a", "z"), ("b", "z"), ("b", "y"), ("b", "z")]
)
_BLOCKS = [0, 0, 0, 1, 1, 1, None, 2, 3, None, 4, None, 5, 5, 5, 6, 6, 6]
_GENERIC = {0, 1, 5, 6}


def _lift(m2: np.ndarray, on: str) -> np.ndarray:
    return np.kron(m2, np.eye(2)) if on == "a" else np.kron(np.eye(2), m2)


def _template_factors(angles):
    mats, gens = [], []
    k = 0
    for on, what in _TEMPLATE:
        if on == "cx":
            mats.append(CX_BA if what == "ba" else CX_AB)
            gens.append(None)
        else:
            mats.append(_lift(rotation(what, angles[k]), on))
            gens.append(_lift(-0.5j * PAULI[what], on))
            k += 1
    return mats, gens


def template_unitary(angles) -> np.ndarray:
    u = np.eye(4, dtype=complex)
    for m in _template_factors(angles)[0]:
        u = m @ u
    return u


def _template_jacobian(angles):
    mats, gens = _template_factors(angles)
    n = len(mats)
    prefix = [np.eye(4, dtype=complex)]
    for m in mats:
        prefix.append(m @ prefix[-1])
    suffix = [np.eye(4, dtype=complex)] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] @ mats[i]
    derivs = []
    for i, g in enumerate(gens):
        if g is not None:
            derivs.append(suffix[i + 1] @ g @ prefix[i + 1])
    return prefix[-1], derivs


@dataclass(frozen=True)
class AngleDecomposition:
    angles: np.ndarray
    phase: float
    residual: float

    def unitary(self) -> np.ndarray:
        return np.exp(1j * self.phase) * template_unitary(self.angles)


class SynthesisError(RuntimeError):
    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


def phase_distance(target: np.ndarray, approx: np.ndarray) -> tuple[float, float]:
    """(operator-norm distance, phase) with the phase aligning ``approx`` to ``target``."""
    phi = float(np.angle(np.trace(approx.conj().T @ target)))
    return float(np.linalg.norm(target - np.exp(1j * phi) * approx, 2)), phi


def decompose_two_qubit(u: np.ndarray, seed: int = 0, restarts: int = 20,
                        tol: float = SYNTHESIS_TOL) -> AngleDecomposition:
    """Fit the 15-angle template to ``u`` by multi-start least squares."""
    u = np.asarray(u, dtype=complex).reshape(4, 4)
    if not np.allclose(u.conj().T @ u, np.eye(4), atol=1e-10):
        raise ValueError("target is not unitary")
    rng = np.random.default_rng(seed)

    def resid(p):
        v = np.exp(1j * p[15]) * template_unitary(p[:15])
        d = (v - u).reshape(-1)
        return np.concatenate([d.real, d.imag])

    def jac(p):
        v, derivs = _template_jacobian(p[:15])
        ph = np.exp(1j * p[15])
        cols = [ph * dv for dv in derivs] + [1j * ph * v]
        j = np.stack([c.reshape(-1) for c in cols], axis=1)
        return np.concatenate([j.real, j.imag], axis=0)

    best = None
    for _ in range(restarts):
        x0 = rng.uniform(-np.pi, np.pi, 16)
        sol = least_squares(resid, x0, jac=jac, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        angles = np.mod(sol.x[:15] + np.pi, 2 * np.pi) - np.pi
        dist, phi = phase_distance(u, template_unitary(angles))
        cand = AngleDecomposition(angles, phi, dist)
        if best is None or cand.residual < best.residual:
            best = cand
        if best.residual < 1e-10:
            break
    if best.residual > tol:
        raise SynthesisError(f"synthesis residual {best.residual:.2e} above {tol:.0e}", best)
    return best


def _template_ops(qa: int, qb: int, angles, next_block: int) -> tuple[list, int]:
    ops = []
    qmap = {"a": qa, "b": qb}
    k = 0
    block_ids = {}
    for (on, what), blk in zip(_TEMPLATE, _BLOCKS):
        if on == "cx":
            c, t = (qb, qa) if what == "ba" else (qa, qb)
            ops.append(Cnot(c, t))
            continue
        if blk not in block_ids:
            block_ids[blk] = next_block
            next_block += 1
        ops.append(Rotation(qmap[on], what, float(angles[k]), block_ids[blk]))
        k += 1
    return ops, next_block


def decompose_circuit(circuit: GateCircuit, seed: int = 0) -> GateCircuit:
    """Replace every two-qubit unitary by its 7-rotation, 3-CNOT template."""
    ops: list = []
    next_block = 1 + max((op.block for op in circuit.ops if isinstance(op, Rotation)), default=-1)
    residuals = []
    for op in circuit.ops:
        if isinstance(op, TwoQubitUnitary):
            dec = decompose_two_qubit(op.matrix, seed=seed + max(op.source, 0))
            residuals.append(dec.residual)
            new, next_block = _template_ops(op.qa, op.qb, dec.angles, next_block)
            ops.extend(new)
        else:
            ops.append(op)
    meta = dict(circuit.meta)
    meta["max_synthesis_residual"] = max(residuals, default=0.0)
    return GateCircuit(circuit.n_qubits, ops, meta)


def zyz_angles(m: np.ndarray) -> tuple[float, float, float]:
    """Angles (c, b, a) with m = e^{i phi} Rz(a) Ry(b) Rz(c), i.e. time order c, b, a."""
    m = np.asarray(m, dtype=complex)
    m = m / np.sqrt(np.linalg.det(m))
    b = 2 * np.arctan2(abs(m[1, 0]), abs(m[0, 0]))
    # m00 = e^{-i(a+c)/2} cos(b/2), m10 = e^{i(a-c)/2} sin(b/2)
    s = -2 * np.angle(m[0, 0]) if abs(m[0, 0]) > 1e-12 else 0.0
    d = 2 * np.angle(m[1, 0]) if abs(m[1, 0]) > 1e-12 else 0.0
    a, c = (s + d) / 2, (s - d) / 2
    return float(c), float(b), float(a)


def _block_matrix(rots) -> np.ndarray:
    m = np.eye(2, dtype=complex)
    for r in rots:
        m = rotation(r.axis, r.angle) @ m
    return m


def gauge_reduce(circuit: GateCircuit) -> GateCircuit:
    """Merge consecutive generic blocks on the same qubit into one block.

    Adjacent gates sharing a qubit each bring a generic block to the shared
    wire; their product is again one generic block, which removes two blocks
    (six angles) per interior gate and leaves nine angles per gate.
    """
    items: list = []  # ops, or lists of Rotation forming a generic block
    i = 0
    ops = circuit.ops
    while i < len(ops):
        op = ops[i]
        if isinstance(op, Rotation) and op.block >= 0:
            j = i
            while j < len(ops) and isinstance(ops[j], Rotation) and ops[j].block == op.block:
                j += 1
            items.append(list(ops[i:j]))
            i = j
        else:
            items.append(op)
            i += 1
    out: list = []
    last_on: dict[int, int] = {}
    merges = 0
    for it in items:
        if isinstance(it, list):
            q = it[0].q
            k = last_on.get(q)
            if k is not None and isinstance(out[k], list):
                m = _block_matrix(it) @ _block_matrix(out[k])
                c, b, a = zyz_angles(m)
                blk = out[k][0].block
                out[k] = [Rotation(q, "z", c, blk), Rotation(q, "y", b, blk), Rotation(q, "z", a, blk)]
                merges += 1
                continue
            out.append(it)
            last_on[q] = len(out) - 1
        else:
            out.append(it)
            for q in op_qubits(it):
                last_on[q] = len(out) - 1
    flat: list = []
    for it in out:
        flat.extend(it if isinstance(it, list) else [it])
    meta = dict(circuit.meta)
    meta["gauge_merges"] = meta.get("gauge_merges", 0) + merges
    return GateCircuit(circuit.n_qubits, flat, meta)


def free_angle_count(circuit: GateCircuit) -> int:
    return circuit.count(Rotation)


def compile_network(net: IsometricNetwork, basis: str = "X", decompose: bool = True,
                    reduce: bool = True, seed: int = 0) -> GateCircuit:
    circ = schedule(net, basis)
    if decompose:
        circ = decompose_circuit(circ, seed)
        if reduce:
            circ = gauge_reduce(circ)
    return circ


# ----------------------------------------------------------------------------
# serialization


def _matrix_hex(m: np.ndarray) -> str:
    return np.ascontiguousarray(m, dtype="<c16").tobytes().hex()


def _hex_matrix(s: str) -> np.ndarray:
    return np.frombuffer(bytes.fromhex(s), dtype="<c16").reshape(4, 4).copy()


def to_native(circuit: GateCircuit) -> bytes:
    ops = []
    for op in circuit.ops:
        if isinstance(op, TwoQubitUnitary):
            ops.append({"op": "unitary", "q": [op.qa, op.qb], "matrix": _matrix_hex(op.matrix), "source": op.source})
        elif isinstance(op, Rotation):
            ops.append({"op": "rotation", "q": op.q, "axis": op.axis, "angle": float(op.angle).hex(), "block": op.block})
        elif isinstance(op, Cnot):
            ops.append({"op": "cnot", "q": [op.control, op.target]})
        elif isinstance(op, Measure):
            ops.append({"op": "measure", "q": op.q, "basis": op.basis, "site": op.site})
        elif isinstance(op, Reset):
            ops.append({"op": "reset", "q": op.q})
    doc = {"format": "holomera-circuit", "version": FORMAT_VERSION, "n_qubits": circuit.n_qubits,
           "meta": circuit.meta, "ops": ops}
    return json.dumps(doc, indent=None, sort_keys=True, default=float).encode()


def from_native(data: bytes | str) -> GateCircuit:
    doc = json.loads(data)
    if doc.get("format") != "holomera-circuit":
        raise ValueError("not a circuit document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported circuit version {doc.get('version')}")
    ops: list = []
    for o in doc["ops"]:
        kind = o["op"]
        if kind == "unitary":
            ops.append(TwoQubitUnitary(o["q"][0], o["q"][1], _hex_matrix(o["matrix"]), o["source"]))
        elif kind == "rotation":
            ops.append(Rotation(o["q"], o["axis"], float.fromhex(o["angle"]), o["block"]))
        elif kind == "cnot":
            ops.append(Cnot(*o["q"]))
        elif kind == "measure":
            ops.append(Measure(o["q"], o["basis"], o["site"]))
        elif kind == "reset":
            ops.append(Reset(o["q"]))
        else:
            raise ValueError(f"unknown op {kind!r}")
    circ = GateCircuit(doc["n_qubits"], ops, doc.get("meta", {}))
    circ.validate()
    return circ


def to_qasm3(circuit: GateCircuit) -> str:
    """OpenQASM 3 text; generic blocks are emitted as calls to a ``zyz`` gate."""
    if not circuit.is_decomposed:
        raise ValueError("qasm3 export needs an angle-decomposed circuit")
    lines = [
        "OPENQASM 3.0;",
        'include "stdgates.inc";',
        "gate zyz(c, b, a) r { rz(c) r; ry(b) r; rz(a) r; }",
        f"qubit[{circuit.n_qubits}] q;",
        f"bit[{circuit.n_sites}] c;",
    ]
    ops = circuit.ops
    i = 0
    while i < len(ops):
        op = ops[i]
        if isinstance(op, Rotation):
            blk = [op]
            j = i + 1
            while op.block >= 0 and j < len(ops) and isinstance(ops[j], Rotation) and ops[j].block == op.block:
                blk.append(ops[j])
                j += 1
            if len(blk) == 3 and [r.axis for r in blk] == ["z", "y", "z"]:
                args = ", ".join(repr(r.angle) for r in blk)
                lines.append(f"zyz({args}) q[{op.q}];")
                i = j
                continue
            lines.append(f"r{op.axis}({op.angle!r}) q[{op.q}];")
        elif isinstance(op, Cnot):
            lines.append(f"cx q[{op.control}], q[{op.target}];")
        elif isinstance(op, Measure):
            if op.basis == "X":
                lines.append(f"h q[{op.q}];")
            lines.append(f"c[{op.site}] = measure q[{op.q}];")
        elif isinstance(op, Reset):
            lines.append(f"reset q[{op.q}];")
        i += 1
    return "\n".join(lines) + "\n"


_QASM_PATTERNS = [
    ("zyz", re.compile(r"^zyz\(([^,]+),\s*([^,]+),\s*([^)]+)\)\s+q\[(\d+)\];$")),
    ("rot", re.compile(r"^r([xyz])\(([^)]+)\)\s+q\[(\d+)\];$")),
    ("cx", re.compile(r"^cx\s+q\[(\d+)\],\s*q\[(\d+)\];$")),
    ("h", re.compile(r"^h\s+q\[(\d+)\];$")),
    ("measure", re.compile(r"^c\[(\d+)\]\s*=\s*measure\s+q\[(\d+)\];$")),
    ("reset", re.compile(r"^reset\s+q\[(\d+)\];$")),
    ("qubit", re.compile(r"^qubit\[(\d+)\]\s+q;$")),
]


def from_qasm3(text: str) -> GateCircuit:
    """Parse the subset written by :func:`to_qasm3`."""
    ops: list = []
    n_qubits = None
    pending_h: dict[int, bool] = {}
    block = 0
    for raw in text.splitlines():
        line = raw.split("//")[0].strip()
        if not line or line.startswith(("OPENQASM", "include", "gate ", "bit[")):
            continue
        for name, pat in _QASM_PATTERNS:
            m = pat.match(line)
            if m:
                break
        else:
            raise ValueError(f"unsupported qasm line: {raw!r}")
        if name == "qubit":
            n_qubits = int(m.group(1))
            continue
        if name == "h":
            q = int(m.group(1))
            if pending_h.get(q):
                raise ValueError("consecutive h gates are not supported")
            pending_h[q] = True
            continue
        qs = [int(g) for g in m.groups()] if name in ("cx", "reset") else None
        if name == "zyz":
            q = int(m.group(4))
            for axis, ang in zip("zyz", m.groups()[:3]):
                ops.append(Rotation(q, axis, float(ang), block))
            block += 1
        elif name == "rot":
            ops.append(Rotation(int(m.group(3)), m.group(1), float(m.group(2))))
        elif name == "cx":
            ops.append(Cnot(*qs))
        elif name == "measure":
            site, q = int(m.group(1)), int(m.group(2))
            ops.append(Measure(q, "X" if pending_h.pop(q, False) else "Z", site))
        elif name == "reset":
            ops.append(Reset(qs[0]))
        if name != "measure":
            for q in (qs or []):
                if pending_h.get(q):
                    raise ValueError("h is only supported directly before measure")
    if n_qubits is None:
        raise ValueError("missing qubit declaration")
    if pending_h:
        raise ValueError("dangling h gate")
    circ = GateCircuit(n_qubits, ops, {})
    circ.validate()
    return circ
