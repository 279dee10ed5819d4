import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holomera.circuit import (
    CX_AB,
    CX_BA,
    Cnot,
    GateCircuit,
    Measure,
    Reset,
    Rotation,
    SynthesisError,
    TwoQubitUnitary,
    _template_jacobian,
    compile_network,
    decompose_circuit,
    decompose_two_qubit,
    extend_isometry,
    free_angle_count,
    from_native,
    from_qasm3,
    gauge_reduce,
    phase_distance,
    rotation,
    schedule,
    template_unitary,
    to_native,
    to_qasm3,
    with_basis,
    zyz_angles,
)
from holomera.mps import mps_observables
from holomera.network import assemble, collapse_to_mps, network_slots
from holomera.simulator import run_exact
from holomera.tensor import haar_unitary

SWAP = np.eye(4)[[0, 2, 1, 3]].astype(complex)


def random_net(kind, d, L, seed=0):
    rng = np.random.default_rng(seed)
    return assemble(kind, d, L, [haar_unitary(4, rng) for _ in network_slots(kind, d, L)])


def test_rotation_convention():
    np.testing.assert_allclose(rotation("x", np.pi), -1j * np.array([[0, 1], [1, 0]]), atol=1e-15)
    np.testing.assert_allclose(rotation("z", 0.4), np.diag([np.exp(-0.2j), np.exp(0.2j)]), atol=1e-15)


def test_cnot_matrices():
    # basis index 2*s_a + s_b; CX(a->b) flips b when a=1
    assert CX_AB[3, 2] == 1 and CX_AB[2, 3] == 1
    assert CX_BA[3, 1] == 1 and CX_BA[1, 3] == 1


def test_template_jacobian_matches_finite_differences(rng):
    x = rng.uniform(-np.pi, np.pi, 15)
    u, derivs = _template_jacobian(x)
    np.testing.assert_allclose(u, template_unitary(x), atol=1e-14)
    assert len(derivs) == 15
    h = 1e-6
    for k in range(15):
        dx = np.zeros(15)
        dx[k] = h
        fd = (template_unitary(x + dx) - template_unitary(x - dx)) / (2 * h)
        np.testing.assert_allclose(derivs[k], fd, atol=1e-8)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_synthesis_of_haar_unitaries(seed):
    u = haar_unitary(4, np.random.default_rng(seed))
    dec = decompose_two_qubit(u)
    assert dec.residual < 1e-6 and dec.angles.shape == (15,)
    assert np.linalg.norm(dec.unitary() - u, 2) < 1e-6


@pytest.mark.parametrize("name,u", [("identity", np.eye(4, dtype=complex)), ("cnot", CX_AB), ("swap", SWAP),
                                    ("local", np.kron(rotation("y", 0.3), rotation("x", 1.1)))])
def test_synthesis_of_special_gates(name, u):
    assert decompose_two_qubit(u).residual < 1e-6


def test_synthesis_errors():
    with pytest.raises(ValueError):
        decompose_two_qubit(2 * np.eye(4))
    with pytest.raises(SynthesisError) as info:
        decompose_two_qubit(SWAP, restarts=1, tol=-1.0)
    assert info.value.best.residual >= 0


def test_phase_distance_ignores_global_phase(rng):
    u = haar_unitary(4, rng)
    dist, phi = phase_distance(u, np.exp(-0.7j) * u)
    assert dist < 1e-14 and abs(np.exp(1j * phi) - np.exp(0.7j)) < 1e-14


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_zyz_angles_reconstruct(seed):
    m = haar_unitary(2, np.random.default_rng(seed))
    c, b, a = zyz_angles(m)
    rec = rotation("z", a) @ rotation("y", b) @ rotation("z", c)
    assert phase_distance(m, rec)[0] < 1e-10


def test_extend_isometry(rng):
    t = haar_unitary(4, rng)
    ext = extend_isometry(t[:, :2])
    np.testing.assert_allclose(ext[:, :2], t[:, :2])
    np.testing.assert_allclose(ext.conj().T @ ext, np.eye(4), atol=1e-12)
    ext1 = extend_isometry(t[:, :1])
    np.testing.assert_allclose(ext1[:, 0], t[:, 0])
    ext_b = extend_isometry(t[:, :2], (False, True))
    np.testing.assert_allclose(ext_b[:, [0, 2]], t[:, :2])
    with pytest.raises(ValueError):
        extend_isometry(2 * t[:, :2])
    with pytest.raises(ValueError):
        extend_isometry(t[:3, :2])


@pytest.mark.parametrize("kind,d,L,qubits,gates", [("MERA", 4, 32, 9, 56), ("GMERA", 2, 32, 5, 90), ("QCL", 3, 16, 4, 42)])
def test_schedule_counts(kind, d, L, qubits, gates):
    c = schedule(random_net(kind, d, L))
    c.validate()
    assert c.n_qubits == qubits and c.count(TwoQubitUnitary) == gates
    assert c.n_sites == L and c.count(Reset) == L - qubits
    assert [op.site for op in c.ops if isinstance(op, Measure)] == list(range(L))


def test_schedule_qubit_reuse_is_causal():
    c = schedule(random_net("MERA", 3, 16))
    free = set()
    for op in c.ops:
        if isinstance(op, Measure):
            free.add(op.q)
        elif isinstance(op, Reset):
            free.discard(op.q)
        else:
            assert op.qa not in free and op.qb not in free


@pytest.mark.parametrize("basis", ["X", "Z"])
def test_compiled_circuit_reproduces_network(basis):
    net = random_net("GMERA", 2, 8, seed=4)
    mps = collapse_to_mps(net)
    want_on, want_c = mps_observables(mps, 3, basis)  # 1-based anchor
    for circ in (schedule(net, basis), compile_network(net, basis, reduce=False), compile_network(net, basis)):
        res = run_exact(circ, anchors=[2])
        np.testing.assert_allclose(res.onsite, want_on, atol=1e-9)
        np.testing.assert_allclose(res.connected(2), want_c, atol=1e-9)


def test_decomposition_structure():
    net = random_net("MERA", 2, 8, seed=9)
    dc = decompose_circuit(schedule(net))
    G = len(net.gates)
    assert dc.is_decomposed and dc.count(Cnot) == 3 * G and dc.count(Rotation) == 15 * G
    assert dc.meta["max_synthesis_residual"] < 1e-6
    red = gauge_reduce(dc)
    merges = red.meta["gauge_merges"]
    assert merges > 0 and free_angle_count(red) == 15 * G - 3 * merges
    assert red.count(Cnot) == 3 * G


def test_gauge_reduce_is_idempotent():
    red = compile_network(random_net("QCL", 2, 8, seed=1))
    again = gauge_reduce(red)
    assert again.count(Rotation) == red.count(Rotation)


def test_with_basis():
    c = with_basis(schedule(random_net("MERA", 1, 4)), "Z")
    assert {op.basis for op in c.ops if isinstance(op, Measure)} == {"Z"}


def test_native_round_trip_is_exact():
    for circ in (schedule(random_net("MERA", 2, 8)), compile_network(random_net("GMERA", 1, 8))):
        blob = to_native(circ)
        back = from_native(blob)
        assert to_native(back) == blob
        for a, b in zip(circ.ops, back.ops):
            assert type(a) is type(b)
            if isinstance(a, TwoQubitUnitary):
                assert a.matrix.tobytes() == b.matrix.tobytes()
            else:
                assert a == b


def test_native_rejects_bad_documents():
    with pytest.raises(ValueError):
        from_native(b'{"format": "other"}')
    with pytest.raises(ValueError):
        from_native(b'{"format": "holomera-circuit", "version": 99}')


def test_qasm_round_trip():
    circ = compile_network(random_net("MERA", 2, 8, seed=2))
    text = to_qasm3(circ)
    assert text.startswith("OPENQASM 3.0;") and "measure" in text
    back = from_qasm3(text)
    assert back.n_qubits == circ.n_qubits and len(back.ops) == len(circ.ops)
    for a, b in zip(circ.ops, back.ops):
        if isinstance(a, Rotation):
            assert (a.q, a.axis, a.angle) == (b.q, b.axis, b.angle)
        else:
            assert a == b
    assert to_qasm3(back) == text
    ra, rb = run_exact(circ, anchors=[1]), run_exact(back, anchors=[1])
    np.testing.assert_allclose(ra.connected(1), rb.connected(1), atol=1e-12)


def test_qasm_errors():
    with pytest.raises(ValueError):
        to_qasm3(schedule(random_net("MERA", 1, 4)))
    with pytest.raises(ValueError):
        from_qasm3("OPENQASM 3.0;\nqubit[1] q;\nccx q[0], q[1], q[2];\n")
    with pytest.raises(ValueError):
        from_qasm3("OPENQASM 3.0;\nbit[1] c;\n")


def test_validate():
    with pytest.raises(ValueError):
        GateCircuit(1, [Measure(0, "X", 0), Measure(0, "X", 0)]).validate()
    with pytest.raises(ValueError):
        GateCircuit(1, [Cnot(0, 1)]).validate()
    with pytest.raises(ValueError):
        GateCircuit(1, [Measure(0, "Y", 0)]).validate()
