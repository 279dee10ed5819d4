import numpy as np
import pytest

from holomera.models import SpinChainModel, build_hamiltonian_mpo
from holomera.mps import dmrg_ground_state, from_dense, mps_observables, overlap, product_state, random_mps, truncate
from holomera.network import (
    IsometricNetwork,
    assemble,
    build_network,
    check_depth,
    collapse_to_mps,
    count_resources,
    gate_count_formula,
    layer_wires,
    load_network,
    mera_as_gmera,
    mera_range,
    moses_move,
    network_dense_state,
    network_overlap,
    network_slots,
    network_to_mps,
    qubit_formula,
    relabel_gmera_qcl,
    save_network,
    sideways_schedule,
    split_gmera_layer,
    split_mera_layer,
)
from holomera.tensor import haar_unitary


def dense_from_gates(n, phi_wires, phi, gates):
    """Oracle: |phi> on ``phi_wires`` and |0> elsewhere, then 4x4 gates in time order."""
    psi = np.zeros([2] * n, dtype=complex)
    others = [w for w in range(n) if w not in phi_wires]
    idx = [slice(None)] * n
    for w in others:
        idx[w] = 0
    sub = phi.reshape([2] * len(phi_wires))
    order = np.argsort(phi_wires)
    psi[tuple(idx)] = sub.transpose(order) if len(phi_wires) > 1 else sub
    for (a, b), u in gates:
        psi = np.tensordot(u.reshape(2, 2, 2, 2), psi, axes=([2, 3], [a, b]))
        psi = np.moveaxis(psi, [0, 1], [a, b])
    return psi.reshape(-1)


def random_net(kind, d, L, seed=0):
    rng = np.random.default_rng(seed)
    return assemble(kind, d, L, [haar_unitary(4, rng) for _ in network_slots(kind, d, L)])


def ground(L, V, chi=32):
    return dmrg_ground_state(build_hamiltonian_mpo(SpinChainModel(L, V)), chi_max=chi).mps


class TestGeometry:
    @pytest.mark.parametrize("kind,d,L", [("MERA", 4, 32), ("MERA", 5, 32), ("GMERA", 2, 32),
                                          ("GMERA", 3, 16), ("QCL", 3, 32), ("QCL", 2, 8)])
    def test_slot_count_matches_formula(self, kind, d, L):
        assert len(network_slots(kind, d, L)) == gate_count_formula(kind, d, L)

    def test_closed_form_values(self):
        assert gate_count_formula("MERA", 4, 32) == 31 + 15 + 7 + 3 == 56
        assert gate_count_formula("GMERA", 2, 32) == 61 + 29 == 90

    def test_mera_sublayer_sizes(self):
        L = 32
        for j in range(1, 5):
            n = L // 2 ** (j - 1)
            subs = [s for (lay, s, _, _) in network_slots("MERA", 4, L) if lay == j]
            assert subs.count("W") == n // 2 and subs.count("D") == n // 2 - 1

    def test_gmera_leftmost_unitary_column_gate_is_isometry(self):
        net = random_net("GMERA", 3, 16)
        for j in (1, 2):  # below the top layer
            au = [g for g in net.gates if g.layer == j and g.sublayer == "U"]
            assert au[0].tag == "isometry" and all(g.tag == "unitary" for g in au[1:])
            ai = [g.tag for g in net.gates if g.layer == j and g.sublayer == "I"]
            assert ai == ["isometry", "unitary"] * (len(ai) // 2) + ["isometry"] * (len(ai) % 2)

    @pytest.mark.parametrize("kind,d,L,expect", [("MERA", 4, 32, (56, 9)), ("GMERA", 2, 32, (90, 5)),
                                                 ("QCL", 3, 32, (90, 4)), ("MERA", 2, 16, (22, 5)),
                                                 ("GMERA", 2, 16, (42, 5))])
    def test_resources(self, kind, d, L, expect):
        assert count_resources(random_net(kind, d, L)) == expect
        assert expect[1] == qubit_formula(kind, d)

    def test_range_recursion(self):
        assert [mera_range(d) for d in range(5)] == [1, 4, 10, 22, 46]
        with pytest.raises(ValueError):
            mera_range(-1)

    def test_depth_validation(self):
        with pytest.raises(ValueError):
            check_depth("MERA", 6, 32)
        with pytest.raises(ValueError):
            check_depth("MERA", 1, 24)
        with pytest.raises(ValueError):
            check_depth("PEPS", 1, 8)
        check_depth("QCL", 7, 8)

    def test_layer_wires_are_odd_children(self):
        assert layer_wires(16, 3) == [3, 7, 11, 15]

    def test_schedule_reuses_qubits(self):
        sch = sideways_schedule(random_net("MERA", 3, 32))
        emits = [e for e in sch.events if e[0] == "emit"]
        assert [s for _, s in emits] == list(range(32))
        assert sch.n_qubits == 7

    def test_check_rejects_non_isometry(self):
        net = random_net("MERA", 1, 8)
        net.gates[0].matrix = net.gates[0].matrix * 2
        with pytest.raises(ValueError):
            net.check()


class TestSplitters:
    def test_mera_layer_product(self):
        psi = product_state([[1, 1], [1, -1], [1, 0], [0.3, 1]] * 2)
        sp = split_mera_layer(psi)
        assert abs(sp.fidelity - 1) < 1e-12 and sp.coarse.length == 4 and sp.coarse.chi == 1

    def test_mera_layer_dense(self, rng):
        psi = random_mps(4, 2, rng)
        sp = split_mera_layer(psi)
        gates = [((0, 1), sp.unitaries[0]), ((2, 3), sp.unitaries[1]), ((1, 2), sp.unitaries[2])]
        rec = dense_from_gates(4, [1, 3], sp.coarse.to_dense(), gates)
        assert abs(abs(np.vdot(psi.to_dense(), rec)) ** 2 - sp.fidelity) < 1e-10

    def test_mera_layer_disentanglers_do_not_increase_renyi(self):
        sp = split_mera_layer(truncate(ground(32, 0.0), 16)[0])
        assert all(a <= b + 1e-12 for a, b in zip(sp.renyi_after, sp.renyi_before))
        assert any(a < b - 1e-3 for a, b in zip(sp.renyi_after, sp.renyi_before))

    def test_mera_layer_odd_length(self, rng):
        with pytest.raises(ValueError):
            split_mera_layer(random_mps(5, 2, rng))

    def test_moses_product(self):
        psi = product_state([[1, 2], [1, 0], [0, 1], [1, 1j], [2, 1]])
        for mode in ("unitary", "isometry"):
            assert abs(moses_move(psi, mode).fidelity - 1) < 1e-12

    def test_moses_unitary_column_dense(self, rng):
        psi = random_mps(4, 2, rng)
        sp = moses_move(psi, "unitary")
        assert sp.phi.length == 3
        rec = dense_from_gates(4, [1, 2, 3], sp.phi.to_dense(), [((k, k + 1), u) for k, u in enumerate(sp.unitaries)])
        ov = np.vdot(rec, psi.to_dense())
        assert abs(abs(ov) ** 2 - sp.fidelity) < 1e-10
        resid = np.linalg.norm(psi.to_dense() - ov * rec) ** 2
        assert abs(resid - (1 - sp.fidelity)) < 1e-10

    def test_moses_isometry_column_structure(self):
        psi = truncate(ground(8, 0.0), 4)[0]
        sp = moses_move(psi, "isometry")
        assert sp.phi.length == 4 and len(sp.unitaries) == 7
        assert sp.fixed == [(False, True), (False, False)] * 3 + [(False, True)]
        rec = dense_from_gates(8, [0, 2, 4, 6], sp.phi.to_dense(),
                               [((k, k + 1), u) for k, u in enumerate(sp.unitaries)])
        assert abs(abs(np.vdot(rec, psi.to_dense())) ** 2 - sp.fidelity) < 1e-10

    def test_moses_length_checks(self, rng):
        with pytest.raises(ValueError):
            moses_move(random_mps(2, 2, rng), "isometry")
        with pytest.raises(ValueError):
            moses_move(random_mps(4, 2, rng), "diagonal")

    def test_gmera_layer_product(self):
        sp = split_gmera_layer(product_state([[1, 0], [1, 1], [0, 1], [1, -1]]))
        assert sp.coarse.length == 2 and abs(sp.fidelity - 1) < 1e-12

    def test_gmera_layer_dense(self, rng):
        psi = random_mps(8, 2, rng)
        sp = split_gmera_layer(psi)
        n_i = 6
        gates = [((k + 1, k + 2), u) for k, u in enumerate(sp.unitaries[:n_i])]
        gates += [((k, k + 1), u) for k, u in enumerate(sp.unitaries[n_i:])]
        assert len(sp.unitaries) == 2 * 8 - 3
        rec = dense_from_gates(8, [1, 3, 5, 7], sp.coarse.to_dense(), gates)
        f = abs(np.vdot(rec, psi.to_dense())) ** 2
        assert abs(f - sp.fidelity_unitary * sp.fidelity_isometry) < 1e-10
        assert abs(f - sp.fidelity) < 1e-10


class TestBuild:
    def test_product_state_is_exact(self):
        psi = product_state([[np.cos(0.1 * k), np.sin(0.1 * k)] for k in range(8)])
        for kind, d in [("MERA", 1), ("MERA", 3), ("GMERA", 2), ("QCL", 2)]:
            net = build_network(kind, d, psi)
            assert abs(net.fidelity_log["split_fidelity"] - 1) < 1e-10
            assert abs(abs(np.vdot(network_dense_state(net), psi.to_dense())) - 1) < 1e-10

    @pytest.mark.parametrize("kind,d", [("MERA", 1), ("MERA", 2), ("GMERA", 1), ("GMERA", 2), ("QCL", 3)])
    def test_reported_fidelity_matches_dense(self, kind, d):
        ref = ground(8, 4.0)
        net = build_network(kind, d, ref)
        net.check()
        f = abs(np.vdot(ref.to_dense(), network_dense_state(net))) ** 2
        assert abs(f - net.fidelity_log["split_fidelity"]) < 1e-10
        assert abs(f - net.fidelity_log["split_fidelity_estimate"]) < 1e-8
        assert 0 < f <= 1 + 1e-12

    def test_gmera_with_identities_equals_mera(self):
        for L, d in [(8, 2), (16, 3), (16, 4)]:
            net = random_net("MERA", d, L, seed=L + d)
            g = mera_as_gmera(net)
            assert g.kind == "GMERA" and len(g.gates) == gate_count_formula("GMERA", d, L)
            assert abs(abs(np.vdot(network_dense_state(net), network_dense_state(g))) - 1) < 1e-10

    def test_qcl2_equals_gmera1(self):
        g = build_network("GMERA", 1, ground(8, 4.0))
        q = relabel_gmera_qcl(g)
        assert q.kind == "QCL" and q.depth == 2
        np.testing.assert_allclose(network_dense_state(q), network_dense_state(g), atol=1e-12)
        assert relabel_gmera_qcl(q).kind == "GMERA"

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_qcl_collapses_to_small_bond(self, d):
        net = random_net("QCL", d, 16, seed=d)
        mps = collapse_to_mps(net)
        assert mps.chi <= 2**d
        dense = network_dense_state(net)
        assert abs(abs(np.vdot(mps.to_dense(), dense)) - 1) < 1e-10
        a, b = mps_observables(mps, 5, "X"), mps_observables(from_dense(dense), 5, "X")
        np.testing.assert_allclose(a[1], b[1], atol=1e-10)

    def test_contraction_routes_agree(self):
        net = random_net("GMERA", 2, 16, seed=3)
        dense = network_dense_state(net)
        assert abs(abs(np.vdot(network_to_mps(net).to_dense(), dense)) - 1) < 1e-10
        ref = random_mps(16, 8, np.random.default_rng(1))
        assert abs(network_overlap(net, ref) - np.vdot(ref.to_dense(), dense)) < 1e-12

    def test_mera_correlations_vanish_beyond_range(self):
        for d in (1, 2):
            mps = collapse_to_mps(random_net("MERA", d, 32, seed=d))
            conn = mps_observables(mps, 10, "X")[1]
            r = np.arange(1, len(conn) + 1)
            assert np.max(np.abs(conn[r > mera_range(d)])) < 1e-12
            assert np.max(np.abs(conn[r <= mera_range(d)])) > 1e-6


def test_serialization_round_trip(tmp_path):
    net = build_network("GMERA", 2, ground(8, 4.0))
    save_network(net, tmp_path / "net")
    back = load_network(tmp_path / "net")
    assert (back.kind, back.depth, back.length) == (net.kind, net.depth, net.length)
    assert back.fidelity_log == net.fidelity_log
    for a, b in zip(net.gates, back.gates):
        assert a.matrix.tobytes() == b.matrix.tobytes()
        assert (a.wires, a.fixed, a.layer, a.sublayer, a.column, a.row) == (b.wires, b.fixed, b.layer, b.sublayer, b.column, b.row)
    assert isinstance(back, IsometricNetwork)
