import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resonator_mbqc.cluster import (
    BackendCapabilityError,
    CapacityError,
    DenseRegister,
    MeasurementPattern,
    PatternError,
    Step,
    apply_pauli_string,
    b_gamma_bra,
    b_gamma_probabilities,
    build_cluster_dense,
    build_cluster_graph,
    clifford_basis,
    fusion_schedule,
    load_pattern,
    measure_b_gamma,
    measure_pauli_graph,
    pattern_from_document,
    pattern_to_document,
    plus_register,
    rotation_chain_pattern,
    run_pattern,
    verify_stabilizers,
)
from resonator_mbqc.cluster.dense import project_out
from resonator_mbqc.device import build_lattice, ghz

import oracles as o


def lattice(*extents):
    return build_lattice(len(extents), extents, ghz(6.6), ghz(7.0))


def fid(a, b):
    return abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)


class TestSchedule:
    def test_1d_four(self):
        s = fusion_schedule(lattice(4))
        assert s.rounds[0] == (((1,), (2,)), ((3,), (4,)))
        assert s.rounds[1] == (((2,), (3,)),)

    def test_2x2_rows_then_columns(self):
        # sites are (x, y): rounds 1-2 join neighbours within a row, rounds 3-4 within a column
        s = fusion_schedule(lattice(2, 2))
        assert len(s) == 4
        assert all(a[1] == b[1] for r in s.rounds[:2] for a, b in r)
        assert all(a[0] == b[0] for r in s.rounds[2:] for a, b in r)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(1, 6), min_size=1, max_size=3))
    def test_invariants(self, extents):
        lat = lattice(*extents)
        s = fusion_schedule(lat)
        assert len(s) == 2 * lat.dimension
        assert sorted(tuple(sorted(e)) for e in s.edges) == lat.edges()
        for r in s.rounds:
            ends = [x for e in r for x in e]
            assert len(ends) == len(set(ends))


class TestDense:
    def test_two_qubits(self):
        np.testing.assert_allclose(build_cluster_dense(lattice(2)).amplitudes, [0.5, 0.5, 0.5, -0.5], atol=1e-12)

    @pytest.mark.parametrize("extents", [(2,), (3,), (4,), (2, 2), (3, 3)])
    def test_closed_form(self, extents):
        lat = lattice(*extents)
        expected = o.cluster_closed_form(lat.sites, lat.edges())
        assert fid(build_cluster_dense(lat).amplitudes, expected) == pytest.approx(1, abs=1e-9)
        # sign convention, not only fidelity
        np.testing.assert_allclose(build_cluster_dense(lat).amplitudes, expected, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_after_first_round(self, n):
        lat = lattice(n)
        reg = plus_register(lat.sites)
        for a, b in fusion_schedule(lat).rounds[0]:
            reg.apply_cz(a, b)
        np.testing.assert_allclose(reg.amplitudes, o.linear_pairs_closed_form(n), atol=1e-9)

    def test_order_independence(self, rng):
        lat = lattice(3, 3)
        ref = build_cluster_dense(lat).amplitudes
        edges = lat.edges()
        for _ in range(5):
            reg = plus_register(lat.sites)
            for k in rng.permutation(len(edges)):
                reg.apply_cz(*edges[k])
            assert fid(reg.amplitudes, ref) == pytest.approx(1, abs=1e-9)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            build_cluster_dense(lattice(21))

    def test_stabilizers(self):
        lat = lattice(3, 3)
        reg = build_cluster_dense(lat)
        assert all(v == pytest.approx(1, abs=1e-9) for v in verify_stabilizers(reg, lat).values())

    def test_z_flips_neighbouring_stabilizers(self):
        lat = lattice(3, 3)
        reg = build_cluster_dense(lat)
        flipped = DenseRegister(reg.sites, apply_pauli_string(reg, [], [(2, 2)]))
        report = verify_stabilizers(flipped, lat)
        for s, v in report.items():
            assert v == pytest.approx(-1 if s == (2, 2) else 1, abs=1e-9)
        # X on a site anticommutes with the neighbours' stabilizers
        flipped = DenseRegister(reg.sites, apply_pauli_string(reg, [(2, 2)], []))
        report = verify_stabilizers(flipped, lat)
        for s, v in report.items():
            assert v == pytest.approx(-1 if s in lat.neighbours((2, 2)) else 1, abs=1e-9)

    def test_product_state_fails(self):
        lat = lattice(2, 2)
        assert any(abs(v - 1) > 0.5 for v in verify_stabilizers(plus_register(lat.sites), lat).values())


class TestBGamma:
    def test_eigenstate(self, rng):
        gamma = 0.77
        for _ in range(10):
            reg = DenseRegister([(1,)], np.array([1, np.exp(1j * gamma)]) / math.sqrt(2))
            assert measure_b_gamma(reg, (1,), gamma, rng)[0] == 0

    def test_pole(self):
        p0, p1 = b_gamma_probabilities(DenseRegister([(1,)], np.array([1, 0])), (1,), 1.3)
        assert (p0, p1) == pytest.approx((0.5, 0.5))

    @pytest.mark.parametrize("gamma", [0.0, 0.3, math.pi / 2, 2.2, -1.0])
    def test_two_qubit_byproduct(self, gamma, rng):
        lat = lattice(2)
        seen = set()
        for _ in range(40):
            bit, reg = measure_b_gamma(build_cluster_dense(lat), (1,), gamma, rng)
            seen.add(bit)
            assert fid(reg.amplitudes, o.two_qubit_cluster_byproduct(gamma, bit)) == pytest.approx(1, abs=1e-12)
        assert seen == {0, 1}

    def test_measured_qubit_removed(self, rng):
        _, reg = measure_b_gamma(build_cluster_dense(lattice(2, 2)), (1, 1), 0.1, rng)
        assert reg.qubit_count == 3
        assert reg.norm() == pytest.approx(1, abs=1e-9)


class TestGraph:
    def test_single(self):
        assert build_cluster_graph(lattice(1)).generators() == ["+X"]

    def test_three_chain(self):
        assert build_cluster_graph(lattice(3)).generators() == ["+XZI", "+ZXZ", "+IZX"]

    @pytest.mark.parametrize("extents", [(1,), (2,), (5,), (2, 2), (3, 3), (3, 4), (2, 2, 2)])
    @pytest.mark.parametrize("via_gates", [False, True])
    def test_matches_dense(self, extents, via_gates):
        lat = lattice(*extents)
        gs = build_cluster_graph(lat, via_gates=via_gates)
        assert gs.tableau.commutation_ok()
        _, v = gs.to_dense()
        assert fid(v, build_cluster_dense(lat).amplitudes) == pytest.approx(1, abs=1e-9)

    def test_large_lattice(self):
        gs = build_cluster_graph(lattice(40, 40))
        assert gs.qubit_count == 1600
        assert gs.tableau.commutation_ok()

    def test_rank(self):
        gs = build_cluster_graph(lattice(3, 3), via_gates=True)
        n = gs.qubit_count
        m = np.concatenate([gs.tableau.x[n:], gs.tableau.z[n:]], axis=1).astype(np.uint8)
        # GF(2) rank by elimination
        rank, rows = 0, m.copy()
        for col in range(rows.shape[1]):
            piv = [r for r in range(rank, n) if rows[r, col]]
            if not piv:
                continue
            rows[[rank, piv[0]]] = rows[[piv[0], rank]]
            for r in range(n):
                if r != rank and rows[r, col]:
                    rows[r] ^= rows[rank]
            rank += 1
        assert rank == n

    def test_deterministic_single_x(self, rng):
        bit, _, det = measure_pauli_graph(build_cluster_graph(lattice(1)), (1,), "X", rng)
        assert (bit, det) == (0, True)

    @pytest.mark.parametrize("basis,gamma", [("X", 0.0), ("Y", math.pi / 2)])
    def test_two_qubit_post_state(self, basis, gamma, rng):
        lat = lattice(2)
        for _ in range(10):
            bit, gs, det = measure_pauli_graph(build_cluster_graph(lat), (1,), basis, rng)
            assert not det
            _, v = gs.to_dense()
            assert fid(v, o.two_qubit_cluster_byproduct(gamma, bit)) == pytest.approx(1, abs=1e-9)

    def test_z_removes_qubit(self, rng):
        lat = lattice(3)
        bit, gs, _ = measure_pauli_graph(build_cluster_graph(lat), (2,), "Z", rng)
        _, v = gs.to_dense()
        expected = np.kron([1, (-1) ** bit], [1, (-1) ** bit]) / 2
        assert fid(v, expected) == pytest.approx(1, abs=1e-9)

    def test_statistics_match_dense(self):
        # all-X then Y on a 2x2x2 lattice: joint outcome distribution
        lat = lattice(2, 2, 2)
        steps = tuple(Step(s, g) for s, g in zip(lat.sites[:4], (0.0, math.pi / 2, 0.0, math.pi)))
        pattern = MeasurementPattern(steps)
        shots = 1000
        dense_counts, graph_counts = {}, {}
        dense0, graph0 = build_cluster_dense(lat), build_cluster_graph(lat)
        seeds = np.random.SeedSequence(5).spawn(2 * shots)
        for k in range(shots):
            r = run_pattern(lat, pattern, rng=np.random.default_rng(seeds[k]), initial=dense0)
            dense_counts[tuple(r.outcomes)] = dense_counts.get(tuple(r.outcomes), 0) + 1
            r = run_pattern(lat, pattern, rng=np.random.default_rng(seeds[shots + k]), backend="graph", initial=graph0)
            graph_counts[tuple(r.outcomes)] = graph_counts.get(tuple(r.outcomes), 0) + 1
        for key in set(dense_counts) | set(graph_counts):
            p = (dense_counts.get(key, 0) + graph_counts.get(key, 0)) / (2 * shots)
            sigma = math.sqrt(2 * shots * p * (1 - p)) + 1e-9
            assert abs(dense_counts.get(key, 0) - graph_counts.get(key, 0)) <= 3 * sigma + 1


class TestPattern:
    def test_clifford_map(self):
        assert clifford_basis(0.0) == ("X", 0)
        assert clifford_basis(math.pi / 2) == ("Y", 0)
        assert clifford_basis(math.pi) == ("X", 1)
        assert clifford_basis(-math.pi / 2) == ("Y", 1)
        with pytest.raises(BackendCapabilityError):
            clifford_basis(0.3)

    def test_dependency_order(self):
        with pytest.raises(PatternError):
            MeasurementPattern((Step((1,), 0.0, xor_of=(0,), flips_sign=True),))
        with pytest.raises(PatternError):
            MeasurementPattern((Step((1,), 0.0), Step((1,), 0.0)))

    def test_adaptive_angle(self):
        p = MeasurementPattern((Step((1,), 0.0), Step((2,), 0.4, xor_of=(0,), flips_sign=True)))
        assert p.applied_angle(1, [0]) == 0.4
        assert p.applied_angle(1, [1]) == -0.4

    def test_empty_pattern(self, rng):
        lat = lattice(2, 2)
        r = run_pattern(lat, MeasurementPattern(()), rng=rng)
        np.testing.assert_allclose(r.residual.amplitudes, build_cluster_dense(lat).amplitudes)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_wire_propagates_with_hadamards(self, k, rng):
        lat = lattice(k + 1)
        v = np.array([0.6, 0.8j])
        pattern = MeasurementPattern(tuple(Step((i,), 0.0) for i in range(1, k + 1)))
        h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
        x = np.array([[0, 1], [1, 0]])
        for _ in range(8):
            r = run_pattern(lat, pattern, inputs={(1,): v}, rng=rng)
            # undo each step's X^s H in reverse order
            out = r.residual.amplitudes
            for s in reversed(r.outcomes):
                out = h @ np.linalg.matrix_power(x, s) @ out
            assert fid(out, v) == pytest.approx(1, abs=1e-9)

    def test_rotation_chain_random(self, rng):
        lat = lattice(5)
        worst = 1.0
        for _ in range(100):
            a, b, c = rng.uniform(-math.pi, math.pi, 3)
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            pattern = rotation_chain_pattern(lat.sites, a, b, c, v)
            r = run_pattern(lat, pattern, rng=rng)
            _, out = r.corrected_output()
            target = o.rx(c) @ o.rz(b) @ o.rx(a) @ (v / np.linalg.norm(v))
            worst = min(worst, fid(out, target))
        assert worst >= 1 - 1e-6

    def test_graph_rejects_non_clifford(self, rng):
        lat = lattice(5)
        with pytest.raises(BackendCapabilityError):
            run_pattern(lat, rotation_chain_pattern(lat.sites, 0.3, 0.2, 0.1), rng=rng, backend="graph")

    def test_graph_rejects_inputs(self, rng):
        lat = lattice(2)
        with pytest.raises(BackendCapabilityError):
            run_pattern(lat, MeasurementPattern(()), inputs={(1,): (1, 0)}, rng=rng, backend="graph")

    def test_document_roundtrip(self, tmp_path):
        lat = lattice(5)
        p = rotation_chain_pattern(lat.sites, 0.1, 0.2, 0.3, [1, 1j])
        path = tmp_path / "p.json"
        path.write_text(json.dumps(pattern_to_document(p)))
        q = load_pattern(path)
        assert q.steps == p.steps
        assert q.byproducts == p.byproducts
        for s in p.expected_output:
            np.testing.assert_allclose(q.expected_output[s], p.expected_output[s])

    def test_malformed_documents(self, tmp_path):
        with pytest.raises(PatternError):
            pattern_from_document({"steps": [{"site": [1]}]})
        with pytest.raises(PatternError):
            pattern_from_document({"schema": "pattern-v0", "steps": []})
        bad = tmp_path / "bad.json"
        bad.write_text('{"steps": [')
        with pytest.raises(PatternError, match="line"):
            load_pattern(bad)

    @pytest.mark.parametrize("extents", [(2, 2), (3,), (2, 3)])
    def test_deterministic_outcomes_exact_on_dense(self, extents, rng):
        # every outcome the tableau calls deterministic has conditional probability 1 on the dense state
        lat = lattice(*extents)
        steps = tuple(Step(site, 0.0) for site in lat.sites[:-1])
        pattern = MeasurementPattern(steps)
        seen_deterministic = 0
        for _ in range(30):
            g = run_pattern(lat, pattern, rng=rng, backend="graph")
            reg = build_cluster_dense(lat)
            for st_, angle, bit, det in zip(pattern.steps, g.angles, g.outcomes, g.deterministic):
                p = b_gamma_probabilities(reg, st_.site, angle)[bit]
                if det:
                    seen_deterministic += 1
                    assert p == pytest.approx(1, abs=1e-9)
                else:
                    assert p == pytest.approx(0.5, abs=1e-9)
                _, reg = project_out(reg, st_.site, b_gamma_bra(angle, bit))
        if extents == (2, 2):
            assert seen_deterministic > 0
