"""The stabilizer oracle, checked against dense state vectors and known orbit counts."""

from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starcluster.graph_state import (
    Graph,
    build_armed_chain,
    complete_graph,
    contract_bridge,
    measure,
    measure_literal,
    path_graph,
    physical_bases,
    reduce_chain_to_star,
    star_schedule,
)
from starcluster.stabilizer_oracle import (
    OracleError,
    PauliString,
    StabilizerTableau,
    connected_graphs,
    discard_qubit,
    extract_graph,
    lc_equivalent,
    lc_orbit,
    measure_pauli,
    oracle_after_measurements,
    oracle_graph,
    sweep_rules,
    tableau_from_graph,
    verify_measurement_rule,
)

I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def dense(p: PauliString) -> np.ndarray:
    # qubit 0 is the leftmost tensor factor
    label = str(p).lstrip("+-i")
    mat = reduce(np.kron, [PAULI[c] for c in label])
    return {0: 1, 1: 1j, 2: -1, 3: -1j}[p.phase] * mat


def graph_state_vector(g: Graph) -> np.ndarray:
    qubits = sorted(g.vertices)
    n = len(qubits)
    pos = {v: k for k, v in enumerate(qubits)}
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    sign = np.zeros(2**n, dtype=int)
    for a, b in g.edges():
        sign ^= bits[:, pos[a]] & bits[:, pos[b]]
    return (-1.0) ** sign / np.sqrt(2**n)


def stabilizes(t: StabilizerTableau, psi: np.ndarray) -> bool:
    return all(np.allclose(dense(p) @ psi, psi) for p in t.generators())


@st.composite
def small_graphs(draw, lo=1, hi=6):
    n = draw(st.integers(lo, hi))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph(range(n), [e for e, keep in zip(pairs, mask) if keep])


class TestPauli:
    def test_products(self):
        X, Y, Z = (PauliString.from_label(c) for c in "XYZ")
        assert str(X * Z) == "-iY"
        assert str(Z * X) == "+iY"
        assert (Y * Y).is_identity() and (Y * Y).phase == 0
        assert str(PauliString.from_label("-XZ") * PauliString.from_label("ZX")) == "-YY"

    @settings(max_examples=100, deadline=None)
    @given(st.text("IXYZ", min_size=1, max_size=4), st.text("IXYZ", min_size=4, max_size=4), st.integers(0, 3))
    def test_product_matches_matrices(self, a, b, r):
        a = a.ljust(4, "I")
        p = PauliString.from_label(a)
        q = PauliString(4, *(lambda s: (s.x_bits, s.z_bits))(PauliString.from_label(b)), r)
        assert np.allclose(dense(p * q), dense(p) @ dense(q))
        commute = np.allclose(dense(p) @ dense(q), dense(q) @ dense(p))
        assert p.commutes(q) == commute

    def test_bad_labels(self):
        with pytest.raises(OracleError):
            PauliString.from_label("XQ")
        with pytest.raises(OracleError):
            PauliString.single(2, 0, "W")


class TestTableau:
    @settings(max_examples=40, deadline=None)
    @given(small_graphs())
    def test_graph_tableau_stabilizes_graph_state(self, g):
        t = tableau_from_graph(g)
        assert t.is_valid()
        assert stabilizes(t, graph_state_vector(g))

    def test_invalid_tableaus(self):
        assert not StabilizerTableau.from_labels(["XI", "ZI"]).is_valid()
        assert not StabilizerTableau.from_labels(["XX", "XX"]).is_valid()
        assert StabilizerTableau.from_labels(["XX", "ZZ"]).is_valid()
        with pytest.raises(OracleError):
            StabilizerTableau([1], [0, 0], [0])

    @settings(max_examples=60, deadline=None)
    @given(small_graphs(hi=5), st.data(), st.sampled_from("XYZ"), st.sampled_from(["force_plus", "force_minus"]))
    def test_measurement_matches_projection(self, g, data, basis, policy):
        q = data.draw(st.sampled_from(sorted(g.vertices)))
        psi = graph_state_vector(g)
        t, outcome = measure_pauli(tableau_from_graph(g), q, basis, policy)
        proj = (np.eye(len(psi)) + outcome * dense(PauliString.single(len(g), q, basis))) / 2
        post = proj @ psi
        norm = np.linalg.norm(post)
        assert norm > 1e-9  # the reported outcome has nonzero probability
        assert t.is_valid()
        assert stabilizes(t, post / norm)

    def test_determined_outcome(self):
        g = Graph([0, 1], [])
        t, outcome = measure_pauli(tableau_from_graph(g), 0, "X", "force_minus")
        assert outcome == 1
        t, outcome = measure_pauli(tableau_from_graph(g), 0, "Z", "force_minus")
        assert outcome == -1
        _, again = measure_pauli(t, 0, "Z", "force_plus")
        assert again == -1

    def test_random_outcome_policy_is_seeded(self):
        t = tableau_from_graph(path_graph([0, 1]))
        outs = [measure_pauli(t, 0, "Z", seed)[1] for seed in range(20)]
        assert outs == [measure_pauli(t, 0, "Z", seed)[1] for seed in range(20)]
        assert set(outs) == {1, -1}

    def test_discard(self):
        t = tableau_from_graph(path_graph([0, 1, 2]))
        with pytest.raises(OracleError, match="entangled"):
            discard_qubit(t, 1)
        t, _ = measure_pauli(t, 1, "Z")
        t = discard_qubit(t, 1)
        assert t.qubits == (0, 2) and t.is_valid()


def symplectic_rows(t: StabilizerTableau) -> set[int]:
    n = t.n
    span = {0}
    for x, z in zip(t.xs, t.zs):
        span |= {v ^ (x | z << n) for v in span}
    return span


class TestExtraction:
    @settings(max_examples=40, deadline=None)
    @given(small_graphs())
    def test_graph_round_trip(self, g):
        h, ops = extract_graph(tableau_from_graph(g))
        assert h == g and ops == []

    @settings(max_examples=60, deadline=None)
    @given(small_graphs(hi=5), st.lists(st.tuples(st.sampled_from("HS"), st.integers(0, 4)), max_size=8))
    def test_local_cliffords_are_undone(self, g, moves):
        t = tableau_from_graph(g)
        n = t.n
        for gate, q in moves:
            if q >= n:
                continue
            for k in range(n):
                x, z = t.xs[k] >> q & 1, t.zs[k] >> q & 1
                if gate == "H":
                    x, z = z, x
                else:
                    z ^= x
                t.xs[k] = (t.xs[k] & ~(1 << q)) | (x << q)
                t.zs[k] = (t.zs[k] & ~(1 << q)) | (z << q)
        h, ops = extract_graph(t)
        # re-apply the reported moves to the graph's generators, in reverse
        back = tableau_from_graph(h)
        for gate, q in reversed(ops):
            for k in range(n):
                x, z = back.xs[k] >> q & 1, back.zs[k] >> q & 1
                if gate == "H":
                    x, z = z, x
                else:
                    z ^= x
                back.xs[k] = (back.xs[k] & ~(1 << q)) | (x << q)
                back.zs[k] = (back.zs[k] & ~(1 << q)) | (z << q)
        assert symplectic_rows(back) == symplectic_rows(t)
        assert lc_equivalent(h, g)

    def test_rank_deficient(self):
        with pytest.raises(OracleError):
            extract_graph(StabilizerTableau.from_labels(["XI", "XI"]))


class TestOrbits:
    def test_known_equivalences(self):
        p3, star3, tri = path_graph([0, 1, 2]), Graph([], [(1, 0), (1, 2)]), complete_graph(range(3))
        assert lc_equivalent(p3, tri) and lc_equivalent(p3, star3)
        p4, star4 = path_graph(range(4)), Graph([], [(0, 1), (0, 2), (0, 3)])
        assert not lc_equivalent(p4, star4)
        assert lc_equivalent(star4, complete_graph(range(4)))
        # LC at 1 maps the path 0-1-2-3 to the triangle 0-1-2 with tail 2-3
        assert lc_equivalent(p4, Graph([], [(0, 1), (1, 2), (0, 2), (2, 3)]))
        assert not lc_equivalent(p3, path_graph([0, 1, 3]))

    def test_orbit_sizes(self):
        # star and complete graph on four labeled vertices share a 5-element orbit
        assert len(lc_orbit(complete_graph(range(4)))) == 5
        assert len(lc_orbit(path_graph(range(3)))) == 4

    def test_table_agrees_with_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            n = int(rng.integers(3, 7))
            pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
            g, h = (Graph(range(n), [e for e in pairs if rng.random() < 0.5]) for _ in range(2))
            from starcluster.graph_state import canonical_form

            assert lc_equivalent(g, h) == (canonical_form(h) in lc_orbit(g))

    def test_orbit_cap(self):
        with pytest.raises(OracleError):
            lc_orbit(path_graph(range(9)))


class TestRuleVerification:
    def test_canonical_x_case(self):
        g = path_graph([1, 2, 3])
        assert verify_measurement_rule(g, "X", 2, 1)
        assert verify_measurement_rule(g, "X", 2, 1, use_orbit_enumeration=True)
        assert not verify_measurement_rule(g, "X", 2, 1, rule=measure_literal)
        assert oracle_graph(g, "X", 2).edges() == [(1, 3)]

    def test_connected_graph_counts(self):
        # labeled connected graphs on n vertices: 1, 1, 4, 38, 728
        assert [sum(1 for _ in connected_graphs(n)) for n in range(1, 6)] == [1, 1, 4, 38, 728]

    def test_sweep_up_to_five(self):
        r = sweep_rules(5)
        assert r.passed and r.graphs == 772 and r.cases > 15000

    def test_sweep_finds_literal_counterexample(self):
        r = sweep_rules(4, rule=measure_literal, stop_at_first=True)
        assert not r.passed
        g, basis, i, j = r.counterexample
        assert basis == "X" and len(g) == 3 and g.num_edges() == 2

    def test_sweep_bounds(self):
        with pytest.raises(OracleError):
            sweep_rules(8)

    @pytest.mark.parametrize("n_l", [1, 2, 3])
    def test_star_reduction_against_oracle(self, n_l):
        chain = build_armed_chain(n_l)
        schedule = star_schedule(chain)
        expected = oracle_after_measurements(chain, physical_bases(chain, schedule))
        star = reduce_chain_to_star(chain)
        assert lc_equivalent(expected, star.subgraph(star.vertices))

    def test_old_hubs_need_rotated_basis(self):
        # measuring the old hubs in the unrotated Z basis cuts the arms off
        chain = build_armed_chain(2)
        naive = [(basis, v) for basis, v, _ in star_schedule(chain)]
        assert physical_bases(chain, star_schedule(chain))[1] == ("X", 0)
        assert oracle_after_measurements(chain, naive).edges() == [(4, 5), (6, 7)]

    def test_bridge_contraction_against_oracle(self):
        # center 0 - a 1 - b 2 - b 3 - a 4 - center 5, plus a leaf on each center
        g = Graph([], [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 6), (5, 7)])
        out = contract_bridge(g, (1, 2, 3, 4))
        assert out.edges() == [(0, 5), (0, 6), (5, 7)]
        schedule = [("Y", v, None) for v in (1, 2, 3, 4)]
        expected = oracle_after_measurements(g, physical_bases(g, schedule))
        assert lc_equivalent(expected, out.subgraph(out.vertices))

    def test_random_schedules_against_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            n = int(rng.integers(3, 8))
            pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
            g = Graph(range(n), [e for e in pairs if rng.random() < 0.5])
            h, schedule = g, []
            for _ in range(int(rng.integers(1, n - 1))):
                i = int(rng.choice(sorted(h.vertices)))
                basis = "XYZ"[int(rng.integers(3))]
                j = int(rng.choice(sorted(h.neighbors(i)))) if basis == "X" and h.neighbors(i) else None
                schedule.append((basis, i, j))
                h = measure(h, basis, i, j)
            expected = oracle_after_measurements(g, physical_bases(g, schedule))
            assert lc_equivalent(expected, h.subgraph(h.vertices))

    def test_rule_errors_count_as_failures(self):
        def broken(g, basis, i, j=None):
            return measure(g, basis, i, 99)

        assert not verify_measurement_rule(path_graph([0, 1]), "X", 0, 1, rule=broken)
