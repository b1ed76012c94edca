import math
import random
from functools import partial

import numpy as np
import pytest

from starcluster import analytics
from starcluster.graph_state import (
    ARM_INNER,
    ARM_OUTER,
    CENTER,
    MAIN,
    Graph,
    build_armed_chain,
    chain_order,
    star_center,
)
from starcluster.protocol_sim import (
    TRACE_COLUMNS,
    CapExceededError,
    ChainState,
    LayoutSpec,
    ProtocolParams,
    Summary,
    _doubling,
    exact_chain_path,
    run_ensemble,
    run_traces,
    sample_pair_success,
    sim_assemble,
    sim_build_chain,
    sim_build_star,
    sim_small_chain,
    sim_splice,
    summarize,
    task_chain,
    task_pair,
    task_small_chain,
    task_splice,
    traces_to_csv,
    trial_rng,
)

# ---------------------------------------------------------------- reference
# An explicit attempt-by-attempt model of the protocols, written with the
# standard-library RNG and no vectorisation.  It is slow but transparent.


def ref_doubling(r, p, level, timing):
    """(time, attempts) of one restart-on-failure doubling build."""
    time = attempts = 0
    while True:
        if level == 0:
            ta = tb = 0
        else:
            ta, ma = ref_doubling(r, p, level - 1, timing)
            tb, mb = ref_doubling(r, p, level - 1, timing)
            attempts += ma + mb
        time += (ta if timing == "pool" else max(ta, tb)) + 1
        attempts += 1
        if r.random() < p:
            return time, attempts


def ref_splice(r, p, la, lb):
    """Remaining length and attempts when splicing chains of ``la`` and ``lb`` main qubits."""
    spent = 0
    while True:
        if la <= 0 or lb <= 0:
            return max(la, 0) + max(lb, 0), spent
        spent += 1
        if r.random() < p:
            return la + lb, spent
        la, lb = la - 2, lb - 2


def ref_chain(r, p, n, timing="pool"):
    level, base = analytics.doubling_base(p)

    def leaf():
        t, m = ref_doubling(r, p, level, timing)
        return base, t, m

    def join(a, b):
        (la, ta, ma), (lb, tb, mb) = a, b
        length, spent = ref_splice(r, p, la, lb)
        t0 = ta if timing == "pool" else max(ta, tb)
        return length, t0 + spent, ma + mb + spent

    def tree(depth):
        if depth == 0:
            return leaf()
        return join(tree(depth - 1), tree(depth - 1))

    piece, rounds = leaf(), 0
    while piece[0] < n:
        piece = join(piece, tree(rounds))
        rounds += 1
    return piece[1], piece[2]


def close(a, b, sigmas=4.0):
    """Two independent samples agree in mean within ``sigmas`` combined standard errors."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    se = math.hypot(a.std(ddof=1) / math.sqrt(len(a)), b.std(ddof=1) / math.sqrt(len(b)))
    return abs(a.mean() - b.mean()) <= sigmas * se


# ------------------------------------------------------------------- tests


class TestParams:
    @pytest.mark.parametrize(
        "kw",
        [
            {"p": 0.0},
            {"p": 1.5},
            {"p": 0.5, "t_a": 0.0},
            {"p": 0.5, "epsilon": 1.0},
            {"p": 0.5, "master_seed": -1},
            {"p": 0.5, "timing": "slowest"},
            {"p": 0.5, "outcome_policy": "maybe"},
            {"p": 0.5, "attempt_cap": 0},
        ],
    )
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            ProtocolParams(**kw)

    def test_chain_state(self):
        assert ChainState(5).armed_count == 3
        assert ChainState(5, armed_first=False).armed_count == 2
        with pytest.raises(ValueError):
            ChainState(-1)
        with pytest.raises(ValueError):
            ChainState(2, order=(0,))


class TestDoubling:
    @pytest.mark.parametrize("timing", ["pool", "max"])
    @pytest.mark.parametrize("p,level", [(0.5, 1), (0.5, 2), (0.3, 1)])
    def test_sampler_matches_reference(self, timing, p, level):
        r = random.Random(7)
        ref = [ref_doubling(r, p, level, timing) for _ in range(4000)]
        t, m = _doubling(np.random.default_rng(7), p, level, 4000, timing)
        assert close([x[0] for x in ref], t)
        assert close([x[1] for x in ref], m)

    def test_pool_means_match_recursion(self):
        t, m = _doubling(np.random.default_rng(1), 0.5, 1, 200_000, "pool")
        T, M = analytics.small_chain_exact(1, 0.5)
        assert abs(t.mean() - T) < 4 * t.std() / math.sqrt(len(t))
        assert abs(m.mean() - M) < 4 * m.std() / math.sqrt(len(m))

    def test_max_timing_mean(self):
        # each try waits for the slower of two geometric inputs: E[max] = 8/3, so 2 * (8/3 + 1)
        r = random.Random(3)
        ref = np.array([ref_doubling(r, 0.5, 1, "max")[0] for _ in range(20000)])
        assert abs(ref.mean() - 22 / 3) < 4 * ref.std() / math.sqrt(len(ref))
        t, _ = _doubling(np.random.default_rng(3), 0.5, 1, 200_000, "max")
        assert abs(t.mean() - 22 / 3) < 4 * t.std() / math.sqrt(len(t))

    def test_deterministic_gates(self):
        t, m = _doubling(np.random.default_rng(0), 1.0, 3, 5, "pool")
        assert list(t) == [4] * 5 and list(m) == [15] * 5
        t, m = _doubling(np.random.default_rng(0), 1.0, 3, 5, "max")
        assert list(t) == [4] * 5 and list(m) == [15] * 5

    def test_small_chain_trace(self):
        params = ProtocolParams(p=1.0, t_a=2.0, topology=True)
        trace = sim_small_chain(2, params)
        assert (trace.time, trace.attempts, trace.length) == (6.0, 7, 8)
        assert trace.final_graph == build_armed_chain(4)
        with pytest.raises(ValueError):
            sim_small_chain(-1, params)


class TestSplice:
    def test_deterministic_merge(self):
        a = ChainState(4, True, build_armed_chain(2), (0, 1, 2, 3))
        b = ChainState(4, True, build_armed_chain(2, offset=8), (8, 9, 10, 11))
        out, trace = sim_splice(a, b, ProtocolParams(p=1.0, topology=True))
        assert (out.main_length, trace.attempts, trace.succeeded) == (8, 1, True)
        assert out.order == (0, 1, 2, 3, 8, 9, 10, 11)
        assert chain_order(out.graph) == list(out.order)
        assert (3, 8) in out.graph.edges()
        # inputs are untouched
        assert a.graph == build_armed_chain(2)

    def test_exhaustion_returns_remainder(self):
        out, trace = sim_splice(ChainState(4), ChainState(10), ProtocolParams(p=1e-12))
        assert (out.main_length, trace.attempts, trace.succeeded) == (6, 2, False)

    def test_failed_attempts_consume_two_qubits_each(self):
        r = np.random.default_rng(5)
        for _ in range(200):
            out, trace = sim_splice(ChainState(40), ChainState(40), ProtocolParams(p=0.3), r)
            if trace.succeeded:
                assert out.main_length == 80 - 4 * (trace.attempts - 1)

    def test_topology_mode_keeps_armed_pattern(self):
        r = np.random.default_rng(2)
        for _ in range(30):
            trace = task_splice(ProtocolParams(p=0.3, topology=True), r, n0=12)
            if trace.length:
                assert len(chain_order(trace.final_graph)) == trace.length

    def test_mean_length_matches_reference(self):
        r = random.Random(4)
        ref = [ref_splice(r, 0.25, 50, 50)[0] for _ in range(20000)]
        traces = run_traces(partial(task_splice, n0=50), 20000, ProtocolParams(p=0.25, master_seed=4))
        assert close(ref, [t.length for t in traces])
        exact, _ = analytics.expected_splice_length(50, 0.25)
        assert abs(np.mean(ref) - exact) < 4 * np.std(ref) / math.sqrt(len(ref))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sim_splice(ChainState(0), ChainState(4), ProtocolParams(p=0.5))

    def test_topology_needs_graphs(self):
        with pytest.raises(ValueError):
            sim_splice(ChainState(4), ChainState(4), ProtocolParams(p=0.5, topology=True))


class TestChain:
    def test_deterministic_build(self):
        # p = 1: seed of two qubits, rounds grow 2 -> 4 -> ... -> 64, surplus trimmed to 50
        state, trace = sim_build_chain(50, ProtocolParams(p=1.0, topology=True))
        assert (trace.time, trace.attempts, trace.info["rounds"]) == (6.0, 63, 5)
        assert exact_chain_path(5, 50, 1.0) == (6.0, 63.0)
        assert state.main_length == trace.length == 50
        g = state.graph
        assert chain_order(g) == list(state.order)
        assert len(g.with_role(MAIN)) == 50 and len(g.with_role(ARM_INNER)) == 25

    @pytest.mark.parametrize("p", [0.5, 0.3])
    def test_topology_chain_is_armed(self, p):
        r = np.random.default_rng(8)
        for n in (9, 20, 41):
            state, trace = sim_build_chain(n, ProtocolParams(p=p, topology=True), r)
            g = state.graph
            order = chain_order(g)
            assert len(order) == n == trace.length
            assert [g.role(v) for v in order] == [MAIN] * n
            assert len(g.with_role(ARM_INNER)) == len(g.with_role(ARM_OUTER)) == (n + 1) // 2
            assert len(g) == n + 2 * ((n + 1) // 2)

    def test_accounting(self):
        r = np.random.default_rng(9)
        for n in (5, 8, 30, 100):
            _, trace = sim_build_chain(n, ProtocolParams(p=0.5), r)
            assert trace.attempts == sum(s.attempts for s in trace.stage_breakdown)
            assert trace.time == pytest.approx(sum(s.time for s in trace.stage_breakdown))
            assert trace.length == n

    @pytest.mark.parametrize("p,n", [(0.5, 50), (0.5, 6), (0.3, 60)])
    def test_matches_reference(self, p, n):
        r = random.Random(12)
        ref = [ref_chain(r, p, n) for _ in range(3000)]
        traces = run_traces(partial(task_chain, n=n), 3000, ProtocolParams(p=p, master_seed=12))
        assert close([x[0] for x in ref], [t.time for t in traces])
        assert close([x[1] for x in ref], [t.attempts for t in traces])

    def test_max_timing_matches_reference(self):
        r = random.Random(13)
        ref = [ref_chain(r, 0.5, 40, "max") for _ in range(3000)]
        traces = run_traces(partial(task_chain, n=40), 3000, ProtocolParams(p=0.5, timing="max", master_seed=13))
        assert close([x[0] for x in ref], [t.time for t in traces])
        assert close([x[1] for x in ref], [t.attempts for t in traces])

    def test_attempts_follow_exact_path(self):
        params = ProtocolParams(p=0.5, master_seed=21)
        traces = run_traces(partial(task_chain, n=100), 3000, params)
        # the number of rounds depends on how the splices went, so each trial
        # is compared with the recursion path for its own round count
        expected = np.mean([exact_chain_path(t.info["rounds"], 100, 0.5)[1] for t in traces])
        m = np.array([t.attempts for t in traces], float)
        assert abs(m.mean() - expected) < 4 * m.std() / math.sqrt(len(m))

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            sim_build_chain(1, ProtocolParams(p=0.5))

    def test_cap(self):
        with pytest.raises(CapExceededError):
            sim_build_chain(50, ProtocolParams(p=0.5, attempt_cap=5))


class TestStar:
    @pytest.mark.parametrize("p", [1.0, 0.5])
    @pytest.mark.parametrize("n_l", [1, 3, 8])
    def test_star_topology(self, p, n_l):
        star, trace = sim_build_star(n_l, ProtocolParams(p=p, topology=True, master_seed=n_l))
        c = star_center(star)
        assert star.role(c) == CENTER and star.degree(c) == n_l
        assert len(star) == 2 * n_l + 1
        assert trace.stage_breakdown[-1].attempts == 0
        assert trace.length == 2 * n_l

    def test_counting_mode_has_no_graph(self):
        star, trace = sim_build_star(4, ProtocolParams(p=0.5))
        assert star is None and trace.attempts > 0
        with pytest.raises(ValueError):
            sim_build_star(0, ProtocolParams(p=0.5))


class TestLayout:
    def test_square(self):
        lay = LayoutSpec("square", 4, 4)
        assert len(lay.site_edges()) == 24 and lay.degree == 4 and lay.analytic_pairs() == 32
        assert len(LayoutSpec("square", 4, 4, "toroidal").site_edges()) == 32

    def test_hexagonal_brick_wall(self):
        lay = LayoutSpec("hexagonal", 4, 4)
        edges = lay.site_edges()
        assert len(edges) == 12 + 6 and lay.degree == 3
        g = lay.site_graph()
        assert all(g.degree(v) <= 3 for v in g.vertices)
        assert lay.analytic_pairs() == 24
        torus = LayoutSpec("hexagonal", 4, 4, "toroidal").site_graph()
        assert all(torus.degree(v) == 3 for v in torus.vertices)

    def test_custom(self):
        lay = LayoutSpec("custom", edges=((0, 1), (1, 2)), n_sites=3)
        assert lay.analytic_pairs() == 2 and lay.degree == 2
        for kw in [{"edges": ((0, 3),), "n_sites": 3}, {"edges": ((0, 1),), "n_sites": 3}, {"edges": ((1, 1),), "n_sites": 2}]:
            with pytest.raises(ValueError):
                LayoutSpec("custom", **kw)

    @pytest.mark.parametrize(
        "args", [("tri", 2, 2), ("square", 1, 1), ("square", 2, 2, "toroidal"), ("hexagonal", 3, 3, "toroidal"), ("square", 3, 3, "mobius")]
    )
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            LayoutSpec(*args)


class TestAssembly:
    def test_deterministic_lattice(self):
        lay = LayoutSpec("square", 4, 4)
        g, trace, ok = sim_assemble(lay, ProtocolParams(p=1.0, topology=True), n_l=8)
        assert ok and g == Graph(range(16), lay.site_edges())
        assert all(g.role(v) == CENTER for v in g.vertices)
        assert trace.info["attempts_per_pair"] == 2
        assert trace.stage_breakdown[1].attempts == 48

    @pytest.mark.parametrize("kind", ["square", "hexagonal"])
    def test_probabilistic_lattice(self, kind):
        lay = LayoutSpec(kind, 3, 4)
        r = np.random.default_rng(17)
        for _ in range(4):
            g, trace, ok = sim_assemble(lay, ProtocolParams(p=0.5, topology=True), r, n_l=4 * lay.degree)
            missing = set(lay.site_edges()) - set(g.edges())
            assert set(g.edges()) <= set(lay.site_edges())
            assert len(missing) == trace.info["pairs"] - trace.info["pairs_connected"]
            assert ok == (not missing)

    def test_default_arm_count(self):
        _, trace, _ = sim_assemble(LayoutSpec("square", 4, 4), ProtocolParams(p=0.25, epsilon=0.1))
        assert trace.info["n_l"] == 96 and trace.info["attempts_per_pair"] == 24
        with pytest.raises(ValueError):
            sim_assemble(LayoutSpec("square", 4, 4), ProtocolParams(p=0.5), n_l=6)

    def test_timing(self):
        _, trace, _ = sim_assemble(LayoutSpec("square", 2, 2), ProtocolParams(p=0.5, t_a=2.0), n_l=4)
        stars, connect = trace.stage_breakdown
        assert trace.time == stars.time + 2.0 and connect.time == 2.0
        assert trace.attempts == stars.attempts + connect.attempts


class TestEnsembles:
    def test_trial_streams_are_independent_of_workers(self):
        params = ProtocolParams(p=0.5, master_seed=99)
        task = partial(task_chain, n=40)
        a = run_traces(task, 23, params, workers=1)
        b = run_traces(task, 23, params, workers=3)
        assert [(t.time, t.attempts) for t in a] == [(t.time, t.attempts) for t in b]
        assert traces_to_csv(a) == traces_to_csv(b)

    def test_streams_depend_on_seed_and_trial(self):
        x = trial_rng(1, 0).random(4)
        assert np.array_equal(x, trial_rng(1, 0).random(4))
        assert not np.array_equal(x, trial_rng(1, 1).random(4))
        assert not np.array_equal(x, trial_rng(2, 0).random(4))

    def test_summary(self):
        s = Summary.of([1.0])
        assert (s.mean, s.std, s.sem) == (1.0, 0.0, 0.0)
        s = Summary.of([1.0, 3.0])
        assert s.std == pytest.approx(math.sqrt(2)) and s.sem == pytest.approx(1.0)
        assert s.ci95[1] - s.mean == pytest.approx(1.959964, rel=1e-6)

    def test_stats_json(self):
        stats = run_ensemble(partial(task_small_chain, level=1), 10, ProtocolParams(p=0.5))
        d = stats.to_dict()
        assert list(d) == ["task", "trials", "master_seed", "time", "attempts", "length", "success_rate"]
        assert d["task"] == "task_small_chain" and d["success_rate"]["mean"] == 1.0
        with pytest.raises(ValueError):
            run_traces(task_chain, 0, ProtocolParams(p=0.5))

    def test_trace_csv(self):
        traces = run_traces(partial(task_chain, n=20), 2, ProtocolParams(p=0.5, t_a=2.0))
        lines = traces_to_csv(traces, t_a=2.0).splitlines()
        assert lines[0] == ",".join(TRACE_COLUMNS)
        assert len(lines) == 1 + 2 * 3
        total = lines[3].split(",")
        assert total[1] == "total" and float(total[3]) == traces[0].time / 2.0 and total[4] == "20"

    def test_pair_sampler(self):
        ok = sample_pair_success(0.25, 4, 200_000, np.random.default_rng(0))
        pc = analytics.pair_success(0.25, 4)
        assert abs(ok.mean() - pc) < 4 * math.sqrt(pc * (1 - pc) / len(ok))
        stats = summarize("pair", run_traces(partial(task_pair, attempts_per_pair=4), 50, ProtocolParams(p=1.0)), 0)
        assert stats.success_rate.mean == 1.0 and stats.attempts.mean == 4
