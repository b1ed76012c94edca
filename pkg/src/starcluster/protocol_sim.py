"""Monte Carlo simulation of the probabilistic chain, star and lattice protocols.

Every CZ attempt succeeds independently with probability ``p`` and costs one
time unit ``t_a``; single-qubit measurements are free.  Two execution modes
share one code path:

* counting mode tracks only chain lengths, attempt counts and critical-path
  times, which is what large ensembles need;
* topology mode (``ProtocolParams(topology=True)``) additionally rewrites the
  actual graph state, so the final graph can be checked.

Timing models
-------------
Two chains that are prepared concurrently and then joined can be timed in
two ways, selected by ``ProtocolParams.timing``:

``"pool"`` (default)
    Each join waits for one representative input, so a restart-on-failure
    doubling level costs ``(1/p)(T_{i-1} + t_a)`` on average and a splice round
    adds ``t_a/p``.  This is the idealisation behind the closed-form
    recursions: spare chains are always being prepared in parallel.
``"max"``
    A join waits for the slower of its two inputs.  Doubling then costs more
    than the recursions predict (e.g. ``22/3 t_a`` instead of ``6 t_a`` for a
    four-qubit chain at ``p = 1/2``).

Both models charge every attempt ever made to the attempt total.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import analytics
from .graph_state import (
    ARM_INNER,
    CENTER,
    Graph,
    GraphError,
    _arm_of,
    build_armed_chain,
    contract_bridge,
    reduce_chain_to_star,
    star_center,
)

TIMING_MODELS = ("pool", "max")
Z95 = 1.959963984540054


class CapExceededError(RuntimeError):
    """A trial used more CZ attempts than ``ProtocolParams.attempt_cap`` allows."""


# ---------------------------------------------------------------------- types


@dataclass(frozen=True)
class ProtocolParams:
    """Physical and bookkeeping parameters shared by all protocols.

    Parameters
    ----------
    p : float
        Success probability of one CZ attempt, ``0 < p <= 1``.
    t_a : float
        Duration of one CZ attempt.
    epsilon : float
        Overall failure budget used to size star units, ``0 < epsilon < 1``.
    master_seed : int
        Root of every per-trial random stream.
    outcome_policy : str
        Measurement-outcome policy for oracle cross-checks; the graph rules
        themselves are outcome independent.
    timing : {"pool", "max"}
        How concurrently prepared inputs are timed (see module docstring).
    topology : bool
        Maintain the actual graph state alongside the counts.
    attempt_cap : int, optional
        Abort a trial with :class:`CapExceededError` beyond this many attempts.
    """

    p: float
    t_a: float = 1.0
    epsilon: float = 0.1
    master_seed: int = 0
    outcome_policy: str = "force_plus"
    timing: str = "pool"
    topology: bool = False
    attempt_cap: int | None = None

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if not (self.t_a > 0.0) or math.isinf(self.t_a):
            raise ValueError(f"t_a must be positive and finite, got {self.t_a}")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not (0 <= int(self.master_seed) < 2**64):
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.timing not in TIMING_MODELS:
            raise ValueError(f"timing must be one of {TIMING_MODELS}, got {self.timing!r}")
        if self.outcome_policy not in ("force_plus", "force_minus", "random"):
            raise ValueError(f"unknown outcome policy {self.outcome_policy!r}")
        if self.attempt_cap is not None and self.attempt_cap < 1:
            raise ValueError("attempt_cap must be positive")


@dataclass(frozen=True)
class ChainState:
    """An armed linear chain: every other main-chain qubit carries a two-qubit arm.

    ``order`` lists the main-chain vertex ids end to end when a graph is kept.
    """

    main_length: int
    armed_first: bool = True
    graph: Graph | None = None
    order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.main_length < 0:
            raise ValueError("main_length must be non-negative")
        if self.order is not None and len(self.order) != self.main_length:
            raise ValueError("order does not match main_length")

    @property
    def armed_count(self) -> int:
        half, odd = divmod(self.main_length, 2)
        return half + (odd if self.armed_first else 0)


@dataclass(frozen=True)
class Stage:
    name: str
    attempts: int
    time: float


@dataclass
class SimTrace:
    """Outcome and cost of one protocol run.

    ``time`` is the critical-path duration; ``attempts`` counts every CZ
    attempt, and equals the sum over ``stage_breakdown``.
    """

    attempts: int
    time: float
    succeeded: bool
    final_graph: Graph | None = None
    stage_breakdown: tuple[Stage, ...] = ()
    length: int | None = None
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LayoutSpec:
    """Site graph of a 2-D cluster.

    ``kind`` is ``"square"`` (row-major sites, nearest-neighbor bonds),
    ``"hexagonal"`` (brick-wall honeycomb: horizontal bonds everywhere,
    vertical bonds below sites with even ``row + col``) or ``"custom"`` with an
    explicit ``edges`` list over sites ``0 .. n_sites-1``.
    """

    kind: str
    rows: int = 0
    cols: int = 0
    boundary: str = "open"
    edges: tuple[tuple[int, int], ...] = ()
    n_sites: int = 0

    def __post_init__(self):
        if self.kind not in ("square", "hexagonal", "custom"):
            raise ValueError(f"unknown layout kind {self.kind!r}")
        if self.boundary not in ("open", "toroidal"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.kind != "custom" and (self.rows < 1 or self.cols < 1 or self.rows * self.cols < 2):
            raise ValueError("a lattice needs at least two sites")
        if self.boundary == "toroidal":
            if self.kind == "custom":
                raise ValueError("custom layouts carry their own edges; boundary must be open")
            if min(self.rows, self.cols) < 3:
                raise ValueError("toroidal layouts need at least 3 rows and columns")
            if self.kind == "hexagonal" and self.rows % 2:
                raise ValueError("toroidal hexagonal layouts need an even number of rows")
        g = self.site_graph()
        if len(g) < 2 or not g.is_connected():
            raise ValueError("site graph must be connected with at least two sites")

    @property
    def num_sites(self) -> int:
        return self.rows * self.cols if self.kind != "custom" else self.n_sites

    def site_edges(self) -> list[tuple[int, int]]:
        if self.kind == "custom":
            return sorted({(min(a, b), max(a, b)) for a, b in self.edges})
        R, C = self.rows, self.cols
        wrap = self.boundary == "toroidal"
        out = set()
        for r in range(R):
            for c in range(C):
                s = r * C + c
                if c + 1 < C or wrap:
                    out.add((s, r * C + (c + 1) % C))
                if (r + 1 < R or wrap) and (self.kind == "square" or (r + c) % 2 == 0):
                    out.add((s, ((r + 1) % R) * C + c))
        return sorted((min(a, b), max(a, b)) for a, b in out if a != b)

    def site_graph(self) -> Graph:
        for a, b in self.edges:
            if a == b or not (0 <= a < self.num_sites and 0 <= b < self.num_sites):
                raise ValueError(f"invalid custom edge ({a}, {b})")
        return Graph(range(self.num_sites), self.site_edges())

    @property
    def degree(self) -> int:
        g = self.site_graph()
        return max(g.degree(v) for v in g.vertices)

    def analytic_pairs(self) -> float:
        """Pair count used to size the stars: 2N square, 3N/2 hexagonal, true count otherwise."""
        if self.kind == "square":
            return 2.0 * self.num_sites
        if self.kind == "hexagonal":
            return 1.5 * self.num_sites
        return float(len(self.site_edges()))


# ------------------------------------------------------------- random streams


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Independent generator for ``trial``, keyed by ``(master_seed, trial)``."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(trial),)))


def attempt_cpf(rng: np.random.Generator, p: float) -> bool:
    """One CZ attempt: ``True`` with probability ``p``."""
    return bool(rng.random() < p)


def sample_pair_success(p: float, attempts_per_pair: int, pairs: int, rng: np.random.Generator) -> np.ndarray:
    """Whether each of ``pairs`` neighbor pairs gets at least one success out of its parallel attempts."""
    return (rng.random((pairs, attempts_per_pair)) < p).any(axis=1)


def _doubling(rng: np.random.Generator, p: float, level: int, count: int, timing: str):
    """(time, attempts) of ``count`` independent restart-on-failure doublings.

    Level 0 is one CZ between two bare qubits.  Level ``i`` repeats "prepare two
    level ``i-1`` chains, attempt one CZ" until the CZ succeeds.  Times are in
    units of ``t_a``.
    """
    if timing == "pool":
        time, attempts = _pooled_sums(rng, p, level, np.ones(count, dtype=np.int64))
        return time, attempts
    tries = rng.geometric(p, count)
    if level == 0:
        return tries.copy(), tries
    total = int(tries.sum())
    t, m = _doubling(rng, p, level - 1, 2 * total, timing)
    starts = np.concatenate(([0], np.cumsum(tries)[:-1]))
    per_try = np.maximum(t[:total], t[total:])
    time = np.add.reduceat(per_try, starts) + tries
    attempts = np.add.reduceat(m[:total], starts) + np.add.reduceat(m[total:], starts) + tries
    return time, attempts


def _tries(rng: np.random.Generator, p: float, builds: np.ndarray) -> np.ndarray:
    # total CZ tries needed for ``builds`` successes: a sum of geometric draws
    return builds + rng.negative_binomial(builds, p)


def _pooled_sums(rng, p, level, builds):
    """Summed (time, attempts) over ``builds`` i.i.d. level-``level`` doublings, pool timing.

    With pool timing a build's time is the sum over its tries of one input's
    time plus one CZ each, so sums over many builds are again sums over a
    negative-binomial number of tries.  The recursion is exact in
    distribution and needs only O(level) draws.
    """
    tries = _tries(rng, p, builds)
    if level == 0:
        return tries, tries
    t, m = _pooled_sums(rng, p, level - 1, tries)
    return t + tries, m + _pooled_attempts(rng, p, level - 1, tries) + tries


def _pooled_attempts(rng, p, level, builds):
    tries = _tries(rng, p, builds)
    if level == 0:
        return tries
    return _pooled_attempts(rng, p, level - 1, 2 * tries) + tries


class _Trial:
    """Per-trial state: buffered random draws, id allocation and cost counters."""

    def __init__(self, params: ProtocolParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.level, self.base = analytics.doubling_base(params.p)
        self._geo = np.empty(0, dtype=np.int64)
        self._gi = 0
        self._leaves = (np.empty(0), np.empty(0))
        self._li = 0
        # bound memory of a leaf batch by the expected number of inner samples
        log_per_leaf = max(self.level - 1, 0) * math.log(2.0 / params.p)
        self._chunk = int(min(64, max(1.0, 2.0 ** (20 - log_per_leaf / math.log(2.0)))))
        self.next_id = 0
        self.leaf_attempts = 0
        self.splice_attempts = 0

    def geometric(self) -> int:
        if self._gi >= len(self._geo):
            self._geo = self.rng.geometric(self.params.p, 256)
            self._gi = 0
        self._gi += 1
        return int(self._geo[self._gi - 1])

    def leaf_cost(self) -> tuple[int, int]:
        if self._li >= len(self._leaves[0]):
            self._leaves = _doubling(self.rng, self.params.p, self.level, self._chunk, self.params.timing)
            self._li = 0
        self._li += 1
        i = self._li - 1
        return int(self._leaves[0][i]), int(self._leaves[1][i])

    def alloc(self, count: int) -> int:
        start = self.next_id
        self.next_id += count
        return start


class _Piece:
    """A chain under construction; times are in units of ``t_a``."""

    __slots__ = ("length", "time", "attempts", "graph", "order")

    def __init__(self, length, time, attempts, graph=None, order=None):
        self.length = length
        self.time = time
        self.attempts = attempts
        self.graph = graph
        self.order = order


def _armed_piece(trial: _Trial, length: int, time: int, attempts: int) -> _Piece:
    if not trial.params.topology:
        return _Piece(length, time, attempts)
    offset = trial.alloc(2 * length)
    g = build_armed_chain(length // 2, offset=offset)
    return _Piece(length, time, attempts, g, list(range(offset, offset + length)))


def _leaf(trial: _Trial) -> _Piece:
    t, m = trial.leaf_cost()
    trial.leaf_attempts += m
    return _armed_piece(trial, trial.base, t, m)


def _drop(piece: _Piece, count: int, tail: bool) -> None:
    """Z-measure ``count`` main-chain qubits (and their arms) off one end."""
    piece.length -= count
    if piece.graph is None:
        return
    g = piece.graph
    doomed = piece.order[len(piece.order) - count :] if tail else piece.order[:count]
    piece.order = piece.order[: len(piece.order) - count] if tail else piece.order[count:]
    for v in doomed:
        arm = _arm_of(g, v)
        for u in (arm or ()):
            g._remove(u)
        g._remove(v)


def _splice(trial: _Trial, a: _Piece, b: _Piece) -> tuple[_Piece, int, bool]:
    """Join the tail of ``a`` to the head of ``b`` by repeated CZ attempts.

    Each failure removes two main-chain qubits from each end.  If one chain is
    used up before a success, what is left of the other is returned and the
    splice counts as failed.  Returns (piece, attempts, succeeded); costs of
    ``a`` and ``b`` are not folded in here.
    """
    failures = trial.geometric() - 1
    possible = min((a.length + 1) // 2, (b.length + 1) // 2)
    used = min(failures, possible)
    _drop(a, min(2 * used, a.length), tail=True)
    _drop(b, min(2 * used, b.length), tail=False)
    if failures >= possible:
        return (a if a.length else b), possible, False
    merged = _Piece(a.length + b.length, 0, 0)
    if a.graph is not None:
        g = a.graph
        g._disjoint_update(b.graph)
        g._toggle(a.order[-1], b.order[0])
        merged.graph, merged.order = g, a.order + b.order
    return merged, failures + 1, True


def _join(trial: _Trial, left: _Piece, right: _Piece) -> tuple[_Piece, int]:
    """Splice two chains prepared concurrently; returns the piece and the splice attempts.

    An empty input (a chain that was used up in an earlier splice) passes the
    other one through without any attempt.
    """
    base_time = left.time if trial.params.timing == "pool" else max(left.time, right.time)
    attempts = left.attempts + right.attempts
    if left.length == 0 or right.length == 0:
        merged, spent = (right if left.length == 0 else left), 0
        if merged.graph is not None and merged is right:
            merged.graph._disjoint_update(left.graph)
    else:
        merged, spent, _ = _splice(trial, left, right)
    trial.splice_attempts += spent
    merged.time = base_time + spent
    merged.attempts = attempts + spent
    return merged, spent


def _tree(trial: _Trial, depth: int) -> _Piece:
    """A chain from ``depth`` rounds of pairwise splicing of seed chains."""
    if depth == 0:
        return _leaf(trial)
    piece, _ = _join(trial, _tree(trial, depth - 1), _tree(trial, depth - 1))
    return piece


def _check_cap(params: ProtocolParams, attempts: int) -> None:
    if params.attempt_cap is not None and attempts > params.attempt_cap:
        raise CapExceededError(f"trial used {attempts} attempts, cap is {params.attempt_cap}")


def _rng_for(params: ProtocolParams, rng) -> np.random.Generator:
    return trial_rng(params.master_seed, 0) if rng is None else rng


# ----------------------------------------------------------------- protocols


def sim_small_chain(level: int, params: ProtocolParams, rng: np.random.Generator | None = None) -> SimTrace:
    """Restart-on-failure doubling up to a chain of ``2**(level+1)`` qubits.

    Two level ``i-1`` chains are prepared, one CZ joins them, and a failure
    discards everything and restarts the level.  In topology mode the final
    graph is the armed chain the protocol produces.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    rng = _rng_for(params, rng)
    t, m = _doubling(rng, params.p, level, 1, params.timing)
    time, attempts = int(t[0]), int(m[0])
    _check_cap(params, attempts)
    length = 2 ** (level + 1)
    graph = build_armed_chain(length // 2) if params.topology else None
    return SimTrace(
        attempts=attempts,
        time=time * params.t_a,
        succeeded=True,
        final_graph=graph,
        stage_breakdown=(Stage("doubling", attempts, time * params.t_a),),
        length=length,
        info={"level": level},
    )


def _state(piece: _Piece) -> ChainState:
    order = tuple(piece.order) if piece.order is not None else None
    return ChainState(piece.length, True, piece.graph, order)


def _piece(trial: _Trial, chain: ChainState) -> _Piece:
    if not trial.params.topology:
        return _Piece(chain.main_length, 0, 0)
    if chain.graph is None or chain.order is None:
        raise ValueError("topology mode needs chains that carry a graph and main-chain order")
    trial.next_id = max(trial.next_id, max(chain.graph.vertices | chain.graph.measured) + 1)
    return _Piece(chain.main_length, 0, 0, chain.graph.copy(), list(chain.order))


def sim_splice(
    chain_a: ChainState, chain_b: ChainState, params: ProtocolParams, rng: np.random.Generator | None = None
) -> tuple[ChainState, SimTrace]:
    """One splicing operation between the tail of ``chain_a`` and the head of ``chain_b``.

    On exhaustion the returned state holds whatever is left of the longer
    chain and the trace is marked as failed.
    """
    if chain_a.main_length < 1 or chain_b.main_length < 1:
        raise ValueError("both chains must be nonempty")
    trial = _Trial(params, _rng_for(params, rng))
    a, b = _piece(trial, chain_a), _piece(trial, chain_b)
    merged, used, ok = _splice(trial, a, b)
    _check_cap(params, used)
    out = _state(merged)
    trace = SimTrace(
        attempts=used,
        time=used * params.t_a,
        succeeded=ok,
        final_graph=merged.graph,
        stage_breakdown=(Stage("splice", used, used * params.t_a),),
        length=merged.length,
    )
    return out, trace


def _build_chain(trial: _Trial, n: int) -> tuple[_Piece, int, int]:
    """Chain of main length ``n``; returns (piece, rounds, spine splice attempts)."""
    p = trial.params
    if n <= trial.base:
        level = max(0, math.ceil(math.log2(n)) - 1)
        if level == trial.level:
            piece = _leaf(trial)
        else:
            t, m = _doubling(trial.rng, p.p, level, 1, p.timing)
            trial.leaf_attempts += int(m[0])
            piece = _armed_piece(trial, 2 ** (level + 1), int(t[0]), int(m[0]))
        rounds, spine = 0, 0
    else:
        piece = _leaf(trial)
        rounds, spine = 0, 0
        while piece.length < n:
            partner = _tree(trial, rounds)
            piece, spent = _join(trial, piece, partner)
            rounds += 1
            spine += spent
    if piece.length > n:
        _drop(piece, piece.length - n, tail=True)
    return piece, rounds, spine


def sim_build_chain(n: int, params: ProtocolParams, rng: np.random.Generator | None = None) -> tuple[ChainState, SimTrace]:
    """Grow an armed chain of main length ``n``.

    Seed chains come from doubling; above the seed length, rounds of pairwise
    splicing with equally grown partner chains continue until the length
    reaches ``n``, and the surplus is Z-measured away.
    """
    if n < 2:
        raise ValueError("a chain needs at least two main-chain qubits")
    trial = _Trial(params, _rng_for(params, rng))
    piece, rounds, spine = _build_chain(trial, n)
    attempts = trial.leaf_attempts + trial.splice_attempts
    assert attempts == piece.attempts
    _check_cap(params, attempts)
    t_a = params.t_a
    trace = SimTrace(
        attempts=attempts,
        time=piece.time * t_a,
        succeeded=True,
        final_graph=piece.graph,
        stage_breakdown=(
            Stage("doubling", trial.leaf_attempts, (piece.time - spine) * t_a),
            Stage("splicing", trial.splice_attempts, spine * t_a),
        ),
        length=piece.length,
        info={"rounds": rounds, "base": trial.base, "base_level": trial.level},
    )
    return _state(piece), trace


def _star(trial: _Trial, n_l: int) -> tuple[Graph | None, _Piece, int, int]:
    piece, rounds, spine = _build_chain(trial, 2 * n_l)
    star = reduce_chain_to_star(piece.graph) if piece.graph is not None else None
    return star, piece, rounds, spine


def sim_build_star(n_l: int, params: ProtocolParams, rng: np.random.Generator | None = None) -> tuple[Graph | None, SimTrace]:
    """Star unit with ``n_l`` two-qubit arms, from an armed chain of ``2 n_l`` qubits.

    The reduction to a star is measurement only and adds neither time nor
    attempts.  The graph is ``None`` in counting mode.
    """
    if n_l < 1:
        raise ValueError("a star needs at least one arm")
    trial = _Trial(params, _rng_for(params, rng))
    star, piece, rounds, spine = _star(trial, n_l)
    _check_cap(params, piece.attempts)
    t_a = params.t_a
    trace = SimTrace(
        attempts=piece.attempts,
        time=piece.time * t_a,
        succeeded=True,
        final_graph=star,
        stage_breakdown=(
            Stage("doubling", trial.leaf_attempts, (piece.time - spine) * t_a),
            Stage("splicing", trial.splice_attempts, spine * t_a),
            Stage("reduction", 0, 0.0),
        ),
        length=piece.length,
        info={"rounds": rounds, "base": trial.base, "base_level": trial.level, "arms": n_l},
    )
    return star, trace


def _star_arms(g: Graph, center: int) -> list[tuple[int, int]]:
    arms = []
    for a in sorted(g.neighbors(center)):
        if g.role(a) != ARM_INNER:
            raise GraphError(f"center {center} has a non-arm neighbor {a}")
        (b,) = g.neighbors(a) - {center}
        arms.append((a, b))
    return arms


def sim_assemble(
    layout: LayoutSpec,
    params: ProtocolParams,
    rng: np.random.Generator | None = None,
    n_l: int | None = None,
) -> tuple[Graph | None, SimTrace, bool]:
    """Build one star per site, then connect all neighbor pairs in one parallel round.

    Each pair gets ``n_l / d`` simultaneous attempts between the outer arm
    qubits facing each other; the first success is kept and its four-qubit
    bridge is contracted by Y measurements, all other arms are Z-measured.

    Parameters
    ----------
    n_l : int, optional
        Arms per star; defaults to :func:`analytics.arms_required` with the
        layout's coordination number and analytic pair count.
    """
    rng = _rng_for(params, rng)
    d = layout.degree
    sites = layout.site_graph()
    edges = layout.site_edges()
    N = layout.num_sites
    if n_l is None:
        n_l = analytics.arms_required(N, params.epsilon, params.p, d, pairs=layout.analytic_pairs())
    if n_l < d or n_l % d:
        raise ValueError(f"n_l must be a positive multiple of the coordination number {d}")
    per_pair = n_l // d
    trial = _Trial(params, rng)

    stars, star_time, star_attempts = [], 0, 0
    for _ in range(N):
        before = trial.leaf_attempts + trial.splice_attempts
        star, piece, _, _ = _star(trial, n_l)
        assert trial.leaf_attempts + trial.splice_attempts - before == piece.attempts
        stars.append(star)
        star_time = max(star_time, piece.time)
        star_attempts += piece.attempts

    hits = rng.random((len(edges), per_pair)) < params.p
    connected = hits.any(axis=1)
    kept = np.where(connected, hits.argmax(axis=1), -1)
    success = bool(connected.all())

    final = None
    if params.topology:
        g = Graph()
        for s in stars:
            g._disjoint_update(s)
        centers = [star_center(s) for s in stars]
        arms = [_star_arms(g, c) for c in centers]
        slot = {(u, v): k for u in range(N) for k, v in enumerate(sorted(sites.neighbors(u)))}
        bridges, keep = [], set()
        for e, (u, v) in enumerate(edges):
            if kept[e] < 0:
                continue
            j = int(kept[e])
            a_u, b_u = arms[u][slot[u, v] * per_pair + j]
            a_v, b_v = arms[v][slot[v, u] * per_pair + j]
            g._toggle(b_u, b_v)
            bridges.append((a_u, b_u, b_v, a_v))
            keep |= {a_u, b_u, b_v, a_v}
        for site_arms in arms:
            for a, b in site_arms:
                if a not in keep:
                    g._remove(a)
                    g._remove(b)
        for bridge in bridges:
            g = contract_bridge(g, bridge)
        relabel = {c: s for s, c in enumerate(centers)}
        if set(g.vertices) != set(centers):
            raise GraphError("assembly left stray qubits behind")
        final = Graph(
            range(N),
            [(relabel[a], relabel[b]) for a, b in g.edges()],
            labels=dict.fromkeys(range(N), CENTER),
        )

    connect_attempts = len(edges) * per_pair
    attempts = star_attempts + connect_attempts
    _check_cap(params, attempts)
    t_a = params.t_a
    trace = SimTrace(
        attempts=attempts,
        time=(star_time + 1) * t_a,
        succeeded=success,
        final_graph=final,
        stage_breakdown=(
            Stage("stars", star_attempts, star_time * t_a),
            Stage("connect", connect_attempts, t_a),
        ),
        info={"n_l": n_l, "pairs": len(edges), "attempts_per_pair": per_pair, "pairs_connected": int(connected.sum())},
    )
    return final, trace, success


# ------------------------------------------------------------------ ensembles


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    sem: float
    ci95: tuple[float, float]

    @classmethod
    def of(cls, values: Sequence[float]) -> Summary:
        x = np.asarray(values, dtype=float)
        mean = float(x.mean())
        std = float(x.std(ddof=1)) if len(x) > 1 else 0.0
        sem = std / math.sqrt(len(x))
        return cls(mean, std, sem, (mean - Z95 * sem, mean + Z95 * sem))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "sem": self.sem, "ci95": list(self.ci95)}


@dataclass(frozen=True)
class Stats:
    """Ensemble summary.  JSON field order: task, trials, master_seed, time, attempts, length, success_rate."""

    task: str
    trials: int
    master_seed: int
    time: Summary
    attempts: Summary
    length: Summary | None
    success_rate: Summary

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "time": self.time.to_dict(),
            "attempts": self.attempts.to_dict(),
            "length": None if self.length is None else self.length.to_dict(),
            "success_rate": self.success_rate.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def summarize(task: str, traces: Sequence[SimTrace], master_seed: int) -> Stats:
    lengths = [t.length for t in traces]
    return Stats(
        task=task,
        trials=len(traces),
        master_seed=master_seed,
        time=Summary.of([t.time for t in traces]),
        attempts=Summary.of([t.attempts for t in traces]),
        length=None if any(v is None for v in lengths) else Summary.of(lengths),
        success_rate=Summary.of([1.0 if t.succeeded else 0.0 for t in traces]),
    )


# Tasks are module-level so they pickle for worker processes.


def task_small_chain(params, rng, *, level):
    return sim_small_chain(level, params, rng)


def task_splice(params, rng, *, n0, n1=None):
    n1 = n0 if n1 is None else n1
    if params.topology:
        a = ChainState(n0, True, build_armed_chain(n0 // 2), tuple(range(n0)))
        off = 2 * n0
        b = ChainState(n1, True, build_armed_chain(n1 // 2, offset=off), tuple(range(off, off + n1)))
    else:
        a, b = ChainState(n0), ChainState(n1)
    return sim_splice(a, b, params, rng)[1]


def task_chain(params, rng, *, n):
    return sim_build_chain(n, params, rng)[1]


def task_star(params, rng, *, n_l):
    return sim_build_star(n_l, params, rng)[1]


def task_assemble(params, rng, *, layout, n_l=None):
    return sim_assemble(layout, params, rng, n_l=n_l)[1]


def task_pair(params, rng, *, attempts_per_pair):
    ok = bool(sample_pair_success(params.p, attempts_per_pair, 1, rng)[0])
    stage = Stage("connect", attempts_per_pair, params.t_a)
    return SimTrace(attempts_per_pair, params.t_a, ok, stage_breakdown=(stage,))


def _run_chunk(task: Callable, params: ProtocolParams, start: int, stop: int) -> list[SimTrace]:
    out = []
    for trial in range(start, stop):
        trace = task(params, trial_rng(params.master_seed, trial))
        trace.final_graph = None
        out.append(trace)
    return out


def run_traces(task: Callable, trials: int, params: ProtocolParams, workers: int = 1) -> list[SimTrace]:
    """Per-trial traces in trial order; trial ``k`` always uses stream ``(master_seed, k)``."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if workers <= 1 or trials < 2:
        return _run_chunk(task, params, 0, trials)
    bounds = np.linspace(0, trials, min(workers * 4, trials) + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(partial(_run_chunk, task, params), bounds[:-1], bounds[1:])
        return [t for part in parts for t in part]


def run_ensemble(
    task: Callable, trials: int, params: ProtocolParams, workers: int = 1, name: str | None = None
) -> Stats:
    """Run ``task(params, rng)`` for ``trials`` independent trials and summarise.

    The result depends only on the task, ``trials`` and ``params`` (including
    ``master_seed``); ``workers`` changes the wall-clock time only.
    """
    traces = run_traces(task, trials, params, workers)
    label = name or getattr(getattr(task, "func", task), "__name__", "task")
    return summarize(label, traces, params.master_seed)


TRACE_COLUMNS = ("trial", "stage", "attempts", "time_units", "length", "success")


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def traces_to_csv(traces: Sequence[SimTrace], t_a: float = 1.0) -> str:
    """One row per stage plus a ``total`` row per trial; times in units of ``t_a``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for k, t in enumerate(traces):
        for s in t.stage_breakdown:
            w.writerow([k, s.name, s.attempts, _num(s.time / t_a), "", ""])
        w.writerow([k, "total", t.attempts, _num(t.time / t_a), _num(t.length), _num(t.succeeded)])
    return buf.getvalue()


def exact_chain_path(rounds: int, n: int, p: float, t_a: float = 1.0) -> tuple[float, float]:
    """Recursion prediction (time, attempts) for a chain build that used ``rounds`` splice rounds."""
    level, base = analytics.doubling_base(p)
    if n <= base:
        level = max(0, math.ceil(math.log2(n)) - 1)
        return analytics.small_chain_exact(level, p, t_a)
    T0, M0 = analytics.small_chain_exact(level, p, t_a)
    _, T, M = analytics.recursion_solve(rounds, base, p, T0, M0, t_a)
    return T, M
