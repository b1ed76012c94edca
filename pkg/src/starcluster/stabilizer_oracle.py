"""Brute-force stabilizer ground truth for the graph rewrite rules.

A stabilizer state on ``n`` qubits is held as ``n`` generator rows in the
binary symplectic picture.  Each row is an ``x`` bit vector, a ``z`` bit
vector and a phase exponent ``r``; it denotes ``i**r * prod_q sigma(x_q, z_q)``
with ``sigma(1, 1) = Y``.  Bit vectors are Python ints (bit ``q`` is column
``q``), which keeps desk-scale sweeps fast; everything is exact GF(2)
arithmetic.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass, field
from functools import cache
from itertools import combinations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .graph_state import Graph, GraphError, canonical_form, measure

MAX_QUBITS = 24
MAX_ORBIT_VERTICES = 8
_TABLE_VERTICES = 6

_PAULI = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_SYMBOL = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_PHASE = {0: "+", 1: "+i", 2: "-", 3: "-i"}


class OracleError(ValueError):
    """Invalid tableau or a request the oracle cannot honor."""


class OrbitOverflowError(OracleError):
    pass


def _product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent of i in sigma(x1, z1) sigma(x2, z2) = i**e sigma(x1^x2, z1^z2)."""
    x3, z3 = x1 ^ x2, z1 ^ z2
    return (
        (x1 & z1).bit_count()
        + (x2 & z2).bit_count()
        - (x3 & z3).bit_count()
        + 2 * (z1 & x2).bit_count()
    )


def _bits(v: int, n: int) -> np.ndarray:
    return np.array([(v >> q) & 1 for q in range(n)], dtype=np.uint8)


def _int(bits: Iterable[int]) -> int:
    return sum(1 << q for q, b in enumerate(bits) if b)


@dataclass(frozen=True)
class PauliString:
    """``i**phase`` times a tensor product of single-qubit Paulis.

    ``x_bits`` and ``z_bits`` are length-``n`` bit vectors packed into ints.
    """

    n: int
    x_bits: int
    z_bits: int
    phase: int = 0

    def __post_init__(self):
        limit = 1 << self.n
        if not (0 <= self.x_bits < limit and 0 <= self.z_bits < limit):
            raise OracleError("bit vectors do not fit the qubit count")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse e.g. ``"-XZI"`` or ``"+iYY"`` (leftmost letter is qubit 0)."""
        phase = 0
        for prefix, r in (("+i", 1), ("-i", 3), ("+", 0), ("-", 2)):
            if label.startswith(prefix):
                phase, label = r, label[len(prefix) :]
                break
        try:
            bits = [_PAULI[c] for c in label]
        except KeyError as exc:
            raise OracleError(f"bad Pauli label {label!r}") from exc
        return cls(len(bits), _int(b[0] for b in bits), _int(b[1] for b in bits), phase)

    @classmethod
    def single(cls, n: int, q: int, basis: str) -> PauliString:
        try:
            bx, bz = _PAULI[basis.upper()]
        except KeyError:
            raise OracleError(f"unknown basis {basis!r}") from None
        return cls(n, bx << q, bz << q)

    @property
    def x(self) -> np.ndarray:
        return _bits(self.x_bits, self.n)

    @property
    def z(self) -> np.ndarray:
        return _bits(self.z_bits, self.n)

    def __mul__(self, other: PauliString) -> PauliString:
        if other.n != self.n:
            raise OracleError("Pauli strings act on different qubit counts")
        e = _product_phase(self.x_bits, self.z_bits, other.x_bits, other.z_bits)
        return PauliString(self.n, self.x_bits ^ other.x_bits, self.z_bits ^ other.z_bits, self.phase + other.phase + e)

    def commutes(self, other: PauliString) -> bool:
        return ((self.x_bits & other.z_bits).bit_count() + (self.z_bits & other.x_bits).bit_count()) % 2 == 0

    def is_identity(self) -> bool:
        return self.x_bits == 0 and self.z_bits == 0

    def __str__(self) -> str:
        return _PHASE[self.phase] + "".join(
            _SYMBOL[((self.x_bits >> q) & 1, (self.z_bits >> q) & 1)] for q in range(self.n)
        )


@dataclass
class StabilizerTableau:
    """Generator rows of a pure stabilizer state on the qubits named by ``qubits``."""

    xs: list[int]
    zs: list[int]
    rs: list[int]
    qubits: tuple[int, ...] = field(default=())

    def __post_init__(self):
        n = len(self.xs)
        if not self.qubits:
            self.qubits = tuple(range(n))
        self.qubits = tuple(self.qubits)
        self.rs = [r % 4 for r in self.rs]
        if len(self.zs) != n or len(self.rs) != n or len(self.qubits) != n:
            raise OracleError("tableau needs n generators over n qubits")
        if len(set(self.qubits)) != n:
            raise OracleError("qubit labels must be distinct")
        if n > MAX_QUBITS:
            raise OracleError(f"tableaus are capped at {MAX_QUBITS} qubits")

    @classmethod
    def from_paulis(cls, paulis: list[PauliString], qubits=()) -> StabilizerTableau:
        return cls([p.x_bits for p in paulis], [p.z_bits for p in paulis], [p.phase for p in paulis], qubits)

    @classmethod
    def from_labels(cls, labels: list[str], qubits=()) -> StabilizerTableau:
        return cls.from_paulis([PauliString.from_label(s) for s in labels], qubits)

    @property
    def n(self) -> int:
        return len(self.qubits)

    def copy(self) -> StabilizerTableau:
        return StabilizerTableau(list(self.xs), list(self.zs), list(self.rs), self.qubits)

    def row(self, k: int) -> PauliString:
        return PauliString(self.n, self.xs[k], self.zs[k], self.rs[k])

    def generators(self) -> list[PauliString]:
        return [self.row(k) for k in range(self.n)]

    def index(self, qubit: int) -> int:
        try:
            return self.qubits.index(qubit)
        except ValueError:
            raise OracleError(f"no qubit labeled {qubit}") from None

    def _rowmul(self, target: int, source: int) -> None:
        """Row ``target`` <- row ``target`` * row ``source``."""
        xs, zs = self.xs, self.zs
        e = _product_phase(xs[target], zs[target], xs[source], zs[source])
        self.rs[target] = (self.rs[target] + self.rs[source] + e) % 4
        xs[target] ^= xs[source]
        zs[target] ^= zs[source]

    def is_valid(self) -> bool:
        """Commuting, independent, no identity rows, Hermitian phases."""
        gens = self.generators()
        if any(p.is_identity() or p.phase % 2 for p in gens):
            return False
        if not all(a.commutes(b) for a, b in combinations(gens, 2)):
            return False
        return _rank_gf2([x | (z << self.n) for x, z in zip(self.xs, self.zs)]) == self.n

    def __str__(self) -> str:
        return "\n".join(str(p) for p in self.generators())


# ------------------------------------------------------------------- GF(2) kit


def _rank_gf2(rows: list[int]) -> int:
    rows = list(rows)
    rank = 0
    while rows:
        pivot = rows.pop()
        if not pivot:
            continue
        low = pivot & -pivot
        rows = [r ^ pivot if r & low else r for r in rows]
        rank += 1
    return rank


def _combination(rows: list[int], target: int) -> list[int] | None:
    """Indices of ``rows`` whose XOR is ``target``, or None."""
    basis: dict[int, tuple[int, int]] = {}  # lowest set bit -> (vector, index mask)

    def reduce(v: int, mask: int) -> tuple[int, int]:
        while v:
            low = v & -v
            if low not in basis:
                break
            bv, bm = basis[low]
            v ^= bv
            mask ^= bm
        return v, mask

    for k, r in enumerate(rows):
        v, mask = reduce(r, 1 << k)
        if v:
            basis[v & -v] = (v, mask)
    rest, used = reduce(target, 0)
    if rest:
        return None
    return [k for k in range(len(rows)) if used >> k & 1]


# ------------------------------------------------------------------ operations


def tableau_from_graph(g: Graph) -> StabilizerTableau:
    """One generator ``X_v prod_{u in N_v} Z_u`` per active vertex, in id order."""
    qubits = tuple(sorted(g.vertices))
    pos = {v: k for k, v in enumerate(qubits)}
    xs = [1 << k for k in range(len(qubits))]
    zs = [sum(1 << pos[u] for u in g.neighbors(v)) for v in qubits]
    return StabilizerTableau(xs, zs, [0] * len(qubits), qubits)


def _stabilizer_sign(t: StabilizerTableau, p: PauliString) -> int | None:
    """+1/-1 if +/-p lies in the stabilizer group, None otherwise."""
    n = t.n
    rows = [x | (z << n) for x, z in zip(t.xs, t.zs)]
    combo = _combination(rows, p.x_bits | (p.z_bits << n))
    if combo is None:
        return None
    acc = PauliString(n, 0, 0)
    for k in combo:
        acc = acc * t.row(k)
    rel = (acc.phase - p.phase) % 4
    if rel not in (0, 2):
        raise OracleError("stabilizer group contains a non-Hermitian element")
    return 1 if rel == 0 else -1


def measure_pauli(
    t: StabilizerTableau,
    qubit: int,
    basis: str,
    outcome_policy: str | np.random.Generator | int = "force_plus",
) -> tuple[StabilizerTableau, int]:
    """Measure a single-qubit Pauli and return the updated tableau and the outcome.

    Parameters
    ----------
    t : StabilizerTableau
    qubit : int
        Qubit label (an entry of ``t.qubits``).
    basis : {"X", "Y", "Z"}
    outcome_policy : "force_plus", "force_minus", a seed or a numpy Generator
        How a random outcome is chosen.  Determined outcomes ignore it.

    Returns
    -------
    (StabilizerTableau, int)
        The post-measurement tableau and the outcome in ``{+1, -1}``.
    """
    p = PauliString.single(t.n, t.index(qubit), basis)
    out = t.copy()
    anti = [k for k in range(out.n) if not out.row(k).commutes(p)]
    if not anti:
        sign = _stabilizer_sign(out, p)
        if sign is None:
            raise OracleError("tableau is rank deficient")
        return out, sign
    if isinstance(outcome_policy, str):
        if outcome_policy not in ("force_plus", "force_minus"):
            raise OracleError(f"unknown outcome policy {outcome_policy!r}")
        outcome = 1 if outcome_policy == "force_plus" else -1
    else:
        rng = np.random.default_rng(outcome_policy)
        outcome = 1 if rng.random() < 0.5 else -1
    k = anti[0]
    for j in anti[1:]:
        out._rowmul(j, k)
    out.xs[k], out.zs[k] = p.x_bits, p.z_bits
    out.rs[k] = 0 if outcome == 1 else 2
    return out, outcome


def discard_qubit(t: StabilizerTableau, qubit: int) -> StabilizerTableau:
    """Trace out a qubit that is in a product state with the rest."""
    q = t.index(qubit)
    bit = 1 << q
    out = t.copy()
    pivots: list[int] = []
    for vecs in (out.xs, out.zs):
        rows = [k for k in range(out.n) if vecs[k] & bit and k not in pivots]
        if not rows:
            continue
        piv = rows[0]
        for k in range(out.n):
            if k != piv and vecs[k] & bit:
                out._rowmul(k, piv)
        pivots.append(piv)
    if len(pivots) != 1:
        raise OracleError(f"qubit {qubit} is entangled with the rest")
    low = bit - 1

    def squeeze(v: int) -> int:
        return (v & low) | ((v >> (q + 1)) << q)

    keep = [k for k in range(out.n) if k != pivots[0]]
    return StabilizerTableau(
        [squeeze(out.xs[k]) for k in keep],
        [squeeze(out.zs[k]) for k in keep],
        [out.rs[k] for k in keep],
        out.qubits[:q] + out.qubits[q + 1 :],
    )


def _reduce(rows: list[int], cols: Iterable[int], start: int = 0) -> int:
    """In-place Gauss-Jordan on bit columns ``cols``; pivot k ends in row k."""
    rank = start
    for c in cols:
        bit = 1 << c
        hit = next((k for k in range(rank, len(rows)) if rows[k] & bit), None)
        if hit is None:
            continue
        rows[rank], rows[hit] = rows[hit], rows[rank]
        piv = rows[rank]
        for k in range(len(rows)):
            if k != rank and rows[k] & bit:
                rows[k] ^= piv
        rank += 1
        if rank == len(rows):
            break
    return rank


def extract_graph(t: StabilizerTableau) -> tuple[Graph, list[tuple[str, int]]]:
    """Graph whose graph state equals ``t`` up to local Cliffords.

    The X block is row-reduced column by column in ascending qubit order.
    Rows left with no X support are reduced on their Z block and each of
    their pivot qubits gets a Hadamard, which makes the X block invertible;
    the remaining Z block is then the adjacency matrix, with any diagonal
    entry (a Y on the generator's own qubit) cleared by a phase gate.

    Returns the graph on ``t.qubits`` and the local moves as ``("H", q)`` and
    ``("S", q)`` entries.  Phases are not carried through the moves.
    """
    n = t.n
    if n == 0:
        return Graph(), []
    rows = [x | (z << n) for x, z in zip(t.xs, t.zs)]
    if _rank_gf2(rows) != n:
        raise OracleError("tableau is rank deficient")
    rank = _reduce(rows, range(n))
    tail = [r >> n for r in rows[rank:]]
    hadamards = _pivot_columns(tail)
    for c in hadamards:
        xb, zb = 1 << c, 1 << (n + c)
        rows = [(r & ~(xb | zb)) | ((r & xb) << n) | ((r & zb) >> n) for r in rows]
    if _reduce(rows, range(n)) != n:
        raise OracleError("X block did not become invertible")
    theta = [r >> n for r in rows]
    for a in range(n):
        for b in range(a + 1, n):
            if (theta[a] >> b & 1) != (theta[b] >> a & 1):
                raise OracleError("reduced Z block is not symmetric; generators do not commute")
    ops = [("H", t.qubits[c]) for c in hadamards]
    ops += [("S", t.qubits[c]) for c in range(n) if theta[c] >> c & 1]
    edges = [(t.qubits[a], t.qubits[b]) for a in range(n) for b in range(a + 1, n) if theta[a] >> b & 1]
    return Graph(t.qubits, edges), ops


def _pivot_columns(rows: list[int]) -> list[int]:
    rows = list(rows)
    width = max((r.bit_length() for r in rows), default=0)
    pivots = []
    for c in range(width):
        if _reduce(rows, [c], len(pivots)) > len(pivots):
            pivots.append(c)
        if len(pivots) == len(rows):
            break
    return pivots


# ----------------------------------------------------------------- LC orbits


def lc_orbit(g: Graph, max_size: int = 100_000) -> set:
    """Canonical forms of every graph reachable from ``g`` by local complementations.

    Only active vertices take part; the measured record is dropped.
    """
    if len(g) > MAX_ORBIT_VERTICES:
        raise OracleError(f"orbit enumeration is capped at {MAX_ORBIT_VERTICES} vertices")
    start = g.subgraph(g.vertices)
    seen = {canonical_form(start)}
    queue = deque([start])
    while queue:
        h = queue.popleft()
        for v in sorted(h.vertices):
            if h.degree(v) < 2:
                continue
            nxt = h.copy()
            nxt._local_complement(v)
            key = canonical_form(nxt)
            if key not in seen:
                seen.add(key)
                if len(seen) > max_size:
                    raise OrbitOverflowError(f"orbit exceeds {max_size} graphs")
                queue.append(nxt)
    return seen


@cache
def _orbit_table(k: int) -> np.ndarray:
    """Orbit id for every labeled graph on vertices 0..k-1, indexed by edge mask."""
    if k < 2:
        return np.zeros(1, dtype=np.int64)
    pairs = list(combinations(range(k), 2))
    codes = np.arange(1 << len(pairs), dtype=np.int64)
    within = np.zeros(1 << k, dtype=np.int64)
    for subset in range(1 << k):
        within[subset] = sum(1 << b for b, (u, v) in enumerate(pairs) if subset >> u & 1 and subset >> v & 1)
    targets = []
    for v in range(k):
        nbrs = np.zeros_like(codes)
        for b, (a, c) in enumerate(pairs):
            if v in (a, c):
                nbrs |= ((codes >> b) & 1) << (c if a == v else a)
        targets.append(codes ^ within[nbrs])
    src = np.tile(codes, k)
    dst = np.concatenate(targets)
    adj = coo_matrix((np.ones(src.size, dtype=np.int8), (src, dst)), shape=(codes.size, codes.size))
    return connected_components(adj, directed=False)[1]


def _edge_code(g: Graph, order: tuple[int, ...]) -> int:
    pos = {v: i for i, v in enumerate(order)}
    bit = {pair: b for b, pair in enumerate(combinations(range(len(order)), 2))}
    code = 0
    for a, b in g.edges():
        code |= 1 << bit[(pos[a], pos[b])]
    return code


def lc_equivalent(g: Graph, h: Graph) -> bool:
    """True iff the active parts of ``g`` and ``h`` lie in one LC orbit."""
    if g.vertices != h.vertices:
        return False
    order = tuple(sorted(g.vertices))
    if len(order) <= _TABLE_VERTICES:
        table = _orbit_table(len(order))
        return bool(table[_edge_code(g, order)] == table[_edge_code(h, order)])
    return canonical_form(h.subgraph(h.vertices)) in lc_orbit(g)


def oracle_graph(g: Graph, basis: str, i: int, outcome_policy="force_plus") -> Graph:
    """Graph (up to LC) of the unmeasured qubits after measuring ``i`` exactly."""
    t = tableau_from_graph(g)
    t, _ = measure_pauli(t, i, basis, outcome_policy)
    graph, _ = extract_graph(discard_qubit(t, i))
    return graph


def oracle_after_measurements(g: Graph, measurements, outcome_policy="force_plus") -> Graph:
    """Graph (up to LC) left after measuring ``(basis, qubit)`` pairs in order.

    Each measured qubit is traced out right after its measurement.
    """
    t = tableau_from_graph(g)
    for basis, q in measurements:
        t, _ = measure_pauli(t, q, basis, outcome_policy)
        t = discard_qubit(t, q)
    graph, _ = extract_graph(t)
    return graph


def verify_measurement_rule(
    g: Graph,
    basis: str,
    i: int,
    j: int | None = None,
    *,
    rule: Callable[..., Graph] = measure,
    use_orbit_enumeration: bool = False,
    _expected: Graph | None = None,
) -> bool:
    """Check a graph rewrite rule against exact stabilizer measurement.

    ``rule(g, basis, i, j)`` must return the rewritten graph.  The oracle
    post-selects outcome +1, extracts a graph for the unmeasured qubits and
    asks whether it shares an LC orbit with the rule's output.  With
    ``use_orbit_enumeration`` the orbit is enumerated explicitly instead of
    read from the cached orbit tables.
    """
    if len(g) > 7:
        raise OracleError("rule verification is limited to 7 active vertices")
    expected = _expected if _expected is not None else oracle_graph(g, basis, i)
    try:
        got = rule(g, basis, i, j)
    except GraphError:
        return False
    got = got.subgraph(got.vertices)
    if use_orbit_enumeration:
        return canonical_form(expected) in lc_orbit(got)
    return lc_equivalent(expected, got)


# ---------------------------------------------------------------- rule sweeps


def connected_graphs(n: int) -> Iterator[Graph]:
    """Every connected labeled graph on vertices ``0..n-1``."""
    pairs = list(combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        edges = [pairs[b] for b in range(len(pairs)) if mask >> b & 1]
        g = Graph(range(n), edges)
        if g.is_connected():
            yield g


def measurement_cases(g: Graph) -> Iterator[tuple[str, int, int | None]]:
    """(basis, vertex, special neighbor) for every vertex, basis and valid neighbor."""
    for i in sorted(g.vertices):
        nbrs = sorted(g.neighbors(i))
        for j in nbrs or [None]:
            yield "X", i, j
        yield "Y", i, None
        yield "Z", i, None


@dataclass
class SweepResult:
    graphs: int = 0
    cases: int = 0
    failures: int = 0
    counterexample: tuple[Graph, str, int, int | None] | None = None

    @property
    def passed(self) -> bool:
        return self.failures == 0


def sweep_rules(
    max_vertices: int,
    rule: Callable[..., Graph] = measure,
    stop_at_first: bool = False,
) -> SweepResult:
    """Exhaustive check of ``rule`` on every connected graph up to ``max_vertices``."""
    if not 1 <= max_vertices <= 7:
        raise OracleError("max_vertices must lie in 1..7")
    result = SweepResult()
    for n in range(1, max_vertices + 1):
        for g in connected_graphs(n):
            result.graphs += 1
            oracle: dict[tuple[str, int], Graph] = {}
            for basis, i, j in measurement_cases(g):
                result.cases += 1
                if (basis, i) not in oracle:
                    oracle[basis, i] = oracle_graph(g, basis, i)
                if not verify_measurement_rule(g, basis, i, j, rule=rule, _expected=oracle[basis, i]):
                    result.failures += 1
                    if result.counterexample is None:
                        result.counterexample = (g, basis, i, j)
                    if stop_at_first:
                        return result
    return result
