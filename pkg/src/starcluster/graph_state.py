"""Graph-level description of cluster states and their Pauli measurement rules.

A cluster (graph) state is fully described, up to local Clifford byproducts,
by a labeled simple undirected graph.  Every rewrite here returns a new
:class:`Graph`; inputs are never mutated.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from itertools import combinations, product

MAIN = "main-chain"
ARM_INNER = "arm-inner"
ARM_OUTER = "arm-outer"
CENTER = "center"
ROLES = (MAIN, ARM_INNER, ARM_OUTER, CENTER)

BASES = ("X", "Y", "Z")


class GraphError(ValueError):
    """A rewrite was asked to act outside its precondition."""


class GraphSchemaError(ValueError):
    """A serialized graph does not follow the JSON schema."""


class Graph:
    """Labeled simple undirected graph with a record of measured vertices.

    Parameters
    ----------
    vertices : iterable of int
        Active vertex ids.  Endpoints of ``edges`` are added implicitly.
    edges : iterable of (int, int)
    measured : iterable of int
        Ids already consumed by measurement; disjoint from the active set.
    labels : mapping int -> str, optional
        Role tags, one of ``main-chain``, ``arm-inner``, ``arm-outer``, ``center``.
    """

    __slots__ = ("_adj", "measured", "labels")

    def __init__(
        self,
        vertices: Iterable[int] = (),
        edges: Iterable[tuple[int, int]] = (),
        measured: Iterable[int] = (),
        labels: Mapping[int, str] | None = None,
    ):
        self._adj: dict[int, set[int]] = {}
        self.measured: set[int] = set()
        self.labels: dict[int, str] = {}
        for v in vertices:
            self._add_vertex(v)
        for a, b in edges:
            self._add_vertex(a)
            self._add_vertex(b)
            if a == b:
                raise GraphError(f"self-loop at vertex {a}")
            self._adj[a].add(b)
            self._adj[b].add(a)
        for v in measured:
            v = _as_id(v)
            if v in self._adj:
                raise GraphError(f"vertex {v} is both active and measured")
            self.measured.add(v)
        for v, role in (labels or {}).items():
            v = _as_id(v)
            if role not in ROLES:
                raise GraphError(f"unknown role {role!r} for vertex {v}")
            self.labels[v] = role

    def _add_vertex(self, v: int) -> None:
        v = _as_id(v)
        self._adj.setdefault(v, set())

    # ------------------------------------------------------------------ queries

    @property
    def vertices(self) -> frozenset[int]:
        """Active (unmeasured) vertex ids."""
        return frozenset(self._adj)

    def __contains__(self, v: object) -> bool:
        return v in self._adj

    def __len__(self) -> int:
        return len(self._adj)

    def neighbors(self, v: int) -> frozenset[int]:
        self._require_active(v)
        return frozenset(self._adj[v])

    def degree(self, v: int) -> int:
        self._require_active(v)
        return len(self._adj[v])

    def has_edge(self, a: int, b: int) -> bool:
        return a in self._adj and b in self._adj[a]

    def edges(self) -> list[tuple[int, int]]:
        """Edges as ``(small, large)`` pairs in ascending order."""
        return sorted((a, b) for a, nb in self._adj.items() for b in nb if a < b)

    def num_edges(self) -> int:
        return sum(len(nb) for nb in self._adj.values()) // 2

    def role(self, v: int) -> str | None:
        return self.labels.get(v)

    def with_role(self, role: str) -> list[int]:
        return sorted(v for v in self._adj if self.labels.get(v) == role)

    def is_connected(self) -> bool:
        if not self._adj:
            return True
        start = next(iter(self._adj))
        seen = {start}
        stack = [start]
        while stack:
            for u in self._adj[stack.pop()]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == len(self._adj)

    def copy(self) -> Graph:
        g = Graph.__new__(Graph)
        g._adj = {v: set(nb) for v, nb in self._adj.items()}
        g.measured = set(self.measured)
        g.labels = dict(self.labels)
        return g

    def subgraph(self, keep: Iterable[int]) -> Graph:
        """Induced subgraph on ``keep`` (measured record and labels dropped)."""
        keep = set(keep)
        missing = keep - self._adj.keys()
        if missing:
            raise GraphError(f"unknown or measured vertices {sorted(missing)}")
        g = Graph.__new__(Graph)
        g._adj = {v: self._adj[v] & keep for v in keep}
        g.measured = set()
        g.labels = {v: r for v, r in self.labels.items() if v in keep}
        return g

    def relabel(self, mapping: Mapping[int, int]) -> Graph:
        """Rename vertices; ids absent from ``mapping`` keep their name."""
        f = lambda v: mapping.get(v, v)  # noqa: E731
        new_ids = [f(v) for v in self._adj] + [f(v) for v in self.measured]
        if len(set(new_ids)) != len(new_ids):
            raise GraphError("relabeling is not injective")
        g = Graph.__new__(Graph)
        g._adj = {f(v): {f(u) for u in nb} for v, nb in self._adj.items()}
        g.measured = {f(v) for v in self.measured}
        g.labels = {f(v): r for v, r in self.labels.items()}
        return g

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return canonical_form(self) == canonical_form(other)

    def __hash__(self) -> int:
        return hash(canonical_form(self))

    def __repr__(self) -> str:
        return f"Graph(vertices={sorted(self._adj)}, edges={self.edges()}, measured={sorted(self.measured)})"

    # --------------------------------------------------------- in-place kernels
    # Used by the composite procedures so large graphs are copied once.

    def _require_active(self, v: int) -> None:
        if v not in self._adj:
            state = "measured" if v in self.measured else "unknown"
            raise GraphError(f"vertex {v} is {state}")

    def _toggle(self, a: int, b: int) -> None:
        if b in self._adj[a]:
            self._adj[a].discard(b)
            self._adj[b].discard(a)
        else:
            self._adj[a].add(b)
            self._adj[b].add(a)

    def _remove(self, v: int) -> None:
        for u in self._adj.pop(v):
            self._adj[u].discard(v)
        self.measured.add(v)

    def _local_complement(self, v: int) -> None:
        for a, b in combinations(sorted(self._adj[v]), 2):
            self._toggle(a, b)

    def _measure_x(self, i: int, j: int | None) -> None:
        n_i = set(self._adj[i])
        if not n_i:
            if j is not None:
                raise GraphError(f"special neighbor {j} is not adjacent to {i}")
            self._remove(i)
            return
        if j is None:
            j = min(n_i)
        elif j not in n_i:
            raise GraphError(f"special neighbor {j} is not adjacent to {i}")
        n_j = set(self._adj[j])
        common = n_i & n_j
        for pairs in (
            _complete_pairs(n_j, n_i),
            _complete_pairs(common, common),
            _complete_pairs({j}, n_i - {j}),
        ):
            for a, b in pairs:
                self._toggle(a, b)
        self._remove(i)

    def _disjoint_update(self, other: Graph) -> None:
        clash = (self._adj.keys() | self.measured) & (other._adj.keys() | other.measured)
        if clash:
            raise GraphError(f"graphs share vertex ids {sorted(clash)[:5]}")
        for v, nb in other._adj.items():
            self._adj[v] = set(nb)
        self.measured |= other.measured
        self.labels.update(other.labels)


def _as_id(v: object) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise GraphError(f"vertex id must be a non-negative integer, got {v!r}")
    return v


def _complete_pairs(a: Iterable[int], b: Iterable[int]) -> set[tuple[int, int]]:
    """All unordered pairs {x, y} with x in a, y in b, x != y."""
    return {(min(x, y), max(x, y)) for x, y in product(a, b) if x != y}


def _existing_pairs(g: Graph, a: Iterable[int], b: Iterable[int]) -> set[tuple[int, int]]:
    return {pair for pair in _complete_pairs(a, b) if g.has_edge(*pair)}


# ---------------------------------------------------------------- elementary ops


def toggle_edge(g: Graph, a: int, b: int) -> Graph:
    """Graph action of a successful CZ between ``a`` and ``b``."""
    if a == b:
        raise GraphError("cannot toggle a self-loop")
    g._require_active(a)
    g._require_active(b)
    out = g.copy()
    out._toggle(a, b)
    return out


def measure_z(g: Graph, i: int) -> Graph:
    """Z measurement: drop every edge at ``i`` and retire ``i``."""
    g._require_active(i)
    out = g.copy()
    out._remove(i)
    return out


def local_complement(g: Graph, i: int) -> Graph:
    """Complement the subgraph induced on the neighborhood of ``i``."""
    g._require_active(i)
    out = g.copy()
    out._local_complement(i)
    return out


def measure_y(g: Graph, i: int) -> Graph:
    """Y measurement: local complementation at ``i`` followed by its removal."""
    g._require_active(i)
    out = g.copy()
    out._local_complement(i)
    out._remove(i)
    return out


def measure_x(g: Graph, i: int, j: int | None = None) -> Graph:
    """X measurement of ``i`` with special neighbor ``j``.

    The edge set becomes ``E ^ K(N_j, N_i) ^ K(N_j & N_i, N_j & N_i) ^ K({j}, N_i - {j})``
    where ``K(A, B)`` is the set of all unordered pairs ``{a, b}`` with
    ``a in A``, ``b in B``, ``a != b``; ``i`` is then removed.  ``j`` defaults to
    the smallest neighbor.  With no neighbors this reduces to :func:`measure_z`.
    """
    g._require_active(i)
    out = g.copy()
    out._measure_x(i, j)
    return out


def measure_x_existing_edges(g: Graph, i: int, j: int | None = None) -> Graph:
    """X rule with each pair set read as the *existing* edges of ``g``.

    This reading cannot create edges and is wrong (path 1-2-3 measured at 2
    loses the edge {1, 3}).  Kept only as a negative control for the oracle.
    """
    g._require_active(i)
    n_i = set(g._adj[i])
    if not n_i:
        return measure_z(g, i)
    if j is None:
        j = min(n_i)
    elif j not in n_i:
        raise GraphError(f"special neighbor {j} is not adjacent to {i}")
    n_j = set(g._adj[j])
    common = n_i & n_j
    out = g.copy()
    for pairs in (
        _existing_pairs(g, n_j, n_i),
        _existing_pairs(g, common, common),
        _existing_pairs(g, {j}, n_i - {j}),
    ):
        for a, b in pairs:
            out._toggle(a, b)
    out._remove(i)
    return out


def measure(g: Graph, basis: str, i: int, special: int | None = None) -> Graph:
    """Dispatch to the rule for ``basis`` in {"X", "Y", "Z"}."""
    basis = basis.upper()
    if basis != "X" and special is not None:
        raise GraphError("a special neighbor only applies to X measurements")
    if basis == "X":
        return measure_x(g, i, special)
    if basis == "Y":
        return measure_y(g, i)
    if basis == "Z":
        return measure_z(g, i)
    raise GraphError(f"unknown basis {basis!r}")


def measure_literal(g: Graph, basis: str, i: int, special: int | None = None) -> Graph:
    """Like :func:`measure` but with the existing-edges X rule (negative control)."""
    if basis.upper() == "X":
        return measure_x_existing_edges(g, i, special)
    return measure(g, basis, i, special)


def apply_schedule(g: Graph, schedule: Iterable[tuple[str, int, int | None]]) -> Graph:
    """Apply ``(basis, target, special_neighbor)`` steps in order."""
    out = g.copy()
    seen: set[int] = set()
    for basis, target, special in schedule:
        if target in seen:
            raise GraphError(f"vertex {target} scheduled twice")
        seen.add(target)
        out = measure(out, basis, target, special)
    return out


_SWAP_XZ = {"X": "Z", "Y": "Y", "Z": "X"}
_SWAP_XY = {"X": "Y", "Y": "X", "Z": "Z"}


def physical_bases(g: Graph, schedule: Iterable[tuple[str, int, int | None]]) -> list[tuple[str, int]]:
    """Lab-frame bases that realise a graph-level measurement schedule.

    Each graph rule holds only up to a local Clifford on the surviving
    qubits: an X measurement rotates its special neighbor by a square root of
    Y (exchanging X and Z), a Y measurement rotates every neighbor by a square
    root of Z (exchanging X and Y), and a Z measurement leaves Pauli
    byproducts only.  Later measurements must be made in the rotated basis;
    Pauli byproducts flip outcomes but not bases.  Returns ``(basis, qubit)``
    pairs for the unrotated state.
    """
    frame: dict[int, dict[str, str]] = {}
    out = []
    h = g.copy()
    for basis, i, special in schedule:
        basis = basis.upper()
        out.append((frame.get(i, {"X": "X", "Y": "Y", "Z": "Z"})[basis], i))
        if basis == "X" and h._adj[i]:
            j = min(h._adj[i]) if special is None else special
            rotated = [(j, _SWAP_XZ)]
        elif basis == "Y":
            rotated = [(u, _SWAP_XY) for u in h._adj[i]]
        else:
            rotated = []
        # the new correction acts first on the state, so it is composed inside
        for u, swap in rotated:
            current = frame.get(u, {"X": "X", "Y": "Y", "Z": "Z"})
            frame[u] = {b: current[swap[b]] for b in "XYZ"}
        h = measure(h, basis, i, special)
    return out


def disjoint_union(*graphs: Graph) -> Graph:
    out = Graph()
    for g in graphs:
        out._disjoint_update(g)
    return out


# --------------------------------------------------------- composite procedures


def build_armed_chain(n_l: int, offset: int = 0) -> Graph:
    """Main chain of ``2 * n_l`` qubits where every other qubit carries a two-qubit arm.

    Main-chain qubits get ids ``offset .. offset + 2*n_l - 1`` in chain order and
    the first one is armed.  The arm on main qubit ``offset + 2m`` is
    ``offset + 2*n_l + 2m`` (inner) followed by ``offset + 2*n_l + 2m + 1`` (outer).
    """
    if isinstance(n_l, bool) or not isinstance(n_l, int) or n_l < 1:
        raise GraphError(f"an armed chain needs n_l >= 1, got {n_l!r}")
    length = 2 * n_l
    main = [offset + k for k in range(length)]
    edges = list(zip(main, main[1:]))
    labels = dict.fromkeys(main, MAIN)
    for m in range(0, length, 2):
        inner = offset + length + m
        outer = inner + 1
        edges += [(main[m], inner), (inner, outer)]
        labels[inner] = ARM_INNER
        labels[outer] = ARM_OUTER
    return Graph(main, edges, labels=labels)


def chain_order(g: Graph) -> list[int]:
    """Main-chain vertices in path order, starting from the armed end."""
    main = set(g.with_role(MAIN))
    if not main:
        raise GraphError("graph has no main-chain labels")
    ends = [v for v in sorted(main) if len(g._adj[v] & main) <= 1]
    if len(main) == 1:
        ends = sorted(main)
    if len(ends) != 2 and len(main) > 1:
        raise GraphError("main-chain vertices do not form a path")
    start = next((v for v in ends if _arm_of(g, v) is not None), None)
    if start is None:
        raise GraphError("neither end of the main chain carries an arm")
    order = [start]
    prev = None
    while True:
        step = [u for u in g._adj[order[-1]] & main if u != prev]
        if not step:
            break
        if len(step) > 1:
            raise GraphError("main-chain vertices do not form a path")
        prev = order[-1]
        order.append(step[0])
    if len(order) != len(main):
        raise GraphError("main chain is not connected")
    return order


def _arm_of(g: Graph, v: int) -> tuple[int, int] | None:
    inner = [u for u in g._adj[v] if g.labels.get(u) == ARM_INNER]
    if not inner:
        return None
    if len(inner) > 1:
        raise GraphError(f"main-chain vertex {v} carries several arms")
    outer = [u for u in g._adj[inner[0]] if g.labels.get(u) == ARM_OUTER]
    if len(outer) != 1 or len(g._adj[inner[0]]) != 2 or len(g._adj[outer[0]]) != 1:
        raise GraphError(f"arm at vertex {v} is not a two-qubit pendant path")
    return inner[0], outer[0]


def star_schedule(g: Graph) -> list[tuple[str, int, int | None]]:
    """Graph-level measurements that turn an armed chain into a star unit.

    The armless interior main-chain qubits are X-measured from the armed end
    inward, each with the current hub as special neighbor; every X measurement
    hands the hub role to the next armed qubit and leaves the previous hub as a
    one-qubit arm.  Those one-qubit arms and the armless terminal qubit are
    then Z-measured.  In the lab frame the old hubs are measured in X instead
    (see :func:`physical_bases`).
    """
    order = chain_order(g)
    if len(order) % 2:
        raise GraphError("armed chain must have an even number of main-chain qubits")
    for k, v in enumerate(order):
        armed = _arm_of(g, v) is not None
        if armed != (k % 2 == 0):
            raise GraphError("main chain does not alternate armed / armless qubits")
    length = len(order)
    schedule: list[tuple[str, int, int | None]] = [
        ("X", order[k], order[k - 1]) for k in range(1, length - 2, 2)
    ]
    schedule += [("Z", v, None) for v in order[0 : length - 2 : 2] + [order[-1]]]
    return schedule


def reduce_chain_to_star(g: Graph) -> Graph:
    """Apply :func:`star_schedule`; the surviving hub is tagged ``center``.

    The hub is the last armed main-chain qubit and carries all ``n_l``
    two-qubit arms.
    """
    schedule = star_schedule(g)
    out = g.copy()
    for basis, v, special in schedule:
        if basis == "X":
            out._measure_x(v, special)
        else:
            out._remove(v)
    order = chain_order(g)
    out.labels[order[-2]] = CENTER
    return out


def star_center(g: Graph) -> int:
    centers = g.with_role(CENTER)
    if len(centers) != 1:
        raise GraphError(f"expected exactly one center, found {len(centers)}")
    return centers[0]


def contract_bridge(g: Graph, bridge: tuple[int, int, int, int]) -> Graph:
    """Y-measure a four-qubit bridge ``a_i - b_i - b_j - a_j`` between two centers.

    The bridge must be an induced path whose ends each have one further
    neighbor (the centers ``c_i`` and ``c_j``).  The result carries the edge
    ``{c_i, c_j}`` and the four bridge qubits are measured.
    """
    if len(bridge) != 4 or len(set(bridge)) != 4:
        raise GraphError("a bridge is four distinct vertices")
    a_i, b_i, b_j, a_j = bridge
    for v in bridge:
        g._require_active(v)
    for x, y in ((a_i, b_i), (b_i, b_j), (b_j, a_j)):
        if not g.has_edge(x, y):
            raise GraphError(f"bridge is missing edge {{{x}, {y}}}")
    if len(g._adj[b_i]) != 2 or len(g._adj[b_j]) != 2:
        raise GraphError("inner bridge qubits must have degree 2")
    if len(g._adj[a_i]) != 2 or len(g._adj[a_j]) != 2:
        raise GraphError("outer bridge qubits must each touch exactly one center")
    (c_i,) = g._adj[a_i] - {b_i}
    (c_j,) = g._adj[a_j] - {b_j}
    if c_i == c_j or c_i in bridge or c_j in bridge:
        raise GraphError("bridge does not join two distinct centers")
    out = g.copy()
    for v in bridge:
        out._local_complement(v)
        out._remove(v)
    return out


# ---------------------------------------------------------------- serialization


def canonical_form(g: Graph) -> tuple[tuple[int, ...], tuple[tuple[int, int], ...], tuple[int, ...]]:
    """Labeled-equality key: (active vertices, edges, measured), all sorted."""
    return (tuple(sorted(g._adj)), tuple(g.edges()), tuple(sorted(g.measured)))


def to_dict(g: Graph) -> dict:
    return {
        "vertices": sorted(g._adj),
        "edges": [list(e) for e in g.edges()],
        "measured": sorted(g.measured),
        "labels": {str(v): g.labels[v] for v in sorted(g.labels)},
    }


def from_dict(data: object) -> Graph:
    if not isinstance(data, dict):
        raise GraphSchemaError("graph document must be a JSON object")
    unknown = set(data) - {"vertices", "edges", "measured", "labels"}
    if unknown:
        raise GraphSchemaError(f"unexpected keys {sorted(unknown)}")
    if "vertices" not in data or "edges" not in data:
        raise GraphSchemaError("graph document needs 'vertices' and 'edges'")

    def ids(seq, what):
        if not isinstance(seq, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in seq
        ):
            raise GraphSchemaError(f"'{what}' must be a list of non-negative integers")
        return seq

    vertices = ids(data["vertices"], "vertices")
    measured = ids(data.get("measured", []), "measured")
    edges = data["edges"]
    if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 2 for e in edges):
        raise GraphSchemaError("'edges' must be a list of [int, int] pairs")
    for e in edges:
        ids(e, "edges")
    active = set(vertices)
    if any(a not in active or b not in active for a, b in edges):
        raise GraphSchemaError("edge endpoint missing from 'vertices'")
    labels = data.get("labels", {})
    if not isinstance(labels, dict):
        raise GraphSchemaError("'labels' must be an object")
    try:
        parsed = {int(k): v for k, v in labels.items()}
    except ValueError as exc:
        raise GraphSchemaError("label keys must be integer strings") from exc
    try:
        return Graph(vertices, [tuple(e) for e in edges], measured, parsed)
    except GraphError as exc:
        raise GraphSchemaError(str(exc)) from exc


def dumps(g: Graph) -> str:
    return json.dumps(to_dict(g), indent=2) + "\n"


def loads(text: str) -> Graph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphSchemaError(f"invalid JSON: {exc}") from exc
    return from_dict(data)


# ---------------------------------------------------------------- constructors


def path_graph(ids: Iterable[int]) -> Graph:
    ids = list(ids)
    return Graph(ids, zip(ids, ids[1:]))


def complete_graph(ids: Iterable[int]) -> Graph:
    ids = list(ids)
    return Graph(ids, combinations(ids, 2))
