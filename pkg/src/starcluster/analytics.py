"""Closed-form costs of the chain, star and lattice construction protocols.

All times are in units of the single CZ-attempt duration ``t_a`` unless a
different ``t_a`` is passed; it is a pure scale factor.  Formulas marked
``asymptotic`` are the large-size scaling laws; the ``exact`` companions come
from iterating the underlying recursions and are what Monte Carlo estimates
should converge to.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np


class DomainError(ValueError):
    """Inputs outside the range where a formula is defined."""


@dataclass(frozen=True)
class CostReport:
    """Time and attempt totals with the formula that produced them."""

    time: float
    attempts: float | None
    formula_id: str
    inputs: dict
    asymptotic: bool = True
    time_terms: tuple[float, ...] = ()
    attempt_terms: tuple[float, ...] = ()
    exact_time: float | None = None
    exact_attempts: float | None = None
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["time_terms"] = list(self.time_terms)
        d["attempt_terms"] = list(self.attempt_terms)
        d["notes"] = list(self.notes)
        return d


def _check_p(p: float) -> None:
    if not (0.0 < p <= 1.0) or math.isnan(p):
        raise DomainError(f"success probability must lie in (0, 1], got {p}")


def _check_eps(epsilon: float) -> None:
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"failure budget must lie in (0, 1), got {epsilon}")


# ------------------------------------------------------------------ 1-D chains


def critical_length(p: float) -> float:
    """Main-chain length above which splicing grows a chain on average: 4(1-p)/p."""
    _check_p(p)
    return 4.0 * (1.0 - p) / p


def expected_splice_length(n0: int, p: float) -> tuple[float, float]:
    """Mean length after splicing two ``n0`` chains, as (finite sum, 2*n0 - n_c).

    Each failed attempt removes two qubits from each chain; the finite sum
    counts an exhausted pair as length zero.
    """
    _check_p(p)
    if n0 < 2 or n0 % 2:
        raise DomainError(f"n0 must be an even integer >= 2, got {n0}")
    q = 1.0 - p
    exact = math.fsum(2 * (n0 - 2 * i) * p * q**i for i in range(n0 // 2 + 1))
    return exact, 2.0 * n0 - critical_length(p)


def recursion_solve(
    r: int, n0: float, p: float, T0: float, M0: float, t_a: float = 1.0
) -> tuple[float, float, float]:
    """Length, time and attempts after ``r`` splice rounds, in closed form.

    Solves ``n_r = 2 n_{r-1} - n_c``, ``T_r = T_{r-1} + t_a/p`` and
    ``M_r = 2 M_{r-1} + 1/p``.
    """
    if r < 0:
        raise DomainError("number of rounds must be non-negative")
    nc = critical_length(p)
    return (
        (n0 - nc) * 2**r + nc,
        T0 + r * t_a / p,
        (M0 + 1.0 / p) * 2**r - 1.0 / p,
    )


def recursion_iterate(
    r: int, n0: float, p: float, T0: float, M0: float, t_a: float = 1.0
) -> tuple[float, float, float]:
    """Same quantities as :func:`recursion_solve` by direct iteration."""
    nc = critical_length(p)
    n, T, M = n0, T0, M0
    for _ in range(r):
        n, T, M = 2 * n - nc, T + t_a / p, 2 * M + 1.0 / p
    return n, T, M


def small_chain_exact(level: int, p: float, t_a: float = 1.0) -> tuple[float, float]:
    """Mean (time, attempts) of the restart-on-failure doubling protocol.

    Level ``i`` is a chain of ``2**(i+1)`` qubits.  Level 0 is one CZ between
    two single qubits: ``T_0 = t_a/p``, ``M_0 = 1/p``; then
    ``T_i = (T_{i-1} + t_a)/p`` and ``M_i = (2 M_{i-1} + 1)/p``.
    """
    _check_p(p)
    if level < 0:
        raise DomainError("doubling level must be non-negative")
    T, M = t_a / p, 1.0 / p
    for _ in range(level):
        T, M = (T + t_a) / p, (2 * M + 1) / p
    return T, M


def small_chain_cost(n: int, p: float, t_a: float = 1.0) -> CostReport:
    """Power laws ``t_a (1/p)^(log2 n + 1)`` and ``(2/p)^(log2 n + 1) / 2`` for a doubled chain."""
    _check_p(p)
    if n < 2 or n & (n - 1):
        raise DomainError(f"doubling only produces powers of two >= 2, got {n}")
    k = math.log2(n) + 1
    level = int(math.log2(n)) - 1
    exact_T, exact_M = small_chain_exact(level, p, t_a)
    return CostReport(
        time=t_a * (1.0 / p) ** k,
        attempts=(2.0 / p) ** k / 2.0,
        formula_id="small-chain-power-law",
        inputs={"n": n, "p": p, "t_a": t_a},
        exact_time=exact_T,
        exact_attempts=exact_M,
    )


def doubling_base(p: float) -> tuple[int, int]:
    """(level, length) of the doubled chain that seeds splicing.

    The seed must exceed the critical length: ``n_0 = ceil(n_c) + 1``, rounded
    up to the next power of two since doubling only makes those.
    """
    nc = critical_length(p)
    n0 = math.ceil(nc - 1e-9) + 1
    level = max(0, math.ceil(math.log2(n0)) - 1)
    return level, 2 ** (level + 1)


def splice_rounds(n: int, p: float) -> int:
    """Rounds of pairwise splicing needed to reach mean length ``n`` from the seed."""
    _, base = doubling_base(p)
    nc = critical_length(p)
    r = 0
    while (base - nc) * 2**r + nc < n - 1e-9:
        r += 1
    return r


def chain_cost(n: int, p: float, t_a: float = 1.0) -> CostReport:
    """Asymptotic totals for an ``n``-qubit chain with ``n > n_c``.

    ``T(n) = t_a (1/p)^(log2(n_c+1)+1) + (t_a/p) log2(n - n_c)`` and
    ``M(n) = (2/p)^(log2(n_c+1)+1) (n - n_c) / 2``; the exact recursion path
    for the same ``n`` is attached.
    """
    _check_p(p)
    nc = critical_length(p)
    if n <= nc:
        raise DomainError(f"splicing cannot grow chains of length {n} <= n_c = {nc:.4g}")
    k = math.log2(nc + 1) + 1
    first = t_a * (1.0 / p) ** k
    second = (t_a / p) * math.log2(n - nc)
    exact = chain_cost_exact(n, p, t_a)
    return CostReport(
        time=first + second,
        attempts=(2.0 / p) ** k * (n - nc) / 2.0,
        formula_id="chain-asymptotic",
        inputs={"n": n, "p": p, "t_a": t_a},
        time_terms=(first, second),
        exact_time=exact.time,
        exact_attempts=exact.attempts,
    )


def chain_cost_exact(n: int, p: float, t_a: float = 1.0) -> CostReport:
    """Mean cost along the recursion path the simulator follows.

    Seed chains come from doubling (:func:`doubling_base`) at their exact
    mean cost; :func:`splice_rounds` rounds of splicing follow.  Short chains
    that the seed already covers are a single doubling build.
    """
    _check_p(p)
    if n < 2:
        raise DomainError("a chain needs at least two qubits")
    level, base = doubling_base(p)
    if n <= base:
        level = max(0, math.ceil(math.log2(n)) - 1)
        T, M = small_chain_exact(level, p, t_a)
        return CostReport(T, M, "chain-recursion", {"n": n, "p": p, "t_a": t_a}, asymptotic=False)
    T0, M0 = small_chain_exact(level, p, t_a)
    r = splice_rounds(n, p)
    length, T, M = recursion_solve(r, base, p, T0, M0, t_a)
    return CostReport(
        T,
        M,
        "chain-recursion",
        {"n": n, "p": p, "t_a": t_a, "base": base, "rounds": r, "mean_length": length},
        asymptotic=False,
    )


# ----------------------------------------------------------------- 2-D layouts


def default_pairs(N: float, d: int) -> float:
    """Asymptotic neighbor-pair count: 2N for the square lattice, 3N/2 for hexagonal."""
    if d == 4:
        return 2.0 * N
    if d == 3:
        return 1.5 * N
    raise DomainError(f"no default pair count for coordination {d}; pass pairs explicitly")


def arms_required(N: int, epsilon: float, p: float, d: int = 4, pairs: float | None = None) -> int:
    """Arms per star unit so every neighbor pair connects with overall probability >= 1 - epsilon.

    ``n_l = (d/p) ln(pairs/epsilon)`` rounded up to a multiple of ``d`` so the
    arms split evenly over the ``d`` directions.
    """
    _check_p(p)
    _check_eps(epsilon)
    if N < 2:
        raise DomainError("a layout needs at least two sites")
    if d < 1:
        raise DomainError("coordination number must be positive")
    if pairs is None:
        pairs = default_pairs(N, d)
    raw = (d / p) * math.log(pairs / epsilon)
    return max(d, d * math.ceil(raw / d - 1e-9))


def pair_success(p: float, attempts_per_pair: int) -> float:
    """Probability at least one of the parallel attempts on a pair succeeds."""
    _check_p(p)
    if attempts_per_pair < 1:
        raise DomainError("need at least one attempt per pair")
    return 1.0 - (1.0 - p) ** attempts_per_pair


def assembly_success(p_c: float, pairs: float) -> float:
    """Probability that all ``pairs`` neighbor pairs connect."""
    return p_c**pairs


def _lattice_first_term(p: float, t_a: float) -> float:
    base = 4.0 / p - 3.0
    if base <= 1.0:
        raise DomainError(f"lattice formulas need 4/p - 3 > 1, i.e. p < 1 (got p = {p})")
    if p > 0.8:
        warnings.warn("lattice formulas degenerate for p > 0.8 (seed chain shorter than 2 qubits)", stacklevel=3)
    return t_a * (1.0 / p) ** (math.log2(base) + 1.0)


def _resolve_lnterm(N, epsilon, lnterm, factor):
    if lnterm is not None:
        if lnterm <= 0:
            raise DomainError("the log term must be positive")
        return float(lnterm)
    if N is None or epsilon is None:
        raise DomainError("pass either N and epsilon or lnterm")
    _check_eps(epsilon)
    if N < 2:
        raise DomainError("a layout needs at least two sites")
    return math.log(factor * N / epsilon)


def _two_d_cost(N, epsilon, p, t_a, lnterm, pair_factor, formula_id) -> CostReport:
    _check_p(p)
    L = _resolve_lnterm(N, epsilon, lnterm, pair_factor)
    inner = pair_factor * L - 1.0
    if inner <= 0:
        raise DomainError("log term too small for the chain-length expression")
    first = _lattice_first_term(p, t_a)
    second = (t_a / p) * math.log2((4.0 / p) * inner)
    third = t_a
    attempts = None
    attempt_terms: tuple[float, ...] = ()
    if N is not None:
        chains = (2.0 / p) ** (2.0 + math.log2(4.0 / p - 3.0)) * N * inner
        links = pair_factor * N / p * L
        attempts = chains + links
        attempt_terms = (chains, links)
    return CostReport(
        time=first + second + third,
        attempts=attempts,
        formula_id=formula_id,
        inputs={"N": N, "epsilon": epsilon, "p": p, "t_a": t_a, "lnterm": L},
        time_terms=(first, second, third),
        attempt_terms=attempt_terms,
    )


def lattice_cost(
    N: float | None, epsilon: float | None, p: float, t_a: float = 1.0, lnterm: float | None = None
) -> CostReport:
    """Totals for an ``N``-site square lattice with failure budget ``epsilon``.

    ``lnterm`` overrides ``ln(2N/epsilon)``; attempts need ``N``.
    """
    return _two_d_cost(N, epsilon, p, t_a, lnterm, 2.0, "square-lattice")


def hex_cost(
    N: float | None, epsilon: float | None, p: float, t_a: float = 1.0, lnterm: float | None = None
) -> CostReport:
    """Totals for an ``N``-site hexagonal layout; ``lnterm`` overrides ``ln(3N/(2 epsilon))``."""
    return _two_d_cost(N, epsilon, p, t_a, lnterm, 1.5, "hexagonal")


def duan_time(
    N: float | None, epsilon: float | None, p: float, t_a: float = 1.0, lnterm: float | None = None
) -> CostReport:
    """Square-lattice time of the cross-unit scheme, reconstructed from the star scheme.

    Identical to :func:`lattice_cost` except that the final ``t_a`` becomes
    ``(t_a/p) ln(2N/epsilon)``.
    """
    base = lattice_cost(N, epsilon, p, t_a, lnterm)
    L = base.inputs["lnterm"]
    first, second, _ = base.time_terms
    third = (t_a / p) * L
    return CostReport(
        time=first + second + third,
        attempts=None,
        formula_id="cross-unit-reconstructed",
        inputs=base.inputs,
        time_terms=(first, second, third),
        notes=("reconstructed by swapping the final connection term; not a published formula",),
    )


SWEEP_COLUMNS = ("x", "T1", "T2", "ratio", "term1", "term2", "term3")


def comparison_table(
    p: float | None = None,
    lnterm: float | None = None,
    values=None,
    t_a: float = 1.0,
) -> list[dict]:
    """Star-scheme vs cross-unit times along a sweep.

    Fix exactly one of ``p`` and ``lnterm``; ``values`` are the swept
    ``ln(2N/epsilon)`` (when ``p`` is fixed) or ``p`` values.  ``term1..3`` are
    the three time terms of ``T1``; ``T2`` shares the first two.
    """
    if (p is None) == (lnterm is None):
        raise DomainError("fix exactly one of p and lnterm")
    if values is None:
        values = range(5, 51) if p is not None else np.round(np.arange(1, 51) * 0.01, 2)
    rows = []
    for x in values:
        x = float(x)
        pp, L = (p, x) if p is not None else (x, lnterm)
        if not 0 < pp <= 0.5:
            raise DomainError(f"sweeps are defined for p in (0, 0.5], got {pp}")
        ours = lattice_cost(None, None, pp, t_a, lnterm=L)
        theirs = duan_time(None, None, pp, t_a, lnterm=L)
        rows.append(
            {
                "x": x,
                "T1": ours.time,
                "T2": theirs.time,
                # T2 - T1 is the difference of the third terms; forming the
                # ratio from it keeps it below 1 where T ~ 1e19 swamps t_a
                "ratio": 1.0 - (theirs.time_terms[2] - ours.time_terms[2]) / theirs.time,
                "term1": ours.time_terms[0],
                "term2": ours.time_terms[1],
                "term3": ours.time_terms[2],
            }
        )
    return rows


def figure3a(values=None) -> list[dict]:
    """T1, T2 against ln(2N/epsilon) in [5, 50] at p = 0.25."""
    return comparison_table(p=0.25, values=values)


def figure3b(values=None) -> list[dict]:
    """T1, T2 and their ratio against p in (0, 0.5] at ln(2N/epsilon) = 30."""
    return comparison_table(lnterm=30.0, values=values)
