"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 parse or domain error,
3 violated precondition (e.g. a special neighbor that is not a neighbor).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from functools import partial
from pathlib import Path

from . import analytics, graph_state, protocol_sim, stabilizer_oracle
from .graph_state import GraphError, GraphSchemaError

EXIT_OK, EXIT_VERIFY, EXIT_DOMAIN, EXIT_PRECONDITION = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _num(x: float) -> str:
    return format(float(x), ".10g")


# -------------------------------------------------------------------- commands


def cmd_measure(args) -> int:
    try:
        g = graph_state.loads(Path(args.input).read_text() if args.input != "-" else sys.stdin.read())
    except OSError as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from exc
    try:
        out = graph_state.measure(g, args.basis, args.qubit, args.special)
    except GraphError as exc:
        rule = {"X": "X-measurement rule", "Y": "Y-measurement rule", "Z": "Z-measurement rule"}[args.basis.upper()]
        raise CliError(f"{rule}: {exc}", EXIT_PRECONDITION) from exc
    _emit(graph_state.dumps(out) + "\n", args.out)
    return EXIT_OK


def cmd_build(args) -> int:
    try:
        g = graph_state.build_armed_chain(args.arms)
        if args.kind == "star":
            g = graph_state.reduce_chain_to_star(g)
    except GraphError as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from exc
    _emit(graph_state.dumps(g) + "\n", args.out)
    return EXIT_OK


def _params(args) -> protocol_sim.ProtocolParams:
    return protocol_sim.ProtocolParams(
        p=args.p,
        t_a=args.t_a,
        epsilon=args.epsilon,
        master_seed=args.seed,
        timing=args.timing,
        attempt_cap=args.attempt_cap,
    )


def _task(args):
    ps = protocol_sim
    task = args.task
    if task == "chain":
        return partial(ps.task_chain, n=args.n)
    if task == "star":
        return partial(ps.task_star, n_l=args.arms)
    if task == "small-chain":
        return partial(ps.task_small_chain, level=args.level)
    if task == "splice":
        if args.n0 < 2 or args.n0 % 2:
            raise ValueError("--n0 must be an even integer >= 2")
        return partial(ps.task_splice, n0=args.n0)
    if task == "pair":
        return partial(ps.task_pair, attempts_per_pair=args.attempts_per_pair)
    kind = "square" if task == "lattice" else "hexagonal"
    layout = ps.LayoutSpec(kind, args.rows, args.cols, args.boundary)
    return partial(ps.task_assemble, layout=layout, n_l=args.arms)


def _load_run_spec(args) -> None:
    """Fill flags from a JSON run-spec document; explicit flags are overridden."""
    if not args.spec:
        return
    try:
        spec = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read run spec: {exc}", EXIT_DOMAIN) from exc
    if not isinstance(spec, dict):
        raise CliError("run spec must be a JSON object", EXIT_DOMAIN)
    for key, value in spec.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("func", "command", "spec"):
            raise CliError(f"unknown run-spec field {key!r}", EXIT_DOMAIN)
        setattr(args, attr, value)


def cmd_simulate(args) -> int:
    _load_run_spec(args)
    if args.trials < 1:
        raise ValueError("--trials must be at least 1")
    params = _params(args)
    task = _task(args)
    traces = protocol_sim.run_traces(task, args.trials, params, workers=args.workers)
    stats = protocol_sim.summarize(args.task, traces, params.master_seed)
    csv_text = protocol_sim.traces_to_csv(traces, params.t_a)
    if args.trace_csv:
        Path(args.trace_csv).write_text(csv_text)
    _emit(csv_text if args.format == "csv" else stats.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_analytic(args) -> int:
    a = analytics
    f = args.formula
    if f == "critical-length":
        value = {"formula_id": "critical-length", "p": args.p, "n_c": a.critical_length(args.p)}
    elif f == "splice":
        exact, asym = a.expected_splice_length(args.n0, args.p)
        value = {"formula_id": "splice-length", "n0": args.n0, "p": args.p, "exact": exact, "asymptotic": asym}
    elif f == "small-chain":
        value = a.small_chain_cost(args.n, args.p, args.t_a).to_dict()
    elif f == "chain":
        value = a.chain_cost(args.n, args.p, args.t_a).to_dict()
    elif f == "chain-exact":
        value = a.chain_cost_exact(args.n, args.p, args.t_a).to_dict()
    elif f in ("lattice", "hex", "duan"):
        fn = {"lattice": a.lattice_cost, "hex": a.hex_cost, "duan": a.duan_time}[f]
        if args.lnterm is None and args.N is None:
            raise ValueError("pass --N and --epsilon, or --lnterm")
        value = fn(args.N, args.epsilon if args.lnterm is None else None, args.p, args.t_a, lnterm=args.lnterm).to_dict()
    elif f == "arms":
        if args.N is None:
            raise ValueError("--N is required")
        n_l = a.arms_required(args.N, args.epsilon, args.p, args.d, pairs=args.pairs)
        value = {"formula_id": "arms-required", "N": args.N, "epsilon": args.epsilon, "p": args.p, "d": args.d, "n_l": n_l}
    elif f == "pair":
        p_c = a.pair_success(args.p, args.attempts_per_pair)
        value = {"formula_id": "pair-success", "p": args.p, "attempts_per_pair": args.attempts_per_pair, "p_c": p_c}
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown formula {f}")
    _emit(json.dumps(value, indent=2) + "\n", args.out)
    return EXIT_OK


def _frange(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or stop < start:
        raise ValueError("need step > 0 and stop >= start")
    count = int(round((stop - start) / step))
    return [round(start + k * step, 12) for k in range(count + 1)]


def cmd_sweep(args) -> int:
    if args.which == "figure3a":
        rows = analytics.figure3a()
    elif args.which == "figure3b":
        rows = analytics.figure3b()
    else:
        if (args.p is None) == (args.lnterm is None):
            raise ValueError("custom sweeps fix exactly one of --p and --lnterm")
        if None in (args.start, args.stop, args.step):
            raise ValueError("custom sweeps need --start, --stop and --step")
        values = _frange(args.start, args.stop, args.step)
        if args.p is not None and (min(values) < 5 or max(values) > 50):
            raise ValueError("ln(2N/epsilon) sweeps are limited to [5, 50]")
        rows = analytics.comparison_table(p=args.p, lnterm=args.lnterm, values=values, t_a=args.t_a)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(analytics.SWEEP_COLUMNS)
    for row in rows:
        w.writerow([_num(row[c]) for c in analytics.SWEEP_COLUMNS])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    rule = graph_state.measure if args.rule == "standard" else graph_state.measure_literal
    if not 1 <= args.max_vertices <= 7:
        raise ValueError("--max-vertices must lie in 1..7")
    start = time.perf_counter()
    result = stabilizer_oracle.sweep_rules(args.max_vertices, rule=rule, stop_at_first=args.stop_at_first)
    elapsed = time.perf_counter() - start
    passed = result.cases - result.failures
    print(f"graphs={result.graphs} cases={result.cases} passed={passed} failed={result.failures}")
    print(f"elapsed_seconds={elapsed:.1f}", file=sys.stderr)
    if result.passed:
        return EXIT_OK
    g, basis, i, j = result.counterexample
    print(json.dumps({"graph": graph_state.to_dict(g), "basis": basis, "qubit": i, "special": j}))
    return EXIT_VERIFY


# ---------------------------------------------------------------------- parser


def _common(sp, seed=True, trials=False):
    sp.add_argument("--out", help="output path (default: stdout)")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    if seed:
        sp.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
    if trials:
        sp.add_argument("--trials", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="starcluster", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("measure", help="apply a single-qubit Pauli measurement to a graph")
    sp.add_argument("--in", dest="input", required=True, help="graph JSON ('-' for stdin)")
    sp.add_argument("--basis", required=True, type=str.upper, choices=graph_state.BASES)
    sp.add_argument("--qubit", type=int, required=True)
    sp.add_argument("--special", type=int, help="special neighbor for X measurements")
    _common(sp, seed=False)
    sp.set_defaults(func=cmd_measure)

    sp = sub.add_parser("build", help="write an armed chain or star unit")
    sp.add_argument("kind", choices=("armed-chain", "star"))
    sp.add_argument("--arms", type=int, required=True)
    _common(sp, seed=False)
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("simulate", help="Monte Carlo ensemble of a construction protocol")
    sp.add_argument("task", choices=("chain", "star", "lattice", "hex", "splice", "small-chain", "pair"))
    sp.add_argument("--p", type=float, default=0.25)
    sp.add_argument("--t-a", dest="t_a", type=float, default=1.0)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--n", type=int, default=200, help="chain main length")
    sp.add_argument("--n0", type=int, default=50, help="input length for splice")
    sp.add_argument("--level", type=int, default=1, help="doubling level for small-chain")
    sp.add_argument("--arms", type=int, help="arms per star (lattice default: from epsilon)")
    sp.add_argument("--attempts-per-pair", type=int, default=4)
    sp.add_argument("--rows", type=int, default=4)
    sp.add_argument("--cols", type=int, default=4)
    sp.add_argument("--boundary", choices=("open", "toroidal"), default="open")
    sp.add_argument("--timing", choices=protocol_sim.TIMING_MODELS, default="pool")
    sp.add_argument("--attempt-cap", type=int)
    sp.add_argument("--workers", type=int, default=1, help="worker processes (output unaffected)")
    sp.add_argument("--trace-csv", help="also write per-trial traces here")
    sp.add_argument("--spec", help="JSON run-spec document with flag values")
    _common(sp, trials=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("analytic", help="evaluate a closed-form cost")
    sp.add_argument(
        "formula",
        choices=("critical-length", "splice", "small-chain", "chain", "chain-exact", "lattice", "hex", "duan", "arms", "pair"),
    )
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--t-a", dest="t_a", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--n0", type=int, default=50)
    sp.add_argument("--N", type=int)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--lnterm", type=float, help="override ln(pairs/epsilon)")
    sp.add_argument("--d", type=int, default=4)
    sp.add_argument("--pairs", type=float)
    sp.add_argument("--attempts-per-pair", type=int, default=4)
    _common(sp, seed=False)
    sp.set_defaults(func=cmd_analytic)

    sp = sub.add_parser("sweep", help="comparison-table CSV (T1 vs T2)")
    sp.add_argument("which", choices=("figure3a", "figure3b", "custom"))
    sp.add_argument("--p", type=float, help="fixed p (sweep ln(2N/epsilon))")
    sp.add_argument("--lnterm", type=float, help="fixed ln(2N/epsilon) (sweep p)")
    sp.add_argument("--start", type=float)
    sp.add_argument("--stop", type=float)
    sp.add_argument("--step", type=float)
    sp.add_argument("--t-a", dest="t_a", type=float, default=1.0)
    _common(sp, seed=False)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="check the graph rules against the stabilizer oracle")
    sp.add_argument("--max-vertices", type=int, default=4)
    sp.add_argument("--rule", choices=("standard", "existing-edges"), default="standard")
    sp.add_argument("--stop-at-first", action="store_true")
    _common(sp)
    sp.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except GraphSchemaError as exc:
        print(f"error: invalid graph document: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except protocol_sim.CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
