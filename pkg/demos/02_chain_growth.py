"""
Growing chains with probabilistic gates
=======================================

Each CZ attempt succeeds with probability p.  Short chains are doubled with
restart-on-failure; long chains are spliced end to end, losing two qubits
from each end per failed attempt.  This script compares Monte Carlo ensembles
with the recursions and with the large-n scaling laws.
"""

from functools import partial

import numpy as np

from starcluster import analytics
from starcluster.protocol_sim import (
    ProtocolParams,
    exact_chain_path,
    run_ensemble,
    run_traces,
    task_chain,
    task_small_chain,
    task_splice,
)

# doubling to four qubits at p = 1/2: the recursion gives 6 t_a and 10 attempts
stats = run_ensemble(partial(task_small_chain, level=1), 20_000, ProtocolParams(p=0.5, master_seed=1))
print(f"four-qubit chain: time {stats.time.mean:.3f} +/- {stats.time.sem:.3f}, "
      f"attempts {stats.attempts.mean:.3f} +/- {stats.attempts.sem:.3f}")
print("recursion:", analytics.small_chain_exact(1, 0.5))

# one splice of two 50-qubit chains at p = 1/4 (critical length 12)
stats = run_ensemble(partial(task_splice, n0=50), 20_000, ProtocolParams(p=0.25, master_seed=2))
exact, asym = analytics.expected_splice_length(50, 0.25)
print(f"splice: mean length {stats.length.mean:.2f}, finite sum {exact:.3f}, 2 n0 - n_c = {asym:.0f}")

# full chain builds: seed chains from doubling, then rounds of splicing
print(f"\n{'p':>5} {'n':>4} {'time':>10} {'recursion':>10} {'scaling law':>12} {'attempts':>12} {'recursion':>12} {'scaling law':>12}")
for p in (0.5, 0.25):
    for n in (50, 100, 200):
        traces = run_traces(partial(task_chain, n=n), 2000, ProtocolParams(p=p, master_seed=3))
        T = np.mean([t.time for t in traces])
        M = np.mean([t.attempts for t in traces])
        path = np.mean([exact_chain_path(t.info["rounds"], n, p) for t in traces], axis=0)
        law = analytics.chain_cost(n, p)
        print(f"{p:>5} {n:>4} {T:>10.1f} {path[0]:>10.1f} {law.time:>12.1f} {M:>12.0f} {path[1]:>12.0f} {law.attempts:>12.0f}")

# the scaling laws describe n >> n_c; at these sizes the recursion path is
# the relevant reference, and the attempt law is a loose upper bound
