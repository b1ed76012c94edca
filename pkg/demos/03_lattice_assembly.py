"""
Assembling a square lattice from star units
===========================================

Every site gets a star with n_l arms.  Neighboring stars are connected in one
parallel round with n_l/4 attempts per pair; the first success is kept and
contracted into a direct edge, every other arm is measured away.
"""

from functools import partial

import numpy as np

from starcluster import analytics
from starcluster.graph_state import Graph
from starcluster.protocol_sim import LayoutSpec, ProtocolParams, run_traces, sim_assemble, task_assemble

N, eps, p = 16, 0.1, 0.25
n_l = analytics.arms_required(N, eps, p)
p_c = analytics.pair_success(p, n_l // 4)
print(f"arms per star: {n_l}, pair success {p_c:.6f}, all 24 pairs {analytics.assembly_success(p_c, 24):.4f}")

layout = LayoutSpec("square", 4, 4)
traces = run_traces(partial(task_assemble, layout=layout, n_l=n_l), 500, ProtocolParams(p=p, epsilon=eps, master_seed=5))
print(f"simulated success rate: {np.mean([t.succeeded for t in traces]):.3f} over {len(traces)} trials")
print(f"mean critical-path time {np.mean([t.time for t in traces]):.1f} t_a, "
      f"mean attempts {np.mean([t.attempts for t in traces]):.0f}")

# with deterministic gates the assembled graph is exactly the lattice
g, trace, ok = sim_assemble(layout, ProtocolParams(p=1.0, topology=True), n_l=8)
print("p = 1 gives the 4x4 lattice:", g == Graph(range(16), layout.site_edges()))

# at p = 0.3 with two attempts per pair some bonds can be missing
g, trace, ok = sim_assemble(layout, ProtocolParams(p=0.3, topology=True, master_seed=11), n_l=8)
missing = sorted(set(layout.site_edges()) - set(g.edges()))
print(f"p = 0.3, two attempts per pair: {trace.info['pairs_connected']}/24 bonds, missing {missing}")

# the honeycomb variant uses a brick-wall layout with coordination three
hexa = LayoutSpec("hexagonal", 4, 4)
print("hexagonal arms:", analytics.arms_required(N, eps, p, d=3), "bonds:", len(hexa.site_edges()))
