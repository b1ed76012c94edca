"""
Pauli measurements as graph rewrites
====================================

Measuring one qubit of a graph state in the X, Y or Z basis leaves a graph
state on the remaining qubits.  This script applies the three graph rules,
checks them against an exact stabilizer calculation, and then uses them to
turn an armed chain into a star-shaped unit.
"""

from starcluster.graph_state import (
    build_armed_chain,
    measure_literal,
    measure_x,
    measure_y,
    measure_z,
    path_graph,
    physical_bases,
    reduce_chain_to_star,
    star_center,
    star_schedule,
)
from starcluster.stabilizer_oracle import lc_equivalent, oracle_after_measurements, oracle_graph, sweep_rules

# a three-qubit line 1-2-3; X on the middle qubit (special neighbor 1)
# fuses the ends into a single edge
g = path_graph([1, 2, 3])
print("X on 2:", measure_x(g, 2, 1).edges())
print("Y on 2:", measure_y(g, 2).edges())
print("Z on 2:", measure_z(g, 2).edges())

# reading the X rule as "toggle only edges that already exist" loses that edge;
# the stabilizer oracle tells the two readings apart
literal = measure_literal(g, "X", 2, 1)
exact = oracle_graph(g, "X", 2)
print("existing-edges reading:", literal.edges(), "| oracle agrees:", lc_equivalent(exact, literal.subgraph(literal.vertices)))
print("complete-pairs reading agrees:", lc_equivalent(exact, measure_x(g, 2, 1)))

# exhaustive check on every connected graph with up to 4 vertices
result = sweep_rules(4)
print(f"sweep: {result.graphs} graphs, {result.cases} cases, {result.failures} failures")

# an armed chain: main qubits 0..5, every other one carries a two-qubit arm
chain = build_armed_chain(3)
print("armed chain edges:", chain.edges())

# X on the unarmed main qubits and Z on the terminal qubit leave a star
star = reduce_chain_to_star(chain)
c = star_center(star)
print("star center", c, "with arms", sorted(star.neighbors(c)))

# the graph rules hold up to local Cliffords, so later measurements are
# expressed in rotated bases; in the lab frame the old hubs are X-measured
schedule = star_schedule(chain)
bases = physical_bases(chain, schedule)
print("graph-level schedule:", [(b, q) for b, q, _ in schedule])
print("lab-frame bases:     ", bases)
print("oracle agrees:", lc_equivalent(oracle_after_measurements(chain, bases), star.subgraph(star.vertices)))
