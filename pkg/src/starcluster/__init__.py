"""Graph-state construction with probabilistic entangling gates.

Modules
-------
graph_state
    Labeled graphs and the graph rewrites for Pauli measurements.
stabilizer_oracle
    Stabilizer-tableau simulator used to verify the graph rules.
protocol_sim
    Monte Carlo of the chain, star and lattice construction protocols.
analytics
    Closed-form costs and the comparison tables.
cli
    ``starcluster`` command-line interface.
"""

from .graph_state import Graph, GraphError, GraphSchemaError

__all__ = ["Graph", "GraphError", "GraphSchemaError"]
__version__ = "0.1.0"
