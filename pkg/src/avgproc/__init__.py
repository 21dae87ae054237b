"""Numerical laboratory for the averaging process on finite graphs.

Modules
-------
graph_core       graph families (hypercube, complete bipartite, complete)
avg_sim          event-driven simulator and the chunk comparison process
rw_duality       random-walk duality: kernels, coupled walks, noise term
bipartite_exact  lumped five-state chain and cutoff constants
ehrenfest_chain  birth-death spectra, hitting times, Hardy constants
entropy_tools    relative entropy, production, decay certificates
experiment_cli   CSV-emitting command line harness
"""
# experiment_cli is deliberately not imported here so that
# `python3 -m avgproc.experiment_cli` does not re-import it under runpy
from . import (
    avg_sim,
    bipartite_exact,
    ehrenfest_chain,
    entropy_tools,
    graph_core,
    rw_duality,
)
from .errors import NumericalError
from .graph_core import complete, complete_bipartite, hypercube

__all__ = [
    "avg_sim",
    "bipartite_exact",
    "ehrenfest_chain",
    "entropy_tools",
    "graph_core",
    "rw_duality",
    "NumericalError",
    "complete",
    "complete_bipartite",
    "hypercube",
]

__version__ = "0.1.0"
