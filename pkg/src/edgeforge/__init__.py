"""edgeforge: finite regular graphs with prescribed top adjacency eigenvalues.

Submodules
----------
graph
    Multigraph container, balls, girth, edge-list I/O.
random_models
    Configuration model, percolation, branching processes, local resampling.
trees
    Tree extensions, spectral targets, localization checks.
nonbacktracking
    Nonbacktracking operator, Perron value, Ihara-Bass map, cycle counts.
spectral
    Lanczos eigenpairs, percolation test vector, Friedman check.
greens
    Green's functions, finitization, Ward and Schur identities, local law.
pipeline
    Gadgets, R-patching and end-to-end synthesis.
"""

from .errors import (
    ConsistencyError,
    ConstructionError,
    DomainError,
    ForgeError,
    InputError,
    NumericError,
    ParameterError,
    ResourceError,
    SamplingError,
)
from .graph import MultiGraph, from_edge_list, read_edge_list, write_edge_list
from .random_models import RngSpec

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError",
    "ConstructionError",
    "DomainError",
    "ForgeError",
    "InputError",
    "MultiGraph",
    "NumericError",
    "ParameterError",
    "ResourceError",
    "RngSpec",
    "SamplingError",
    "from_edge_list",
    "read_edge_list",
    "write_edge_list",
]
