"""Monte Carlo engine certifying MBQC universality of the square-lattice spin-2 AKLT state.

Pipeline: sample POVM outcome configurations with their exact weights,
build the encoded graph-state graph over domains, thin it back to a planar
graph, and run site-percolation / finite-size-scaling analysis.  Everything
is validated against an exhaustive quantum oracle on tiny lattices.
"""

__version__ = "0.1.0"

from .lattice import Lattice, build_lattice, sublattice_sign
from .povm import PovmConfig, PovmOutcome, parse_config, random_config, serialize_config
from .weights import WeightResult, deformed_log_weight, log_weight

__all__ = [
    "Lattice",
    "build_lattice",
    "sublattice_sign",
    "PovmConfig",
    "PovmOutcome",
    "random_config",
    "serialize_config",
    "parse_config",
    "WeightResult",
    "log_weight",
    "deformed_log_weight",
    "__version__",
]
