"""Sub-Poisson point processes, random geometric graphs and percolation
diagnostics for wireless-network models."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BracketingError,
    ConfigError,
    GeometryError,
    InfeasibleError,
    IntegrationError,
    ParameterError,
    PreconditionError,
    SubpercError,
)
from .point_processes import (  # noqa: E402
    Lattice,
    LatticeGenerator,
    PerturbedLatticeGenerator,
    PointPattern,
    PoissonGenerator,
    ReplicaLaw,
    Window,
    sample_homogeneous_poisson,
    sample_perturbed_lattice,
    triangular_lattice_pattern,
)
from .spatial_graphs import (  # noqa: E402
    build_carrier_sense,
    build_gilbert,
    connected_components,
)
from .percolation import ScanConfig, estimate_critical_radius  # noqa: E402
from .sinr import Attenuation, SinrParams, build_sinr_graph, estimate_gamma_c  # noqa: E402
from .diagnostics import CountDistribution, check_convex_order  # noqa: E402

__all__ = [
    "__version__",
    "Attenuation",
    "BracketingError",
    "ConfigError",
    "CountDistribution",
    "GeometryError",
    "InfeasibleError",
    "IntegrationError",
    "Lattice",
    "LatticeGenerator",
    "ParameterError",
    "PerturbedLatticeGenerator",
    "PointPattern",
    "PoissonGenerator",
    "PreconditionError",
    "ReplicaLaw",
    "ScanConfig",
    "SinrParams",
    "SubpercError",
    "Window",
    "build_carrier_sense",
    "build_gilbert",
    "build_sinr_graph",
    "check_convex_order",
    "connected_components",
    "estimate_critical_radius",
    "estimate_gamma_c",
    "sample_homogeneous_poisson",
    "sample_perturbed_lattice",
    "triangular_lattice_pattern",
]
