"""Simulation and numerical checks for Hawkes processes on finite networks."""

__version__ = "0.1.0"

from . import kernels, volterra, graph, engine, meanfield, lattice, impulsion, stats  # noqa: E402
from .engine import EventLog, SystemSpec, simulate, simulate_counts  # noqa: E402
from .graph import Complete, Custom, LatticeBox  # noqa: E402
from .intensity import Linear, Lipschitz  # noqa: E402
from .kernels import Exponential, Rectangular, Tabulated  # noqa: E402

__all__ = ["Complete", "Custom", "EventLog", "Exponential", "LatticeBox", "Linear", "Lipschitz",
           "Rectangular", "SystemSpec", "Tabulated", "__version__", "engine", "graph", "impulsion",
           "kernels", "lattice", "meanfield", "simulate", "simulate_counts", "stats", "volterra"]
