"""Kuramoto oscillators on Markov-switching graphs.

Two models on a weighted skeleton graph: oscillators carried by
independent random walkers (coupling through walker adjacency) and
oscillators on vertices with independently flickering edges.  The package
simulates the graph chains exactly, integrates the phase ODE along frozen
jump trajectories, integrates the deterministic averaged system, and
verifies the analysis machinery (energy, Hessian, spectral gaps,
equilibria) at desk scale.
"""

__version__ = "0.1.0"

from .dynamics import ModelParams
from .graphs import SkeletonGraph
from .integrate import IntegratorConfig, SampledPath
from .jumps import JumpTrajectory, RngSeed

__all__ = [
    "__version__",
    "IntegratorConfig",
    "JumpTrajectory",
    "ModelParams",
    "RngSeed",
    "SampledPath",
    "SkeletonGraph",
]
