"""LOD multiscale finite elements for the 2-D wave equation with rough coefficients."""

from .cli import ExperimentConfig, run_experiment
from .correctors import CorrectorBasis, assemble_multiscale, build_corrector_basis
from .problems import get_problem

__version__ = "0.1.0"

__all__ = [
    "CorrectorBasis",
    "ExperimentConfig",
    "assemble_multiscale",
    "build_corrector_basis",
    "get_problem",
    "run_experiment",
]
