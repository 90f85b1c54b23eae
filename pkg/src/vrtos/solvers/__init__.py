from .base import Solver
from .baselines import STOS, ProxSVRGBaseline, SAGABaseline, TOSFull
from .problem import (
    DivergenceError,
    Problem,
    RunResult,
    SolverConfig,
    SolverState,
)
from .run import SOLVERS, make_solver, reference_solution, run
from .vrtos import VRTOS, ConsensusVRTOS, SparseVRTOS

__all__ = [
    "Solver",
    "VRTOS",
    "SparseVRTOS",
    "ConsensusVRTOS",
    "TOSFull",
    "STOS",
    "SAGABaseline",
    "ProxSVRGBaseline",
    "Problem",
    "SolverConfig",
    "SolverState",
    "RunResult",
    "DivergenceError",
    "SOLVERS",
    "make_solver",
    "run",
    "reference_solution",
]
