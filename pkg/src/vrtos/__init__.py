"""Variance-reduced three operator splitting for penalized finite sums."""
from .data import LabeledDataset, ParseError, SparseRowMatrix, generate_synthetic, load_libsvm, parse_libsvm, save_libsvm, serialize_libsvm
from .memory import GradientMemory
from .model import SmoothModel, SmoothnessConstants
from .penalties import (
    L1,
    BlockPartition,
    FusedPairs,
    GroupLasso,
    OverlappingGroupLasso,
    Quadratic,
    ZeroPenalty,
)
from .solvers import (
    Problem,
    SolverConfig,
    make_solver,
    reference_solution,
    run,
)

__version__ = "0.1.0"
