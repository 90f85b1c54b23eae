from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..diagnostics import Trace
from ..memory import GradientMemory
from ..model import SmoothModel
from ..penalties import Penalty, ZeroPenalty


class DivergenceError(ArithmeticError):
    """Raised when an iterate becomes non-finite or blows up."""

    def __init__(self, step: int, message: str = "iterate diverged"):
        self.step = step
        self.trace: Trace | None = None
        super().__init__(f"{message} at step {step}")


@dataclass
class Problem:
    """``min f(x) + sum_j g_j(x)``.

    With two penalties they play the roles of ``g`` and ``h``. ``objective_terms``
    optionally replaces ``penalties`` when evaluating the objective, e.g. an
    overlapping group lasso whose optimization goes through a split.
    """

    model: SmoothModel
    penalties: list[Penalty] = field(default_factory=list)
    objective_terms: list[Penalty] | None = None

    def __post_init__(self):
        self.penalties = list(self.penalties)
        for pen in self.penalties:
            if pen.p != self.model.p:
                raise ValueError(f"{pen!r} has dimension {pen.p}, model has {self.model.p}")

    @property
    def p(self) -> int:
        return self.model.p

    @property
    def k(self) -> int:
        return len(self.penalties)

    @property
    def g(self) -> Penalty:
        return self.penalties[0] if self.penalties else ZeroPenalty(self.p)

    @property
    def h(self) -> Penalty:
        if self.k > 2:
            raise ValueError("more than two penalties: use the consensus formulation")
        return self.penalties[1] if self.k == 2 else ZeroPenalty(self.p)

    def objective(self, x: np.ndarray) -> float:
        terms = self.objective_terms if self.objective_terms is not None else self.penalties
        return self.model.smooth_value(x) + float(sum(t.value(x) for t in terms))


@dataclass
class SolverConfig:
    step_size: float | None = None  # default 1 / (3 L_f)
    scheme: str = "saga"  # memory update: "saga" or "svrg"
    q: float = 1.0  # svrg refresh rate, probability q / n per step
    max_epochs: int = 50
    tol: float = 1e-10  # on the operator residual
    seed: int = 0
    trace_every: int = 1
    memory_init: str = "zero"  # or "gradient"
    x0: np.ndarray | None = None
    u0: np.ndarray | None = None
    dr_iters: int = 10  # inner Douglas-Rachford sweeps for the saga/proxsvrg baselines
    decreasing_step: bool = True  # stochastic TOS only
    divergence_limit: float = 1e12

    def __post_init__(self):
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be nonnegative")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")


@dataclass
class SolverState:
    y: np.ndarray  # (p,) or (k, p) for the consensus formulation
    z: np.ndarray
    memory: GradientMemory | None
    rng: np.random.Generator
    t: int = 0
    grad_evals: int = 0
    prox_evals: int = 0


@dataclass
class RunResult:
    x: np.ndarray
    trace: Trace
    reason: str  # "tolerance" or "epoch budget"
    solver: str
    step_size: float
    state: SolverState | None = None

    @property
    def objective(self) -> float:
        return self.trace[-1].objective


def initial_point(config: SolverConfig, p: int, gamma: float, d=None) -> np.ndarray:
    """``y0 = x0 + gamma D u0`` (``u0 = 0`` by default)."""
    y = np.zeros(p) if config.x0 is None else np.array(config.x0, dtype=float)
    if config.u0 is not None:
        u = np.asarray(config.u0, dtype=float)
        y = y + gamma * (u if d is None else d * u)
    return y


def stack_copies(y: np.ndarray, k: int) -> np.ndarray:
    return np.tile(np.asarray(y, dtype=float), (k, 1))


def as_list(x: Penalty | Sequence[Penalty]) -> list[Penalty]:
    return [x] if isinstance(x, Penalty) else list(x)
