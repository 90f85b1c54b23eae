from __future__ import annotations

import numpy as np

from ..diagnostics import operator_residual
from ..memory import GradientMemory
from .problem import DivergenceError, Problem, SolverConfig, SolverState


class Solver:
    """Common plumbing: step size, memory, counters and divergence checks.

    Subclasses implement ``step`` and keep ``state.z`` equal to the current
    primal estimate between steps.
    """

    name = "solver"

    def __init__(self, problem: Problem, config: SolverConfig | None = None):
        self.problem = problem
        self.model = problem.model
        self.config = config or SolverConfig()
        self.n, self.p = self.model.n, self.model.p
        self.rng = np.random.default_rng(self.config.seed)

    # -- hooks -----------------------------------------------------------------

    def step(self) -> None:
        raise NotImplementedError

    @property
    def epoch_length(self) -> int:
        """Steps per epoch (``n`` for stochastic methods)."""
        return self.n

    def point(self) -> np.ndarray:
        return self.state.z.copy()

    def residual(self) -> float:
        return operator_residual(self.state.y, self.problem, self.gamma)

    def objective(self) -> float:
        return self.problem.objective(self.point())

    @property
    def grad_evals(self) -> int:
        extra = self.state.memory.grad_evals if self.state.memory is not None else 0
        return self.state.grad_evals + extra

    @property
    def prox_evals(self) -> int:
        return self.state.prox_evals

    # -- helpers ---------------------------------------------------------------

    def default_step(self, d_max: float = 1.0) -> float:
        return self.model.smoothness_constants(d_max).step_size()

    def _make_memory(self, z0: np.ndarray) -> GradientMemory:
        cfg = self.config
        return GradientMemory(
            self.model, scheme=cfg.scheme, q=cfg.q, init=cfg.memory_init, z0=z0
        )

    def _check(self, values: np.ndarray) -> None:
        if values.size and not (
            np.all(np.isfinite(values))
            and np.max(np.abs(values)) <= self.config.divergence_limit
        ):
            raise DivergenceError(self.state.t)

    def epoch(self) -> None:
        for _ in range(self.epoch_length):
            self.step()

    def run_steps(self, count: int) -> None:
        for _ in range(count):
            self.step()
