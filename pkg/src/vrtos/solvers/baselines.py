"""Reference methods: full-gradient TOS, stochastic TOS, and prox-SAGA/SVRG
with an inner Douglas-Rachford loop for the prox of ``g + h``."""
from __future__ import annotations

import numpy as np

from ..diagnostics import consensus_residual, prox_gradient_residual
from ..memory import GradientMemory
from ..penalties import DouglasRachfordProx
from .base import Solver
from .problem import Problem, SolverConfig, SolverState, initial_point, stack_copies


class TOSFull(Solver):
    """Deterministic three operator splitting with the exact gradient.

    With more than two penalties it runs on ``k`` copies tied by an
    (unweighted) consensus constraint, the deterministic analogue of
    :class:`~vrtos.solvers.vrtos.ConsensusVRTOS`.
    """

    name = "tos"

    def __init__(self, problem: Problem, config: SolverConfig | None = None):
        super().__init__(problem, config)
        self.k = problem.k
        self.consensus = self.k > 2
        L_f = self.model.smoothness_constants().L_f
        default = (self.k if self.consensus else 1) / (3 * L_f)
        self.gamma = self.config.step_size or default
        y = initial_point(self.config, self.p, self.gamma)
        if self.consensus:
            Y = stack_copies(y, self.k)
            self.state = SolverState(Y, Y.mean(axis=0), None, self.rng)
        else:
            z = problem.h.prox(y, self.gamma)
            self.state = SolverState(y, z, None, self.rng)

    @property
    def epoch_length(self) -> int:
        return 1

    def residual(self) -> float:
        if self.consensus:
            return consensus_residual(self.state.y, self.problem, self.gamma)
        return super().residual()

    def step(self) -> None:
        st, gamma = self.state, self.gamma
        v = self.model.full_gradient(st.z)
        if self.consensus:
            Y, z = st.y, st.z
            v /= self.k
            for j, pen in enumerate(self.problem.penalties):
                Y[j] = pen.prox(2 * z - Y[j] - gamma * v, gamma) + (Y[j] - z)
            st.z = Y.mean(axis=0)
            st.prox_evals += self.k
        else:
            y, z = st.y, st.z
            x = self.problem.g.prox(2 * z - y - gamma * v, gamma)
            y[:] = x + (y - z)
            st.z = self.problem.h.prox(y, gamma)
            st.prox_evals += 2
        st.t += 1
        st.grad_evals += self.n
        self._check(st.y)


class STOS(Solver):
    """Stochastic TOS: plain sampled gradient, step ``gamma / (t + 1)``."""

    name = "stos"

    def __init__(self, problem: Problem, config: SolverConfig | None = None):
        super().__init__(problem, config)
        self.g, self.h = problem.g, problem.h
        self.gamma = self.config.step_size or self.default_step()
        y = initial_point(self.config, self.p, self.gamma)
        self.state = SolverState(y, self.h.prox(y, self.gamma), None, self.rng)
        self._X = self.model.dataset.features

    def current_step(self) -> float:
        if not self.config.decreasing_step:
            return self.gamma
        return self.gamma / (self.state.t + 1)

    def residual(self) -> float:
        # the splitting map changes with the step, so measure prox-gradient stationarity
        return prox_gradient_residual(self.state.z, self.problem, self.gamma)

    def step(self) -> None:
        st, l2 = self.state, self.model.l2
        gamma = self.current_step()
        y, z = st.y, st.z
        i = int(st.rng.integers(self.n))
        s, e = self._X.indptr[i], self._X.indptr[i + 1]
        idx, val = self._X.indices[s:e], self._X.data[s:e]
        c = self.model.scalar_derivative(i, float(val @ z[idx]))
        v = l2 * z
        v[idx] += val * c
        x = self.g.prox(2 * z - y - gamma * v, gamma)
        st.t += 1
        nxt = self.current_step()
        # y - z = gamma u; keep the dual u fixed across the step change
        y[:] = x + (nxt / gamma) * (y - z)
        st.z = self.h.prox(y, nxt)
        st.grad_evals += 1
        st.prox_evals += 2
        self._check(y)


class _ProxVRBaseline(Solver):
    """``x <- prox_{gamma (g + h)}(x - gamma v)`` with a variance-reduced ``v``.

    The prox of the sum is approximated by ``dr_iters`` warm-started
    Douglas-Rachford sweeps (two prox evaluations each). When one of the
    penalties is zero the other's prox is used directly.
    """

    scheme = "saga"

    def __init__(self, problem: Problem, config: SolverConfig | None = None):
        super().__init__(problem, config)
        self.g, self.h = problem.g, problem.h
        self.gamma = self.config.step_size or self.default_step()
        x = initial_point(self.config, self.p, self.gamma)
        self.state = SolverState(x, x, self._make_memory(x), self.rng)
        self.dr = DouglasRachfordProx(self.g, self.h, iters=self.config.dr_iters)
        self._X = self.model.dataset.features

    def _make_memory(self, z0):
        cfg = self.config
        return GradientMemory(self.model, scheme=self.scheme, q=cfg.q, init=cfg.memory_init, z0=z0)

    def _prox(self, w: np.ndarray) -> tuple[np.ndarray, int]:
        if self.h.is_zero:
            return self.g.prox(w, self.gamma), 1
        if self.g.is_zero:
            return self.h.prox(w, self.gamma), 1
        before = self.dr.n_prox
        x = self.dr(w, self.gamma)
        return x, self.dr.n_prox - before

    def residual(self) -> float:
        return prox_gradient_residual(self.state.z, self.problem, self.gamma)

    def step(self) -> None:
        st, gamma, l2 = self.state, self.gamma, self.model.l2
        x, mem = st.z, st.memory
        i = int(st.rng.integers(self.n))
        s, e = self._X.indptr[i], self._X.indptr[i + 1]
        idx, val = self._X.indices[s:e], self._X.data[s:e]
        c = self.model.scalar_derivative(i, float(val @ x[idx]))
        v = mem.mean + l2 * x
        v[idx] += val * c - mem.alpha(i)
        mem.update(i, x, st.rng, deriv=c)
        new, cost = self._prox(x - gamma * v)
        st.y = st.z = new
        st.t += 1
        st.grad_evals += 1
        st.prox_evals += cost
        self._check(new)


class SAGABaseline(_ProxVRBaseline):
    name = "saga"
    scheme = "saga"


class ProxSVRGBaseline(_ProxVRBaseline):
    name = "proxsvrg"
    scheme = "svrg"
