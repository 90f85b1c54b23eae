"""Variance-reduced three operator splitting.

``VRTOS`` is the dense method, ``SparseVRTOS`` restricts every step to the
extended support of the sampled gradient, and ``ConsensusVRTOS`` handles any
number of block-separable penalties through ``k`` copies of the iterate tied
together by a consensus constraint.

All three share the step structure

    z = prox_h(y)
    v = grad psi_i(z) - alpha_i + mean(alpha) + grad omega(z)
    x = prox_g(2z - y - step * v)
    y = y + x - z

with ``z`` kept up to date at the end of each step rather than recomputed
at the start, which is what lets the sparse variants touch few coordinates.
"""
from __future__ import annotations

import numpy as np

from ..diagnostics import consensus_residual, operator_residual
from ..penalties import GroupLasso
from ..structure import (
    StructureError,
    compute_extended_supports,
    compute_reweighting,
    union_supports,
)
from .base import Solver
from .problem import Problem, SolverConfig, SolverState, initial_point, stack_copies

# penalties whose scaled prox needs a weight that is constant on each block
_UNIFORM_WEIGHT_PENALTIES = (GroupLasso,)


class VRTOS(Solver):
    name = "vrtos"

    def __init__(self, problem: Problem, config: SolverConfig | None = None):
        super().__init__(problem, config)
        self.g, self.h = problem.g, problem.h
        self.gamma = self.config.step_size or self.default_step()
        y = initial_point(self.config, self.p, self.gamma)
        z = self.h.prox(y, self.gamma)
        self.state = SolverState(y, z, self._make_memory(z), self.rng)
        self._X = self.model.dataset.features
        self.ergodic = None

    def track_ergodic(self):
        """Start averaging the ``x`` iterates (``x_0`` is the first step's)."""
        from ..diagnostics import ErgodicAverage

        self.ergodic = ErgodicAverage(self.p)
        return self.ergodic

    def step(self) -> None:
        st, gamma, l2 = self.state, self.gamma, self.model.l2
        i = int(st.rng.integers(self.n))
        y, z = st.y, st.z
        s, e = self._X.indptr[i], self._X.indptr[i + 1]
        idx, val = self._X.indices[s:e], self._X.data[s:e]
        c = self.model.scalar_derivative(i, float(val @ z[idx]))
        mem = st.memory

        v = mem.mean + l2 * z
        v[idx] += val * c - mem.alpha(i)
        mem.update(i, z, st.rng, deriv=c)

        x = self.g.prox(2 * z - y - gamma * v, gamma)
        # same as y + x - z, but exact when h = 0 (then y == z)
        y[:] = x + (y - z)
        st.z = self.h.prox(y, gamma)
        if self.ergodic is not None:
            self.ergodic.add(x)

        st.t += 1
        st.grad_evals += 1
        st.prox_evals += 2
        self._check(y)


class SparseVRTOS(Solver):
    """Steps touch only the blocks of ``g``'s partition that meet ``supp(a_i)``.

    ``g`` is applied blockwise with per-block weight ``d_B`` (the prox of
    ``sum_{B in T_i} d_B g_B``), the dense part of the estimator is reweighted
    by ``D``, and ``z = prox_h^{D^-1}(y)`` is refreshed only on the blocks of
    ``h`` that overlap the coordinates just written.
    """

    name = "vrtos-sparse"

    def __init__(self, problem: Problem, config: SolverConfig | None = None):
        super().__init__(problem, config)
        self.g, self.h = problem.g, problem.h
        for role, pen in (("g", self.g), ("h", self.h)):
            if pen.partition is None:
                raise StructureError(f"{role}={pen!r} is not block separable")
        X = self.model.dataset.features
        self.supports = compute_extended_supports(X, self.g.partition)
        self.reweighting = compute_reweighting(self.supports, self.g.partition, self.n)
        self.d = self.reweighting.weights
        if isinstance(self.h, _UNIFORM_WEIGHT_PENALTIES) and not self.h.partition.is_constant_on_blocks(self.d):
            raise StructureError(
                f"h={self.h!r} needs weights constant on its blocks; "
                "use the consensus formulation instead"
            )
        # blocks of h that overlap flatten(T_i)
        self.h_supports = compute_extended_supports(
            self.supports.coord_mask_matrix(), self.h.partition
        )
        d_max = self.reweighting.d_max
        self.gamma = self.config.step_size or self.default_step(d_max)
        y = initial_point(self.config, self.p, self.gamma, self.d)
        z = self.h.prox(y, self.gamma, self.d)
        self.state = SolverState(y, z, self._make_memory(z), self.rng)
        self._X = X
        self._scratch = np.zeros(self.p)
        # for auditing: the last sampled index and the coordinates it may write
        self.last_sample = -1
        self.last_touched = np.zeros(0, dtype=np.int64)

    def residual(self) -> float:
        return operator_residual(self.state.y, self.problem, self.gamma, self.d)

    def step(self) -> None:
        st, gamma, l2, d = self.state, self.gamma, self.model.l2, self.d
        i = int(st.rng.integers(self.n))
        y, z, mem = st.y, st.z, st.memory
        s, e = self._X.indptr[i], self._X.indptr[i + 1]
        idx, val = self._X.indices[s:e], self._X.data[s:e]
        c = self.model.scalar_derivative(i, float(val @ z[idx]))

        sup = self.supports
        cs = sup.coords(i)
        self.last_sample, self.last_touched = i, cs
        st.t += 1
        st.grad_evals += 1
        st.prox_evals += 2
        if not len(cs):
            mem.update(i, z, st.rng, deriv=c)
            return

        dc, zc = d[cs], z[cs]
        buf = self._scratch
        buf[cs] = dc * (mem.mean[cs] + l2 * zc)
        buf[idx] += val * c - mem.alpha(i)
        v = buf[cs]
        mem.update(i, z, st.rng, deriv=c)

        x = self.g.prox_segments(
            2 * zc - y[cs] - gamma * v, gamma, dc, sup.segments(i), sup.blocks(i)
        )
        y[cs] = x + (y[cs] - zc)

        hs = self.h_supports
        hc = hs.coords(i)
        z[hc] = self.h.prox_segments(y[hc], gamma, d[hc], hs.segments(i), hs.blocks(i))
        self._check(y[cs])


class ConsensusVRTOS(Solver):
    """Sparse VR-TOS on ``k`` copies ``Y_1..Y_k``, one per penalty.

    Copy ``j`` lives on the partition of ``g_j`` with its own reweighting
    ``D_j``; the consensus point is the ``D_j^-1``-weighted average of the
    copies and is recomputed only on the coordinates touched in a step.
    """

    name = "vrtos-k"

    def __init__(self, problem: Problem, config: SolverConfig | None = None):
        super().__init__(problem, config)
        self.k = problem.k
        if self.k < 1:
            raise ValueError("need at least one penalty")
        X = self.model.dataset.features
        self.supports, self.ds = [], []
        for j, pen in enumerate(problem.penalties):
            if pen.partition is None:
                raise StructureError(f"penalty {j} ({pen!r}) is not block separable")
            sup = compute_extended_supports(X, pen.partition)
            self.supports.append(sup)
            self.ds.append(compute_reweighting(sup, pen.partition, self.n).weights)
        self.D = np.array(self.ds)  # (k, p)
        self.inv_d = 1.0 / self.D
        self.inv_d_sum = self.inv_d.sum(axis=0)
        self.union_indptr, self.union_indices = union_supports(self.supports)
        d_max = float(self.D.max())
        # the enlarged smooth term (1/k) sum_j f(Y_j) is (L_f / k)-smooth
        self.gamma = self.config.step_size or self.k * self.default_step(d_max)
        y0 = initial_point(self.config, self.p, self.gamma)
        Y = stack_copies(y0, self.k)
        if self.config.u0 is not None:
            Y += self.gamma * self.D * np.asarray(self.config.u0, dtype=float)
        z = self._consensus(Y)
        self.state = SolverState(Y, z, self._make_memory(z), self.rng)
        self._X = X
        self._scratch = np.zeros(self.p)

    def _consensus(self, Y: np.ndarray) -> np.ndarray:
        return (self.inv_d * Y).sum(axis=0) / self.inv_d_sum

    def residual(self) -> float:
        return consensus_residual(self.state.y, self.problem, self.gamma, self.ds)

    def step(self) -> None:
        st, gamma, l2, k = self.state, self.gamma, self.model.l2, self.k
        i = int(st.rng.integers(self.n))
        Y, z, mem = st.y, st.z, st.memory
        s, e = self._X.indptr[i], self._X.indptr[i + 1]
        idx, val = self._X.indices[s:e], self._X.data[s:e]
        c = self.model.scalar_derivative(i, float(val @ z[idx]))
        grad_diff = val * c - mem.alpha(i)
        mean = mem.mean
        buf = self._scratch

        for j, pen in enumerate(self.problem.penalties):
            sup = self.supports[j]
            cs = sup.coords(i)
            if not len(cs):
                continue
            dc, zc = self.ds[j][cs], z[cs]
            buf[cs] = dc * (mean[cs] + l2 * zc)
            buf[idx] += grad_diff
            v = buf[cs] / k
            x = pen.prox_segments(
                2 * zc - Y[j, cs] - gamma * v, gamma, dc, sup.segments(i), sup.blocks(i)
            )
            Y[j, cs] = x + (Y[j, cs] - zc)
        mem.update(i, z, st.rng, deriv=c)

        S = self.union_indices[self.union_indptr[i] : self.union_indptr[i + 1]]
        z[S] = (self.inv_d[:, S] * Y[:, S]).sum(axis=0) / self.inv_d_sum[S]

        st.t += 1
        st.grad_evals += 1
        st.prox_evals += k
        self._check(z[S])
