from __future__ import annotations

import time

from ..diagnostics import Trace, TraceRow, count_nnz
from .base import Solver
from .baselines import STOS, ProxSVRGBaseline, SAGABaseline, TOSFull
from .problem import DivergenceError, Problem, RunResult, SolverConfig
from .vrtos import VRTOS, ConsensusVRTOS, SparseVRTOS

SOLVERS: dict[str, type[Solver]] = {
    "vrtos": VRTOS,
    "vrtos-sparse": SparseVRTOS,
    "vrtos-k": ConsensusVRTOS,
    "tos": TOSFull,
    "stos": STOS,
    "saga": SAGABaseline,
    "proxsvrg": ProxSVRGBaseline,
}


def make_solver(kind: str, problem: Problem, config: SolverConfig | None = None) -> Solver:
    try:
        cls = SOLVERS[kind]
    except KeyError:
        raise ValueError(f"unknown solver {kind!r}; choose from {sorted(SOLVERS)}") from None
    return cls(problem, config)


def _row(solver: Solver, epoch: int, wall: float) -> TraceRow:
    x = solver.point()
    return TraceRow(
        epoch=epoch,
        grad_evals=solver.grad_evals,
        prox_evals=solver.prox_evals,
        wall_time=wall,
        objective=solver.problem.objective(x),
        residual=solver.residual(),
        nnz=count_nnz(x),
    )


def run(
    problem: Problem,
    solver: str | Solver,
    config: SolverConfig | None = None,
    callback=None,
) -> RunResult:
    """Run epochs until the residual drops below ``config.tol`` or the budget ends.

    One trace row is recorded before the first epoch and then every
    ``trace_every`` epochs (always including the last one). ``callback``, if
    given, is called as ``callback(solver, epoch)`` after each epoch.
    Wall time counts solver steps only, not the diagnostics.
    """
    if isinstance(solver, str):
        solver = make_solver(solver, problem, config)
    cfg = solver.config
    trace = Trace()
    trace.append(_row(solver, 0, 0.0))
    reason = "epoch budget"
    wall = 0.0
    for epoch in range(1, cfg.max_epochs + 1):
        start = time.perf_counter()
        try:
            solver.epoch()
        except DivergenceError as err:
            err.trace = trace
            raise
        wall += time.perf_counter() - start
        if callback is not None:
            callback(solver, epoch)
        last = epoch == cfg.max_epochs
        if epoch % cfg.trace_every == 0 or last:
            row = _row(solver, epoch, wall)
            trace.append(row)
            if row.residual <= cfg.tol:
                reason = "tolerance"
                break
    return RunResult(
        x=solver.point(),
        trace=trace,
        reason=reason,
        solver=solver.name,
        step_size=solver.gamma,
        state=solver.state,
    )


def reference_solution(
    problem: Problem, tol: float = 1e-12, max_iter: int = 200_000, step_size: float | None = None
) -> RunResult:
    """High-accuracy solve with full-gradient TOS (step ``1 / L_f`` by default).

    Deterministic iterations are cheap to monitor, so the residual is checked
    every 50 steps; the result's ``reason`` tells whether ``tol`` was reached.
    """
    L_f = problem.model.smoothness_constants().L_f
    k = problem.k if problem.k > 2 else 1
    gamma = step_size or k / L_f
    cfg = SolverConfig(step_size=gamma, max_epochs=max_iter, tol=tol, trace_every=50)
    return run(problem, TOSFull(problem, cfg))
