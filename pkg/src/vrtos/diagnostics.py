"""Convergence measurements and per-epoch traces.

All functions here are observers: they never mutate solver state.
"""
from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .penalties import DouglasRachfordProx, Penalty, consensus_projection

if TYPE_CHECKING:
    from .memory import GradientMemory
    from .model import SmoothModel
    from .solvers.problem import Problem

NNZ_THRESHOLD = 1e-10
TRACE_COLUMNS = ("epoch", "grad_evals", "prox_evals", "wall_time", "objective", "residual", "nnz")


def primal_objective(x: np.ndarray, problem: "Problem") -> float:
    """``f(x) + sum of penalty values`` at a single point."""
    return problem.objective(x)


def operator_residual(
    y: np.ndarray,
    problem: "Problem",
    gamma: float,
    d: np.ndarray | None = None,
) -> float:
    """``||y - G(y)||`` for the (scaled) three operator splitting map.

    ``G(y) = y - z + prox_g(2z - y - gamma D grad f(z))`` with
    ``z = prox_h(y)``, both proxes in the ``D^-1`` metric.
    """
    g, h = problem.g, problem.h
    z = h.prox(y, gamma, d)
    grad = problem.model.full_gradient(z)
    if d is not None:
        grad = d * grad
    x = g.prox(2 * z - y - gamma * grad, gamma, d)
    return float(np.linalg.norm(x - z))


def consensus_residual(
    Y: np.ndarray,
    problem: "Problem",
    gamma: float,
    ds: Sequence[np.ndarray] | None = None,
) -> float:
    """Operator residual of the k-copy reformulation at the stacked point ``Y``.

    The smooth part in the enlarged space is ``(1/k) sum_j f(Y_j)``, so each
    copy sees ``grad f(z) / k`` at the consensus point ``z``.
    """
    k = len(problem.penalties)
    if ds is None:
        ds = [np.ones(Y.shape[1])] * k
    z = consensus_projection(Y, np.array([1.0 / d for d in ds]))
    grad = problem.model.full_gradient(z) / k
    sq = 0.0
    for j, pen in enumerate(problem.penalties):
        xj = pen.prox(2 * z - Y[j] - gamma * ds[j] * grad, gamma, ds[j])
        sq += float(np.sum((xj - z) ** 2))
    return float(np.sqrt(sq))


def prox_gradient_residual(
    x: np.ndarray, problem: "Problem", gamma: float, iters: int = 300
) -> float:
    """``||x - prox_{gamma (g + h)}(x - gamma grad f(x))||``; the prox is computed by DR."""
    prox = DouglasRachfordProx(problem.g, problem.h, iters=iters, warm_start=False)
    w = x - gamma * problem.model.full_gradient(x)
    return float(np.linalg.norm(x - prox(w, gamma)))


def dual_iterate(
    y: np.ndarray, z: np.ndarray, gamma: float, d: np.ndarray | None = None
) -> np.ndarray:
    """``u = D^-1 (y - z) / gamma``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    u = (np.asarray(y) - np.asarray(z)) / gamma
    return u if d is None else u / d


def estimator_variance(
    model: "SmoothModel", memory: "GradientMemory", z: np.ndarray
) -> float:
    """Exact ``E_i ||v_i - grad f(z)||^2`` by enumerating every sample.

    ``v_i = grad psi_i(z) - alpha_i + mean(alpha) + grad omega(z)``.
    """
    A = model.A
    c = model.derivatives(A @ z)
    # rows of R are grad psi_i(z) - alpha_i
    R = (A.multiply(c[:, None]) - memory.as_matrix()).tocsr()
    shift = memory.mean - A.T @ c / model.n
    row_sq = np.asarray(R.multiply(R).sum(axis=1)).ravel()
    mean_row = np.asarray(R.mean(axis=0)).ravel()
    return float(row_sq.mean() + 2.0 * mean_row @ shift + shift @ shift)


def count_nnz(x: np.ndarray, threshold: float = NNZ_THRESHOLD) -> int:
    return int(np.count_nonzero(np.abs(x) > threshold))


class ErgodicAverage:
    """Running mean ``(x_0 + ... + x_t) / (t + 1)`` kept incrementally."""

    def __init__(self, p: int):
        self.mean = np.zeros(p)
        self.count = 0

    def add(self, x: np.ndarray) -> None:
        self.count += 1
        self.mean += (x - self.mean) / self.count


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    grad_evals: int
    prox_evals: int
    wall_time: float
    objective: float
    residual: float
    nnz: int


@dataclass
class Trace:
    rows: list[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        if self.rows:
            last = self.rows[-1]
            if row.epoch <= last.epoch:
                raise ValueError("trace epochs must increase")
            if row.grad_evals < last.grad_evals or row.prox_evals < last.prox_evals:
                raise ValueError("oracle counters must not decrease")
        if not np.isfinite(row.objective):
            raise ValueError("non-finite objective in trace")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, k):
        return self.rows[k]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in self.rows:
            writer.writerow(
                [repr(v) if isinstance(v, float) else v for v in astuple(row)]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        trace = cls()
        for rec in reader:
            trace.rows.append(
                TraceRow(
                    int(rec["epoch"]),
                    int(rec["grad_evals"]),
                    int(rec["prox_evals"]),
                    float(rec["wall_time"]),
                    float(rec["objective"]),
                    float(rec["residual"]),
                    int(rec["nnz"]),
                )
            )
        return trace


def first_crossing(values: np.ndarray, counts: np.ndarray, level: float) -> float:
    """Counter value at the first trace row where ``values <= level`` (inf if never)."""
    hit = np.flatnonzero(np.asarray(values) <= level)
    return float(counts[hit[0]]) if len(hit) else float("inf")


def penalties_value(x: np.ndarray, penalties: Sequence[Penalty]) -> float:
    return float(sum(pen.value(x) for pen in penalties))
