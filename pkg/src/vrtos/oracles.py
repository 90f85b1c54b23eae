"""Brute-force proximal operators used to check the closed forms.

Every oracle minimizes ``phi(z) + sum_j (x_j - z_j)^2 / (2 gamma d_j)``
numerically, without using any structure of the solution. Minimization is
nested golden-section search: the objective restricted to the first
coordinate, with the others minimized out, is still convex, so the search
recurses one coordinate at a time. Everything is vectorized over a batch of
independent trials, which keeps 1000-trial checks fast.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .penalties import (
    consensus_projection,
    prox_fused_block2_scaled,
    prox_group_lasso_scaled,
    prox_l1_scaled,
)

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
# 90 halvings-by-phi shrink any bracket below float spacing. Nested searches
# need that: along a kink of the inner problem (e.g. the fused ridge z1 = z2)
# an inner value error e turns into an outer argmin error of order sqrt(e).
GOLDEN_ITERS = 90
# groups of three would cost 90^3 evaluations; their only kink is the origin,
# where the outer problem is kinked too, so fewer iterations suffice
GROUP_ITERS = 60


def golden_min(
    fun: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    iters: int = GOLDEN_ITERS,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize a batch of 1-D convex functions on ``[lo, hi]``.

    ``fun`` maps a ``(batch,)`` array of abscissae to ``(batch,)`` values.
    Returns ``(argmin, min)``.
    """
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        left = fc <= fd
        # keep [a, d] where the left probe is lower, else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _INVPHI * (b - a)
        new_d = a + _INVPHI * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        probe = np.where(left, c_next, d_next)
        fp = fun(probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_next, d_next
    t = 0.5 * (a + b)
    return t, fun(t)


def nested_min(
    objective: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    iters: int = GOLDEN_ITERS,
) -> np.ndarray:
    """Minimize convex ``objective(Z)`` over boxes ``[lo, hi]`` of shape ``(batch, m)``.

    ``objective`` maps ``(batch, m)`` points to ``(batch,)`` values.
    """
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    batch, m = lo.shape

    def solve(prefix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = prefix.shape[1]
        if k == m:
            return prefix, objective(prefix)

        def reduced(t):
            _, val = solve(np.column_stack([prefix, t]))
            return val

        t, _ = golden_min(reduced, lo[:, k], hi[:, k], iters)
        return solve(np.column_stack([prefix, t]))

    z, _ = solve(np.empty((batch, 0)))
    return z


def _bracket(x: np.ndarray, radius: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(radius, dtype=float)
    return x - r, x + r


def brute_prox(
    phi: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    gamma: np.ndarray,
    d: np.ndarray,
    radius: np.ndarray,
    iters: int = GOLDEN_ITERS,
) -> np.ndarray:
    """``argmin_z phi(z) + ||x - z||^2_{D^-1} / (2 gamma)`` for a batch.

    ``x`` and ``d`` have shape ``(batch, m)``, ``gamma`` shape ``(batch,)``;
    the search box is ``x +- radius``.
    """
    x = np.asarray(x, dtype=float)
    gamma = np.asarray(gamma, dtype=float)[:, None]
    d = np.asarray(d, dtype=float)

    def objective(Z):
        return phi(Z) + np.sum((x - Z) ** 2 / d, axis=1) / (2 * gamma[:, 0])

    lo, hi = _bracket(x, radius)
    return nested_min(objective, lo, hi, iters)


# -- per-penalty oracles ---------------------------------------------------------


def brute_prox_l1(x, gamma, d, strength=1.0):
    """Elementwise; ``x``, ``gamma`` and ``d`` broadcast against each other."""
    x, gamma, d = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, gamma, d)))
    shape = x.shape
    x, gamma, d = x.reshape(-1, 1), gamma.reshape(-1), d.reshape(-1, 1)
    radius = gamma[:, None] * d * strength + 1.0
    z = brute_prox(lambda Z: strength * np.abs(Z[:, 0]), x, gamma, d, radius)
    return z.reshape(shape)


def brute_prox_group(x, gamma, d, strength=1.0):
    """Prox of ``strength * ||z||_2`` for one group per row of ``x``."""
    x = np.asarray(x, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), x.shape)
    radius = np.asarray(gamma, dtype=float)[:, None] * d * strength + 1.0
    return brute_prox(
        lambda Z: strength * np.linalg.norm(Z, axis=1), x, gamma, d, radius, GROUP_ITERS
    )


def brute_prox_fused(x, gamma, d, strength=1.0):
    """Prox of ``strength * |z1 - z2|`` for one pair per row of ``x``."""
    x = np.asarray(x, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), x.shape)
    # a coordinate can travel up to the combined threshold when the pair fuses
    radius = np.asarray(gamma, dtype=float)[:, None] * d.sum(axis=1, keepdims=True) * strength + 1.0
    return brute_prox(
        lambda Z: strength * np.abs(Z[:, 0] - Z[:, 1]), x, gamma, d, radius
    )


def brute_consensus(X, d):
    """Consensus point of the rows of ``X`` (shape ``(batch, k)``, one coordinate).

    The indicator forces ``Z_1 = ... = Z_k = t``, so the search is over ``t``
    alone; ``gamma`` drops out of the argmin.
    """
    X = np.asarray(X, dtype=float)
    d = np.asarray(d, dtype=float)

    def objective(t):
        return np.sum((X - t[:, None]) ** 2 / d, axis=1)

    t, _ = golden_min(objective, X.min(axis=1) - 1.0, X.max(axis=1) + 1.0)
    return t


# -- randomized comparison --------------------------------------------------------

PENALTY_KINDS = ("l1", "group_lasso", "fused", "consensus")


def _random_case(rng: np.random.Generator, trials: int, m: int):
    x = rng.normal(scale=3.0, size=(trials, m))
    gamma = rng.uniform(0.01, 2.0, size=trials)
    d = rng.uniform(1.0, 10.0, size=(trials, m))
    return x, gamma, d


def prox_deviation(kind: str, trials: int = 1000, seed: int = 0) -> float:
    """Max infinity-norm gap between closed form and brute force over ``trials``."""
    rng = np.random.default_rng(seed)
    if kind == "l1":
        x, gamma, d = _random_case(rng, trials, 5)
        lam = rng.uniform(0.1, 2.0, size=trials)
        closed = np.array(
            [prox_l1_scaled(x[t], gamma[t] * lam[t], d[t]) for t in range(trials)]
        )
        # the strength is folded into the step
        brute = brute_prox_l1(x, (gamma * lam)[:, None], d)
        return float(np.max(np.abs(closed - brute)))

    if kind == "group_lasso":
        sizes = rng.integers(1, 4, size=trials)
        worst = 0.0
        for m in (1, 2, 3):
            sel = np.flatnonzero(sizes == m)
            if not len(sel):
                continue
            x, gamma, _ = _random_case(rng, len(sel), m)
            # the scaled prox is defined for weights constant on the group
            d = np.repeat(rng.uniform(1.0, 10.0, size=(len(sel), 1)), m, axis=1)
            lam = rng.uniform(0.1, 2.0, size=len(sel))
            closed = np.array(
                [
                    prox_group_lasso_scaled(x[t], gamma[t], d[t], [range(m)], lam[t])
                    for t in range(len(sel))
                ]
            )
            brute = brute_prox_group(x, gamma * lam, d)
            worst = max(worst, float(np.max(np.abs(closed - brute))))
        return worst

    if kind == "fused":
        x, gamma, d = _random_case(rng, trials, 2)
        lam = rng.uniform(0.1, 2.0, size=trials)
        z1, z2 = prox_fused_block2_scaled(
            (x[:, 0], x[:, 1]), gamma * lam, (1.0 / d[:, 0], 1.0 / d[:, 1])
        )
        brute = brute_prox_fused(x, gamma * lam, d)
        return float(np.max(np.abs(np.column_stack([z1, z2]) - brute)))

    if kind == "consensus":
        k = rng.integers(2, 5, size=trials)
        worst = 0.0
        for kk in np.unique(k):
            sel = int(np.sum(k == kk))
            X = rng.normal(scale=3.0, size=(sel, kk))
            d = rng.uniform(1.0, 10.0, size=(sel, kk))
            closed = np.array(
                [consensus_projection(X[t][:, None], 1.0 / d[t][:, None])[0] for t in range(sel)]
            )
            brute = brute_consensus(X, d)
            worst = max(worst, float(np.max(np.abs(closed - brute))))
        return worst

    raise ValueError(f"unknown penalty kind {kind!r}; choose from {PENALTY_KINDS}")
