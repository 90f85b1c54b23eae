"""Proximal terms.

Every penalty exposes ``value`` and a diagonally scaled proximal operator

    scaled_prox(x, step, d) = argmin_z  phi(z) + ||x - z||^2_{D^-1} / (2 step)

with ``D = diag(d)``, ``d >= 1``. With ``d = 1`` this is the plain prox.
Block-separable penalties also carry a :class:`BlockPartition` and can apply
their prox on any subset of blocks (``prox_segments``), which is what the
sparse solvers need. The penalty strength lives inside the penalty object.
"""
from __future__ import annotations

import json
import os
from typing import Sequence

import numpy as np


class BlockPartition:
    """Ordered disjoint nonempty blocks covering ``{0, ..., p-1}``."""

    def __init__(self, blocks: Sequence[Sequence[int]], p: int):
        blocks = [np.asarray(b, dtype=np.int64) for b in blocks]
        if any(len(b) == 0 for b in blocks):
            raise ValueError("empty block")
        sizes = np.array([len(b) for b in blocks], dtype=np.int64)
        indices = np.concatenate(blocks) if blocks else np.zeros(0, np.int64)
        if len(indices) and (indices.min() < 0 or indices.max() >= p):
            raise ValueError("block index out of range")
        counts = np.bincount(indices, minlength=p)
        if np.any(counts > 1):
            raise ValueError(f"blocks overlap at coordinate {int(np.argmax(counts > 1))}")
        if np.any(counts == 0):
            raise ValueError(f"coordinate {int(np.argmin(counts))} not covered by any block")
        self.p = int(p)
        self.sizes = sizes
        self.indptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.indices = indices
        self.block_of = np.empty(p, dtype=np.int64)
        self.block_of[indices] = np.repeat(np.arange(len(blocks)), sizes)

    @classmethod
    def singletons(cls, p: int) -> "BlockPartition":
        return cls([[j] for j in range(p)], p)

    @property
    def n_blocks(self) -> int:
        return len(self.sizes)

    def block(self, b: int) -> np.ndarray:
        return self.indices[self.indptr[b] : self.indptr[b + 1]]

    def __iter__(self):
        return (self.block(b) for b in range(self.n_blocks))

    def __len__(self) -> int:
        return self.n_blocks

    def is_constant_on_blocks(self, w: np.ndarray) -> bool:
        first = w[self.indices[self.indptr[:-1]]]
        return bool(np.all(w[self.indices] == np.repeat(first, self.sizes)))


def _complete_partition(groups: Sequence[Sequence[int]], p: int):
    """Partition made of ``groups`` plus singleton fillers for uncovered coordinates.

    Returns the partition and a per-block flag telling which blocks are real
    groups (fillers carry zero penalty).
    """
    covered = np.zeros(p, dtype=bool)
    for g in groups:
        covered[np.asarray(g, dtype=np.int64)] = True
    fillers = [[j] for j in np.flatnonzero(~covered)]
    part = BlockPartition(list(groups) + fillers, p)
    active = np.zeros(part.n_blocks, dtype=bool)
    active[: len(groups)] = True
    return part, active


def _segment_lengths(starts: np.ndarray, total: int) -> np.ndarray:
    return np.diff(np.append(starts, total))


class Penalty:
    """Base class; subclasses override ``value`` and ``prox_segments``."""

    partition: BlockPartition | None = None
    p: int

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def prox_segments(
        self,
        v: np.ndarray,
        step: float,
        d: np.ndarray,
        starts: np.ndarray,
        blocks: np.ndarray,
    ) -> np.ndarray:
        """Scaled prox on a concatenation of whole blocks.

        ``v`` and ``d`` hold the coordinates of ``blocks`` laid out block after
        block, ``starts`` the offset of each block inside ``v``.
        """
        raise NotImplementedError

    def prox(self, x: np.ndarray, step: float, d: np.ndarray | None = None) -> np.ndarray:
        if self.partition is None:
            raise NotImplementedError(f"{type(self).__name__} has no closed-form prox")
        x = np.asarray(x, dtype=float)
        if d is None:
            d = np.ones_like(x)
        part = self.partition
        out = np.empty_like(x)
        out[part.indices] = self.prox_segments(
            x[part.indices],
            step,
            d[part.indices],
            part.indptr[:-1],
            np.arange(part.n_blocks),
        )
        return out

    scaled_prox = prox

    @property
    def is_zero(self) -> bool:
        return False


class ZeroPenalty(Penalty):
    def __init__(self, p: int, partition: BlockPartition | None = None):
        self.p = p
        self.partition = partition if partition is not None else BlockPartition.singletons(p)

    def value(self, x):
        return 0.0

    def prox_segments(self, v, step, d, starts, blocks):
        return v.copy()

    def prox(self, x, step, d=None):
        return np.array(x, dtype=float, copy=True)

    @property
    def is_zero(self):
        return True

    def __repr__(self):
        return f"ZeroPenalty(p={self.p})"


class L1(Penalty):
    def __init__(self, p: int, strength: float = 1.0):
        if strength < 0:
            raise ValueError("strength must be nonnegative")
        self.p = p
        self.strength = float(strength)
        self.partition = BlockPartition.singletons(p)

    def value(self, x):
        return self.strength * float(np.abs(x).sum())

    def prox_segments(self, v, step, d, starts, blocks):
        return prox_l1_scaled(v, step * self.strength, d)

    def prox(self, x, step, d=None):
        x = np.asarray(x, dtype=float)
        return prox_l1_scaled(x, step * self.strength, np.ones_like(x) if d is None else d)

    def __repr__(self):
        return f"L1(p={self.p}, strength={self.strength})"


class Quadratic(Penalty):
    """``(strength / 2) ||x||^2``, a smooth proximal term."""

    def __init__(self, p: int, strength: float = 1.0):
        if strength < 0:
            raise ValueError("strength must be nonnegative")
        self.p = p
        self.strength = float(strength)
        self.partition = BlockPartition.singletons(p)

    def value(self, x):
        return 0.5 * self.strength * float(x @ x)

    def prox_segments(self, v, step, d, starts, blocks):
        return v / (1.0 + step * self.strength * d)

    def prox(self, x, step, d=None):
        x = np.asarray(x, dtype=float)
        return x / (1.0 + step * self.strength * (1.0 if d is None else d))

    def __repr__(self):
        return f"Quadratic(p={self.p}, strength={self.strength})"


class GroupLasso(Penalty):
    """``strength * sum_g ||x_g||_2`` over disjoint groups."""

    def __init__(self, groups: Sequence[Sequence[int]], p: int, strength: float = 1.0):
        if strength < 0:
            raise ValueError("strength must be nonnegative")
        self.p = p
        self.strength = float(strength)
        self.groups = [np.asarray(g, dtype=np.int64) for g in groups]
        try:
            self.partition, self.active = _complete_partition(self.groups, p)
        except ValueError as exc:
            raise ValueError(
                f"group lasso needs disjoint groups ({exc}); "
                "split overlapping groups into disjoint penalties instead"
            ) from None

    def value(self, x):
        return self.strength * float(sum(np.linalg.norm(x[g]) for g in self.groups))

    def prox_segments(self, v, step, d, starts, blocks):
        lengths = _segment_lengths(starts, len(v))
        norms = np.sqrt(np.add.reduceat(v * v, starts)) if len(v) else np.zeros(0)
        thresh = step * self.strength * d[starts]
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > thresh, 1.0 - thresh / norms, 0.0)
        scale = np.where(self.active[blocks], scale, 1.0)
        return v * np.repeat(scale, lengths)

    def __repr__(self):
        return f"GroupLasso(p={self.p}, n_groups={len(self.groups)}, strength={self.strength})"


class FusedPairs(Penalty):
    """``strength * sum_{(i, j)} |x_i - x_j|`` over disjoint coordinate pairs."""

    def __init__(self, pairs: Sequence[Sequence[int]], p: int, strength: float = 1.0):
        if strength < 0:
            raise ValueError("strength must be nonnegative")
        if any(len(pr) != 2 for pr in pairs):
            raise ValueError("every block must be a pair")
        self.p = p
        self.strength = float(strength)
        self.pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        self.partition, self.active = _complete_partition(self.pairs.tolist(), p)

    def value(self, x):
        if not len(self.pairs):
            return 0.0
        return self.strength * float(np.abs(x[self.pairs[:, 0]] - x[self.pairs[:, 1]]).sum())

    def prox_segments(self, v, step, d, starts, blocks):
        out = v.copy()
        s = starts[self.active[blocks]]
        if len(s):
            z1, z2 = prox_fused_block2_scaled(
                (v[s], v[s + 1]), step * self.strength, (1.0 / d[s], 1.0 / d[s + 1])
            )
            out[s] = z1
            out[s + 1] = z2
        return out

    def __repr__(self):
        return f"FusedPairs(p={self.p}, n_pairs={len(self.pairs)}, strength={self.strength})"


class OverlappingGroupLasso(Penalty):
    """``strength * sum_g ||x_g||_2`` over possibly overlapping groups.

    Not block separable; only its value is available. Use :meth:`split` to get
    two disjoint group-lasso penalties whose sum is this penalty.
    """

    partition = None

    def __init__(self, groups: Sequence[Sequence[int]], p: int, strength: float = 1.0):
        self.p = p
        self.strength = float(strength)
        self.groups = [np.asarray(g, dtype=np.int64) for g in groups]

    def value(self, x):
        return value_overlapping_group_lasso(x, self.groups, self.strength)

    def split(self) -> tuple[GroupLasso, GroupLasso]:
        first, second = split_alternating_groups(self.groups, self.p)
        return (
            GroupLasso(first, self.p, self.strength),
            GroupLasso(second, self.p, self.strength),
        )

    def __repr__(self):
        return f"OverlappingGroupLasso(p={self.p}, n_groups={len(self.groups)}, strength={self.strength})"


# -- closed forms ------------------------------------------------------------


def prox_l1_scaled(x: np.ndarray, gamma: float, d: np.ndarray) -> np.ndarray:
    """Soft-thresholding of ``x_j`` at ``d_j * gamma``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - gamma * np.asarray(d, dtype=float), 0.0)


def prox_group_lasso_scaled(
    x: np.ndarray,
    gamma: float,
    d: np.ndarray,
    groups: BlockPartition | Sequence[Sequence[int]],
    strength: float = 1.0,
) -> np.ndarray:
    """Block soft-thresholding; coordinates outside every group are kept.

    ``d`` must be constant inside each group (its first entry is used).
    """
    x = np.asarray(x, dtype=float)
    if not isinstance(groups, BlockPartition):
        groups = list(groups)
    return GroupLasso(list(groups), len(x), strength).prox(x, gamma, np.asarray(d, dtype=float))


def prox_fused_block2_scaled(x, gamma, q):
    """Prox of ``|z1 - z2|`` in the metric ``diag(q1, q2)`` (vectorized over pairs).

    Solves ``argmin |z1 - z2| + sum_j q_j (x_j - z_j)^2 / (2 gamma)``; with
    ``q = 1 / d`` this is the ``D^-1``-scaled prox.
    """
    x1, x2 = (np.asarray(a, dtype=float) for a in x)
    q1, q2 = (np.asarray(a, dtype=float) for a in q)
    down1, up2 = x1 - gamma / q1, x2 + gamma / q2
    up1, down2 = x1 + gamma / q1, x2 - gamma / q2
    mean = (q1 * x1 + q2 * x2) / (q1 + q2)
    case1 = down1 >= up2
    case2 = up1 <= down2
    z1 = np.where(case1, down1, np.where(case2, up1, mean))
    z2 = np.where(case1, up2, np.where(case2, down2, mean))
    return z1, z2


def fused_lasso_split(p: int, strength: float = 1.0) -> tuple[FusedPairs, FusedPairs]:
    """Split 1-D total variation into two penalties with blocks of size two.

    The first term couples ``(0,1), (2,3), ...``, the second ``(1,2), (3,4), ...``.
    """
    if p < 2:
        raise ValueError("fused lasso needs p >= 2")
    r, s = (p - 1) // 2, p // 2
    first = [(2 * i, 2 * i + 1) for i in range(s)]
    second = [(2 * i + 1, 2 * i + 2) for i in range(r)]
    return FusedPairs(first, p, strength), FusedPairs(second, p, strength)


def total_variation(x: np.ndarray) -> float:
    return float(np.abs(np.diff(x)).sum())


def consensus_projection(X: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Weighted per-coordinate average ``sum_i a_ij X_ij / sum_i a_ij``.

    This is the scaled projection onto ``{X_1 = ... = X_k}``; broadcast the
    result with ``np.broadcast_to(z, X.shape)`` to get the projected matrix.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = np.broadcast_to(np.asarray(a, dtype=float), X.shape)
    if np.any(a <= 0):
        raise ValueError("consensus weights must be strictly positive")
    return (a * X).sum(axis=0) / a.sum(axis=0)


def value_overlapping_group_lasso(x: np.ndarray, groups, strength: float = 1.0) -> float:
    return strength * float(sum(np.linalg.norm(x[np.asarray(g)]) for g in groups))


def overlapping_groups(p: int, size: int = 10, overlap: int = 2) -> list[np.ndarray]:
    """Groups of ``size`` consecutive coordinates, successive ones sharing ``overlap``."""
    if not 0 <= overlap < size:
        raise ValueError("need 0 <= overlap < size")
    stride = size - overlap
    groups = []
    start = 0
    while True:
        groups.append(np.arange(start, min(start + size, p)))
        if start + size >= p:
            break
        start += stride
    return groups


def split_alternating_groups(groups, p: int):
    """Alternate groups between two families; each family must be disjoint."""
    first = [np.asarray(g) for g in groups[0::2]]
    second = [np.asarray(g) for g in groups[1::2]]
    for fam in (first, second):
        if fam:
            counts = np.bincount(np.concatenate(fam), minlength=p)
            if np.any(counts > 1):
                raise ValueError(
                    "alternating split is not disjoint; groups overlap beyond neighbours"
                )
    return first, second


def load_group_spec(source: str | os.PathLike | dict) -> tuple[list[np.ndarray], float]:
    """Read ``{"groups": [[...], ...], "strength": lam}`` from JSON."""
    if isinstance(source, dict):
        spec = source
    else:
        with open(source, encoding="utf-8") as fh:
            spec = json.load(fh)
    try:
        groups = [np.asarray(g, dtype=np.int64) for g in spec["groups"]]
        strength = float(spec.get("strength", 1.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad group spec: {exc}") from None
    if strength < 0:
        raise ValueError("strength must be nonnegative")
    return groups, strength


# -- prox of a sum -------------------------------------------------------------


def dr_prox_sum(
    x: np.ndarray,
    gamma: float,
    g: Penalty,
    h: Penalty,
    iters: int,
    d: np.ndarray | None = None,
    offset: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Approximate ``prox_{gamma (g + h)}(x)`` by Douglas-Rachford.

    The quadratic is shared evenly between both terms, so with a DR step of
    ``2 gamma`` each sweep needs exactly one ``prox_{gamma g}`` and one
    ``prox_{gamma h}``. ``offset`` is the splitting variable minus ``x``; pass
    the returned one back in to warm start. Returns the g-prox point of the
    last sweep and the new offset.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    x = np.asarray(x, dtype=float)
    w = x.copy() if offset is None else x + offset
    zg = x
    for _ in range(iters):
        zg = g.prox(0.5 * (x + w), gamma, d)
        zh = h.prox(0.5 * (x + 2.0 * zg - w), gamma, d)
        w = w + zh - zg
    return zg, w - x


class DouglasRachfordProx:
    """Stateful :func:`dr_prox_sum` that warm starts across calls."""

    def __init__(self, g: Penalty, h: Penalty, iters: int = 10, warm_start: bool = True):
        self.g, self.h = g, h
        self.iters = iters
        self.warm_start = warm_start
        self.offset: np.ndarray | None = None
        self.n_prox = 0

    def __call__(self, x: np.ndarray, gamma: float) -> np.ndarray:
        z, offset = dr_prox_sum(x, gamma, self.g, self.h, self.iters, offset=self.offset)
        if self.warm_start:
            self.offset = offset
        self.n_prox += 2 * self.iters
        return z
