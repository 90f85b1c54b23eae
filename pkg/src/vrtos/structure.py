"""Extended supports and block reweighting for sparse updates.

The extended support ``T_i`` of sample ``i`` is the set of blocks of the
penalty partition that intersect ``supp(a_i)``. A sparse step may only touch
coordinates in those blocks. Block ``B`` gets weight ``d_B = n / #{i : B in T_i}``
so that ``(1/n) sum_i P_i = D^-1`` holds coordinatewise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .data import SparseRowMatrix
from .penalties import BlockPartition


class StructureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ExtendedSupport:
    """Per-sample block sets and their flattened coordinates (both CSR-like).

    ``coord_indices[coord_indptr[i]:coord_indptr[i+1]]`` lists the coordinates
    of the blocks ``block_indices[block_indptr[i]:block_indptr[i+1]]`` block
    after block; ``seg_starts`` gives where each block begins, relative to the
    start of sample ``i``'s coordinate run.
    """

    block_indptr: np.ndarray
    block_indices: np.ndarray
    coord_indptr: np.ndarray
    coord_indices: np.ndarray
    seg_starts: np.ndarray  # aligned with block_indices
    n_blocks: int
    p: int

    @property
    def n(self) -> int:
        return len(self.block_indptr) - 1

    def blocks(self, i: int) -> np.ndarray:
        return self.block_indices[self.block_indptr[i] : self.block_indptr[i + 1]]

    def coords(self, i: int) -> np.ndarray:
        return self.coord_indices[self.coord_indptr[i] : self.coord_indptr[i + 1]]

    def segments(self, i: int) -> np.ndarray:
        return self.seg_starts[self.block_indptr[i] : self.block_indptr[i + 1]]

    def block_counts(self) -> np.ndarray:
        return np.bincount(self.block_indices, minlength=self.n_blocks)

    def coord_mask_matrix(self) -> sparse.csr_matrix:
        """0/1 matrix with entry ``(i, c)`` set iff ``c`` is in ``flatten(T_i)``."""
        data = np.ones(len(self.coord_indices))
        M = sparse.csr_matrix(
            (data, self.coord_indices, self.coord_indptr), shape=(self.n, self.p)
        )
        M.sort_indices()
        return M


def _block_indicator(partition: BlockPartition) -> sparse.csr_matrix:
    """``(p, n_blocks)`` 0/1 matrix mapping coordinates to their block."""
    p = partition.p
    return sparse.csr_matrix(
        (np.ones(p), (np.arange(p), partition.block_of)), shape=(p, partition.n_blocks)
    )


def compute_extended_supports(
    features: SparseRowMatrix | sparse.spmatrix, partition: BlockPartition
) -> ExtendedSupport:
    if isinstance(features, SparseRowMatrix):
        features = features.to_scipy()
    pattern = sparse.csr_matrix(features, copy=True)
    pattern.data = np.ones_like(pattern.data, dtype=float)
    if pattern.shape[1] != partition.p:
        raise StructureError(
            f"data has {pattern.shape[1]} columns but partition covers {partition.p}"
        )
    hits = (pattern @ _block_indicator(partition)).tocsr()
    hits.eliminate_zeros()
    hits.sort_indices()

    block_indptr = hits.indptr.astype(np.int64)
    block_indices = hits.indices.astype(np.int64)
    lens = partition.sizes[block_indices]
    # flatten each sample's blocks into one coordinate run
    total = int(lens.sum())
    run_start = np.repeat(partition.indptr[block_indices], lens)
    within = np.arange(total) - np.repeat(np.cumsum(lens) - lens, lens)
    coord_indices = partition.indices[run_start + within]
    csum = np.concatenate([[0], np.cumsum(lens)])
    coord_indptr = csum[block_indptr]
    seg_starts = csum[:-1] - np.repeat(coord_indptr[:-1], np.diff(block_indptr))
    return ExtendedSupport(
        block_indptr,
        block_indices,
        coord_indptr.astype(np.int64),
        coord_indices.astype(np.int64),
        seg_starts.astype(np.int64),
        partition.n_blocks,
        partition.p,
    )


@dataclass(frozen=True, eq=False)
class Reweighting:
    block_weights: np.ndarray  # d_B per block
    weights: np.ndarray  # d per coordinate

    @property
    def d_max(self) -> float:
        return float(self.block_weights.max()) if len(self.block_weights) else 1.0


def compute_reweighting(
    supports: ExtendedSupport, partition: BlockPartition, n: int | None = None
) -> Reweighting:
    """Inverse block frequencies ``d_B = n / #{i : B in T_i}``."""
    n = supports.n if n is None else n
    counts = supports.block_counts()
    missing = np.flatnonzero(counts == 0)
    if len(missing):
        b = int(missing[0])
        raise StructureError(
            f"block {b} (coordinates {partition.block(b).tolist()}) is not touched "
            f"by any sample ({len(missing)} such blocks); remove those coordinates "
            "from the problem"
        )
    d_block = n / counts.astype(float)
    return Reweighting(d_block, d_block[partition.block_of])


def union_supports(supports: list[ExtendedSupport]) -> tuple[np.ndarray, np.ndarray]:
    """CSR (indptr, indices) of ``S_i``: coordinates in any ``T_{i,j}``."""
    M = supports[0].coord_mask_matrix()
    for s in supports[1:]:
        M = M + s.coord_mask_matrix()
    M = M.tocsr()
    M.sort_indices()
    return M.indptr.astype(np.int64), M.indices.astype(np.int64)
