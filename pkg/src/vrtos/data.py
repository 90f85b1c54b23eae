"""Sparse datasets: LIBSVM text I/O and synthetic problem generation.

Column indices are 1-based on disk (LIBSVM convention) and 0-based in memory.
"""
from __future__ import annotations

import gzip
import io
import math
import os
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np
from scipy import sparse

GZIP_MAGIC = b"\x1f\x8b"


class ParseError(ValueError):
    """Malformed LIBSVM input. ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class SparseRowMatrix:
    """Compressed row-major matrix; row ``i`` holds the sample ``a_i``.

    Stored as the usual CSR triple. Within a row, column indices are strictly
    increasing and every stored value is finite and nonzero.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n_cols: int

    @property
    def n_rows(self) -> int:
        return len(self.indptr) - 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.indptr[i], self.indptr[i + 1]
        return self.indices[s:e], self.data[s:e]

    def rows(self) -> Iterable[tuple[np.ndarray, np.ndarray]]:
        for i in range(self.n_rows):
            yield self.row(i)

    def to_scipy(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.data, self.indices, self.indptr), shape=self.shape
        )

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    @classmethod
    def from_rows(
        cls, rows: Sequence[Sequence[tuple[int, float]]], n_cols: int
    ) -> "SparseRowMatrix":
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r) for r in rows])
        indices = np.fromiter(
            (c for r in rows for c, _ in r), dtype=np.int64, count=indptr[-1]
        )
        data = np.fromiter(
            (v for r in rows for _, v in r), dtype=np.float64, count=indptr[-1]
        )
        return cls(indptr, indices, data, int(n_cols))

    @classmethod
    def from_dense(cls, X: np.ndarray) -> "SparseRowMatrix":
        return cls.from_scipy(sparse.csr_matrix(np.asarray(X, dtype=float)))

    @classmethod
    def from_scipy(cls, X) -> "SparseRowMatrix":
        X = sparse.csr_matrix(X, dtype=np.float64)
        X.eliminate_zeros()
        X.sort_indices()
        return cls(
            X.indptr.astype(np.int64),
            X.indices.astype(np.int64),
            X.data.copy(),
            X.shape[1],
        )

    def validate(self) -> None:
        """Raise ``ValueError`` if any structural invariant is violated."""
        if self.indptr[0] != 0 or np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must start at 0 and be nondecreasing")
        if len(self.indices) != self.indptr[-1] or len(self.data) != self.indptr[-1]:
            raise ValueError("indices/data length does not match indptr")
        if self.nnz:
            if self.indices.min() < 0 or self.indices.max() >= self.n_cols:
                raise ValueError("column index out of range")
            if not np.all(np.isfinite(self.data)):
                raise ValueError("non-finite stored value")
            if np.any(self.data == 0):
                raise ValueError("explicit zero stored")
            step = np.diff(self.indices)
            # a decrease is allowed only across a row boundary
            boundary = np.zeros(len(step), dtype=bool)
            inner = self.indptr[1:-1]
            inner = inner[(inner > 0) & (inner < self.nnz)]
            boundary[inner - 1] = True
            if np.any((step <= 0) & ~boundary):
                raise ValueError("column indices not strictly increasing in a row")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseRowMatrix):
            return NotImplemented
        return (
            self.n_cols == other.n_cols
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: SparseRowMatrix
    labels: np.ndarray

    def __post_init__(self):
        if len(self.labels) != self.features.n_rows:
            raise ValueError(
                f"{len(self.labels)} labels for {self.features.n_rows} rows"
            )

    @property
    def n_samples(self) -> int:
        return self.features.n_rows

    @property
    def n_features(self) -> int:
        return self.features.n_cols

    def is_binary(self) -> bool:
        return bool(np.all(np.isin(self.labels, (-1.0, 1.0))))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return self.features == other.features and np.array_equal(
            self.labels, other.labels
        )


def _parse_number(token: str, what: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric {what} {token!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what} {token!r}", lineno)
    return value


def parse_libsvm(
    source: bytes | str | BinaryIO, n_cols: int | None = None
) -> LabeledDataset:
    """Parse LIBSVM text (``label idx:val ...``), optionally gzip-compressed.

    Explicit zero values are dropped. Blank lines are skipped but still
    counted for error line numbers. ``n_cols`` overrides the inferred width,
    which is otherwise the largest index seen.
    """
    if isinstance(source, str):
        raw = source.encode("utf-8")
    elif isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    else:
        raw = source.read()
    if raw[:2] == GZIP_MAGIC:
        raw = gzip.decompress(raw)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8 ({exc})") from None

    labels: list[float] = []
    rows: list[list[tuple[int, float]]] = []
    max_index = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        labels.append(_parse_number(tokens[0], "label", lineno))
        row: list[tuple[int, float]] = []
        last = 0
        for tok in tokens[1:]:
            idx_str, sep, val_str = tok.partition(":")
            if not sep:
                raise ParseError(f"missing ':' in {tok!r}", lineno)
            try:
                idx = int(idx_str)
            except ValueError:
                raise ParseError(f"non-integer index {idx_str!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"index {idx} < 1 (indices are 1-based)", lineno)
            if idx == last:
                raise ParseError(f"duplicate index {idx}", lineno)
            if idx < last:
                raise ParseError(f"index {idx} after {last}: not increasing", lineno)
            last = idx
            value = _parse_number(val_str, "value", lineno)
            if value != 0.0:
                row.append((idx - 1, value))
        max_index = max(max_index, last)
        rows.append(row)

    if not rows:
        raise ParseError("empty input")
    if n_cols is None:
        n_cols = max_index
    elif max_index > n_cols:
        raise ParseError(f"index {max_index} exceeds n_cols={n_cols}")
    X = SparseRowMatrix.from_rows(rows, n_cols)
    return LabeledDataset(X, np.asarray(labels, dtype=np.float64))


def _fmt(value: float) -> str:
    # repr is the shortest string that round-trips exactly
    value = float(value)
    negative_zero = value == 0 and math.copysign(1.0, value) < 0
    if value.is_integer() and abs(value) < 2**53 and not negative_zero:
        return f"{int(value):+d}" if value in (-1.0, 1.0) else str(int(value))
    return repr(value)


def serialize_libsvm(dataset: LabeledDataset) -> str:
    lines = []
    for label, (idx, val) in zip(dataset.labels, dataset.features.rows()):
        parts = [_fmt(label)]
        parts.extend(f"{j + 1}:{_fmt(v)}" for j, v in zip(idx, val))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def load_libsvm(path: str | os.PathLike, n_cols: int | None = None) -> LabeledDataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh, n_cols=n_cols)


def save_libsvm(dataset: LabeledDataset, path: str | os.PathLike) -> None:
    with io.open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_libsvm(dataset))


def generate_synthetic(
    n: int,
    p: int,
    density: float,
    task: str = "logistic",
    seed: int = 0,
    support_fraction: float = 0.1,
    noise: float = 0.1,
) -> LabeledDataset:
    """Random sparse regression/classification problem with a planted solution.

    Every row has ``ceil(density * p)`` standard-normal entries at distinct
    uniformly drawn columns. Labels come from a sparse ground-truth vector:
    ``sign(a_i @ x + noise)`` for ``task="logistic"`` and ``a_i @ x + noise``
    for ``task="squared"``.
    """
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    if task not in ("logistic", "squared"):
        raise ValueError(f"unknown task {task!r}")
    rng = np.random.default_rng(seed)
    # the epsilon keeps e.g. 0.1 * 50 from rounding up to 6
    k = min(p, max(1, math.ceil(density * p - 1e-9)))

    if k == p:
        indices = np.tile(np.arange(p, dtype=np.int64), n)
    else:
        cols = [np.sort(rng.choice(p, size=k, replace=False)) for _ in range(n)]
        indices = np.concatenate(cols).astype(np.int64)
    data = rng.standard_normal(n * k)
    data[data == 0.0] = 1.0  # keep the nonzero invariant
    indptr = np.arange(0, n * k + 1, k, dtype=np.int64)
    X = SparseRowMatrix(indptr, indices, data, p)

    n_support = max(1, int(round(support_fraction * p)))
    ground_truth = np.zeros(p)
    ground_truth[rng.choice(p, size=n_support, replace=False)] = rng.standard_normal(
        n_support
    )
    signal = X.to_scipy() @ ground_truth + noise * rng.standard_normal(n)
    if task == "logistic":
        labels = np.where(signal >= 0, 1.0, -1.0)
    else:
        labels = signal
    return LabeledDataset(X, labels)
