"""Gradient memory with q-memorization updates.

Two update schemes are supported:

* ``"saga"``: the sampled index is refreshed every step (``q = 1``).
* ``"svrg"``: with probability ``q / n`` all memory terms are refreshed at the
  current point; nothing per sample is stored, only the snapshot point and
  the mean, and ``alpha_i`` is recomputed from the snapshot when read.

For the linear models here ``alpha_i = a_i * c_i``, so the SAGA table is kept
as ``n`` scalars by default (``representation="compressed"``). A full
``n x p`` table is available for checking purposes.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse

from .model import SmoothModel

SCHEMES = ("saga", "svrg")


class GradientMemory:
    def __init__(
        self,
        model: SmoothModel,
        scheme: str = "saga",
        q: float = 1.0,
        representation: str = "compressed",
        init: str = "zero",
        z0: np.ndarray | None = None,
        recompute_every: int | None = None,
    ):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown memory scheme {scheme!r}")
        if representation not in ("compressed", "full"):
            raise ValueError(f"unknown representation {representation!r}")
        if scheme == "svrg" and not 0 < q <= model.n:
            raise ValueError(f"q must be in (0, n], got {q}")
        self.model = model
        self.scheme = scheme
        self.q = 1.0 if scheme == "saga" else float(q)
        self.representation = "snapshot" if scheme == "svrg" else representation
        self.n, self.p = model.n, model.p
        self.recompute_every = recompute_every or self.n
        self.grad_evals = 0  # oracle calls made by the memory itself
        self._since_recompute = 0

        X = model.dataset.features
        self._indptr, self._indices, self._data = X.indptr, X.indices, X.data

        if init == "zero":
            c = np.zeros(self.n)
        elif init == "gradient":
            if z0 is None:
                raise ValueError("init='gradient' needs z0")
            c = model.derivatives(model.A @ z0)
        else:
            raise ValueError(f"unknown init {init!r}")

        if self.representation == "compressed":
            self.scalars = c
        elif self.representation == "full":
            self.table = np.asarray(model.A.multiply(c[:, None]).todense())
        else:
            # no snapshot yet means all memory terms are zero
            self.snapshot = None if init == "zero" else np.array(z0, dtype=float)
        self.mean = model.A.T @ c / self.n

    # -- reading -------------------------------------------------------------

    def coefficient(self, i: int) -> float:
        """Scalar ``c_i`` with ``alpha_i = a_i * c_i`` (not for the full table)."""
        if self.representation == "compressed":
            return float(self.scalars[i])
        if self.representation == "snapshot":
            if self.snapshot is None:
                return 0.0
            self.grad_evals += 1
            s, e = self._indptr[i], self._indptr[i + 1]
            t = float(self._data[s:e] @ self.snapshot[self._indices[s:e]])
            return self.model.scalar_derivative(i, t)
        raise TypeError("full table has no scalar coefficients")

    def alpha(self, i: int) -> np.ndarray:
        """``alpha_i`` on the stored entries of ``a_i``."""
        s, e = self._indptr[i], self._indptr[i + 1]
        if self.representation == "full":
            return self.table[i, self._indices[s:e]].copy()
        return self._data[s:e] * self.coefficient(i)

    def read(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self._indptr[i], self._indptr[i + 1]
        return self._indices[s:e], self.alpha(i)

    def coefficients(self) -> np.ndarray:
        if self.representation == "compressed":
            return self.scalars.copy()
        if self.representation == "snapshot":
            if self.snapshot is None:
                return np.zeros(self.n)
            return self.model.derivatives(self.model.A @ self.snapshot)
        raise TypeError("full table has no scalar coefficients")

    def as_matrix(self) -> sparse.csr_matrix:
        """All memory terms as an ``n x p`` sparse matrix (diagnostics only)."""
        if self.representation == "full":
            return sparse.csr_matrix(self.table)
        return sparse.csr_matrix(self.model.A.multiply(self.coefficients()[:, None]))

    # -- updating ------------------------------------------------------------

    def update(
        self,
        i: int,
        z: np.ndarray,
        rng: np.random.Generator | None = None,
        deriv: float | None = None,
    ) -> np.ndarray:
        """Apply one q-memorization step at the point ``z``.

        ``deriv`` may carry an already computed ``l_i'(a_i @ z)``. Returns the
        indices whose memory was refreshed.
        """
        if self.scheme == "svrg":
            if rng is None:
                raise ValueError("the svrg scheme needs an rng")
            if rng.random() < self.q / self.n:
                self.refresh(z)
                return np.arange(self.n)
            return np.zeros(0, dtype=np.int64)

        s, e = self._indptr[i], self._indptr[i + 1]
        idx, val = self._indices[s:e], self._data[s:e]
        if deriv is None:
            deriv = self.model.scalar_derivative(i, float(val @ z[idx]))
        if self.representation == "compressed":
            delta = deriv - self.scalars[i]
            self.scalars[i] = deriv
            self.mean[idx] += val * (delta / self.n)
        else:
            new = val * deriv
            self.mean[idx] += (new - self.table[i, idx]) / self.n
            self.table[i, idx] = new
        self._since_recompute += 1
        if self._since_recompute >= self.recompute_every:
            self.recompute_mean()
        return np.array([i], dtype=np.int64)

    def refresh(self, z: np.ndarray) -> None:
        """Full refresh at ``z`` (costs ``n`` partial gradients)."""
        self.grad_evals += self.n
        if self.representation == "snapshot":
            self.snapshot = np.array(z, dtype=float, copy=True)
            c = self.model.derivatives(self.model.A @ self.snapshot)
            self.mean = self.model.A.T @ c / self.n
            return
        c = self.model.derivatives(self.model.A @ z)
        if self.representation == "compressed":
            self.scalars = c
        else:
            self.table = np.asarray(self.model.A.multiply(c[:, None]).todense())
        self.recompute_mean()

    def recompute_mean(self) -> None:
        if self.representation == "full":
            self.mean = self.table.mean(axis=0)
        else:
            self.mean = self.model.A.T @ self.coefficients() / self.n
        self._since_recompute = 0
