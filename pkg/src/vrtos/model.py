"""Smooth part of the objective.

``f(x) = (1/n) sum_i l_i(a_i @ x) + (l2 / 2) ||x||^2`` with ``l_i`` the logistic
or squared loss. Only the scalar ``l_i'`` depends on ``x``, so a partial
gradient is ``a_i * l_i'(a_i @ x)`` and shares the sparsity pattern of ``a_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import expit

from .data import LabeledDataset

LOSSES = ("logistic", "squared")


@dataclass(frozen=True)
class SmoothnessConstants:
    L_psi: float
    L_omega: float
    mu_omega: float
    d_max: float = 1.0

    @property
    def L_f(self) -> float:
        return self.L_psi + self.d_max * self.L_omega

    def step_size(self) -> float:
        """Default step ``1 / (3 L_f)``."""
        return 1.0 / (3.0 * self.L_f)


def _logistic_deriv(t: float, b: float) -> float:
    m = -b * t
    # -b * sigmoid(m), split at 0 to avoid overflow in exp
    if m >= 0:
        return -b / (1.0 + math.exp(-m))
    e = math.exp(m)
    return -b * e / (1.0 + e)


@dataclass(frozen=True, eq=False)
class SmoothModel:
    dataset: LabeledDataset
    loss: str = "logistic"
    l2: float = 0.0
    _csr: sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")
        if self.loss == "logistic" and not self.dataset.is_binary():
            raise ValueError("logistic loss needs labels in {-1, +1}")
        object.__setattr__(self, "_csr", self.dataset.features.to_scipy())

    @property
    def n(self) -> int:
        return self.dataset.n_samples

    @property
    def p(self) -> int:
        return self.dataset.n_features

    @property
    def A(self) -> sparse.csr_matrix:
        return self._csr

    @property
    def b(self) -> np.ndarray:
        return self.dataset.labels

    # -- scalar loss pieces -------------------------------------------------

    def scalar_derivative(self, i: int, t: float) -> float:
        """``l_i'(t)``."""
        b = float(self.b[i])
        if self.loss == "squared":
            return t - b
        return _logistic_deriv(t, b)

    def derivatives(self, margins: np.ndarray) -> np.ndarray:
        """Vectorized ``l_i'(a_i @ x)`` for all samples given all margins."""
        if self.loss == "squared":
            return margins - self.b
        return -self.b * expit(-self.b * margins)

    def losses(self, margins: np.ndarray) -> np.ndarray:
        if self.loss == "squared":
            return 0.5 * (margins - self.b) ** 2
        m = -self.b * margins
        out = np.empty_like(m)
        pos = m > 0
        out[pos] = m[pos] + np.log1p(np.exp(-m[pos]))
        out[~pos] = np.log1p(np.exp(m[~pos]))
        return out

    # -- gradients and values -----------------------------------------------

    def margin(self, i: int, z: np.ndarray) -> float:
        idx, val = self.dataset.features.row(i)
        return float(val @ z[idx])

    def partial_gradient(self, i: int, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``grad psi_i(z)`` as ``(indices, values)`` on the support of ``a_i``.

        Does not include the ridge term.
        """
        idx, val = self.dataset.features.row(i)
        return idx, val * self.scalar_derivative(i, float(val @ z[idx]))

    def grad_omega(self, z: np.ndarray) -> np.ndarray:
        return self.l2 * z

    def full_gradient(self, z: np.ndarray) -> np.ndarray:
        c = self.derivatives(self.A @ z)
        return self.A.T @ c / self.n + self.l2 * z

    def smooth_value(self, z: np.ndarray) -> float:
        return float(np.mean(self.losses(self.A @ z))) + 0.5 * self.l2 * float(z @ z)

    def smoothness_constants(self, d_max: float = 1.0) -> SmoothnessConstants:
        """Per-sample smoothness bound ``max_i ||a_i||^2 * sup |l''|``."""
        if self.n == 0:
            raise ValueError("empty dataset")
        if d_max < 1:
            raise ValueError("d_max must be >= 1")
        row_sq = np.asarray(self.A.multiply(self.A).sum(axis=1)).ravel()
        curvature = 0.25 if self.loss == "logistic" else 1.0
        L_psi = float(row_sq.max()) * curvature
        if L_psi <= 0:
            # all-zero data; any positive constant is valid
            L_psi = 1e-12
        return SmoothnessConstants(L_psi, self.l2, self.l2, float(d_max))
