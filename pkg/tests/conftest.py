from __future__ import annotations

import numpy as np
import pytest

from vrtos.data import LabeledDataset, SparseRowMatrix, generate_synthetic
from vrtos.model import SmoothModel


def dense_dataset(A: np.ndarray, b: np.ndarray) -> LabeledDataset:
    return LabeledDataset(SparseRowMatrix.from_dense(np.asarray(A, float)), np.asarray(b, float))


def make_model(n=50, p=20, density=0.3, loss="logistic", l2=1e-2, seed=0) -> SmoothModel:
    task = "logistic" if loss == "logistic" else "squared"
    return SmoothModel(generate_synthetic(n, p, density, task, seed), loss, l2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_logistic():
    return make_model()


@pytest.fixture
def small_squared():
    return make_model(loss="squared", seed=1)
