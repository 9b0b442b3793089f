from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataset import Dataset
from ..errors import DegenerateSplit, DimensionMismatch, InvalidValue
from .rng import stream


@dataclass(frozen=True)
class DesignMatrix:
    x: np.ndarray
    y: np.ndarray
    feature_names: tuple
    row_fips: tuple

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "row_fips", tuple(self.row_fips))
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.size:
            raise DimensionMismatch(f"x {x.shape} and y {y.shape} do not line up")
        if len(self.feature_names) != x.shape[1] or len(self.row_fips) != y.size:
            raise DimensionMismatch("feature_names / row_fips lengths do not match x")
        if y.size < 2 or x.shape[1] < 1:
            raise InvalidValue(f"design matrix needs n >= 2 and p >= 1, got {x.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidValue("design matrix has missing or non-finite entries")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def take(self, rows: Sequence[int]) -> "DesignMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        return DesignMatrix(self.x[rows], self.y[rows], self.feature_names, tuple(self.row_fips[i] for i in rows))

    @classmethod
    def from_dataset(cls, dataset: Dataset, features: Sequence[str] = None) -> "DesignMatrix":
        features = dataset.predictors if features is None else list(features)
        return cls(dataset.matrix(features), dataset.column(dataset.outcome), tuple(features), tuple(dataset.fips))


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (train, test) row indices of a seeded random partition."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidValue(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(np.floor(n * test_fraction + 0.5))
    if n_test == 0 or n_test == n:
        raise DegenerateSplit(f"splitting {n} rows at {test_fraction} leaves one side empty")
    perm = stream(seed, 0).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def train_test_split(matrix: DesignMatrix, test_fraction: float = 0.25, seed: int = 42):
    train, test = split_indices(matrix.n, test_fraction, seed)
    return matrix.take(train), matrix.take(test)
