"""Ordinary least squares with an intercept."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import DimensionMismatch, RankDeficientWarning
from .matrix import DesignMatrix


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    training_feature_means: np.ndarray

    @property
    def n_features(self) -> int:
        return self.coefficients.size

    def predict(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_features:
            raise DimensionMismatch(f"model has {self.n_features} features, got {x.shape[1]}")
        return x @ self.coefficients + self.intercept


def fit_linear(matrix: DesignMatrix, rank_tol: float = 1e-10) -> LinearModel:
    """Least squares via a QR factorisation of the centred design.

    Centring absorbs the intercept, so the fit passes through the training
    centroid. A (near) rank-deficient design triggers ``RankDeficientWarning``
    naming the first dependent column and falls back to the minimum-norm
    SVD solution.
    """
    x, y = matrix.x, matrix.y
    means = x.mean(axis=0)
    y_mean = float(y.mean())
    xc = x - means
    yc = y - y_mean

    q, r = np.linalg.qr(xc)
    diag = np.abs(np.diag(r))
    scale = float(diag.max()) if diag.size and diag.max() > 0 else 1.0
    dependent = np.flatnonzero(diag <= rank_tol * scale)
    if matrix.n <= matrix.p or dependent.size:
        col = matrix.feature_names[dependent[0]] if dependent.size else "(n <= p)"
        warnings.warn(
            f"design matrix is rank deficient (dependent column: {col}); using the minimum-norm solution",
            RankDeficientWarning,
            stacklevel=2,
        )
        beta = np.linalg.lstsq(xc, yc, rcond=None)[0]
    else:
        beta = solve_triangular(r, q.T @ yc)
    intercept = y_mean - float(means @ beta)
    return LinearModel(beta, intercept, means)
