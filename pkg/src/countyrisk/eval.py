"""Metrics, k-fold cross-validation and grid search over the three learners."""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import CountyRiskError, DimensionMismatch, GridPointError, InvalidK, InvalidValue, ZeroVariance
from .models import DesignMatrix, ForestParams, GbmParams, fit_forest, fit_gbm, fit_linear
from .models.rng import derive_seed, stream
from .parallel import map_ordered


def _pair(y, yhat, min_len):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise DimensionMismatch(f"y has {y.size} values, yhat has {yhat.size}")
    if y.size < min_len:
        raise DimensionMismatch(f"need at least {min_len} values, got {y.size}")
    return y, yhat


def r2(y, yhat) -> float:
    """Coefficient of determination against the mean of ``y``; may be negative."""
    y, yhat = _pair(y, yhat, 2)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise ZeroVariance("R^2 is undefined when y has zero variance")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / sst


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat, 1)
    d = np.abs(y - yhat)
    scale = float(d.max())
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    # scaled so tiny or huge residuals neither underflow nor overflow when squared
    return scale * float(np.sqrt(np.mean((d / scale) ** 2)))


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat, 1)
    return float(np.mean(np.abs(y - yhat)))


@dataclass(frozen=True)
class MetricReport:
    r2: float
    rmse: float
    mae: float
    n: int

    @classmethod
    def score(cls, y, yhat) -> "MetricReport":
        return cls(r2(y, yhat), rmse(y, yhat), mae(y, yhat), int(np.size(y)))


def kfold_indices(n: int, k: int = 5, seed: int = 42) -> list:
    """Seeded shuffle then contiguous chunks; earlier folds take the remainder."""
    if not 2 <= k <= n:
        raise InvalidK(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = stream(seed, 1).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


# ---------------------------------------------------------------- learners and grids

DEFAULT_GRIDS = {
    "rf": {"n_estimators": [200, 500], "max_features": ["sqrt", "third", "all"], "min_samples_leaf": [2, 5, 10]},
    "gbm": {"n_estimators": [100, 300], "learning_rate": [0.05, 0.1], "max_depth": [2, 3, 4]},
    "lr": {},
}

LEARNER_NAMES = {"rf": "RF", "gbm": "GBR", "lr": "LR"}


def expand_grid(grid: Mapping[str, Sequence]) -> list:
    """Cartesian product in key order, last key varying fastest."""
    if not grid:
        return [{}]
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], (list, tuple)) or not grid[k]:
            raise InvalidValue(f"grid entry {k!r} must be a nonempty list")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _params(cls, learner, params):
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidValue(f"bad {learner} hyperparameters {dict(params)}: {exc}") from exc


def fit_learner(learner: str, matrix: DesignMatrix, params: Mapping, seed: int, threads: Optional[int] = None):
    if learner == "rf":
        return fit_forest(matrix, _params(ForestParams, learner, params), seed, threads=threads)
    if learner == "gbm":
        return fit_gbm(matrix, _params(GbmParams, learner, params), seed)
    if learner == "lr":
        if params:
            raise InvalidValue(f"linear regression takes no hyperparameters, got {dict(params)}")
        return fit_linear(matrix)
    raise InvalidValue(f"unknown learner {learner!r}; expected one of rf, gbm, lr")


@dataclass(frozen=True)
class CvRow:
    params: dict
    mean_rmse: float
    fold_rmse: tuple


@dataclass(frozen=True)
class GridSearchResult:
    best_params: dict
    cv_rmse_table: tuple  # CvRow per grid point, grid order

    def to_dict(self):
        return {
            "best_params": self.best_params,
            "cv_rmse_table": [
                {"params": r.params, "mean_rmse": r.mean_rmse, "fold_rmse": list(r.fold_rmse)}
                for r in self.cv_rmse_table
            ],
        }


def grid_search(train: DesignMatrix, learner: str, grid: Mapping[str, Sequence] = None, k: int = 5,
                seed: int = 42, threads: Optional[int] = None) -> GridSearchResult:
    """Pick the grid point with the lowest mean k-fold RMSE (first wins ties).

    The fit for grid point ``g`` on fold ``f`` is seeded by ``(seed, g, f)``
    so the table does not depend on evaluation order or thread count.
    """
    points = expand_grid(DEFAULT_GRIDS[learner] if grid is None else grid)
    folds = kfold_indices(train.n, k, seed)
    all_rows = np.arange(train.n)
    jobs = [(g, f) for g in range(len(points)) for f in range(len(folds))]

    def run(job):
        g, f = job
        held = folds[f]
        fit_rows = np.setdiff1d(all_rows, held, assume_unique=True)
        try:
            model = fit_learner(learner, train.take(fit_rows), points[g], derive_seed(seed, g, f), threads=1)
        except CountyRiskError as exc:
            raise GridPointError(points[g], exc) from exc
        return rmse(train.y[held], model.predict(train.x[held]))

    scores = map_ordered(run, jobs, threads)
    table = []
    for g, params in enumerate(points):
        fold_scores = tuple(scores[g * len(folds):(g + 1) * len(folds)])
        table.append(CvRow(dict(params), float(np.mean(fold_scores)), fold_scores))
    best = min(range(len(table)), key=lambda i: (table[i].mean_rmse, i))
    return GridSearchResult(dict(points[best]), tuple(table))


@dataclass
class LearnerResult:
    learner: str
    metrics: MetricReport
    search: GridSearchResult
    model: object = field(repr=False)
    test_predictions: np.ndarray = field(repr=False)


def evaluate_models(train: DesignMatrix, test: DesignMatrix, grids: Mapping[str, Mapping] = None,
                    k: int = 5, seed: int = 42, learners: Sequence[str] = ("rf", "gbm", "lr"),
                    threads: Optional[int] = None) -> dict:
    """Grid-search each learner on ``train``, refit the winner on all of
    ``train`` and score it on ``test``."""
    if train.feature_names != test.feature_names:
        raise DimensionMismatch("train and test have different features")
    grids = {} if grids is None else grids
    results = {}
    for learner in learners:
        if learner not in DEFAULT_GRIDS:
            raise InvalidValue(f"unknown learner {learner!r}; expected one of rf, gbm, lr")
        # seeds follow the learner, not its position, so subsets of learners agree
        li = list(DEFAULT_GRIDS).index(learner)
        grid = grids.get(learner, DEFAULT_GRIDS[learner])
        search = grid_search(train, learner, grid, k, derive_seed(seed, 100 + li), threads)
        model = fit_learner(learner, train, search.best_params, derive_seed(seed, 200 + li), threads)
        pred = model.predict(test.x)
        results[learner] = LearnerResult(learner, MetricReport.score(test.y, pred), search, model, pred)
    return results


def write_comparison(results: Mapping[str, LearnerResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["learner", "r2", "rmse", "mae", "n_test"])
        for name, res in results.items():
            m = res.metrics
            w.writerow([name, repr(m.r2), repr(m.rmse), repr(m.mae), m.n])


def write_cv_table(search: GridSearchResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(search.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
