"""Random forests and squared-error gradient boosting built from ``grow_tree``."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from ..errors import DimensionMismatch, InvalidValue
from ..parallel import map_ordered
from .matrix import DesignMatrix
from .rng import stream
from .tree import Tree, grow_tree, resolve_max_features


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 500
    max_depth: Optional[int] = None
    min_samples_leaf: int = 5
    max_features: Union[str, float] = "third"
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_estimators < 1:
            raise InvalidValue("n_estimators must be >= 1")
        _check_tree_params(self)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class GbmParams:
    n_estimators: int = 300
    max_depth: Optional[int] = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    max_features: Union[str, float] = "all"

    def __post_init__(self):
        if self.n_estimators < 0:
            raise InvalidValue("n_estimators must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidValue(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        _check_tree_params(self)

    def to_dict(self):
        return asdict(self)


def _check_tree_params(params):
    if params.max_depth is not None and params.max_depth < 0:
        raise InvalidValue("max_depth must be >= 0 or None")
    if params.min_samples_leaf < 1:
        raise InvalidValue("min_samples_leaf must be >= 1")
    resolve_max_features(params.max_features, 1)


def _predict_trees(trees, x) -> np.ndarray:
    """(n_trees, n_rows) matrix of per-tree predictions."""
    if not trees:
        return np.zeros((0, x.shape[0]))
    return np.stack([t.predict(x) for t in trees])


def _check_x(x, p):
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float)))
    if x.shape[1] != p:
        raise DimensionMismatch(f"model has {p} features, got {x.shape[1]}")
    return x


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    params: ForestParams
    seed: int
    n_features: int

    def predict(self, x) -> np.ndarray:
        x = _check_x(x, self.n_features)
        per_tree = _predict_trees(self.trees, x)
        return per_tree.sum(axis=0) / len(self.trees)


@dataclass(frozen=True)
class GbmModel:
    init: float
    trees: tuple
    learning_rate: float
    params: GbmParams
    seed: int
    n_features: int
    train_rmse: tuple = field(default=(), compare=False)

    def predict(self, x) -> np.ndarray:
        x = _check_x(x, self.n_features)
        out = np.full(x.shape[0], self.init)
        for t in self.trees:
            out += self.learning_rate * t.predict(x)
        return out


def fit_tree(matrix: DesignMatrix, params, rng: np.random.Generator) -> Tree:
    return grow_tree(
        matrix.x,
        matrix.y,
        max_depth=params.max_depth,
        min_samples_leaf=params.min_samples_leaf,
        max_features=params.max_features,
        rng=rng,
    )


def fit_forest(matrix: DesignMatrix, params: ForestParams = ForestParams(), seed: int = 42,
               threads: Optional[int] = None) -> ForestModel:
    """Bagged trees; tree ``t`` draws its bootstrap sample and its split
    features from its own stream keyed by ``(seed, t)``."""
    n = matrix.n

    def one(t):
        rng = stream(seed, t)
        rows = rng.integers(0, n, size=n) if params.bootstrap else None
        return grow_tree(
            matrix.x,
            matrix.y,
            rows,
            max_depth=params.max_depth,
            min_samples_leaf=params.min_samples_leaf,
            max_features=params.max_features,
            rng=rng,
        )

    trees = map_ordered(one, range(params.n_estimators), threads)
    return ForestModel(tuple(trees), params, int(seed), matrix.p)


def fit_gbm(matrix: DesignMatrix, params: GbmParams = GbmParams(), seed: int = 42) -> GbmModel:
    """Stagewise least-squares boosting: each tree fits the current residuals
    and is added with shrinkage ``learning_rate``."""
    y = matrix.y
    init = float(np.mean(y))
    fitted = np.full(y.size, init)
    trees = []
    trace = [float(np.sqrt(np.mean((y - fitted) ** 2)))]
    for m in range(params.n_estimators):
        tree = grow_tree(
            matrix.x,
            y - fitted,
            max_depth=params.max_depth,
            min_samples_leaf=params.min_samples_leaf,
            max_features=params.max_features,
            rng=stream(seed, m),
        )
        fitted = fitted + params.learning_rate * tree.predict(matrix.x)
        trees.append(tree)
        trace.append(float(np.sqrt(np.mean((y - fitted) ** 2))))
    return GbmModel(init, tuple(trees), params.learning_rate, params, int(seed), matrix.p, tuple(trace))
