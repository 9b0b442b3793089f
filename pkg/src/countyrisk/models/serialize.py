"""Versioned JSON documents for fitted models.

Trees are written as nested nodes::

    {"feature_index": 3, "threshold": 0.5, "coverage": 120, "node_mean": 64.1,
     "left": {...}, "right": {...}}
    {"value": 61.2, "coverage": 40}

Floats go through ``repr`` so a save/load round trip reproduces
predictions bit for bit.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import InvalidValue
from .ensemble import ForestModel, ForestParams, GbmModel, GbmParams
from .linear import LinearModel
from .tree import LEAF, Tree

FORMAT_VERSION = 1


def tree_to_dict(tree: Tree, node: int = 0) -> dict:
    cov = None if tree.coverage is None else _cov(tree.coverage[node])
    if tree.left[node] == LEAF:
        d = {"value": float(tree.value[node])}
        if cov is not None:
            d["coverage"] = cov
        return d
    d = {
        "feature_index": int(tree.feature[node]),
        "threshold": float(tree.threshold[node]),
        "node_mean": float(tree.value[node]),
    }
    if cov is not None:
        d["coverage"] = cov
    d["left"] = tree_to_dict(tree, int(tree.left[node]))
    d["right"] = tree_to_dict(tree, int(tree.right[node]))
    return d


def _cov(c):
    c = float(c)
    return int(c) if c.is_integer() else c


def tree_from_dict(d: dict) -> Tree:
    feature, threshold, left, right, value, coverage = [], [], [], [], [], []
    has_cov = True

    def visit(node):
        nonlocal has_cov
        i = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        if "coverage" in node:
            coverage.append(float(node["coverage"]))
        else:
            has_cov = False
            coverage.append(np.nan)
        if "left" in node:
            value.append(float(node["node_mean"]))
            feature[i] = int(node["feature_index"])
            threshold[i] = float(node["threshold"])
            left[i] = visit(node["left"])
            right[i] = visit(node["right"])
        else:
            value.append(float(node["value"]))
        return i

    visit(d)
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(coverage, dtype=np.float64) if has_cov else None,
    )


def model_to_dict(model) -> dict:
    if isinstance(model, LinearModel):
        return {
            "format_version": FORMAT_VERSION,
            "model_type": "linear",
            "coefficients": [float(c) for c in model.coefficients],
            "intercept": float(model.intercept),
            "training_feature_means": [float(m) for m in model.training_feature_means],
        }
    if isinstance(model, ForestModel):
        return {
            "format_version": FORMAT_VERSION,
            "model_type": "random_forest",
            "params": model.params.to_dict(),
            "seed": model.seed,
            "n_features": model.n_features,
            "trees": [tree_to_dict(t) for t in model.trees],
        }
    if isinstance(model, GbmModel):
        return {
            "format_version": FORMAT_VERSION,
            "model_type": "gradient_boosting",
            "params": model.params.to_dict(),
            "seed": model.seed,
            "n_features": model.n_features,
            "init": float(model.init),
            "learning_rate": float(model.learning_rate),
            "train_rmse": list(model.train_rmse),
            "trees": [tree_to_dict(t) for t in model.trees],
        }
    raise InvalidValue(f"cannot serialise {type(model).__name__}")


def model_from_dict(d: dict):
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidValue(f"unsupported model format version {version!r}")
    kind = d.get("model_type")
    if kind == "linear":
        return LinearModel(
            np.array(d["coefficients"], dtype=float),
            float(d["intercept"]),
            np.array(d["training_feature_means"], dtype=float),
        )
    if kind == "random_forest":
        return ForestModel(
            tuple(tree_from_dict(t) for t in d["trees"]),
            ForestParams(**d["params"]),
            int(d["seed"]),
            int(d["n_features"]),
        )
    if kind == "gradient_boosting":
        return GbmModel(
            float(d["init"]),
            tuple(tree_from_dict(t) for t in d["trees"]),
            float(d["learning_rate"]),
            GbmParams(**d["params"]),
            int(d["seed"]),
            int(d["n_features"]),
            tuple(d.get("train_rmse", ())),
        )
    raise InvalidValue(f"unknown model type {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, separators=(",", ":"))
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
