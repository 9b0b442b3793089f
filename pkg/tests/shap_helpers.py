"""Random models for the SHAP property and oracle tests."""

import numpy as np

from countyrisk.models import ForestModel, ForestParams, GbmModel, GbmParams, LinearModel, Tree


def random_tree(rng, p, max_depth):
    """Random tree with integer coverages that add up; features may repeat along a path."""
    feature, threshold, left, right, value, coverage = [], [], [], [], [], []

    def node(depth, cov):
        i = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        coverage.append(float(cov))
        if depth < max_depth and cov >= 2 and rng.random() < 0.8:
            lc = int(rng.integers(1, cov))
            feature[i] = int(rng.integers(0, p))
            threshold[i] = float(np.round(rng.normal(), 2))
            a = node(depth + 1, lc)
            b = node(depth + 1, cov - lc)
            left[i], right[i] = a, b
            value[i] = (value[a] * lc + value[b] * (cov - lc)) / cov
        else:
            value[i] = float(rng.normal(0, 5))
        return i

    node(0, int(rng.integers(2, 200)))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(value), np.array(coverage))


def random_ensemble(rng, p=None, max_depth=4, max_trees=10):
    p = int(rng.integers(1, 13)) if p is None else p
    trees = tuple(random_tree(rng, p, int(rng.integers(0, max_depth + 1)))
                  for _ in range(int(rng.integers(1, max_trees + 1))))
    if rng.random() < 0.5:
        return ForestModel(trees, ForestParams(n_estimators=len(trees)), 0, p)
    lr = float(rng.uniform(0.05, 1.0))
    return GbmModel(float(rng.normal(50, 10)), trees, lr, GbmParams(n_estimators=len(trees), learning_rate=lr), 0, p)


def random_linear(rng, p=None):
    p = int(rng.integers(1, 13)) if p is None else p
    coef = rng.normal(size=p) * (rng.random(p) < 0.85)
    return LinearModel(coef, float(rng.normal()), rng.normal(size=p))


def random_x(rng, p):
    # rounded to the threshold grid so some inputs land exactly on a split
    return np.round(rng.normal(size=p) * 1.2, 2)
