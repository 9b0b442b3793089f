"""SHAP attributions for the fitted models.

* ``shap_linear`` - closed form for OLS with mean substitution.
* ``shap_tree`` - exact path-dependent TreeSHAP (coverage-weighted), the
  polynomial-time path algorithm of Lundberg et al., compiled with numba.
* ``shap_brute_force`` - subset enumeration of the Shapley formula, used as
  a test oracle for the two above.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from numba import njit
from scipy.stats import spearmanr

from .errors import DimensionMismatch, EmptyInput, InvalidValue, MissingCoverage, TooManyFeatures
from .models import ForestModel, GbmModel, LinearModel
from .parallel import map_ordered

MAX_BRUTE_FORCE_FEATURES = 15


@dataclass(frozen=True)
class ShapExplanation:
    base_value: float
    attributions: np.ndarray
    x: np.ndarray
    prediction: float

    @property
    def residual(self) -> float:
        """``base + sum(attributions) - prediction``; zero up to rounding."""
        return float(self.base_value + self.attributions.sum() - self.prediction)


@dataclass(frozen=True)
class FeatureRanking:
    entries: tuple  # (feature name, mean |shap|), descending

    @property
    def features(self) -> list:
        return [name for name, _ in self.entries]

    def __getitem__(self, i):
        return self.entries[i]

    def __len__(self):
        return len(self.entries)


# ---------------------------------------------------------------- linear

def shap_linear(model: LinearModel, x) -> ShapExplanation:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise DimensionMismatch(f"model has {model.n_features} features, got shape {x.shape}")
    phi = model.coefficients * (x - model.training_feature_means)
    base = float(model.predict(model.training_feature_means)[0])
    return ShapExplanation(base, phi, x, float(model.predict(x)[0]))


# ---------------------------------------------------------------- TreeSHAP kernel
# Path elements live in flat arrays; each recursion level works on its own
# slice starting at ``offset`` (the parent's slice is copied in first).

@njit(nogil=True, cache=True)
def _extend(pf, pz, po, pw, off, depth, zero, one, fidx):
    pf[off + depth] = fidx
    pz[off + depth] = zero
    po[off + depth] = one
    pw[off + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[off + i + 1] += one * pw[off + i] * (i + 1) / (depth + 1)
        pw[off + i] = zero * pw[off + i] * (depth - i) / (depth + 1)


@njit(nogil=True, cache=True)
def _unwind(pf, pz, po, pw, off, depth, idx):
    one = po[off + idx]
    zero = pz[off + idx]
    next_one = pw[off + depth]
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = pw[off + i]
            pw[off + i] = next_one * (depth + 1) / ((i + 1) * one)
            next_one = tmp - pw[off + i] * zero * (depth - i) / (depth + 1)
        else:
            pw[off + i] = pw[off + i] * (depth + 1) / (zero * (depth - i))
    for i in range(idx, depth):
        pf[off + i] = pf[off + i + 1]
        pz[off + i] = pz[off + i + 1]
        po[off + i] = po[off + i + 1]


@njit(nogil=True, cache=True)
def _unwound_sum(pz, po, pw, off, depth, idx):
    one = po[off + idx]
    zero = pz[off + idx]
    next_one = pw[off + depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = next_one * (depth + 1) / ((i + 1) * one)
            total += tmp
            next_one = pw[off + i] - tmp * zero * ((depth - i) / (depth + 1))
        else:
            total += (pw[off + i] / zero) / ((depth - i) / (depth + 1))
    return total


# not cached: numba's on-disk cache cannot relink self-recursive functions
@njit(nogil=True)
def _recurse(x, feature, threshold, left, right, value, coverage, phi,
             node, depth, pf, pz, po, pw, parent_off, zero, one, fidx):
    off = parent_off + depth
    if depth > 0:
        for i in range(depth):
            pf[off + i] = pf[parent_off + i]
            pz[off + i] = pz[parent_off + i]
            po[off + i] = po[parent_off + i]
            pw[off + i] = pw[parent_off + i]
    _extend(pf, pz, po, pw, off, depth, zero, one, fidx)

    if left[node] == -1:
        for i in range(1, depth + 1):
            w = _unwound_sum(pz, po, pw, off, depth, i)
            phi[pf[off + i]] += w * (po[off + i] - pz[off + i]) * value[node]
        return

    split = feature[node]
    if x[split] <= threshold[node]:
        hot = left[node]
        cold = right[node]
    else:
        hot = right[node]
        cold = left[node]
    cov = coverage[node]
    hot_zero = coverage[hot] / cov
    cold_zero = coverage[cold] / cov
    in_zero = 1.0
    in_one = 1.0

    k = 0
    while k <= depth:
        if pf[off + k] == split:
            break
        k += 1
    if k != depth + 1:
        in_zero = pz[off + k]
        in_one = po[off + k]
        _unwind(pf, pz, po, pw, off, depth, k)
        depth -= 1

    _recurse(x, feature, threshold, left, right, value, coverage, phi,
             hot, depth + 1, pf, pz, po, pw, off, hot_zero * in_zero, in_one, split)
    _recurse(x, feature, threshold, left, right, value, coverage, phi,
             cold, depth + 1, pf, pz, po, pw, off, cold_zero * in_zero, 0.0, split)


@njit(nogil=True, cache=True)
def _tree_depth(left, right):
    n = left.size
    depth = np.zeros(n, dtype=np.int64)
    best = 0
    for i in range(n):
        if left[i] != -1:
            depth[left[i]] = depth[i] + 1
            depth[right[i]] = depth[i] + 1
            if depth[i] + 1 > best:
                best = depth[i] + 1
    return best


@njit(nogil=True)
def _tree_shap_rows(xs, n_features, feature, threshold, left, right, value, coverage):
    """Per-row TreeSHAP values of one tree, shape (n_rows, n_features)."""
    d = _tree_depth(left, right)
    size = (d + 2) * (d + 3) // 2
    pf = np.empty(size, dtype=np.int64)
    pz = np.empty(size)
    po = np.empty(size)
    pw = np.empty(size)
    out = np.zeros((xs.shape[0], n_features))
    for r in range(xs.shape[0]):
        _recurse(xs[r], feature, threshold, left, right, value, coverage, out[r],
                 0, 0, pf, pz, po, pw, 0, 1.0, 1.0, -1)
    return out


def tree_expectation(tree) -> float:
    """Coverage-weighted mean of the leaf values (the empty-coalition value)."""
    if tree.coverage is None:
        raise MissingCoverage("tree has no coverage counts; cannot compute path-dependent expectations")
    ev = np.array(tree.value, dtype=float)
    for i in range(tree.n_nodes - 1, -1, -1):
        if tree.left[i] != -1:
            lc, rc = tree.left[i], tree.right[i]
            ev[i] = (tree.coverage[lc] * ev[lc] + tree.coverage[rc] * ev[rc]) / tree.coverage[i]
    return float(ev[0])


def tree_shap_values(tree, xs, n_features: int) -> np.ndarray:
    if tree.coverage is None or np.isnan(tree.coverage).any():
        raise MissingCoverage("tree has no coverage counts; cannot run path-dependent TreeSHAP")
    xs = np.ascontiguousarray(np.atleast_2d(xs), dtype=np.float64)
    return _tree_shap_rows(xs, n_features, tree.feature, tree.threshold, tree.left, tree.right,
                           tree.value, tree.coverage)


def _ensemble_weights(model):
    """(offset, per-tree weight) so that f = offset + sum_t weight * tree_t."""
    if isinstance(model, ForestModel):
        return 0.0, 1.0 / len(model.trees)
    if isinstance(model, GbmModel):
        return model.init, model.learning_rate
    raise InvalidValue(f"shap_tree needs a tree ensemble, got {type(model).__name__}")


def shap_tree_matrix(model, xs, threads: Optional[int] = None):
    """TreeSHAP for many rows at once: (base_value, attributions (n, p), predictions)."""
    xs = np.ascontiguousarray(np.atleast_2d(np.asarray(xs, dtype=float)))
    if xs.shape[1] != model.n_features:
        raise DimensionMismatch(f"model has {model.n_features} features, got {xs.shape[1]}")
    offset, weight = _ensemble_weights(model)
    expectations = [tree_expectation(t) for t in model.trees]
    per_tree = map_ordered(lambda t: tree_shap_values(t, xs, model.n_features), model.trees, threads)

    # fixed summation order: tree index, then feature index
    phi = np.zeros((xs.shape[0], model.n_features))
    for contrib in per_tree:
        phi += contrib
    if isinstance(model, ForestModel):
        phi /= len(model.trees)
        base = math.fsum(expectations) / len(model.trees) if expectations else 0.0
    else:
        phi *= weight
        base = offset + weight * sum(expectations)
    return float(base), phi, model.predict(xs)


def shap_tree(model, x) -> ShapExplanation:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise DimensionMismatch(f"model has {model.n_features} features, got shape {x.shape}")
    base, phi, pred = shap_tree_matrix(model, x[None, :], threads=1)
    return ShapExplanation(base, phi[0], x, float(pred[0]))


def explain_rows(model, xs, threads: Optional[int] = None) -> list:
    """One ``ShapExplanation`` per row of ``xs``, any model type."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if isinstance(model, LinearModel):
        return [shap_linear(model, row) for row in xs]
    base, phi, pred = shap_tree_matrix(model, xs, threads)
    return [ShapExplanation(base, phi[i], xs[i].copy(), float(pred[i])) for i in range(xs.shape[0])]


# ---------------------------------------------------------------- brute-force oracle

def _tree_value(tree, x, subset, node=0) -> float:
    if tree.left[node] == -1:
        return float(tree.value[node])
    f = tree.feature[node]
    lc, rc = int(tree.left[node]), int(tree.right[node])
    if f in subset:
        child = lc if x[f] <= tree.threshold[node] else rc
        return _tree_value(tree, x, subset, child)
    if tree.coverage is None:
        raise MissingCoverage("tree has no coverage counts")
    return (tree.coverage[lc] * _tree_value(tree, x, subset, lc)
            + tree.coverage[rc] * _tree_value(tree, x, subset, rc)) / tree.coverage[node]


def coalition_value(model, x, subset) -> float:
    """Value of a feature coalition: path-dependent expectation for trees,
    mean substitution for the linear model."""
    subset = frozenset(subset)
    if isinstance(model, LinearModel):
        z = np.where([i in subset for i in range(model.n_features)], x, model.training_feature_means)
        return float(model.intercept + np.dot(model.coefficients, z))
    offset, weight = _ensemble_weights(model)
    return offset + weight * sum(_tree_value(t, x, subset) for t in model.trees)


def shap_brute_force(model, x) -> ShapExplanation:
    """Exact Shapley values by enumerating all 2^p coalitions."""
    x = np.asarray(x, dtype=float)
    p = model.n_features
    if x.shape != (p,):
        raise DimensionMismatch(f"model has {p} features, got shape {x.shape}")
    if p > MAX_BRUTE_FORCE_FEATURES:
        raise TooManyFeatures(f"brute-force Shapley enumeration limited to {MAX_BRUTE_FORCE_FEATURES} features, got {p}")
    cache = {}

    def v(s):
        if s not in cache:
            cache[s] = coalition_value(model, x, s)
        return cache[s]

    weights = [math.factorial(k) * math.factorial(p - k - 1) / math.factorial(p) for k in range(p)]
    phi = np.zeros(p)
    for i in range(p):
        others = [j for j in range(p) if j != i]
        total = 0.0
        for k in range(p):
            for s in combinations(others, k):
                s = frozenset(s)
                total += weights[k] * (v(s | {i}) - v(s))
        phi[i] = total
    return ShapExplanation(v(frozenset()), phi, x, v(frozenset(range(p))))


# ---------------------------------------------------------------- rankings and exports

def mean_abs_shap(explanations: Sequence[ShapExplanation], feature_names: Sequence[str]) -> FeatureRanking:
    if not explanations:
        raise EmptyInput("no explanations to rank")
    phi = np.array([e.attributions for e in explanations])
    if phi.ndim != 2 or phi.shape[1] != len(feature_names):
        raise DimensionMismatch("explanations and feature names disagree on the number of features")
    # sort rows so the mean does not depend on row order
    importance = np.mean(np.sort(np.abs(phi), axis=0), axis=0)
    entries = sorted(zip(feature_names, (float(v) for v in importance)), key=lambda e: (-e[1], e[0]))
    return FeatureRanking(tuple(entries))


def rank_correlation(a: FeatureRanking, b: FeatureRanking) -> float:
    """Spearman correlation between two rankings over the same features."""
    names = sorted(a.features)
    if sorted(b.features) != names:
        raise DimensionMismatch("rankings cover different features")
    ra = {n: i for i, n in enumerate(a.features)}
    rb = {n: i for i, n in enumerate(b.features)}
    if len(names) < 2:
        return 1.0
    return float(spearmanr([ra[n] for n in names], [rb[n] for n in names]).statistic)


def write_ranking(ranking: FeatureRanking, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature", "mean_abs_shap"])
        for i, (name, value) in enumerate(ranking.entries, start=1):
            w.writerow([i, name, repr(value)])


def export_summary_plot_data(explanations: Sequence[ShapExplanation], feature_names: Sequence[str],
                             row_fips: Sequence[str], path, top_k: int = 6) -> list:
    """Long-format ``feature,fips,feature_value,shap_value`` rows for the
    ``top_k`` features by mean |SHAP|. Returns the exported feature names."""
    if not 0 <= top_k <= len(feature_names):
        raise InvalidValue(f"top_k must lie in [0, {len(feature_names)}], got {top_k}")
    if len(row_fips) != len(explanations):
        raise DimensionMismatch("one fips code per explanation required")
    top = mean_abs_shap(explanations, feature_names).features[:top_k] if top_k else []
    col = {n: j for j, n in enumerate(feature_names)}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "fips", "feature_value", "shap_value"])
        for name in top:
            j = col[name]
            for f, e in zip(row_fips, explanations):
                w.writerow([name, f, repr(float(e.x[j])), repr(float(e.attributions[j]))])
    return top
