"""CART regression trees stored as flat node arrays.

Node ``0`` is the root. For an internal node ``left``/``right`` hold child
ids and rows with ``x[feature] <= threshold`` go left; leaves have
``left == right == -1`` and ``feature == -1``. ``value`` is the mean target
of the training rows reaching the node (the leaf prediction for leaves) and
``coverage`` is their count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from ..errors import DimensionMismatch, InvalidValue

LEAF = -1


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    coverage: Optional[np.ndarray]

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] == LEAF

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.left[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def used_features(self) -> set:
        return {int(f) for f in self.feature if f != LEAF}

    def predict(self, x) -> np.ndarray:
        x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float)))
        return _predict(x, self.feature, self.threshold, self.left, self.right, self.value)


def resolve_max_features(max_features, p: int) -> int:
    """Number of candidate features per split for a spec like 'sqrt' or 0.5."""
    if max_features in (None, "all"):
        return p
    if max_features == "sqrt":
        return max(1, int(math.floor(math.sqrt(p))))
    if max_features == "third":
        return max(1, p // 3)
    if isinstance(max_features, (int, float)) and not isinstance(max_features, bool):
        if 0 < max_features <= 1:
            return max(1, int(math.floor(max_features * p)))
    raise InvalidValue(f"max_features must be 'all', 'sqrt', 'third' or a fraction in (0, 1], got {max_features!r}")


@njit(nogil=True, cache=True)
def _grow(x, y, rows, max_depth, min_leaf, mtry, rng):
    m0 = rows.size
    p = x.shape[1]
    cap = 2 * m0 + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    coverage = np.zeros(cap)

    work = rows.copy()
    buf = np.empty(m0, dtype=np.int64)
    perm = np.arange(p)
    vals = np.empty(m0)
    ys = np.empty(m0)

    # stack of (node, start, end, depth)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m0
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        m = end - start

        total = 0.0
        for k in range(start, end):
            total += y[work[k]]
        mean = total / m
        sse = 0.0
        for k in range(start, end):
            d = y[work[k]] - mean
            sse += d * d
        value[node] = mean
        coverage[node] = m

        if (max_depth >= 0 and depth >= max_depth) or m < 2 * min_leaf or not sse > 0.0:
            continue

        # candidate features: partial Fisher-Yates, then ascending order
        for j in range(p):
            perm[j] = j
        if mtry < p:
            for t in range(mtry):
                r = t + int(rng.random() * (p - t))
                if r >= p:
                    r = p - 1
                tmp = perm[t]
                perm[t] = perm[r]
                perm[r] = tmp
            cand = np.sort(perm[:mtry])
        else:
            cand = perm.copy()

        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        for ci in range(cand.size):
            f = cand[ci]
            for k in range(m):
                vals[k] = x[work[start + k], f]
            order = np.argsort(vals[:m], kind="mergesort")
            for k in range(m):
                ys[k] = y[work[start + order[k]]] - mean
            sv = vals[:m][order]
            s_left = 0.0
            s_all = 0.0
            for k in range(m):
                s_all += ys[k]
            for k in range(m - 1):
                s_left += ys[k]
                n_left = k + 1
                if sv[k] == sv[k + 1]:
                    continue
                if n_left < min_leaf or m - n_left < min_leaf:
                    continue
                s_right = s_all - s_left
                gain = s_left * s_left / n_left + s_right * s_right / (m - n_left) - s_all * s_all / m
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    thr = 0.5 * (sv[k] + sv[k + 1])
                    if thr >= sv[k + 1]:
                        thr = sv[k]
                    best_thr = thr

        if best_f < 0 or not best_gain > 1e-12 * sse:
            continue

        # stable partition of the node's rows
        n_left = 0
        for k in range(start, end):
            if x[work[k], best_f] <= best_thr:
                buf[n_left] = work[k]
                n_left += 1
        n_right = 0
        for k in range(start, end):
            if not x[work[k], best_f] <= best_thr:
                buf[n_left + n_right] = work[k]
                n_right += 1
        for k in range(m):
            work[start + k] = buf[k]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc

        # push right first so the left subtree is grown first
        st_node[top] = rc
        st_start[top] = start + n_left
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lc
        st_start[top] = start
        st_end[top] = start + n_left
        st_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        coverage[:n_nodes].copy(),
    )


@njit(nogil=True, cache=True)
def _predict(x, feature, threshold, left, right, value):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        node = 0
        while left[node] != -1:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def grow_tree(x, y, rows=None, *, max_depth=None, min_samples_leaf=1, max_features="all", rng=None) -> Tree:
    """Grow one variance-reduction tree on ``x[rows], y[rows]``.

    ``rows`` may repeat indices (bootstrap samples); ``rng`` is only drawn
    from when ``max_features`` selects fewer than all features.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise DimensionMismatch(f"x {x.shape} and y {y.shape} do not line up")
    if min_samples_leaf < 1:
        raise InvalidValue("min_samples_leaf must be >= 1")
    rows = np.arange(x.shape[0], dtype=np.int64) if rows is None else np.ascontiguousarray(rows, dtype=np.int64)
    mtry = resolve_max_features(max_features, x.shape[1])
    if rng is None:
        rng = np.random.Generator(np.random.Philox(0))
    arrays = _grow(x, y, rows, -1 if max_depth is None else int(max_depth), int(min_samples_leaf), mtry, rng)
    return Tree(*arrays)
