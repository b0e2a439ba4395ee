"""Base learners: weighted logistic regression and four tree families.

Everything is numpy on float64. Trees share one growth engine driven by a
split criterion: gini for classification forests, weighted least squares on
residuals for gradient boosting, and second-order gain with an L2 leaf
penalty for the regularized boosting family. Feature columns are sorted once
per dataset and the sorted index lists are partitioned stably at each split,
so no per-node sorting happens.

Determinism: every stochastic choice (bootstrap, feature subsets, random
thresholds) draws from a generator seeded through the model config, and
trees grow sequentially, so identical inputs give bit-identical models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lineuplab.errors import DataError

SPLIT_EPS = 1e-12


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def class_sample_weights(y: np.ndarray, failure_weight: float) -> np.ndarray:
    """Per-sample loss weights: failures (label 1) carry the class weight."""
    return np.where(y == 1, failure_weight, 1.0)


# ---------------------------------------------------------------------------
# Logistic regression: batch gradient descent with Armijo backtracking.


@dataclass(frozen=True)
class LogisticModel:
    coef: np.ndarray
    intercept: float

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(X @ self.coef + self.intercept)


def _logistic_objective(z, y, w, coef, inv_c):
    # log(1 + e^z) - y*z is the negative log-likelihood for y in {0, 1}.
    loss = np.logaddexp(0.0, z) - y * z
    return float(np.dot(w, loss) + 0.5 * inv_c * np.dot(coef, coef))


def fit_logistic(X: np.ndarray, y: np.ndarray, w: np.ndarray, C: float = 1.0,
                 max_iter: int = 2000, tol: float = 1e-6) -> LogisticModel:
    """Minimize sum(w_i * logloss_i) + ||coef||^2 / (2C); intercept unpenalized."""
    n, d = X.shape
    if len(np.unique(y)) < 2:
        raise DataError("logistic training needs both classes")
    inv_c = 1.0 / C
    coef = np.zeros(d)
    intercept = 0.0
    step = 1.0
    z = np.zeros(n)
    obj = _logistic_objective(z, y, w, coef, inv_c)
    for _ in range(max_iter):
        err = w * (sigmoid(z) - y)
        grad_coef = X.T @ err + inv_c * coef
        grad_int = float(err.sum())
        grad_sq = float(np.dot(grad_coef, grad_coef)) + grad_int * grad_int
        if np.sqrt(grad_sq) < tol:
            break
        step = min(step * 2.0, 1e8)
        while True:
            new_coef = coef - step * grad_coef
            new_int = intercept - step * grad_int
            new_z = X @ new_coef + new_int
            new_obj = _logistic_objective(new_z, y, w, new_coef, inv_c)
            if new_obj <= obj - 1e-4 * step * grad_sq or step < 1e-12:
                break
            step *= 0.5
        if step < 1e-12:
            break
        coef, intercept, z, obj = new_coef, new_int, new_z, new_obj
    return LogisticModel(coef=coef, intercept=intercept)


# ---------------------------------------------------------------------------
# Tree engine


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray    # int32, -1 at leaves
    threshold: np.ndarray  # float64; descend left when x <= threshold
    left: np.ndarray       # int32 child ids
    right: np.ndarray
    value: np.ndarray      # float64 leaf payload

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return self.value[node]


@dataclass(frozen=True)
class TreeParams:
    max_depth: int
    min_split: int
    min_leaf: int
    mtry: int | None = None        # None scans every feature
    random_thresholds: bool = False


class _Growth:
    """Mutable node arrays shared by one tree build."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def freeze(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value),
        )


def _scan_gini(xs, ys, ws, lo, hi):
    """Best boundary for a weighted gini split; boundaries lo..hi-1 inclusive
    split after that many left samples. Returns (improvement, left_count)."""
    cw = np.cumsum(ws)
    cwy = np.cumsum(ws * ys)
    total_w = cw[-1]
    total_wy = cwy[-1]
    lw = cw[lo - 1 : hi - 1]
    lwy = cwy[lo - 1 : hi - 1]
    rw = total_w - lw
    rwy = total_wy - lwy
    child = 2.0 * (lwy * (lw - lwy) / lw + rwy * (rw - rwy) / rw)
    parent = 2.0 * total_wy * (total_w - total_wy) / total_w
    improvement = parent - child
    improvement[xs[lo - 1 : hi - 1] >= xs[lo:hi]] = -np.inf
    best = int(np.argmax(improvement))
    return float(improvement[best]), lo + best


def _scan_lsq(xs, rs, ws, lo, hi):
    """Weighted least-squares split on residuals: maximize the gain in
    sum-of-squares explained. Returns (gain, left_count)."""
    cw = np.cumsum(ws)
    cs = np.cumsum(ws * rs)
    total_w = cw[-1]
    total_s = cs[-1]
    lw = cw[lo - 1 : hi - 1]
    ls = cs[lo - 1 : hi - 1]
    rw = total_w - lw
    rs_ = total_s - ls
    gain = ls * ls / lw + rs_ * rs_ / rw - total_s * total_s / total_w
    gain[xs[lo - 1 : hi - 1] >= xs[lo:hi]] = -np.inf
    best = int(np.argmax(gain))
    return float(gain[best]), lo + best


def _scan_gain(xs, gs, hs, lo, hi, lam):
    """Second-order gain with L2 leaf penalty lambda."""
    cg = np.cumsum(gs)
    ch = np.cumsum(hs)
    total_g = cg[-1]
    total_h = ch[-1]
    lg = cg[lo - 1 : hi - 1]
    lh = ch[lo - 1 : hi - 1]
    rg = total_g - lg
    rh = total_h - lh
    gain = 0.5 * (
        lg * lg / (lh + lam) + rg * rg / (rh + lam) - total_g * total_g / (total_h + lam)
    )
    gain[xs[lo - 1 : hi - 1] >= xs[lo:hi]] = -np.inf
    best = int(np.argmax(gain))
    return float(gain[best]), lo + best


class _Criterion:
    """One of: ('gini', y), ('lsq', residual, hess), ('gain', g, h, lam)."""

    def __init__(self, kind: str, a: np.ndarray, b: np.ndarray | None = None,
                 lam: float = 1.0):
        self.kind = kind
        self.a = a
        self.b = b
        self.lam = lam

    def scan(self, xs, ids, w, lo, hi):
        if self.kind == "gini":
            return _scan_gini(xs, self.a[ids], w[ids], lo, hi)
        if self.kind == "lsq":
            return _scan_lsq(xs, self.a[ids], w[ids], lo, hi)
        return _scan_gain(xs, self.a[ids], self.b[ids], lo, hi, self.lam)

    def at_position(self, xs, ids, w, pos):
        """Score a single externally chosen boundary (random-threshold path)."""
        score, _ = self.scan(xs, ids, w, pos, pos + 1)
        return score

    def leaf_value(self, ids, w) -> float:
        if self.kind == "gini":
            ws = w[ids]
            return float(np.dot(ws, self.a[ids]) / ws.sum())
        if self.kind == "lsq":
            ws = w[ids]
            den = float(np.dot(ws, self.b[ids]))
            if den < 1e-12:
                return 0.0
            return float(np.dot(ws, self.a[ids]) / den)
        den = float(self.b[ids].sum()) + self.lam
        return float(-self.a[ids].sum() / den)


def grow_tree(columns, sorted_ids, weights, criterion: _Criterion,
              params: TreeParams, rng: np.random.Generator | None) -> Tree:
    """Build one tree.

    columns: list of d contiguous float64 feature columns (full dataset).
    sorted_ids: per-feature int32 row ids of THIS tree's samples, ascending
    by that feature. All lists share one row multiset.
    """
    d = len(columns)
    n_total = columns[0].shape[0]
    growth = _Growth()

    def build(node: int, ids_by_feature, depth: int):
        ids0 = ids_by_feature[0]
        n = ids0.size
        growth.value[node] = criterion.leaf_value(ids0, weights)
        if depth >= params.max_depth or n < params.min_split or n < 2 * params.min_leaf:
            return
        if params.mtry is not None and params.mtry < d:
            feats = rng.choice(d, size=params.mtry, replace=False)
        else:
            feats = range(d)
        best_gain = SPLIT_EPS
        best_feat = -1
        best_pos = 0
        best_thr = 0.0
        lo, hi = params.min_leaf, n - params.min_leaf + 1
        for f in feats:
            ids = ids_by_feature[f]
            xs = columns[f][ids]
            if params.random_thresholds:
                low, high = xs[0], xs[-1]
                if low == high:
                    continue
                thr = rng.uniform(low, high)
                pos = int(np.searchsorted(xs, thr, side="right"))
                if pos < params.min_leaf or n - pos < params.min_leaf:
                    continue
                gain = criterion.at_position(xs, ids, weights, pos)
            else:
                if xs[0] == xs[-1]:
                    continue
                gain, pos = criterion.scan(xs, ids, weights, lo, hi)
                thr = float(xs[pos - 1])
            if gain > best_gain:
                best_gain, best_feat, best_pos, best_thr = gain, f, pos, thr
        if best_feat < 0:
            return
        # The sorted prefix is exactly the x <= threshold set, for drawn
        # thresholds as well as boundary values.
        left_ids = ids_by_feature[best_feat][:best_pos]
        go_left = np.zeros(n_total, dtype=bool)
        go_left[left_ids] = True
        left_lists = []
        right_lists = []
        for f in range(d):
            ids = ids_by_feature[f]
            mask = go_left[ids]
            left_lists.append(ids[mask])
            right_lists.append(ids[~mask])
        lid = growth.add()
        rid = growth.add()
        growth.feature[node] = int(best_feat)
        growth.threshold[node] = best_thr
        growth.left[node] = lid
        growth.right[node] = rid
        build(lid, left_lists, depth + 1)
        build(rid, right_lists, depth + 1)

    root = growth.add()
    build(root, sorted_ids, 0)
    return growth.freeze()


def presort_columns(X: np.ndarray):
    """Contiguous columns plus per-feature stable ascending row ids."""
    columns = [np.ascontiguousarray(X[:, f]) for f in range(X.shape[1])]
    sorted_ids = [np.argsort(col, kind="stable").astype(np.int32) for col in columns]
    return columns, sorted_ids


def _restrict_sorted(sorted_ids, present: np.ndarray):
    return [ids[present[ids]] for ids in sorted_ids]


# ---------------------------------------------------------------------------
# Forests


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)


def fit_forest(X: np.ndarray, y: np.ndarray, w: np.ndarray, n_estimators: int,
               params: TreeParams, rng: np.random.Generator,
               random_thresholds: bool = False) -> ForestModel:
    """Bagged gini trees. The bootstrap draws rows with probability
    proportional to the sample weights, which is how class weighting enters;
    inside each tree the bootstrap multiplicities act as weights."""
    n, d = X.shape
    if len(np.unique(y)) < 2:
        raise DataError("forest training needs both classes")
    columns, base_sorted = presort_columns(X)
    prob = w / w.sum()
    mtry = params.mtry if params.mtry is not None else max(1, int(np.sqrt(d)))
    tree_params = TreeParams(
        max_depth=params.max_depth, min_split=params.min_split,
        min_leaf=params.min_leaf, mtry=mtry, random_thresholds=random_thresholds,
    )
    y_float = y.astype(np.float64)
    trees = []
    for _ in range(n_estimators):
        counts = np.bincount(rng.choice(n, size=n, replace=True, p=prob),
                             minlength=n).astype(np.float64)
        present = counts > 0
        sorted_ids = _restrict_sorted(base_sorted, present)
        criterion = _Criterion("gini", y_float)
        trees.append(grow_tree(columns, sorted_ids, counts, criterion, tree_params, rng))
    return ForestModel(trees=tuple(trees))


# ---------------------------------------------------------------------------
# Boosting


@dataclass(frozen=True)
class BoostedModel:
    f0: float
    learning_rate: float
    trees: tuple[Tree, ...]

    def decision(self, X: np.ndarray) -> np.ndarray:
        z = np.full(X.shape[0], self.f0)
        for tree in self.trees:
            z += self.learning_rate * tree.predict(X)
        return z

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(X))


def _prior_log_odds(y: np.ndarray, w: np.ndarray) -> float:
    wy = float(np.dot(w, y))
    wn = float(w.sum() - wy)
    if wy <= 0.0 or wn <= 0.0:
        raise DataError("boosting training needs both classes")
    return float(np.log(wy / wn))


def fit_gradient_boosting(X: np.ndarray, y: np.ndarray, w: np.ndarray,
                          n_estimators: int, learning_rate: float,
                          params: TreeParams) -> BoostedModel:
    """Log-loss boosting: least-squares trees on residuals, Newton leaves."""
    columns, sorted_ids = presort_columns(X)
    y_float = y.astype(np.float64)
    f0 = _prior_log_odds(y_float, w)
    z = np.full(X.shape[0], f0)
    trees: list[Tree] = []
    for _ in range(n_estimators):
        p = sigmoid(z)
        residual = y_float - p
        criterion = _Criterion("lsq", residual, p * (1.0 - p))
        tree = grow_tree(columns, sorted_ids, w, criterion, params, None)
        trees.append(tree)
        if tree.feature[0] < 0 and tree.value[0] == 0.0:
            break  # nothing left to move; later rounds would repeat this
        z += learning_rate * tree.predict(X)
    return BoostedModel(f0=f0, learning_rate=learning_rate, trees=tuple(trees))


def fit_regularized_boosting(X: np.ndarray, y: np.ndarray, w: np.ndarray,
                             n_estimators: int, learning_rate: float,
                             params: TreeParams, lam: float = 1.0) -> BoostedModel:
    """Second-order boosting: gain splits and -G/(H + lambda) leaves."""
    columns, sorted_ids = presort_columns(X)
    y_float = y.astype(np.float64)
    f0 = _prior_log_odds(y_float, w)
    z = np.full(X.shape[0], f0)
    trees: list[Tree] = []
    for _ in range(n_estimators):
        p = sigmoid(z)
        g = w * (p - y_float)
        h = w * p * (1.0 - p)
        criterion = _Criterion("gain", g, h, lam=lam)
        tree = grow_tree(columns, sorted_ids, w, criterion, params, None)
        trees.append(tree)
        if tree.feature[0] < 0 and tree.value[0] == 0.0:
            break
        z += learning_rate * tree.predict(X)
    return BoostedModel(f0=f0, learning_rate=learning_rate, trees=tuple(trees))
